//! Evaluation structures over extended integer weights.

use crate::error::EvalError;
use crate::graph::ExtWeight;

/// Two monoids on one carrier: `merge` collects alternatives, `combine`
/// joins independent parts.
pub trait EvaluationStructure {
    type Value: Clone + PartialEq + std::fmt::Debug;

    fn merge_identity(&self) -> Self::Value;
    fn combine_identity(&self) -> Self::Value;
    fn merge(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, EvalError>;
    fn combine(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, EvalError>;
    /// Value of an explicit multiset of solution values.
    fn lift(&self, values: &[ExtWeight]) -> Self::Value;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Top2Value {
    pub best: ExtWeight,
    pub second: ExtWeight,
}

impl Top2Value {
    pub const EMPTY: Top2Value = Top2Value {
        best: ExtWeight::Infinite,
        second: ExtWeight::Infinite,
    };
    pub const UNIT: Top2Value = Top2Value {
        best: ExtWeight::ZERO,
        second: ExtWeight::Infinite,
    };

    /// Sorts the pair.
    pub fn new(a: ExtWeight, b: ExtWeight) -> Self {
        Top2Value {
            best: a.min(b),
            second: a.max(b),
        }
    }
}

pub fn combine2(a: Top2Value, b: Top2Value) -> Result<Top2Value, EvalError> {
    let best = a.best.checked_add(b.best)?;
    let second = a.best.checked_add(b.second)?.min(a.second.checked_add(b.best)?);
    Ok(Top2Value { best, second })
}

pub fn merge2(a: Top2Value, b: Top2Value) -> Top2Value {
    let mut all = [a.best, a.second, b.best, b.second];
    all.sort();
    Top2Value {
        best: all[0],
        second: all[1],
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Top2;

impl EvaluationStructure for Top2 {
    type Value = Top2Value;

    fn merge_identity(&self) -> Top2Value {
        Top2Value::EMPTY
    }

    fn combine_identity(&self) -> Top2Value {
        Top2Value::UNIT
    }

    fn merge(&self, a: &Top2Value, b: &Top2Value) -> Result<Top2Value, EvalError> {
        Ok(merge2(*a, *b))
    }

    fn combine(&self, a: &Top2Value, b: &Top2Value) -> Result<Top2Value, EvalError> {
        combine2(*a, *b)
    }

    fn lift(&self, values: &[ExtWeight]) -> Top2Value {
        let mut v = values.to_vec();
        v.sort();
        Top2Value {
            best: v.first().copied().unwrap_or(ExtWeight::Infinite),
            second: v.get(1).copied().unwrap_or(ExtWeight::Infinite),
        }
    }
}

/// The `k` smallest values of a multiset, padded with `∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TopKValue {
    values: Vec<ExtWeight>,
}

impl TopKValue {
    pub fn empty(k: usize) -> Self {
        TopKValue {
            values: vec![ExtWeight::Infinite; k],
        }
    }

    pub fn unit(k: usize) -> Self {
        let mut v = Self::empty(k);
        v.values[0] = ExtWeight::ZERO;
        v
    }

    /// Keeps the `k` smallest of `values`.
    pub fn from_values(k: usize, mut values: Vec<ExtWeight>) -> Self {
        values.sort();
        values.resize(k, ExtWeight::Infinite);
        TopKValue { values }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[ExtWeight] {
        &self.values
    }

    /// The finite prefix.
    pub fn finite(&self) -> Vec<i64> {
        self.values.iter().map_while(|v| v.finite()).collect()
    }
}

pub fn merge_k(a: &TopKValue, b: &TopKValue) -> Result<TopKValue, EvalError> {
    if a.k() != b.k() {
        return Err(EvalError::KMismatch(a.k(), b.k()));
    }
    let mut out = Vec::with_capacity(a.k());
    let (mut i, mut j) = (0, 0);
    while out.len() < a.k() {
        if a.values[i] <= b.values[j] {
            out.push(a.values[i]);
            i += 1;
        } else {
            out.push(b.values[j]);
            j += 1;
        }
    }
    Ok(TopKValue { values: out })
}

pub fn combine_k(a: &TopKValue, b: &TopKValue) -> Result<TopKValue, EvalError> {
    if a.k() != b.k() {
        return Err(EvalError::KMismatch(a.k(), b.k()));
    }
    let mut sums = Vec::with_capacity(a.k() * a.k());
    for x in &a.values {
        if !x.is_finite() {
            break;
        }
        for y in &b.values {
            if !y.is_finite() {
                break;
            }
            sums.push(x.checked_add(*y)?);
        }
    }
    Ok(TopKValue::from_values(a.k(), sums))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TopK {
    pub k: usize,
}

impl EvaluationStructure for TopK {
    type Value = TopKValue;

    fn merge_identity(&self) -> TopKValue {
        TopKValue::empty(self.k)
    }

    fn combine_identity(&self) -> TopKValue {
        TopKValue::unit(self.k)
    }

    fn merge(&self, a: &TopKValue, b: &TopKValue) -> Result<TopKValue, EvalError> {
        merge_k(a, b)
    }

    fn combine(&self, a: &TopKValue, b: &TopKValue) -> Result<TopKValue, EvalError> {
        combine_k(a, b)
    }

    fn lift(&self, values: &[ExtWeight]) -> TopKValue {
        TopKValue::from_values(self.k, values.to_vec())
    }
}
