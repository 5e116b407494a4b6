//! Graphs, features, costs and the `.gr` text format.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use crate::error::GraphError;

/// Whether a feature is a vertex or an edge. `Vertex < Edge`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Vertex,
    Edge,
}

/// A vertex or an edge of the input graph, 1-based in file order.
///
/// Ordered by kind first (vertices before edges), then by index. Every
/// canonical ordering in the crate uses this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    pub kind: FeatureKind,
    pub index: u32,
}

impl FeatureId {
    pub fn vertex(index: u32) -> Self {
        FeatureId {
            kind: FeatureKind::Vertex,
            index,
        }
    }

    pub fn edge(index: u32) -> Self {
        FeatureId {
            kind: FeatureKind::Edge,
            index,
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FeatureKind::Vertex => write!(f, "v{}", self.index),
            FeatureKind::Edge => write!(f, "e{}", self.index),
        }
    }
}

impl FromStr for FeatureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = match s.as_bytes().first() {
            Some(b'v') => (FeatureKind::Vertex, &s[1..]),
            Some(b'e') => (FeatureKind::Edge, &s[1..]),
            _ => return Err(format!("bad feature `{s}`")),
        };
        let index: u32 = rest.parse().map_err(|_| format!("bad feature `{s}`"))?;
        if index == 0 {
            return Err(format!("bad feature `{s}`"));
        }
        Ok(FeatureId { kind, index })
    }
}

/// An integer weight extended with `+∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtWeight {
    Finite(i64),
    Infinite,
}

/// Raised when a sum of weights leaves the `i64` range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("weight overflow")]
pub struct WeightOverflow;

impl ExtWeight {
    pub const INF: ExtWeight = ExtWeight::Infinite;
    pub const ZERO: ExtWeight = ExtWeight::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtWeight::Finite(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            ExtWeight::Finite(w) => Some(w),
            ExtWeight::Infinite => None,
        }
    }

    /// `∞` absorbs; finite sums are overflow-checked.
    pub fn checked_add(self, other: ExtWeight) -> Result<ExtWeight, WeightOverflow> {
        match (self, other) {
            (ExtWeight::Finite(a), ExtWeight::Finite(b)) => {
                a.checked_add(b).map(ExtWeight::Finite).ok_or(WeightOverflow)
            }
            _ => Ok(ExtWeight::Infinite),
        }
    }
}

impl From<i64> for ExtWeight {
    fn from(w: i64) -> Self {
        ExtWeight::Finite(w)
    }
}

impl Add for ExtWeight {
    type Output = ExtWeight;

    /// Panics on overflow; use [`ExtWeight::checked_add`] on untrusted sums.
    fn add(self, rhs: ExtWeight) -> ExtWeight {
        self.checked_add(rhs).expect("weight overflow")
    }
}

impl fmt::Display for ExtWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtWeight::Finite(w) => write!(f, "{w}"),
            ExtWeight::Infinite => f.write_str("inf"),
        }
    }
}

/// Input graph. Vertices are `1..=n`, edges `1..=m` in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedGraph {
    n: u32,
    directed: bool,
    edges: Vec<(u32, u32)>,
    edge_weights: Vec<i64>,
    vertex_weights: Vec<i64>,
}

impl WeightedGraph {
    /// Builds a graph; vertex weights default to 0.
    pub fn new(n: u32, directed: bool, edges: Vec<(u32, u32, i64)>) -> Result<WeightedGraph, GraphError> {
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut weights = Vec::with_capacity(edges.len());
        for (i, &(tail, head, w)) in edges.iter().enumerate() {
            for v in [tail, head] {
                if v == 0 || v > n {
                    return Err(GraphError::EndpointOutOfRange {
                        edge: i as u32 + 1,
                        vertex: v,
                        n,
                    });
                }
            }
            endpoints.push((tail, head));
            weights.push(w);
        }
        Ok(WeightedGraph {
            n,
            directed,
            edges: endpoints,
            edge_weights: weights,
            vertex_weights: vec![0; n as usize],
        })
    }

    pub fn with_vertex_weights(mut self, weights: Vec<i64>) -> Result<Self, GraphError> {
        if weights.len() != self.n as usize {
            return Err(GraphError::WeightCount {
                expected: self.n as usize,
                got: weights.len(),
            });
        }
        self.vertex_weights = weights;
        Ok(self)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.edges.len() as u32
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// `(tail, head)` of edge `e` (1-based).
    pub fn endpoints(&self, e: u32) -> (u32, u32) {
        self.edges[e as usize - 1]
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = (u32, u32, u32)> + '_ {
        self.edges.iter().enumerate().map(|(i, &(t, h))| (i as u32 + 1, t, h))
    }

    pub fn weight(&self, f: FeatureId) -> i64 {
        match f.kind {
            FeatureKind::Vertex => self.vertex_weights[f.index as usize - 1],
            FeatureKind::Edge => self.edge_weights[f.index as usize - 1],
        }
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        match f.kind {
            FeatureKind::Vertex => f.index >= 1 && f.index <= self.n,
            FeatureKind::Edge => f.index >= 1 && f.index <= self.m(),
        }
    }

    /// Undirected adjacency lists `(neighbor, edge)`; self-loops appear once.
    pub fn adjacency(&self) -> Vec<Vec<(u32, u32)>> {
        let mut adj = vec![Vec::new(); self.n as usize + 1];
        for (e, t, h) in self.edges() {
            adj[t as usize].push((h, e));
            if t != h {
                adj[h as usize].push((t, e));
            }
        }
        adj
    }

    /// Serializes to the `.gr` format.
    pub fn to_gr_string(&self) -> String {
        let mut out = format!("p kbest {} {} {}\n", self.n, self.m(), u8::from(self.directed));
        for (i, &(t, h)) in self.edges.iter().enumerate() {
            out.push_str(&format!("e {} {} {}\n", t, h, self.edge_weights[i]));
        }
        out
    }
}

/// The same graph with orientations forgotten. Edge indices are kept.
pub fn undirected_shadow(g: &WeightedGraph) -> WeightedGraph {
    WeightedGraph {
        directed: false,
        ..g.clone()
    }
}

/// Parses the line-oriented `.gr` format.
///
/// ```text
/// c comment
/// p kbest <n> <m> <directed:0|1>
/// e <tail> <head> <weight>
/// ```
pub fn load_graph(text: &str) -> Result<WeightedGraph, GraphError> {
    let mut header: Option<(u32, u32, bool)> = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tok = raw.split_whitespace();
        let Some(first) = tok.next() else { continue };
        let parse_err = |msg: &str| GraphError::Parse {
            line,
            msg: msg.to_string(),
        };
        match first {
            "c" => continue,
            "p" => {
                if header.is_some() {
                    return Err(parse_err("duplicate header"));
                }
                let fields: Vec<&str> = tok.collect();
                if fields.len() != 4 || fields[0] != "kbest" {
                    return Err(parse_err("expected `p kbest <n> <m> <directed>`"));
                }
                let n: u32 = fields[1].parse().map_err(|_| parse_err("bad vertex count"))?;
                let m: u32 = fields[2].parse().map_err(|_| parse_err("bad edge count"))?;
                let directed = match fields[3] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(parse_err("directed flag must be 0 or 1")),
                };
                if n == 0 {
                    return Err(parse_err("graph needs at least one vertex"));
                }
                header = Some((n, m, directed));
            }
            "e" => {
                let Some((n, m, _)) = header else {
                    return Err(parse_err("edge before header"));
                };
                let fields: Vec<&str> = tok.collect();
                if fields.len() != 3 {
                    return Err(parse_err("expected `e <tail> <head> <weight>`"));
                }
                let tail: u32 = fields[0].parse().map_err(|_| parse_err("bad tail"))?;
                let head: u32 = fields[1].parse().map_err(|_| parse_err("bad head"))?;
                let w: i64 = fields[2].parse().map_err(|_| parse_err("bad weight"))?;
                for v in [tail, head] {
                    if v == 0 || v > n {
                        return Err(parse_err(&format!("endpoint {v} out of range 1..={n}")));
                    }
                }
                if edges.len() as u32 == m {
                    return Err(parse_err(&format!("more than {m} edge lines")));
                }
                edges.push((tail, head, w));
            }
            other => return Err(parse_err(&format!("unknown line type `{other}`"))),
        }
    }
    let Some((n, m, directed)) = header else {
        return Err(GraphError::Parse {
            line: text.lines().count().max(1),
            msg: "missing header".into(),
        });
    };
    if edges.len() as u32 != m {
        return Err(GraphError::Parse {
            line: text.lines().count().max(1),
            msg: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    WeightedGraph::new(n, directed, edges)
}

/// One feature set per free variable, each sorted in `FeatureId` order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Solution {
    sets: Vec<Vec<FeatureId>>,
}

impl Solution {
    pub fn empty(n_free: usize) -> Self {
        Solution {
            sets: vec![Vec::new(); n_free],
        }
    }

    /// Sorts and deduplicates every set.
    pub fn new(mut sets: Vec<Vec<FeatureId>>) -> Self {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        Solution { sets }
    }

    pub fn single(n_free: usize, var: usize, f: FeatureId) -> Self {
        let mut s = Solution::empty(n_free);
        s.sets[var].push(f);
        s
    }

    pub fn sets(&self) -> &[Vec<FeatureId>] {
        &self.sets
    }

    pub fn n_free(&self) -> usize {
        self.sets.len()
    }

    pub fn contains(&self, var: usize, f: FeatureId) -> bool {
        self.sets[var].binary_search(&f).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.iter().all(Vec::is_empty)
    }

    /// In-place union with a feature-disjoint solution.
    pub fn absorb(&mut self, other: &Solution) {
        for (a, b) in self.sets.iter_mut().zip(&other.sets) {
            if b.is_empty() {
                continue;
            }
            a.extend_from_slice(b);
            a.sort_unstable();
        }
    }

    /// Smallest `(var, feature)` present in exactly one of the two solutions.
    pub fn first_difference(&self, other: &Solution) -> Option<(usize, FeatureId)> {
        for (var, (a, b)) in self.sets.iter().zip(&other.sets).enumerate() {
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                match (a.get(i), b.get(j)) {
                    (Some(x), Some(y)) => match x.cmp(y) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        Ordering::Less => return Some((var, *x)),
                        Ordering::Greater => return Some((var, *y)),
                    },
                    (Some(x), None) => return Some((var, *x)),
                    (None, Some(y)) => return Some((var, *y)),
                    (None, None) => unreachable!(),
                }
            }
        }
        None
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, set) in self.sets.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str("{")?;
            for (j, x) in set.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str("}")?;
        }
        f.write_str(")")
    }
}

/// Per-variable cost functions `c_i` over features of the variable's kind.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostModel {
    var_types: Vec<FeatureKind>,
    costs: Vec<Vec<i64>>,
}

impl CostModel {
    /// Every variable takes its costs from the graph weights.
    pub fn from_graph(g: &WeightedGraph, var_types: &[FeatureKind]) -> Self {
        let costs = var_types
            .iter()
            .map(|kind| match kind {
                FeatureKind::Vertex => (1..=g.n()).map(|v| g.weight(FeatureId::vertex(v))).collect(),
                FeatureKind::Edge => (1..=g.m()).map(|e| g.weight(FeatureId::edge(e))).collect(),
            })
            .collect();
        CostModel {
            var_types: var_types.to_vec(),
            costs,
        }
    }

    /// Explicit per-variable cost tables, indexed by feature index − 1.
    pub fn new(var_types: Vec<FeatureKind>, costs: Vec<Vec<i64>>) -> Result<Self, GraphError> {
        if var_types.len() != costs.len() {
            return Err(GraphError::WeightCount {
                expected: var_types.len(),
                got: costs.len(),
            });
        }
        Ok(CostModel { var_types, costs })
    }

    pub fn n_free(&self) -> usize {
        self.var_types.len()
    }

    pub fn var_types(&self) -> &[FeatureKind] {
        &self.var_types
    }

    pub fn cost(&self, var: usize, f: FeatureId) -> Result<i64, GraphError> {
        if self.var_types.get(var) != Some(&f.kind) {
            return Err(GraphError::FeatureMismatch { var, feature: f });
        }
        self.costs[var]
            .get(f.index as usize - 1)
            .copied()
            .ok_or(GraphError::FeatureMismatch { var, feature: f })
    }

    /// Sum of absolute costs; any solution value is bounded by it.
    pub fn magnitude(&self) -> Option<i64> {
        self.costs
            .iter()
            .flatten()
            .try_fold(0i64, |acc, &w| acc.checked_add(w.checked_abs()?))
    }
}

/// Whether a constrained feature must be in or out of a variable's set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Forced,
    Excluded,
}

/// A feature constraint on one free variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub feature: FeatureId,
    pub var: usize,
    pub polarity: Polarity,
}

impl Constraint {
    pub fn holds(&self, s: &Solution) -> bool {
        s.contains(self.var, self.feature) == (self.polarity == Polarity::Forced)
    }
}

/// `c(Y) = Σ_i Σ_{y ∈ Y_i} c_i(y)`, exactly.
pub fn solution_value(s: &Solution, c: &CostModel) -> Result<ExtWeight, GraphError> {
    if s.n_free() != c.n_free() {
        return Err(GraphError::VariableCount {
            expected: c.n_free(),
            got: s.n_free(),
        });
    }
    let mut total = 0i64;
    for (var, set) in s.sets().iter().enumerate() {
        for &f in set {
            total = total.checked_add(c.cost(var, f)?).ok_or(GraphError::Overflow)?;
        }
    }
    Ok(ExtWeight::Finite(total))
}
