//! Evaluation automata: the per-problem child-state relation and leaf tables.
//!
//! An automaton is given as a forward function: for an operator and the
//! states of its two children it returns the parent state, if any. States
//! are opaque byte strings; their byte order fixes every tie-break.

mod matching;
mod simple_path;
mod spanning_tree;
mod vertex_cover;

use std::collections::BTreeMap;
use std::fmt;

pub use matching::PerfectMatching;
pub use simple_path::SimplePath;
pub use spanning_tree::SpanningTree;
pub use vertex_cover::VertexCover;

use crate::algebra::{Operator, ParseNode, ParseTree};
use crate::error::ProblemError;
use crate::graph::{FeatureKind, Solution, WeightedGraph};

pub type State = Vec<u8>;

pub trait EvalAutomaton: Send + Sync {
    fn name(&self) -> String;

    fn var_types(&self) -> Vec<FeatureKind>;

    fn n_free(&self) -> usize {
        self.var_types().len()
    }

    /// The state of order 0 whose solutions are the feasible sets.
    fn root_state(&self) -> State;

    /// Non-empty states of a leaf with their solutions over the leaf's
    /// features. Each solution may appear under several states.
    fn leaf_states(&self, leaf: &ParseNode) -> Result<Vec<(State, Vec<Solution>)>, ProblemError>;

    /// Parent state for an inner operator, `None` if the pair does not fit.
    fn apply(&self, op: &Operator, first: &[u8], second: &[u8]) -> Option<State>;

    /// Order of the hypergraph a state talks about.
    fn state_order(&self, q: &[u8]) -> usize;
}

/// All fitting pairs `(i, j)` of `q` among the given child states, sorted.
pub fn transitions(
    a: &dyn EvalAutomaton,
    op: &Operator,
    q: &[u8],
    first: &[State],
    second: &[State],
) -> Result<Vec<(usize, usize)>, ProblemError> {
    if op.is_leaf() || a.state_order(q) != op.order() {
        return Err(ProblemError::Arity {
            op: op.to_string(),
            state: q.to_vec(),
        });
    }
    let mut pairs = Vec::new();
    for (i, x) in first.iter().enumerate() {
        for (j, y) in second.iter().enumerate() {
            if a.apply(op, x, y).as_deref() == Some(q) {
                pairs.push((i, j));
            }
        }
    }
    Ok(pairs)
}

/// Solutions of leaf `u` in state `q`, canonically ordered.
pub fn leaf_solutions(a: &dyn EvalAutomaton, t: &ParseTree, u: usize, q: &[u8]) -> Result<Vec<Solution>, ProblemError> {
    let node = t.node(u);
    if !node.is_leaf() {
        return Err(ProblemError::NotALeaf(u));
    }
    let mut out: Vec<Solution> = a
        .leaf_states(node)?
        .into_iter()
        .filter(|(s, _)| s.as_slice() == q)
        .flat_map(|(_, sols)| sols)
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// Built-in problems and their parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Problem {
    SimplePath { source: u32, target: u32 },
    SpanningTree,
    PerfectMatching,
    VertexCover,
}

impl Problem {
    pub fn from_name(name: &str, source: Option<u32>, target: Option<u32>) -> Result<Problem, ProblemError> {
        match name {
            "simple-path" => match (source, target) {
                (Some(source), Some(target)) => Ok(Problem::SimplePath { source, target }),
                _ => Err(ProblemError::InvalidParams(
                    "simple-path needs a source and a target".into(),
                )),
            },
            "spanning-tree" => Ok(Problem::SpanningTree),
            "perfect-matching" => Ok(Problem::PerfectMatching),
            "vertex-cover" => Ok(Problem::VertexCover),
            other => Err(ProblemError::UnknownProblem(other.to_string())),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::SimplePath { source, target } => write!(f, "simple-path({source},{target})"),
            Problem::SpanningTree => write!(f, "spanning-tree"),
            Problem::PerfectMatching => write!(f, "perfect-matching"),
            Problem::VertexCover => write!(f, "vertex-cover"),
        }
    }
}

/// The automaton of a built-in problem on `g`.
pub fn builtin(p: &Problem, g: &WeightedGraph) -> Result<Box<dyn EvalAutomaton>, ProblemError> {
    Ok(match *p {
        Problem::SimplePath { source, target } => {
            for v in [source, target] {
                if v == 0 || v > g.n() {
                    return Err(ProblemError::InvalidParams(format!(
                        "vertex {v} out of range 1..={}",
                        g.n()
                    )));
                }
            }
            if source == target {
                return Err(ProblemError::InvalidParams("source and target coincide".into()));
            }
            Box::new(SimplePath::new(source, target, g.is_directed()))
        }
        Problem::SpanningTree => Box::new(SpanningTree),
        Problem::PerfectMatching => Box::new(PerfectMatching),
        Problem::VertexCover => Box::new(VertexCover),
    })
}

/// Runs two automata side by side; solutions concatenate their variables.
pub struct Product<A, B> {
    pub first: A,
    pub second: B,
}

impl<A: EvalAutomaton, B: EvalAutomaton> Product<A, B> {
    fn split<'q>(&self, q: &'q [u8]) -> (&'q [u8], &'q [u8]) {
        let len = u16::from_le_bytes([q[0], q[1]]) as usize;
        (&q[2..2 + len], &q[2 + len..])
    }

    fn join(x: &[u8], y: &[u8]) -> State {
        let mut q = Vec::with_capacity(2 + x.len() + y.len());
        q.extend_from_slice(&(x.len() as u16).to_le_bytes());
        q.extend_from_slice(x);
        q.extend_from_slice(y);
        q
    }
}

impl<A: EvalAutomaton, B: EvalAutomaton> EvalAutomaton for Product<A, B> {
    fn name(&self) -> String {
        format!("{}+{}", self.first.name(), self.second.name())
    }

    fn var_types(&self) -> Vec<FeatureKind> {
        let mut v = self.first.var_types();
        v.extend(self.second.var_types());
        v
    }

    fn root_state(&self) -> State {
        Self::join(&self.first.root_state(), &self.second.root_state())
    }

    fn leaf_states(&self, leaf: &ParseNode) -> Result<Vec<(State, Vec<Solution>)>, ProblemError> {
        let xs = self.first.leaf_states(leaf)?;
        let ys = self.second.leaf_states(leaf)?;
        let mut out = Vec::new();
        for (qx, sx) in &xs {
            for (qy, sy) in &ys {
                let mut sols = Vec::new();
                for a in sx {
                    for b in sy {
                        let mut sets = a.sets().to_vec();
                        sets.extend(b.sets().iter().cloned());
                        sols.push(Solution::new(sets));
                    }
                }
                out.push((Self::join(qx, qy), sols));
            }
        }
        Ok(out)
    }

    fn apply(&self, op: &Operator, first: &[u8], second: &[u8]) -> Option<State> {
        let (a1, b1) = self.split(first);
        let (a2, b2) = self.split(second);
        let x = self.first.apply(op, a1, a2)?;
        let y = self.second.apply(op, b1, b2)?;
        Some(Self::join(&x, &y))
    }

    fn state_order(&self, q: &[u8]) -> usize {
        self.first.state_order(self.split(q).0)
    }
}

/// Per-position data of a state; fused-away positions point at their
/// canonical copy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Slot<P> {
    Dup(usize),
    Live(P),
    /// Forgotten during the current operation.
    Gone,
}

/// A decoded positional state: one global flag byte plus the slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Pst<P> {
    pub flag: u8,
    pub slots: Vec<Slot<P>>,
}

impl<P> Pst<P> {
    pub fn live(&self) -> impl Iterator<Item = (usize, &P)> {
        self.slots.iter().enumerate().filter_map(|(i, s)| match s {
            Slot::Live(p) => Some((i, p)),
            _ => None,
        })
    }

    pub fn get(&self, i: usize) -> &P {
        match &self.slots[i] {
            Slot::Live(p) => p,
            _ => panic!("position {i} is not live"),
        }
    }

    pub fn get_mut(&mut self, i: usize) -> &mut P {
        match &mut self.slots[i] {
            Slot::Live(p) => p,
            _ => panic!("position {i} is not live"),
        }
    }

    fn canon(&self, i: usize) -> usize {
        match self.slots[i] {
            Slot::Dup(c) => c,
            _ => i,
        }
    }
}

const DUP: u8 = 0xFF;

/// Automata whose states are a flag plus fixed-width records per source.
pub(crate) trait Positional: Send + Sync {
    type P: Clone;
    /// Bytes per position, at least 2. Live records never start with 0xFF.
    const WIDTH: usize;

    fn enc(p: &Self::P, out: &mut [u8]);
    fn dec(b: &[u8]) -> Self::P;
    /// Adjusts position references when `off` positions are prepended.
    fn shift(_p: &mut Self::P, _off: usize) {}
    /// Renames position references after a permutation.
    fn rename(_p: &mut Self::P, _f: &dyn Fn(usize) -> usize) {}

    /// Flag of a disjoint union, `None` to reject.
    fn join(&self, a: &Pst<Self::P>, b: &Pst<Self::P>) -> Option<u8>;
    /// Merges `gone` and the fused-in constant into `keep`; afterwards no
    /// record may refer to `gone`.
    fn fuse(&self, st: &mut Pst<Self::P>, keep: usize, gone: usize, extra: &Self::P) -> Option<()>;
    /// Fusing a position with itself; only the constant joins.
    fn fuse_same(&self, st: &mut Pst<Self::P>, c: usize, extra: &Self::P) -> Option<()>;
    /// Drops a canonical position; afterwards no record may refer to it.
    fn forget(&self, st: &mut Pst<Self::P>, f: usize) -> Option<()>;
    /// Brings a state into canonical form.
    fn normalize(&self, _st: &mut Pst<Self::P>) {}
}

pub(crate) fn encode<A: Positional>(a: &A, mut st: Pst<A::P>) -> State {
    a.normalize(&mut st);
    let mut out = vec![0u8; 1 + st.slots.len() * A::WIDTH];
    out[0] = st.flag;
    for (k, s) in st.slots.iter().enumerate() {
        let b = &mut out[1 + k * A::WIDTH..1 + (k + 1) * A::WIDTH];
        match s {
            Slot::Dup(c) => {
                b[0] = DUP;
                b[1] = *c as u8;
            }
            Slot::Live(p) => A::enc(p, b),
            Slot::Gone => unreachable!("forgotten positions are removed before encoding"),
        }
    }
    out
}

pub(crate) fn decode<A: Positional>(q: &[u8]) -> Pst<A::P> {
    let slots = q[1..]
        .chunks(A::WIDTH)
        .map(|b| {
            if b[0] == DUP {
                Slot::Dup(b[1] as usize)
            } else {
                Slot::Live(A::dec(b))
            }
        })
        .collect();
    Pst { flag: q[0], slots }
}

pub(crate) fn order_of<A: Positional>(q: &[u8]) -> usize {
    (q.len() - 1) / A::WIDTH
}

pub(crate) fn apply_positional<A: Positional>(a: &A, op: &Operator, first: &[u8], second: &[u8]) -> Option<State> {
    let mut st = decode::<A>(first);
    let other = decode::<A>(second);
    match op {
        Operator::Disjoint { r1, r2 } => {
            if st.slots.len() != *r1 || other.slots.len() != *r2 {
                return None;
            }
            let flag = a.join(&st, &other)?;
            for s in other.slots {
                st.slots.push(match s {
                    Slot::Dup(c) => Slot::Dup(c + r1),
                    Slot::Live(mut p) => {
                        A::shift(&mut p, *r1);
                        Slot::Live(p)
                    }
                    Slot::Gone => Slot::Gone,
                });
            }
            st.flag = flag;
            Some(encode(a, st))
        }
        Operator::Fuse { i, j, r } => {
            if st.slots.len() != *r || other.slots.len() != 1 || *i >= *r || *j >= *r {
                return None;
            }
            let Slot::Live(extra) = &other.slots[0] else {
                return None;
            };
            let (ci, cj) = (st.canon(*i), st.canon(*j));
            if ci == cj {
                a.fuse_same(&mut st, ci, extra)?;
            } else {
                let (keep, gone) = (ci.min(cj), ci.max(cj));
                a.fuse(&mut st, keep, gone, extra)?;
                for s in st.slots.iter_mut() {
                    if matches!(s, Slot::Dup(c) if *c == gone) {
                        *s = Slot::Dup(keep);
                    }
                }
                st.slots[gone] = Slot::Dup(keep);
            }
            Some(encode(a, st))
        }
        Operator::Permute { alpha, r } => {
            if st.slots.len() != *r || !other.slots.is_empty() || alpha.iter().any(|&x| x >= *r) {
                return None;
            }
            // first output position of each class becomes canonical
            let mut out_of: BTreeMap<usize, usize> = BTreeMap::new();
            for (k, &x) in alpha.iter().enumerate() {
                out_of.entry(st.canon(x)).or_insert(k);
            }
            for c in 0..st.slots.len() {
                if matches!(st.slots[c], Slot::Live(_)) && !out_of.contains_key(&c) {
                    a.forget(&mut st, c)?;
                    st.slots[c] = Slot::Gone;
                }
            }
            let rename = |c: usize| out_of[&c];
            let mut slots = Vec::with_capacity(alpha.len());
            for (k, &x) in alpha.iter().enumerate() {
                let c = st.canon(x);
                let first = out_of[&c];
                if first == k {
                    let mut p = st.get(c).clone();
                    A::rename(&mut p, &rename);
                    slots.push(Slot::Live(p));
                } else {
                    slots.push(Slot::Dup(first));
                }
            }
            Some(encode(a, Pst { flag: st.flag, slots }))
        }
        _ => None,
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! Exhaustive accumulation of solution families along a parse tree.

    use std::collections::{BTreeMap, BTreeSet};

    use super::*;

    pub type Family = BTreeMap<State, Vec<Solution>>;

    /// Per node: state -> every solution, duplicates kept.
    pub fn accumulate(a: &dyn EvalAutomaton, t: &ParseTree) -> Vec<Family> {
        let mut fam: Vec<Family> = Vec::with_capacity(t.len());
        for node in t.nodes() {
            let mut here: Family = BTreeMap::new();
            match node.children {
                None => {
                    for (q, sols) in a.leaf_states(node).unwrap() {
                        here.entry(q).or_default().extend(sols);
                    }
                }
                Some([x, y]) => {
                    for (qx, sx) in &fam[x] {
                        for (qy, sy) in &fam[y] {
                            if let Some(q) = a.apply(&node.op, qx, qy) {
                                let list = here.entry(q).or_default();
                                for s1 in sx {
                                    for s2 in sy {
                                        let mut s = s1.clone();
                                        s.absorb(s2);
                                        list.push(s);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            fam.push(here);
        }
        fam
    }

    /// Accumulated feasible family at the root; panics on any duplicate.
    pub fn root_family(a: &dyn EvalAutomaton, t: &ParseTree) -> BTreeSet<Solution> {
        let fam = accumulate(a, t);
        for (u, f) in fam.iter().enumerate() {
            for (q, sols) in f {
                let set: BTreeSet<&Solution> = sols.iter().collect();
                assert_eq!(set.len(), sols.len(), "duplicate at node {u} state {q:?}");
            }
        }
        fam[t.root()]
            .get(&a.root_state())
            .map(|v| v.iter().cloned().collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::testing::*;
    use super::*;
    use crate::algebra::build_parse_tree;
    use crate::graph::{load_graph, FeatureId};
    use crate::treedec::{balance, heuristic_decomposition};

    fn tree(g: &WeightedGraph) -> ParseTree {
        let sd = balance(&heuristic_decomposition(g), g).unwrap();
        build_parse_tree(&sd, g).unwrap()
    }

    fn k3() -> WeightedGraph {
        load_graph("p kbest 3 3 0\ne 1 2 1\ne 2 3 1\ne 1 3 5\n").unwrap()
    }

    fn edges(ids: &[u32]) -> Solution {
        Solution::new(vec![ids.iter().map(|&e| FeatureId::edge(e)).collect()])
    }

    #[test]
    fn builtin_params() {
        let g = k3();
        assert!(builtin(&Problem::SimplePath { source: 1, target: 1 }, &g).is_err());
        assert!(builtin(&Problem::SimplePath { source: 1, target: 4 }, &g).is_err());
        assert!(builtin(&Problem::SimplePath { source: 1, target: 3 }, &g).is_ok());
        assert!(Problem::from_name("shortest", None, None).is_err());
        assert!(Problem::from_name("simple-path", Some(1), None).is_err());
        assert_eq!(
            Problem::from_name("vertex-cover", None, None).unwrap(),
            Problem::VertexCover
        );
    }

    #[test]
    fn k3_families() {
        let g = k3();
        let t = tree(&g);
        let a = builtin(&Problem::SimplePath { source: 1, target: 3 }, &g).unwrap();
        let fam = root_family(a.as_ref(), &t);
        assert_eq!(fam, BTreeSet::from([edges(&[3]), edges(&[1, 2])]));

        let a = builtin(&Problem::SpanningTree, &g).unwrap();
        let fam = root_family(a.as_ref(), &t);
        assert_eq!(fam, BTreeSet::from([edges(&[1, 2]), edges(&[1, 3]), edges(&[2, 3])]));

        let p3 = load_graph("p kbest 3 2 0\ne 1 2 1\ne 2 3 1\n").unwrap();
        let a = builtin(&Problem::PerfectMatching, &p3).unwrap();
        assert!(root_family(a.as_ref(), &tree(&p3)).is_empty());
    }

    #[test]
    fn transitions_and_leaf_solutions() {
        let g = k3();
        let t = tree(&g);
        let a = builtin(&Problem::SimplePath { source: 1, target: 3 }, &g).unwrap();
        let leaf = t
            .nodes()
            .iter()
            .position(|n| n.introduced == Some(FeatureId::edge(3)))
            .unwrap();
        let states = a.leaf_states(t.node(leaf)).unwrap();
        assert_eq!(states.len(), 2);
        let mut all = Vec::new();
        for (q, _) in &states {
            all.extend(leaf_solutions(a.as_ref(), &t, leaf, q).unwrap());
        }
        all.sort();
        assert_eq!(all, vec![Solution::empty(1), edges(&[3])]);
        let inner = t.root();
        assert!(matches!(
            leaf_solutions(a.as_ref(), &t, inner, &a.root_state()),
            Err(ProblemError::NotALeaf(_))
        ));
        let fam = accumulate(a.as_ref(), &t);
        let [x, y] = t.node(inner).children.unwrap();
        let first: Vec<State> = fam[x].keys().cloned().collect();
        let second: Vec<State> = fam[y].keys().cloned().collect();
        let pairs = transitions(a.as_ref(), &t.node(inner).op, &a.root_state(), &first, &second).unwrap();
        assert!(!pairs.is_empty());
        assert!(pairs.windows(2).all(|w| w[0] < w[1]));
        let bad = transitions(
            a.as_ref(),
            &Operator::Disjoint { r1: 1, r2: 1 },
            &a.root_state(),
            &first,
            &second,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn product_concatenates_variables() {
        let g = k3();
        let t = tree(&g);
        let a = Product {
            first: SpanningTree,
            second: VertexCover,
        };
        assert_eq!(a.var_types(), vec![FeatureKind::Edge, FeatureKind::Vertex]);
        let fam = root_family(&a, &t);
        // 3 spanning trees times 4 vertex covers of a triangle
        assert_eq!(fam.len(), 12);
    }
}
