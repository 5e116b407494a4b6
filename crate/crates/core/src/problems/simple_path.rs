//! s–t simple paths as edge sets.
//!
//! Each source records its terminal role, its path degree, and for degree 1
//! the other end of its fragment: another source, or the terminal that has
//! already been forgotten. Directed runs also record whether the fragment
//! leaves or enters the source. The flag marks a completed path.

use super::{apply_positional, encode, order_of, EvalAutomaton, Positional, Pst, Slot, State};
use crate::algebra::{EdgeLabel, Operator, ParseNode};
use crate::error::ProblemError;
use crate::graph::{FeatureKind, Solution};

const PLAIN: u8 = 0;
const SOURCE: u8 = 1;
const TARGET: u8 = 2;

const NO_PARTNER: u8 = 0xFE;
/// Partner is the forgotten source resp. target.
const GONE_S: u8 = 0xFD;
const GONE_T: u8 = 0xFC;

const DIR_NONE: u8 = 0;
const DIR_IN: u8 = 1;
const DIR_OUT: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct End {
    term: u8,
    deg: u8,
    partner: u8,
    dir: u8,
}

impl End {
    fn free(term: u8) -> End {
        End {
            term,
            deg: 0,
            partner: NO_PARTNER,
            dir: DIR_NONE,
        }
    }
}

fn is_position(p: u8) -> bool {
    p < GONE_T
}

pub struct SimplePath {
    source: u32,
    target: u32,
    directed: bool,
}

impl SimplePath {
    pub fn new(source: u32, target: u32, directed: bool) -> Self {
        SimplePath {
            source,
            target,
            directed,
        }
    }

    fn term(&self, v: u32) -> u8 {
        if v == self.source {
            SOURCE
        } else if v == self.target {
            TARGET
        } else {
            PLAIN
        }
    }

    /// Completing the path requires every other fragment to be absent.
    fn complete(st: &mut Pst<End>) -> Option<()> {
        if st.flag != 0 || st.live().any(|(_, e)| e.deg == 1) {
            return None;
        }
        st.flag = 1;
        Some(())
    }
}

impl Positional for SimplePath {
    type P = End;
    const WIDTH: usize = 4;

    fn enc(p: &End, out: &mut [u8]) {
        out.copy_from_slice(&[p.term, p.deg, p.partner, p.dir]);
    }

    fn dec(b: &[u8]) -> End {
        End {
            term: b[0],
            deg: b[1],
            partner: b[2],
            dir: b[3],
        }
    }

    fn shift(p: &mut End, off: usize) {
        if is_position(p.partner) {
            p.partner += off as u8;
        }
    }

    fn rename(p: &mut End, f: &dyn Fn(usize) -> usize) {
        if is_position(p.partner) {
            p.partner = f(p.partner as usize) as u8;
        }
    }

    fn join(&self, a: &Pst<End>, b: &Pst<End>) -> Option<u8> {
        let idle = |s: &Pst<End>| s.live().all(|(_, e)| e.deg == 0);
        match (a.flag, b.flag) {
            (0, 0) => Some(0),
            (1, 0) if idle(b) => Some(1),
            (0, 1) if idle(a) => Some(1),
            _ => None,
        }
    }

    fn fuse(&self, st: &mut Pst<End>, keep: usize, gone: usize, extra: &End) -> Option<()> {
        let x = *st.get(keep);
        let y = *st.get(gone);
        let term = x.term.max(y.term).max(extra.term);
        let deg = x.deg + y.deg;
        if deg > 2 || (term != PLAIN && deg > 1) {
            return None;
        }
        match (x.deg, y.deg) {
            (_, 0) => {
                st.get_mut(keep).term = term;
            }
            (0, _) => {
                if is_position(y.partner) {
                    st.get_mut(y.partner as usize).partner = keep as u8;
                }
                *st.get_mut(keep) = End { term, ..y };
            }
            _ => {
                if self.directed && x.dir == y.dir {
                    return None;
                }
                let (a, b) = (x.partner, y.partner);
                if a == gone as u8 {
                    // both ends of one fragment: a cycle
                    return None;
                }
                *st.get_mut(keep) = End {
                    term,
                    deg: 2,
                    partner: NO_PARTNER,
                    dir: DIR_NONE,
                };
                if is_position(a) {
                    st.get_mut(a as usize).partner = b;
                }
                if is_position(b) {
                    st.get_mut(b as usize).partner = a;
                }
                if !is_position(a) && !is_position(b) {
                    st.slots[gone] = Slot::Gone;
                    Self::complete(st)?;
                }
            }
        }
        Some(())
    }

    fn fuse_same(&self, st: &mut Pst<End>, c: usize, extra: &End) -> Option<()> {
        let p = st.get_mut(c);
        p.term = p.term.max(extra.term);
        if p.term != PLAIN && p.deg > 1 {
            return None;
        }
        Some(())
    }

    fn forget(&self, st: &mut Pst<End>, f: usize) -> Option<()> {
        let e = *st.get(f);
        match e.term {
            PLAIN => (e.deg != 1).then_some(()),
            t => {
                let want = if t == SOURCE { DIR_OUT } else { DIR_IN };
                if e.deg != 1 || (self.directed && e.dir != want) {
                    return None;
                }
                let label = if t == SOURCE { GONE_S } else { GONE_T };
                st.slots[f] = Slot::Gone;
                if is_position(e.partner) {
                    st.get_mut(e.partner as usize).partner = label;
                    Some(())
                } else {
                    Self::complete(st)
                }
            }
        }
    }
}

impl EvalAutomaton for SimplePath {
    fn name(&self) -> String {
        format!("simple-path({},{})", self.source, self.target)
    }

    fn var_types(&self) -> Vec<FeatureKind> {
        vec![FeatureKind::Edge]
    }

    fn root_state(&self) -> State {
        vec![1]
    }

    fn leaf_states(&self, leaf: &ParseNode) -> Result<Vec<(State, Vec<Solution>)>, ProblemError> {
        let none = Solution::empty(1);
        let st = |slots: Vec<End>| Pst {
            flag: 0,
            slots: slots.into_iter().map(Slot::Live).collect(),
        };
        match &leaf.op {
            Operator::Const0 => Ok(vec![(vec![0], vec![none])]),
            Operator::Const1 => {
                let v = leaf.source_map[0];
                Ok(vec![(encode(self, st(vec![End::free(self.term(v))])), vec![none])])
            }
            Operator::ConstEdge { label } => {
                let Some(e) = leaf.introduced else {
                    return Err(ProblemError::InvalidParams("edge leaf without edge id".into()));
                };
                let (a, b) = (self.term(leaf.source_map[0]), self.term(leaf.source_map[1]));
                let unused = st(vec![End::free(a), End::free(b)]);
                let (da, db) = match (self.directed, label) {
                    (false, _) => (DIR_NONE, DIR_NONE),
                    (true, EdgeLabel::Fwd) => (DIR_OUT, DIR_IN),
                    (true, EdgeLabel::Bwd) => (DIR_IN, DIR_OUT),
                    (true, EdgeLabel::Undir) => {
                        return Err(ProblemError::InvalidParams("undirected edge in a directed run".into()))
                    }
                };
                let used = st(vec![
                    End {
                        term: a,
                        deg: 1,
                        partner: 1,
                        dir: da,
                    },
                    End {
                        term: b,
                        deg: 1,
                        partner: 0,
                        dir: db,
                    },
                ]);
                let mut out = vec![
                    (encode(self, unused), vec![none]),
                    (encode(self, used), vec![Solution::single(1, 0, e)]),
                ];
                out.sort();
                Ok(out)
            }
            _ => Err(ProblemError::NotALeaf(0)),
        }
    }

    fn apply(&self, op: &Operator, first: &[u8], second: &[u8]) -> Option<State> {
        apply_positional(self, op, first, second)
    }

    fn state_order(&self, q: &[u8]) -> usize {
        order_of::<Self>(q)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::algebra::build_parse_tree;
    use crate::graph::{load_graph, WeightedGraph};
    use crate::problems::decode;
    use crate::problems::testing::root_family;
    use crate::treedec::{balance, heuristic_decomposition};

    fn family(g: &WeightedGraph, s: u32, t: u32) -> BTreeSet<Vec<u32>> {
        let sd = balance(&heuristic_decomposition(g), g).unwrap();
        let tree = build_parse_tree(&sd, g).unwrap();
        let a = SimplePath::new(s, t, g.is_directed());
        root_family(&a, &tree)
            .into_iter()
            .map(|sol| sol.sets()[0].iter().map(|f| f.index).collect())
            .collect()
    }

    #[test]
    fn triangle_paths() {
        let g = load_graph("p kbest 3 3 0\ne 1 2 1\ne 2 3 1\ne 1 3 5\n").unwrap();
        assert_eq!(family(&g, 1, 3), BTreeSet::from([vec![3], vec![1, 2]]));
        assert_eq!(family(&g, 2, 1), BTreeSet::from([vec![1], vec![2, 3]]));
    }

    #[test]
    fn directed_paths_respect_orientation() {
        // 1->2, 2->3, 3->1
        let g = load_graph("p kbest 3 3 1\ne 1 2 1\ne 2 3 1\ne 3 1 1\n").unwrap();
        assert_eq!(family(&g, 1, 3), BTreeSet::from([vec![1, 2]]));
        assert_eq!(family(&g, 3, 2), BTreeSet::from([vec![1, 3]]));
        let two_cycle = load_graph("p kbest 2 2 1\ne 1 2 1\ne 2 1 1\n").unwrap();
        assert_eq!(family(&two_cycle, 1, 2), BTreeSet::from([vec![1]]));
    }

    #[test]
    fn loops_parallel_edges_and_isolated_vertices() {
        let g = load_graph("p kbest 4 4 0\ne 1 2 1\ne 1 2 2\ne 2 2 1\ne 2 3 1\n").unwrap();
        assert_eq!(family(&g, 1, 3), BTreeSet::from([vec![1, 4], vec![2, 4]]));
        assert!(family(&g, 1, 4).is_empty());
    }

    #[test]
    fn decoding_round_trip() {
        let a = SimplePath::new(1, 2, true);
        let st = Pst {
            flag: 0,
            slots: vec![Slot::Live(End::free(SOURCE)), Slot::Dup(0)],
        };
        let q = encode(&a, st.clone());
        assert_eq!(decode::<SimplePath>(&q), st);
        assert_eq!(a.state_order(&q), 2);
    }
}
