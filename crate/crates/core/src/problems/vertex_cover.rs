//! Vertex covers as vertex sets.
//!
//! Each source carries a promise whether its vertex is in the cover. Edges
//! need a promise at one end at least; all copies of a vertex must agree,
//! and the introducing constant turns the promise into membership.

use super::{apply_positional, encode, order_of, EvalAutomaton, Positional, Pst, Slot, State};
use crate::algebra::{Operator, ParseNode};
use crate::error::ProblemError;
use crate::graph::{FeatureKind, Solution};

pub struct VertexCover;

impl Positional for VertexCover {
    type P = u8;
    const WIDTH: usize = 2;

    fn enc(p: &u8, out: &mut [u8]) {
        out[0] = *p;
        out[1] = 0;
    }

    fn dec(b: &[u8]) -> u8 {
        b[0]
    }

    fn join(&self, _a: &Pst<u8>, _b: &Pst<u8>) -> Option<u8> {
        Some(0)
    }

    fn fuse(&self, st: &mut Pst<u8>, keep: usize, gone: usize, extra: &u8) -> Option<()> {
        (st.get(keep) == st.get(gone) && st.get(keep) == extra).then_some(())
    }

    fn fuse_same(&self, st: &mut Pst<u8>, c: usize, extra: &u8) -> Option<()> {
        (st.get(c) == extra).then_some(())
    }

    fn forget(&self, _st: &mut Pst<u8>, _f: usize) -> Option<()> {
        Some(())
    }
}

impl EvalAutomaton for VertexCover {
    fn name(&self) -> String {
        "vertex-cover".into()
    }

    fn var_types(&self) -> Vec<FeatureKind> {
        vec![FeatureKind::Vertex]
    }

    fn root_state(&self) -> State {
        vec![0]
    }

    fn leaf_states(&self, leaf: &ParseNode) -> Result<Vec<(State, Vec<Solution>)>, ProblemError> {
        let none = Solution::empty(1);
        let st = |promises: &[u8]| Pst {
            flag: 0,
            slots: promises.iter().map(|&c| Slot::Live(c)).collect(),
        };
        match &leaf.op {
            Operator::Const0 => Ok(vec![(vec![0], vec![none])]),
            Operator::Const1 => {
                let chosen = match leaf.introduced {
                    Some(v) => Solution::single(1, 0, v),
                    None => none.clone(),
                };
                Ok(vec![
                    (encode(self, st(&[0])), vec![none]),
                    (encode(self, st(&[1])), vec![chosen]),
                ])
            }
            Operator::ConstEdge { .. } => Ok([[0, 1], [1, 0], [1, 1]]
                .iter()
                .map(|p| (encode(self, st(p)), vec![none.clone()]))
                .collect()),
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
    use super::*;
    use crate::algebra::build_parse_tree;
    use crate::graph::load_graph;
    use crate::problems::testing::root_family;
    use crate::treedec::{balance, heuristic_decomposition};

    #[test]
    fn path_covers() {
        // covers of 1-2-3: {2}, {1,2}, {2,3}, {1,3}, {1,2,3}
        let g = load_graph("p kbest 3 2 0\ne 1 2 1\ne 2 3 1\n").unwrap();
        let sd = balance(&heuristic_decomposition(&g), &g).unwrap();
        let t = build_parse_tree(&sd, &g).unwrap();
        assert_eq!(root_family(&VertexCover, &t).len(), 5);
        let loop_graph = load_graph("p kbest 2 1 0\ne 2 2 1\n").unwrap();
        let sd = balance(&heuristic_decomposition(&loop_graph), &loop_graph).unwrap();
        let t = build_parse_tree(&sd, &loop_graph).unwrap();
        assert_eq!(root_family(&VertexCover, &t).len(), 2);
    }
}
