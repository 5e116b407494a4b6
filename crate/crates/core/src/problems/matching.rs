//! Perfect matchings as edge sets; each source counts its matched edges.

use super::{apply_positional, encode, order_of, EvalAutomaton, Positional, Pst, Slot, State};
use crate::algebra::{Operator, ParseNode};
use crate::error::ProblemError;
use crate::graph::{FeatureKind, Solution};

pub struct PerfectMatching;

impl Positional for PerfectMatching {
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
        let total = st.get(keep) + st.get(gone) + extra;
        if total > 1 {
            return None;
        }
        *st.get_mut(keep) = total;
        Some(())
    }

    fn fuse_same(&self, st: &mut Pst<u8>, c: usize, extra: &u8) -> Option<()> {
        let total = st.get(c) + extra;
        (total <= 1).then(|| *st.get_mut(c) = total)
    }

    fn forget(&self, st: &mut Pst<u8>, f: usize) -> Option<()> {
        (*st.get(f) == 1).then_some(())
    }
}

impl EvalAutomaton for PerfectMatching {
    fn name(&self) -> String {
        "perfect-matching".into()
    }

    fn var_types(&self) -> Vec<FeatureKind> {
        vec![FeatureKind::Edge]
    }

    fn root_state(&self) -> State {
        vec![0]
    }

    fn leaf_states(&self, leaf: &ParseNode) -> Result<Vec<(State, Vec<Solution>)>, ProblemError> {
        let none = Solution::empty(1);
        let st = |counts: &[u8]| Pst {
            flag: 0,
            slots: counts.iter().map(|&c| Slot::Live(c)).collect(),
        };
        match &leaf.op {
            Operator::Const0 => Ok(vec![(vec![0], vec![none])]),
            Operator::Const1 => Ok(vec![(encode(self, st(&[0])), vec![none])]),
            Operator::ConstEdge { .. } => {
                let e = leaf
                    .introduced
                    .ok_or_else(|| ProblemError::InvalidParams("edge leaf without edge id".into()))?;
                Ok(vec![
                    (encode(self, st(&[0, 0])), vec![none]),
                    (encode(self, st(&[1, 1])), vec![Solution::single(1, 0, e)]),
                ])
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
    use super::*;
    use crate::algebra::build_parse_tree;
    use crate::graph::load_graph;
    use crate::problems::testing::root_family;
    use crate::treedec::{balance, heuristic_decomposition};

    #[test]
    fn four_cycle_has_two_matchings() {
        let g = load_graph("p kbest 4 5 0\ne 1 2 1\ne 2 3 1\ne 3 4 1\ne 4 1 1\ne 2 2 1\n").unwrap();
        let sd = balance(&heuristic_decomposition(&g), &g).unwrap();
        let t = build_parse_tree(&sd, &g).unwrap();
        assert_eq!(root_family(&PerfectMatching, &t).len(), 2);
    }
}
