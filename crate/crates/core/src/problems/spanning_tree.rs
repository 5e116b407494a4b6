//! Spanning trees as edge sets.
//!
//! Each source carries the label of its connected block in the partial
//! forest. Fusing two sources of one block closes a cycle. Forgetting the
//! last source of a block finishes that component, which is only allowed
//! once and only when nothing else is left.

use super::{apply_positional, encode, order_of, EvalAutomaton, Positional, Pst, Slot, State};
use crate::algebra::{Operator, ParseNode};
use crate::error::ProblemError;
use crate::graph::{FeatureKind, Solution};

pub struct SpanningTree;

impl Positional for SpanningTree {
    type P = u8;
    const WIDTH: usize = 2;

    fn enc(p: &u8, out: &mut [u8]) {
        out[0] = *p;
        out[1] = 0;
    }

    fn dec(b: &[u8]) -> u8 {
        b[0]
    }

    fn shift(p: &mut u8, off: usize) {
        *p += off as u8;
    }

    fn join(&self, a: &Pst<u8>, b: &Pst<u8>) -> Option<u8> {
        let empty = |s: &Pst<u8>| s.flag == 0 && s.slots.is_empty();
        match (a.flag, b.flag) {
            (0, 0) => Some(0),
            (1, _) if empty(b) => Some(1),
            (_, 1) if empty(a) => Some(1),
            _ => None,
        }
    }

    fn fuse(&self, st: &mut Pst<u8>, keep: usize, gone: usize, _extra: &u8) -> Option<()> {
        let (x, y) = (*st.get(keep), *st.get(gone));
        if x == y {
            return None;
        }
        for s in st.slots.iter_mut() {
            if let Slot::Live(b) = s {
                if *b == y {
                    *b = x;
                }
            }
        }
        Some(())
    }

    fn fuse_same(&self, _st: &mut Pst<u8>, _c: usize, _extra: &u8) -> Option<()> {
        Some(())
    }

    fn forget(&self, st: &mut Pst<u8>, f: usize) -> Option<()> {
        let block = *st.get(f);
        let shared = st.live().any(|(i, &b)| i != f && b == block);
        if shared {
            return Some(());
        }
        // the component is complete; it must be the only one
        if st.flag != 0 || st.live().any(|(i, _)| i != f) {
            return None;
        }
        st.flag = 1;
        Some(())
    }

    fn normalize(&self, st: &mut Pst<u8>) {
        let mut names: Vec<(u8, u8)> = Vec::new();
        for s in st.slots.iter_mut() {
            if let Slot::Live(b) = s {
                let fresh = names.len() as u8;
                let name = match names.iter().find(|(old, _)| old == b) {
                    Some(&(_, new)) => new,
                    None => {
                        names.push((*b, fresh));
                        fresh
                    }
                };
                *b = name;
            }
        }
    }
}

impl EvalAutomaton for SpanningTree {
    fn name(&self) -> String {
        "spanning-tree".into()
    }

    fn var_types(&self) -> Vec<FeatureKind> {
        vec![FeatureKind::Edge]
    }

    fn root_state(&self) -> State {
        vec![1]
    }

    fn leaf_states(&self, leaf: &ParseNode) -> Result<Vec<(State, Vec<Solution>)>, ProblemError> {
        let none = Solution::empty(1);
        let st = |blocks: &[u8]| Pst {
            flag: 0,
            slots: blocks.iter().map(|&b| Slot::Live(b)).collect(),
        };
        match &leaf.op {
            Operator::Const0 => Ok(vec![(vec![0], vec![none])]),
            Operator::Const1 => Ok(vec![(encode(self, st(&[0])), vec![none])]),
            Operator::ConstEdge { .. } => {
                let e = leaf
                    .introduced
                    .ok_or_else(|| ProblemError::InvalidParams("edge leaf without edge id".into()))?;
                Ok(vec![
                    (encode(self, st(&[0, 0])), vec![Solution::single(1, 0, e)]),
                    (encode(self, st(&[0, 1])), vec![none]),
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
