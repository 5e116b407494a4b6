//! Bottom-up evaluation over a parse tree.

mod plan;
mod structure;
mod tree;

pub use plan::Plan;
pub use structure::{combine2, combine_k, merge2, merge_k, EvaluationStructure, Top2, Top2Value, TopK, TopKValue};
pub use tree::{Entry, EvaluationTree};
pub(crate) use tree::{Forced, NONE};

use crate::error::EvalError;

/// Values of every relevant state at every node, by the recurrence alone.
pub fn evaluate_values<S: EvaluationStructure>(plan: &Plan, s: &S) -> Result<Vec<Vec<S::Value>>, EvalError> {
    let t = plan.tree();
    let mut out: Vec<Vec<S::Value>> = Vec::with_capacity(t.len());
    for u in 0..t.len() {
        let mut vals = Vec::with_capacity(plan.n_states(u));
        match t.node(u).children {
            None => {
                let uv = plan.universe_values(u);
                for q in 0..plan.n_states(u) {
                    let xs: Vec<_> = plan.leaf_selection(u, q).iter().map(|&i| uv[i as usize]).collect();
                    vals.push(s.lift(&xs));
                }
            }
            Some([a, b]) => {
                for q in 0..plan.n_states(u) {
                    let mut acc = s.merge_identity();
                    for &[i, j] in plan.pairs(u, q) {
                        let c = s.combine(&out[a][i as usize], &out[b][j as usize])?;
                        acc = s.merge(&acc, &c)?;
                    }
                    vals.push(acc);
                }
            }
        }
        out.push(vals);
    }
    Ok(out)
}

/// The structure value of the whole feasible family.
pub fn root_value<S: EvaluationStructure>(plan: &Plan, s: &S) -> Result<S::Value, EvalError> {
    match plan.root_state() {
        None => Ok(s.merge_identity()),
        Some(q) => Ok(evaluate_values(plan, s)?.swap_remove(plan.tree().root()).swap_remove(q)),
    }
}
