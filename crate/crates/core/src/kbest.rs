//! Best-first traversal of the subproblem tree.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::algebra::build_parse_tree;
use crate::error::{Error, EvalError, TdError};
use crate::eval::{root_value, EvaluationTree, Plan, TopK};
use crate::graph::{CostModel, ExtWeight, Solution, WeightedGraph};
use crate::persist::{best_pair, expand, initial_version, solution, Version};
use crate::problems::{builtin, Problem};
use crate::treedec::{balance, heuristic_decomposition, validate, TreeDecomposition};

/// Largest `k` accepted by [`k_best_direct`].
pub const MAX_DIRECT_K: usize = 64;

/// Sizes and timings of the preparation phases.
#[derive(Clone, Debug, Default)]
pub struct PrepStats {
    pub input_width: usize,
    pub width: usize,
    pub td_depth: usize,
    pub bags: usize,
    pub parse_nodes: usize,
    pub parse_depth: usize,
    pub max_order: usize,
    pub reachable_states: usize,
    pub relevant_states: usize,
    pub max_states: usize,
    pub distinct_states: usize,
    pub fitting_pairs: usize,
    pub decompose: Duration,
    pub parse: Duration,
    pub compile: Duration,
    pub evaluate: Duration,
}

/// Decomposes, balances, builds the parse tree, and compiles the problem's
/// automaton against the graph's default costs. A given decomposition is
/// validated and balanced instead of the heuristic one.
pub fn prepare(
    g: &WeightedGraph,
    problem: &Problem,
    td: Option<&TreeDecomposition>,
) -> Result<(Plan, PrepStats), Error> {
    let mut stats = PrepStats::default();
    let t = Instant::now();
    let td = match td {
        Some(td) => {
            let report = validate(td, g);
            if !report.is_valid() {
                let msg: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
                return Err(TdError::Invalid(msg.join("; ")).into());
            }
            td.clone()
        }
        None => heuristic_decomposition(g),
    };
    let sd = balance(&td, g)?;
    stats.input_width = td.width();
    stats.width = sd.width;
    stats.td_depth = sd.depth;
    stats.bags = sd.td.num_bags();
    stats.decompose = t.elapsed();
    let t = Instant::now();
    let tree = build_parse_tree(&sd, g)?;
    stats.parse_nodes = tree.len();
    stats.parse_depth = tree.depth();
    stats.max_order = tree.max_order();
    stats.parse = t.elapsed();
    let t = Instant::now();
    let a = builtin(problem, g)?;
    let cost = CostModel::from_graph(g, &a.var_types());
    let plan = Plan::new(tree, a, cost)?;
    stats.reachable_states = plan.reachable_states();
    stats.relevant_states = plan.total_states();
    stats.max_states = plan.max_states();
    stats.distinct_states = plan.distinct_states();
    stats.fitting_pairs = plan.total_pairs();
    stats.compile = t.elapsed();
    Ok((plan, stats))
}

#[derive(Clone, Debug, Default)]
pub struct KBestStats {
    pub expansions: usize,
    /// Records allocated by each constrain call.
    pub copies: Vec<usize>,
    /// Length of each pivot path.
    pub path_lengths: Vec<usize>,
    /// Every popped key was at least the previous one.
    pub heap_monotone: bool,
    pub infeasible: bool,
    /// Fewer than `k` solutions exist.
    pub exhausted: bool,
    pub enumerate: Duration,
}

#[derive(Clone, Debug, Default)]
pub struct KBestOutput {
    pub values: Vec<i64>,
    pub solutions: Option<Vec<Solution>>,
    pub stats: KBestStats,
}

/// The `k` smallest feasible values in order, with distinct solutions if
/// requested. Stops early once the family is exhausted.
pub fn k_best(et: &mut EvaluationTree, k: usize, want_solutions: bool) -> Result<KBestOutput, Error> {
    let mut values = Vec::new();
    let mut sols = Vec::new();
    let stats = k_best_each(et, k, want_solutions, |v, s| {
        values.push(v);
        sols.extend(s);
    })?;
    Ok(KBestOutput {
        values,
        solutions: want_solutions.then_some(sols),
        stats,
    })
}

/// Like [`k_best`], handing each result to `sink` as soon as it is known.
pub fn k_best_each(
    et: &mut EvaluationTree,
    k: usize,
    want_solutions: bool,
    mut sink: impl FnMut(i64, Option<Solution>),
) -> Result<KBestStats, Error> {
    if k == 0 {
        return Err(EvalError::ZeroK.into());
    }
    let start = Instant::now();
    let mut stats = KBestStats {
        heap_monotone: true,
        ..KBestStats::default()
    };
    let root = initial_version(et);
    let ExtWeight::Finite(best) = best_pair(et, &root).best else {
        stats.infeasible = true;
        stats.exhausted = true;
        stats.enumerate = start.elapsed();
        return Ok(stats);
    };
    let mut emitted = 0;
    let mut emit = |et: &EvaluationTree, v: &Version, value: i64, rank: usize| -> Result<(), Error> {
        let s = if want_solutions {
            Some(solution(et, v, rank)?)
        } else {
            None
        };
        sink(value, s);
        emitted += 1;
        Ok(())
    };
    emit(et, &root, best, 0)?;
    let mut heap: BinaryHeap<(Reverse<i64>, Reverse<usize>)> = BinaryHeap::new();
    let mut versions: Vec<Version> = Vec::new();
    let push = |heap: &mut BinaryHeap<_>, versions: &mut Vec<Version>, et: &EvaluationTree, v: Version| {
        if let ExtWeight::Finite(key) = best_pair(et, &v).second {
            heap.push((Reverse(key), Reverse(versions.len())));
            versions.push(v);
        }
    };
    push(&mut heap, &mut versions, et, root);
    let mut last = i64::MIN;
    let mut count = 1;
    while count < k {
        let Some((Reverse(key), Reverse(i))) = heap.pop() else {
            break;
        };
        if key < last {
            stats.heap_monotone = false;
        }
        last = key;
        let v = versions[i].clone();
        emit(et, &v, key, 1)?;
        count += 1;
        if count == k {
            break;
        }
        let (p, children) = expand(et, &v)?;
        stats.expansions += 1;
        for c in children {
            stats.copies.push(c.copied());
            stats.path_lengths.push(p.path.len());
            push(&mut heap, &mut versions, et, c);
        }
    }
    stats.exhausted = count < k;
    stats.enumerate = start.elapsed();
    Ok(stats)
}

/// The same values through a single bottom-up pass with the top-`k`
/// structure; no persistence is involved.
pub fn k_best_direct(plan: &Plan, k: usize) -> Result<Vec<i64>, Error> {
    if k == 0 || k > MAX_DIRECT_K {
        return Err(EvalError::BadK { max: MAX_DIRECT_K }.into());
    }
    Ok(root_value(plan, &TopK { k })?.finite())
}

/// Prepares, evaluates, and enumerates in one call.
pub fn solve(
    g: &WeightedGraph,
    problem: &Problem,
    k: usize,
    want_solutions: bool,
    td: Option<&TreeDecomposition>,
) -> Result<(KBestOutput, PrepStats), Error> {
    let (plan, mut stats) = prepare(g, problem, td)?;
    let t = Instant::now();
    let mut et = EvaluationTree::build(plan)?;
    stats.evaluate = t.elapsed();
    Ok((k_best(&mut et, k, want_solutions)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, FeatureId};
    use crate::oracle::{enumerate_sorted, Predicate};
    use proptest::prelude::*;

    const K3: &str = "p kbest 3 3 0\ne 1 2 1\ne 2 3 1\ne 1 3 5\n";

    fn run(text: &str, p: Problem, k: usize) -> KBestOutput {
        solve(&load_graph(text).unwrap(), &p, k, true, None).unwrap().0
    }

    fn edges(ids: &[u32]) -> Solution {
        Solution::new(vec![ids.iter().map(|&e| FeatureId::edge(e)).collect()])
    }

    #[test]
    fn triangle() {
        let path = Problem::SimplePath { source: 1, target: 3 };
        let out = run(K3, path.clone(), 5);
        assert_eq!(out.values, vec![2, 5]);
        assert_eq!(out.solutions.unwrap(), vec![edges(&[1, 2]), edges(&[3])]);
        assert!(out.stats.exhausted);
        assert_eq!(run(K3, Problem::SpanningTree, 3).values, vec![2, 6, 6]);
        let one = run(K3, path, 1);
        assert_eq!((one.values, one.stats.expansions), (vec![2], 0));
    }

    #[test]
    fn infeasible_and_direct() {
        let p3 = "p kbest 3 2 0\ne 1 2 1\ne 2 3 1\n";
        let out = run(p3, Problem::PerfectMatching, 4);
        assert!(out.values.is_empty() && out.stats.infeasible);
        let g = load_graph(K3).unwrap();
        let (plan, _) = prepare(&g, &Problem::SimplePath { source: 1, target: 3 }, None).unwrap();
        assert_eq!(k_best_direct(&plan, 2).unwrap(), vec![2, 5]);
        assert_eq!(k_best_direct(&plan, 1).unwrap(), vec![2]);
        assert!(matches!(
            k_best_direct(&plan, 65),
            Err(Error::Eval(EvalError::BadK { max: 64 }))
        ));
        let (plan, _) = prepare(&load_graph(p3).unwrap(), &Problem::PerfectMatching, None).unwrap();
        assert!(k_best_direct(&plan, 3).unwrap().is_empty());
    }

    fn predicate(p: &Problem) -> Predicate {
        match *p {
            Problem::SimplePath { source, target } => Predicate::SimplePath { source, target },
            Problem::SpanningTree => Predicate::SpanningTree,
            Problem::PerfectMatching => Predicate::PerfectMatching,
            Problem::VertexCover => Predicate::VertexCover,
        }
    }

    fn graph() -> impl Strategy<Value = WeightedGraph> {
        (2u32..7, any::<bool>()).prop_flat_map(|(n, directed)| {
            proptest::collection::vec((1..=n, 1..=n, -20i64..100), 0..10)
                .prop_map(move |e| WeightedGraph::new(n, directed, e).unwrap())
        })
    }

    fn problem(n: u32) -> impl Strategy<Value = Problem> {
        prop_oneof![
            (1..=n, 1..=n)
                .prop_filter("distinct terminals", |(s, t)| s != t)
                .prop_map(|(source, target)| Problem::SimplePath { source, target }),
            Just(Problem::SpanningTree),
            Just(Problem::PerfectMatching),
            Just(Problem::VertexCover),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(150))]
        #[test]
        fn matches_oracle((g, p) in graph().prop_flat_map(|g| { let n = g.n(); (Just(g), problem(n)) })) {
            let pred = predicate(&p);
            let c = CostModel::from_graph(&g, &[pred.kind()]);
            let all = enumerate_sorted(&g, &[pred], &c, &[]).unwrap();
            let k = all.len().max(1) + 1;
            let (out, _) = solve(&g, &p, k, true, None).unwrap();
            let want: Vec<i64> = all.iter().map(|(v, _)| v.finite().unwrap()).collect();
            prop_assert_eq!(&out.values, &want);
            prop_assert!(out.stats.heap_monotone);
            let sols = out.solutions.unwrap();
            let mut distinct = sols.clone();
            distinct.sort();
            distinct.dedup();
            prop_assert_eq!(distinct.len(), sols.len());
            for s in &sols {
                prop_assert!(pred.feasible(&g, &s.sets()[0]));
            }
            let (plan, _) = prepare(&g, &p, None).unwrap();
            for kk in [1usize, 2, 4, 8] {
                let direct = k_best_direct(&plan, kk).unwrap();
                prop_assert_eq!(&direct[..], &want[..want.len().min(kk)]);
            }
        }
    }
}
