//! Brute-force reference enumeration.
//!
//! Nothing here touches decompositions, parse trees, or automata; the
//! predicates test feasibility directly on the edge or vertex set.

use crate::error::OracleError;
use crate::graph::{solution_value, Constraint, CostModel, ExtWeight, FeatureId, FeatureKind, Solution, WeightedGraph};

/// Largest search space, in bits, that [`enumerate_sorted`] accepts.
pub const MAX_BITS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predicate {
    SimplePath { source: u32, target: u32 },
    SpanningTree,
    PerfectMatching,
    VertexCover,
}

impl Predicate {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Predicate::VertexCover => FeatureKind::Vertex,
            _ => FeatureKind::Edge,
        }
    }

    /// Direct feasibility test of one feature set.
    pub fn feasible(&self, g: &WeightedGraph, set: &[FeatureId]) -> bool {
        let ids: Vec<u32> = set.iter().map(|f| f.index).collect();
        match *self {
            Predicate::SimplePath { source, target } => is_path(g, &ids, source, target),
            Predicate::SpanningTree => is_spanning_tree(g, &ids),
            Predicate::PerfectMatching => is_perfect_matching(g, &ids),
            Predicate::VertexCover => g.edges().all(|(_, t, h)| ids.contains(&t) || ids.contains(&h)),
        }
    }

    /// Cheap necessary condition on a partial choice, used for pruning.
    fn may_extend(&self, g: &WeightedGraph, chosen: &[u32]) -> bool {
        match *self {
            Predicate::SimplePath { source, target } => {
                let (inn, out) = degrees(g, chosen);
                (1..=g.n() as usize).all(|v| {
                    let cap = if v as u32 == source || v as u32 == target { 1 } else { 2 };
                    if g.is_directed() {
                        inn[v] <= 1 && out[v] <= 1 && inn[v] + out[v] <= cap
                    } else {
                        inn[v] + out[v] <= cap
                    }
                })
            }
            Predicate::SpanningTree => chosen.len() < g.n() as usize && acyclic(g, chosen),
            Predicate::PerfectMatching => {
                let (inn, out) = degrees(g, chosen);
                (1..=g.n() as usize).all(|v| inn[v] + out[v] <= 1)
            }
            Predicate::VertexCover => true,
        }
    }
}

fn degrees(g: &WeightedGraph, edges: &[u32]) -> (Vec<usize>, Vec<usize>) {
    let mut inn = vec![0; g.n() as usize + 1];
    let mut out = vec![0; g.n() as usize + 1];
    for &e in edges {
        let (t, h) = g.endpoints(e);
        out[t as usize] += 1;
        inn[h as usize] += 1;
    }
    (inn, out)
}

fn find(p: &mut [u32], x: u32) -> u32 {
    let mut r = x;
    while p[r as usize] != r {
        r = p[r as usize];
    }
    r
}

fn acyclic(g: &WeightedGraph, edges: &[u32]) -> bool {
    let mut p: Vec<u32> = (0..=g.n()).collect();
    for &e in edges {
        let (t, h) = g.endpoints(e);
        let (a, b) = (find(&mut p, t), find(&mut p, h));
        if a == b {
            return false;
        }
        p[a as usize] = b;
    }
    true
}

fn is_spanning_tree(g: &WeightedGraph, edges: &[u32]) -> bool {
    edges.len() + 1 == g.n() as usize && acyclic(g, edges)
}

fn is_perfect_matching(g: &WeightedGraph, edges: &[u32]) -> bool {
    let (inn, out) = degrees(g, edges);
    (1..=g.n() as usize).all(|v| inn[v] + out[v] == 1)
}

/// Walks from `s` along unused chosen edges; the set is a path iff the walk
/// uses every edge and stops at `t`.
fn is_path(g: &WeightedGraph, edges: &[u32], s: u32, t: u32) -> bool {
    if s == t || edges.is_empty() {
        return false;
    }
    let mut used = vec![false; edges.len()];
    let mut seen = vec![false; g.n() as usize + 1];
    let mut at = s;
    seen[s as usize] = true;
    loop {
        let mut next = None;
        for (k, &e) in edges.iter().enumerate() {
            if used[k] {
                continue;
            }
            let (a, b) = g.endpoints(e);
            let other = if a == at {
                Some(b)
            } else if b == at && !g.is_directed() {
                Some(a)
            } else {
                None
            };
            if let Some(o) = other {
                if next.is_some() {
                    // branching
                    return false;
                }
                next = Some((k, o));
            }
        }
        match next {
            None => return at == t && used.iter().all(|&u| u),
            Some((k, o)) => {
                if at == t || seen[o as usize] {
                    return false;
                }
                used[k] = true;
                seen[o as usize] = true;
                at = o;
            }
        }
    }
}

fn domain(g: &WeightedGraph, kind: FeatureKind) -> u32 {
    match kind {
        FeatureKind::Vertex => g.n(),
        FeatureKind::Edge => g.m(),
    }
}

/// Feasible sets of one variable, by backtracking over its features.
fn family(g: &WeightedGraph, pred: Predicate, var: usize, constraints: &[Constraint]) -> Vec<Vec<FeatureId>> {
    let kind = pred.kind();
    let size = domain(g, kind);
    let rule = |i: u32| {
        constraints
            .iter()
            .find(|c| c.var == var && c.feature == FeatureId { kind, index: i })
            .map(|c| c.polarity)
    };
    let mut out = Vec::new();
    let mut chosen: Vec<u32> = Vec::new();
    fn go(
        i: u32,
        size: u32,
        g: &WeightedGraph,
        pred: Predicate,
        kind: FeatureKind,
        rule: &dyn Fn(u32) -> Option<crate::graph::Polarity>,
        chosen: &mut Vec<u32>,
        out: &mut Vec<Vec<FeatureId>>,
    ) {
        if i > size {
            let set: Vec<FeatureId> = chosen.iter().map(|&x| FeatureId { kind, index: x }).collect();
            if pred.feasible(g, &set) {
                out.push(set);
            }
            return;
        }
        use crate::graph::Polarity::*;
        if rule(i) != Some(Forced) {
            go(i + 1, size, g, pred, kind, rule, chosen, out);
        }
        if rule(i) != Some(Excluded) {
            chosen.push(i);
            if pred.may_extend(g, chosen) {
                go(i + 1, size, g, pred, kind, rule, chosen, out);
            }
            chosen.pop();
        }
    }
    go(1, size, g, pred, kind, &rule, &mut chosen, &mut out);
    out
}

/// All feasible solutions satisfying `constraints`, sorted by value and then
/// by canonical encoding. Variable `i` is governed by `preds[i]`.
pub fn enumerate_sorted(
    g: &WeightedGraph,
    preds: &[Predicate],
    c: &CostModel,
    constraints: &[Constraint],
) -> Result<Vec<(ExtWeight, Solution)>, OracleError> {
    if let Some(&Predicate::SimplePath { source, target }) =
        preds.iter().find(|p| matches!(p, Predicate::SimplePath { .. }))
    {
        check_terminals(g, source, target)?;
    }
    if c.n_free() != preds.len() || c.var_types().iter().zip(preds).any(|(k, p)| *k != p.kind()) {
        return Err(OracleError::Params("cost model does not match the predicates".into()));
    }
    let bits: usize = preds.iter().map(|p| domain(g, p.kind()) as usize).sum();
    if bits > MAX_BITS {
        return Err(OracleError::TooLarge { bits });
    }
    let mut partial: Vec<Vec<Vec<FeatureId>>> = vec![Vec::new()];
    for (var, &p) in preds.iter().enumerate() {
        let fam = family(g, p, var, constraints);
        let mut next = Vec::with_capacity(partial.len() * fam.len());
        for prefix in &partial {
            for set in &fam {
                let mut sets = prefix.clone();
                sets.push(set.clone());
                next.push(sets);
            }
        }
        partial = next;
    }
    let mut out = Vec::with_capacity(partial.len());
    for sets in partial {
        let s = Solution::new(sets);
        let v = solution_value(&s, c).map_err(|e| OracleError::Params(e.to_string()))?;
        out.push((v, s));
    }
    out.sort();
    Ok(out)
}

fn check_terminals(g: &WeightedGraph, s: u32, t: u32) -> Result<(), OracleError> {
    if s == 0 || t == 0 || s > g.n() || t > g.n() {
        return Err(OracleError::Params(format!("terminal out of range 1..={}", g.n())));
    }
    if s == t {
        return Err(OracleError::Params("source and target coincide".into()));
    }
    Ok(())
}

/// All simple `s`–`t` paths by depth-first search, sorted like
/// [`enumerate_sorted`]. Fails once more than `limit` paths exist.
pub fn enumerate_paths(
    g: &WeightedGraph,
    s: u32,
    t: u32,
    limit: usize,
) -> Result<Vec<(ExtWeight, Solution)>, OracleError> {
    check_terminals(g, s, t)?;
    let adj = g.adjacency();
    let mut out = Vec::new();
    let mut on_path = vec![false; g.n() as usize + 1];
    let mut stack: Vec<u32> = Vec::new();
    struct Walk<'a> {
        g: &'a WeightedGraph,
        adj: &'a [Vec<(u32, u32)>],
        t: u32,
        limit: usize,
    }
    fn dfs(
        w: &Walk,
        at: u32,
        on_path: &mut [bool],
        stack: &mut Vec<u32>,
        out: &mut Vec<(ExtWeight, Solution)>,
    ) -> Result<(), OracleError> {
        if at == w.t {
            if out.len() == w.limit {
                return Err(OracleError::LimitExceeded { limit: w.limit });
            }
            let mut total = 0i64;
            for &e in stack.iter() {
                total = total
                    .checked_add(w.g.weight(FeatureId::edge(e)))
                    .ok_or_else(|| OracleError::Params("weight overflow".into()))?;
            }
            let set = stack.iter().map(|&e| FeatureId::edge(e)).collect();
            out.push((ExtWeight::Finite(total), Solution::new(vec![set])));
            return Ok(());
        }
        for &(next, e) in &w.adj[at as usize] {
            if w.g.is_directed() && w.g.endpoints(e).0 != at {
                continue;
            }
            if on_path[next as usize] {
                continue;
            }
            on_path[next as usize] = true;
            stack.push(e);
            dfs(w, next, on_path, stack, out)?;
            stack.pop();
            on_path[next as usize] = false;
        }
        Ok(())
    }
    let walk = Walk { g, adj: &adj, t, limit };
    on_path[s as usize] = true;
    dfs(&walk, s, &mut on_path, &mut stack, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, Polarity};
    use proptest::prelude::*;

    fn k3() -> WeightedGraph {
        load_graph("p kbest 3 3 0\ne 1 2 1\ne 2 3 1\ne 1 3 5\n").unwrap()
    }

    fn edges(ids: &[u32]) -> Solution {
        Solution::new(vec![ids.iter().map(|&e| FeatureId::edge(e)).collect()])
    }

    fn run(g: &WeightedGraph, p: Predicate, cs: &[Constraint]) -> Vec<(ExtWeight, Solution)> {
        let c = CostModel::from_graph(g, &[p.kind()]);
        enumerate_sorted(g, &[p], &c, cs).unwrap()
    }

    #[test]
    fn triangle_paths() {
        let g = k3();
        let p = Predicate::SimplePath { source: 1, target: 3 };
        assert_eq!(
            run(&g, p, &[]),
            vec![
                (ExtWeight::Finite(2), edges(&[1, 2])),
                (ExtWeight::Finite(5), edges(&[3]))
            ]
        );
        let forced = Constraint {
            feature: FeatureId::edge(3),
            var: 0,
            polarity: Polarity::Forced,
        };
        assert_eq!(run(&g, p, &[forced]), vec![(ExtWeight::Finite(5), edges(&[3]))]);
        assert_eq!(enumerate_paths(&g, 1, 3, 10).unwrap(), run(&g, p, &[]));
    }

    #[test]
    fn fixtures() {
        let single = load_graph("p kbest 1 0 0\n").unwrap();
        assert_eq!(
            run(&single, Predicate::SpanningTree, &[]),
            vec![(ExtWeight::Finite(0), Solution::empty(1))]
        );
        let k4 = load_graph("p kbest 4 6 0\ne 1 2 1\ne 1 3 1\ne 1 4 1\ne 2 3 1\ne 2 4 1\ne 3 4 1\n").unwrap();
        assert_eq!(run(&k4, Predicate::SpanningTree, &[]).len(), 16);
        assert_eq!(run(&k4, Predicate::PerfectMatching, &[]).len(), 3);
        // covers of K4 leave out at most one vertex
        assert_eq!(run(&k4, Predicate::VertexCover, &[]).len(), 5);
        let spanning: Vec<i64> = run(&k3(), Predicate::SpanningTree, &[])
            .into_iter()
            .map(|(v, _)| v.finite().unwrap())
            .collect();
        assert_eq!(spanning, vec![2, 6, 6]);
        let p3 = load_graph("p kbest 3 2 0\ne 1 2 1\ne 2 3 1\n").unwrap();
        assert!(run(&p3, Predicate::PerfectMatching, &[]).is_empty());
        assert_eq!(enumerate_paths(&p3, 1, 3, 10).unwrap().len(), 1);
    }

    #[test]
    fn directed_two_cycle() {
        let g = load_graph("p kbest 2 2 1\ne 1 2 1\ne 2 1 1\n").unwrap();
        assert_eq!(
            enumerate_paths(&g, 1, 2, 10).unwrap(),
            vec![(ExtWeight::Finite(1), edges(&[1]))]
        );
    }

    #[test]
    fn errors() {
        let g = k3();
        assert!(matches!(enumerate_paths(&g, 1, 1, 10), Err(OracleError::Params(_))));
        assert!(matches!(
            enumerate_paths(&g, 1, 3, 1),
            Err(OracleError::LimitExceeded { limit: 1 })
        ));
        let big = WeightedGraph::new(2, false, (0..25).map(|_| (1, 2, 1)).collect()).unwrap();
        let c = CostModel::from_graph(&big, &[FeatureKind::Edge]);
        assert!(matches!(
            enumerate_sorted(&big, &[Predicate::SpanningTree], &c, &[]),
            Err(OracleError::TooLarge { bits: 25 })
        ));
    }

    #[test]
    fn multi_variable_product() {
        let g = k3();
        let c = CostModel::from_graph(&g, &[FeatureKind::Edge, FeatureKind::Vertex]);
        let all = enumerate_sorted(&g, &[Predicate::SpanningTree, Predicate::VertexCover], &c, &[]).unwrap();
        assert_eq!(all.len(), 12);
    }

    proptest! {
        #[test]
        fn path_enumerations_agree(
            n in 2u32..7,
            directed: bool,
            raw in proptest::collection::vec((1u32..7, 1u32..7, -5i64..10), 0..12),
        ) {
            let edges: Vec<(u32, u32, i64)> = raw.into_iter().filter(|&(a, b, _)| a <= n && b <= n).collect();
            let g = WeightedGraph::new(n, directed, edges).unwrap();
            let p = Predicate::SimplePath { source: 1, target: n };
            let c = CostModel::from_graph(&g, &[FeatureKind::Edge]);
            let a = enumerate_sorted(&g, &[p], &c, &[]).unwrap();
            let b = enumerate_paths(&g, 1, n, 1 << 20).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
