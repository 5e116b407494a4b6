//! Full binary parse trees over the sourced-hypergraph algebra.
//!
//! Positions are 0-based in memory and printed 1-based. `Fuse` and `Permute`
//! carry a constant second child (`Const1` resp. `Const0`) so that every
//! inner node is binary.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::AlgebraError;
use crate::graph::{FeatureId, FeatureKind, WeightedGraph};
use crate::treedec::{validate, ShallowDecomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    /// Directed edge from the first source to the second.
    Fwd,
    /// Directed edge from the second source to the first.
    Bwd,
    Undir,
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeLabel::Fwd => "fwd",
            EdgeLabel::Bwd => "bwd",
            EdgeLabel::Undir => "undir",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    Const0,
    Const1,
    /// A single order-2 edge whose two ends are its sources.
    ConstEdge {
        label: EdgeLabel,
    },
    /// Disjoint union; sources are concatenated.
    Disjoint {
        r1: usize,
        r2: usize,
    },
    /// Fuses source `j` into source `i` (`i < j < r`); the order stays `r`
    /// and position `j` keeps pointing at the fused vertex.
    Fuse {
        i: usize,
        j: usize,
        r: usize,
    },
    /// Output position `k` is child position `alpha[k]`; child positions not
    /// in the range of `alpha` are forgotten.
    Permute {
        alpha: Vec<usize>,
        r: usize,
    },
}

impl Operator {
    pub fn is_leaf(&self) -> bool {
        matches!(self, Operator::Const0 | Operator::Const1 | Operator::ConstEdge { .. })
    }

    /// Order of the hypergraph this operator produces.
    pub fn order(&self) -> usize {
        match self {
            Operator::Const0 => 0,
            Operator::Const1 => 1,
            Operator::ConstEdge { .. } => 2,
            Operator::Disjoint { r1, r2 } => r1 + r2,
            Operator::Fuse { r, .. } => *r,
            Operator::Permute { alpha, .. } => alpha.len(),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::Const0 => write!(f, "const0"),
            Operator::Const1 => write!(f, "const1"),
            Operator::ConstEdge { label } => write!(f, "edge[{label}]"),
            Operator::Disjoint { r1, r2 } => write!(f, "disjoint({r1},{r2})"),
            Operator::Fuse { i, j, r } => write!(f, "fuse({},{},{r})", i + 1, j + 1),
            Operator::Permute { alpha, r } => {
                let a: Vec<String> = alpha.iter().map(|x| (x + 1).to_string()).collect();
                write!(f, "permute([{}],{r})", a.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseNode {
    pub op: Operator,
    /// For `Fuse` and `Permute` the first child is the proper one.
    pub children: Option<[usize; 2]>,
    pub order: usize,
    /// Graph vertex behind every source position.
    pub source_map: Vec<u32>,
    pub introduced: Option<FeatureId>,
}

impl ParseNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Nodes are stored children-first, so a forward scan is a bottom-up pass.
#[derive(Clone, Debug)]
pub struct ParseTree {
    nodes: Vec<ParseNode>,
    root: usize,
    depth: usize,
    max_order: usize,
    order_bound: usize,
    introducer: BTreeMap<FeatureId, usize>,
}

impl ParseTree {
    pub fn nodes(&self) -> &[ParseNode] {
        &self.nodes
    }

    pub fn node(&self, u: usize) -> &ParseNode {
        &self.nodes[u]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// `R` with `order < R` for every node. A folded bag of size `b` meets an
    /// operand of order at most `max(b, 2)`, so `R = b + max(b, 2) + 1`.
    pub fn order_bound(&self) -> usize {
        self.order_bound
    }

    pub fn introducers(&self) -> &BTreeMap<FeatureId, usize> {
        &self.introducer
    }

    /// Indented text, one node per line: operator, order, 1-based sources.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(self.root, 0usize)];
        while let Some((u, indent)) = stack.pop() {
            let n = &self.nodes[u];
            let src: Vec<String> = n.source_map.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "{:width$}#{u} {} order={} src=[{}]",
                "",
                n.op,
                n.order,
                src.join(","),
                width = 2 * indent
            ));
            if let Some(x) = n.introduced {
                out.push_str(&format!(" introduces={x}"));
            }
            out.push('\n');
            if let Some([a, b]) = n.children {
                stack.push((b, indent + 1));
                stack.push((a, indent + 1));
            }
        }
        out
    }
}

/// The unique leaf introducing `x`.
pub fn introducing_leaf(t: &ParseTree, x: FeatureId) -> Result<usize, AlgebraError> {
    t.introducer.get(&x).copied().ok_or(AlgebraError::UnknownFeature(x))
}

struct Builder {
    nodes: Vec<ParseNode>,
    introducer: BTreeMap<FeatureId, usize>,
}

/// A sub-result: its root node and the vertex at each (distinct) position.
struct Fragment {
    node: usize,
    src: Vec<u32>,
}

impl Builder {
    fn push(
        &mut self,
        op: Operator,
        children: Option<[usize; 2]>,
        source_map: Vec<u32>,
        introduced: Option<FeatureId>,
    ) -> usize {
        let order = op.order();
        debug_assert_eq!(order, source_map.len());
        self.nodes.push(ParseNode {
            op,
            children,
            order,
            source_map,
            introduced,
        });
        let u = self.nodes.len() - 1;
        if let Some(x) = introduced {
            self.introducer.insert(x, u);
        }
        u
    }

    fn const1(&mut self, v: u32, introduces: bool) -> usize {
        let intro = introduces.then(|| FeatureId::vertex(v));
        self.push(Operator::Const1, None, vec![v], intro)
    }

    fn fuse(&mut self, proper: usize, i: usize, j: usize, introduces: bool) -> usize {
        let src = self.nodes[proper].source_map.clone();
        let r = src.len();
        let v = src[i];
        debug_assert_eq!(v, src[j]);
        let c = self.const1(v, introduces);
        self.push(Operator::Fuse { i, j, r }, Some([proper, c]), src, None)
    }

    fn permute(&mut self, proper: usize, alpha: Vec<usize>) -> usize {
        let child = &self.nodes[proper].source_map;
        let r = child.len();
        let src = alpha.iter().map(|&a| child[a]).collect();
        let c = self.push(Operator::Const0, None, vec![], None);
        self.push(Operator::Permute { alpha, r }, Some([proper, c]), src, None)
    }
}

/// Builds the parse tree of `g` along a shallow decomposition.
///
/// Every bag becomes a chain of gadgets: its operands (child fragments, then
/// the edges whose topmost covering bag it is, then dummy `Const1` copies)
/// are joined one at a time with `Disjoint`, repeated vertices are fused, and
/// vertices with no later use that leave the decomposition here are dropped.
/// A vertex is introduced by the `Const1` of its last fuse in its topmost bag.
pub fn build_parse_tree(sd: &ShallowDecomposition, g: &WeightedGraph) -> Result<ParseTree, AlgebraError> {
    let report = validate(&sd.td, g);
    if !report.is_valid() {
        let msg: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(AlgebraError::InvalidDecomposition(msg.join("; ")));
    }
    let nb = sd.td.bags.len();
    let parents = sd.parents();
    let mut depth = vec![0usize; nb];
    let mut order = vec![sd.root()];
    let mut i = 0;
    while i < order.len() {
        let b = order[i];
        for &c in &sd.children[b] {
            depth[c] = depth[b] + 1;
            order.push(c);
        }
        i += 1;
    }

    let n = g.n() as usize;
    let mut top = vec![usize::MAX; n + 1];
    for b in 0..nb {
        for &v in sd.bag(b) {
            let t = &mut top[v as usize];
            if *t == usize::MAX || depth[b] < depth[*t] {
                *t = b;
            }
        }
    }
    let mut edges_at: Vec<Vec<u32>> = vec![Vec::new(); nb];
    for (e, t, h) in g.edges() {
        let (a, b) = (top[t as usize], top[h as usize]);
        let bag = if depth[a] >= depth[b] { a } else { b };
        edges_at[bag].push(e);
    }

    let mut builder = Builder {
        nodes: Vec::new(),
        introducer: BTreeMap::new(),
    };
    let mut frags: Vec<Option<Fragment>> = (0..nb).map(|_| None).collect();
    for &b in order.iter().rev() {
        let interface: Vec<u32> = match parents[b] {
            Some(p) => sd
                .bag(b)
                .iter()
                .copied()
                .filter(|v| sd.bag(p).binary_search(v).is_ok())
                .collect(),
            None => Vec::new(),
        };
        let mut operands: Vec<Fragment> = Vec::new();
        for &c in &sd.children[b] {
            operands.push(frags[c].take().expect("children are built first"));
        }
        for &e in &edges_at[b] {
            let (t, h) = g.endpoints(e);
            let label = if !g.is_directed() {
                Operator::ConstEdge {
                    label: EdgeLabel::Undir,
                }
            } else if t <= h {
                Operator::ConstEdge { label: EdgeLabel::Fwd }
            } else {
                Operator::ConstEdge { label: EdgeLabel::Bwd }
            };
            let src = vec![t.min(h), t.max(h)];
            let u = builder.push(label, None, src.clone(), Some(FeatureId::edge(e)));
            operands.push(Fragment { node: u, src });
        }
        let mut copies: BTreeMap<u32, usize> = BTreeMap::new();
        for op in &operands {
            for &v in &op.src {
                *copies.entry(v).or_default() += 1;
            }
        }
        for &v in sd.bag(b) {
            let forgotten = top[v as usize] == b;
            let need = if forgotten { 2 } else { 1 };
            let have = copies.get(&v).copied().unwrap_or(0);
            for _ in have..need {
                let u = builder.const1(v, false);
                operands.push(Fragment { node: u, src: vec![v] });
            }
            copies.insert(v, have.max(need));
        }
        let mut last_use: BTreeMap<u32, usize> = BTreeMap::new();
        for (k, op) in operands.iter().enumerate() {
            for &v in &op.src {
                last_use.insert(v, k);
            }
        }

        let mut acc: Option<Fragment> = None;
        for (k, op) in operands.into_iter().enumerate() {
            // positions of the joined hypergraph, possibly with repeats
            let (mut node, mut src) = match acc.take() {
                None => (op.node, op.src),
                Some(a) => {
                    let r1 = a.src.len();
                    let r2 = op.src.len();
                    let mut src = a.src;
                    src.extend(op.src.iter().copied());
                    let u = builder.push(
                        Operator::Disjoint { r1, r2 },
                        Some([a.node, op.node]),
                        src.clone(),
                        None,
                    );
                    (u, src)
                }
            };
            let mut first: BTreeMap<u32, usize> = BTreeMap::new();
            let mut dup = false;
            for p in 0..src.len() {
                let v = src[p];
                match first.get(&v) {
                    None => {
                        first.insert(v, p);
                    }
                    Some(&q) => {
                        dup = true;
                        let left = copies.get_mut(&v).unwrap();
                        *left -= 1;
                        // the last fuse of a vertex in its topmost bag introduces it
                        let intro = *left == 1 && top[v as usize] == b;
                        node = builder.fuse(node, q, p, intro);
                    }
                }
            }
            let mut keep = Vec::new();
            for p in 0..src.len() {
                let v = src[p];
                if first[&v] != p {
                    continue;
                }
                if top[v as usize] == b && last_use[&v] <= k {
                    continue;
                }
                keep.push(p);
            }
            if dup || keep.len() != src.len() {
                node = builder.permute(node, keep.clone());
                src = keep.iter().map(|&p| src[p]).collect();
            }
            acc = Some(Fragment { node, src });
        }
        let frag = match acc {
            None => {
                let u = builder.push(Operator::Const0, None, vec![], None);
                Fragment { node: u, src: vec![] }
            }
            Some(a) if a.src != interface => {
                let alpha: Vec<usize> = interface
                    .iter()
                    .map(|v| a.src.iter().position(|x| x == v).expect("interface vertex present"))
                    .collect();
                let u = builder.permute(a.node, alpha);
                Fragment {
                    node: u,
                    src: interface.clone(),
                }
            }
            Some(a) => a,
        };
        frags[b] = Some(frag);
    }

    let root = frags[sd.root()].take().unwrap().node;
    let nodes = builder.nodes;
    let mut height = vec![0usize; nodes.len()];
    for (u, node) in nodes.iter().enumerate() {
        if let Some([a, b]) = node.children {
            height[u] = 1 + height[a].max(height[b]);
        }
    }
    let max_bag = sd.td.bags.iter().map(Vec::len).max().unwrap_or(0);
    let max_order = nodes.iter().map(|n| n.order).max().unwrap_or(0);
    let tree = ParseTree {
        depth: height[root],
        root,
        max_order,
        order_bound: max_bag + max_bag.max(2) + 1,
        introducer: builder.introducer,
        nodes,
    };
    debug_assert!(tree.max_order < tree.order_bound);
    Ok(tree)
}

/// A concrete sourced hypergraph with named vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    /// Graph vertex id of each vertex.
    pub names: Vec<u32>,
    /// Edge id, label, and attached vertices.
    pub edges: Vec<(u32, EdgeLabel, Vec<usize>)>,
    pub sources: Vec<usize>,
}

/// Applies the operator semantics bottom-up. Used as a reference in tests.
pub fn evaluate_hypergraph(t: &ParseTree) -> Result<Hypergraph, AlgebraError> {
    let mut results: Vec<Option<Hypergraph>> = vec![None; t.nodes.len()];
    let bad = |node: usize, msg: &str| AlgebraError::Malformed {
        node,
        msg: msg.to_string(),
    };
    for (u, node) in t.nodes.iter().enumerate() {
        let h = match (&node.op, node.children) {
            (Operator::Const0, None) => Hypergraph {
                names: vec![],
                edges: vec![],
                sources: vec![],
            },
            (Operator::Const1, None) => Hypergraph {
                names: vec![*node.source_map.first().ok_or_else(|| bad(u, "const1 without source"))?],
                edges: vec![],
                sources: vec![0],
            },
            (Operator::ConstEdge { label }, None) => {
                let Some(FeatureId {
                    kind: FeatureKind::Edge,
                    index,
                }) = node.introduced
                else {
                    return Err(bad(u, "edge leaf without edge id"));
                };
                if node.source_map.len() != 2 {
                    return Err(bad(u, "edge leaf of order other than 2"));
                }
                Hypergraph {
                    names: node.source_map.clone(),
                    edges: vec![(index, *label, vec![0, 1])],
                    sources: vec![0, 1],
                }
            }
            (op, Some([a, b])) => {
                let left = results[a].take().ok_or_else(|| bad(u, "child used twice"))?;
                let right = results[b].take().ok_or_else(|| bad(u, "child used twice"))?;
                apply(u, op, left, right)?
            }
            _ => return Err(bad(u, "operator arity mismatch")),
        };
        if h.sources.len() != node.order {
            return Err(bad(u, "order differs from source count"));
        }
        for (p, &s) in h.sources.iter().enumerate() {
            if h.names[s] != node.source_map[p] {
                return Err(bad(u, "source map disagrees with the hypergraph"));
            }
        }
        for (_, _, att) in &h.edges {
            if att.len() != 2 {
                return Err(bad(u, "edge attached to the wrong number of vertices"));
            }
        }
        results[u] = Some(h);
    }
    results[t.root].take().ok_or(AlgebraError::Malformed {
        node: t.root,
        msg: "root missing".into(),
    })
}

fn apply(u: usize, op: &Operator, left: Hypergraph, right: Hypergraph) -> Result<Hypergraph, AlgebraError> {
    let bad = |msg: &str| AlgebraError::Malformed {
        node: u,
        msg: msg.to_string(),
    };
    let disjoint = |mut a: Hypergraph, b: Hypergraph| {
        let off = a.names.len();
        a.names.extend(b.names);
        a.edges.extend(
            b.edges
                .into_iter()
                .map(|(e, l, att)| (e, l, att.into_iter().map(|x| x + off).collect())),
        );
        a.sources.extend(b.sources.into_iter().map(|s| s + off));
        a
    };
    // merges vertex `from` into `into`, renumbering the rest
    let merge = |mut h: Hypergraph, into: usize, from: usize| -> Result<Hypergraph, AlgebraError> {
        if into == from {
            return Ok(h);
        }
        if h.names[into] != h.names[from] {
            return Err(bad("fusing vertices with different names"));
        }
        let fix = |x: usize| {
            let x = if x == from { into } else { x };
            if x > from {
                x - 1
            } else {
                x
            }
        };
        h.names.remove(from);
        for (_, _, att) in &mut h.edges {
            for x in att.iter_mut() {
                *x = fix(*x);
            }
        }
        for s in &mut h.sources {
            *s = fix(*s);
        }
        Ok(h)
    };
    match op {
        Operator::Disjoint { r1, r2 } => {
            if left.sources.len() != *r1 || right.sources.len() != *r2 {
                return Err(bad("disjoint orders mismatch"));
            }
            Ok(disjoint(left, right))
        }
        Operator::Fuse { i, j, r } => {
            if left.sources.len() != *r || right.sources.len() != 1 || !(i < j && j < r) {
                return Err(bad("fuse arguments mismatch"));
            }
            let h = disjoint(left, right);
            let extra = h.sources[*r];
            let (si, sj) = (h.sources[*i], h.sources[*j]);
            let h = merge(h, si, sj)?;
            // the const1 vertex follows as well
            let si = h.sources[*i];
            let extra = if extra > sj { extra - 1 } else { extra };
            let mut h = merge(h, si.min(extra), si.max(extra))?;
            h.sources.truncate(*r);
            Ok(h)
        }
        Operator::Permute { alpha, r } => {
            if left.sources.len() != *r || !right.sources.is_empty() || alpha.iter().any(|&a| a >= *r) {
                return Err(bad("permute arguments mismatch"));
            }
            let mut h = disjoint(left, right);
            h.sources = alpha.iter().map(|&a| h.sources[a]).collect();
            Ok(h)
        }
        _ => Err(bad("leaf operator with children")),
    }
}

/// Checks that `h` is `g` with identical vertex and edge ids.
pub fn matches_graph(h: &Hypergraph, g: &WeightedGraph) -> Result<(), String> {
    let mut names = h.names.clone();
    names.sort_unstable();
    let expected: Vec<u32> = (1..=g.n()).collect();
    if names != expected {
        return Err(format!("vertex names {names:?} differ from 1..={}", g.n()));
    }
    if !h.sources.is_empty() {
        return Err("root has sources".into());
    }
    let mut edges: Vec<(u32, EdgeLabel, u32, u32)> = h
        .edges
        .iter()
        .map(|(e, l, att)| (*e, *l, h.names[att[0]], h.names[att[1]]))
        .collect();
    edges.sort_unstable();
    if edges.len() != g.m() as usize {
        return Err(format!("{} edges instead of {}", edges.len(), g.m()));
    }
    for (k, (e, label, a, b)) in edges.into_iter().enumerate() {
        if e != k as u32 + 1 {
            return Err(format!("edge ids not 1..={}", g.m()));
        }
        let (t, hd) = g.endpoints(e);
        let ok = match label {
            EdgeLabel::Undir => !g.is_directed() && (a, b) == (t.min(hd), t.max(hd)),
            EdgeLabel::Fwd => g.is_directed() && (a, b) == (t, hd),
            EdgeLabel::Bwd => g.is_directed() && (b, a) == (t, hd),
        };
        if !ok {
            return Err(format!("edge e{e} attached as {label} ({a},{b})"));
        }
    }
    Ok(())
}
