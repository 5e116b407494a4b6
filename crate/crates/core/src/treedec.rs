//! Tree decompositions: PACE `.td` I/O, validation, a min-fill heuristic,
//! and a balancer producing binary decompositions of logarithmic depth.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::TdError;
use crate::graph::WeightedGraph;

/// Depth constant used by [`balance`]: `depth ≤ C_DEPTH · ⌈log2(bags + 1)⌉`.
pub const C_DEPTH: usize = 4;

/// Bags are indexed from 0 internally and written 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomposition {
    /// Number of graph vertices the decomposition talks about.
    pub n_vertices: u32,
    /// Sorted vertex lists.
    pub bags: Vec<Vec<u32>>,
    /// Tree edges between bag indices.
    pub tree_edges: Vec<(usize, usize)>,
    pub root: Option<usize>,
}

impl TreeDecomposition {
    pub fn new(n_vertices: u32, bags: Vec<Vec<u32>>, tree_edges: Vec<(usize, usize)>) -> Self {
        let bags = bags
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        TreeDecomposition {
            n_vertices,
            bags,
            tree_edges,
            root: None,
        }
    }

    /// Largest bag size minus one (0 for decompositions with only empty bags).
    pub fn width(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0).saturating_sub(1)
    }

    pub fn num_bags(&self) -> usize {
        self.bags.len()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.tree_edges {
            if a < self.bags.len() && b < self.bags.len() {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// A validity condition violated by a decomposition, with a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NotATree(String),
    VertexOutOfRange {
        bag: usize,
        vertex: u32,
    },
    MissingVertex(u32),
    UncoveredEdge {
        edge: u32,
        tail: u32,
        head: u32,
    },
    /// Two bags containing `vertex` whose tree path leaves the vertex.
    Disconnected {
        vertex: u32,
        bag_a: usize,
        bag_b: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotATree(msg) => write!(f, "not a tree: {msg}"),
            Violation::VertexOutOfRange { bag, vertex } => {
                write!(f, "bag {} holds vertex {vertex} out of range", bag + 1)
            }
            Violation::MissingVertex(v) => write!(f, "vertex {v} in no bag"),
            Violation::UncoveredEdge { edge, tail, head } => {
                write!(f, "edge e{edge} ({tail},{head}) uncovered")
            }
            Violation::Disconnected { vertex, bag_a, bag_b } => write!(
                f,
                "bags containing vertex {vertex} are disconnected (bags {} and {})",
                bag_a + 1,
                bag_b + 1
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub width: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the tree shape and the three decomposition conditions.
pub fn validate(td: &TreeDecomposition, g: &WeightedGraph) -> ValidationReport {
    let mut violations = Vec::new();
    let nb = td.bags.len();
    if nb == 0 {
        violations.push(Violation::NotATree("no bags".into()));
    }
    if td.tree_edges.iter().any(|&(a, b)| a >= nb || b >= nb || a == b) {
        violations.push(Violation::NotATree("edge with an unknown bag or a loop".into()));
    } else if nb > 0 {
        if td.tree_edges.len() != nb - 1 {
            violations.push(Violation::NotATree(format!(
                "{} bags need {} edges, found {}",
                nb,
                nb - 1,
                td.tree_edges.len()
            )));
        } else {
            let adj = td.adjacency();
            let mut seen = vec![false; nb];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            if let Some(b) = seen.iter().position(|s| !s) {
                violations.push(Violation::NotATree(format!("bag {} unreachable", b + 1)));
            }
        }
    }

    let n = g.n();
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); n as usize + 1];
    for (b, bag) in td.bags.iter().enumerate() {
        for &v in bag {
            if v == 0 || v > n {
                violations.push(Violation::VertexOutOfRange { bag: b, vertex: v });
            } else {
                holders[v as usize].push(b);
            }
        }
    }
    for v in 1..=n {
        if holders[v as usize].is_empty() {
            violations.push(Violation::MissingVertex(v));
        }
    }
    for (e, t, h) in g.edges() {
        let covered = holders[t as usize]
            .iter()
            .any(|&b| td.bags[b].binary_search(&h).is_ok());
        if !covered && !holders[t as usize].is_empty() && !holders[h as usize].is_empty() {
            violations.push(Violation::UncoveredEdge {
                edge: e,
                tail: t,
                head: h,
            });
        }
    }

    let tree_ok = !violations.iter().any(|v| matches!(v, Violation::NotATree(_)));
    if tree_ok {
        // Count connected pieces of the subgraph induced by each vertex's bags.
        let adj = td.adjacency();
        let mut mark = vec![0u32; nb];
        for v in 1..=n {
            let hs = &holders[v as usize];
            if hs.len() < 2 {
                continue;
            }
            for &b in hs {
                mark[b] = v;
            }
            let mut reached = vec![hs[0]];
            let mut stack = vec![hs[0]];
            let mut visited = BTreeSet::from([hs[0]]);
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if mark[y] == v && visited.insert(y) {
                        reached.push(y);
                        stack.push(y);
                    }
                }
            }
            if reached.len() != hs.len() {
                let other = *hs.iter().find(|b| !visited.contains(b)).unwrap();
                violations.push(Violation::Disconnected {
                    vertex: v,
                    bag_a: hs[0],
                    bag_b: other,
                });
            }
        }
    }

    ValidationReport {
        violations,
        width: td.width(),
    }
}

/// Parses a PACE 2017 `.td` file.
pub fn load_td(text: &str) -> Result<TreeDecomposition, TdError> {
    let mut header: Option<(usize, usize, u32)> = None;
    let mut bags: Vec<Option<Vec<u32>>> = Vec::new();
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let err = |msg: String| TdError::Parse { line, msg };
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let Some(&first) = toks.first() else { continue };
        match first {
            "c" => continue,
            "s" => {
                if header.is_some() {
                    return Err(err("duplicate header".into()));
                }
                if toks.len() != 5 || toks[1] != "td" {
                    return Err(err("expected `s td <bags> <max_bag> <n>`".into()));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number `{s}`")));
                let nb = parse(toks[2])?;
                let mb = parse(toks[3])?;
                let n = parse(toks[4])? as u32;
                bags = vec![None; nb];
                header = Some((nb, mb, n));
            }
            "b" => {
                let Some((nb, mb, _)) = header else {
                    return Err(err("bag before header".into()));
                };
                if toks.len() < 2 {
                    return Err(err("bag line without id".into()));
                }
                let id: usize = toks[1].parse().map_err(|_| err("bad bag id".into()))?;
                if id == 0 || id > nb {
                    return Err(err(format!("bag id {id} out of range 1..={nb}")));
                }
                if bags[id - 1].is_some() {
                    return Err(err(format!("bag {id} defined twice")));
                }
                let mut verts = Vec::with_capacity(toks.len() - 2);
                for t in &toks[2..] {
                    verts.push(t.parse::<u32>().map_err(|_| err(format!("bad vertex `{t}`")))?);
                }
                if verts.len() > mb {
                    return Err(err(format!("bag {id} larger than announced maximum {mb}")));
                }
                verts.sort_unstable();
                verts.dedup();
                bags[id - 1] = Some(verts);
            }
            _ => {
                let Some((nb, _, _)) = header else {
                    return Err(err("edge before header".into()));
                };
                if toks.len() != 2 {
                    return Err(err("expected `<bag> <bag>`".into()));
                }
                let a: usize = toks[0].parse().map_err(|_| err("bad bag id".into()))?;
                let b: usize = toks[1].parse().map_err(|_| err("bad bag id".into()))?;
                if a == 0 || b == 0 || a > nb || b > nb {
                    return Err(err(format!("tree edge {a} {b} out of range")));
                }
                edges.push((a - 1, b - 1));
            }
        }
    }
    let Some((nb, _, n)) = header else {
        return Err(TdError::Parse {
            line: text.lines().count().max(1),
            msg: "missing header".into(),
        });
    };
    let found = bags.iter().filter(|b| b.is_some()).count();
    if found != nb {
        return Err(TdError::Parse {
            line: text.lines().count().max(1),
            msg: format!("header announces {nb} bags, found {found}"),
        });
    }
    Ok(TreeDecomposition {
        n_vertices: n,
        bags: bags.into_iter().map(Option::unwrap).collect(),
        tree_edges: edges,
        root: None,
    })
}

/// Writes a PACE 2017 `.td` file.
pub fn save_td(td: &TreeDecomposition) -> String {
    let max_bag = td.bags.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = format!("s td {} {} {}\n", td.bags.len(), max_bag, td.n_vertices);
    for (i, bag) in td.bags.iter().enumerate() {
        out.push_str(&format!("b {}", i + 1));
        for v in bag {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    for &(a, b) in &td.tree_edges {
        out.push_str(&format!("{} {}\n", a + 1, b + 1));
    }
    out
}

/// Min-fill elimination ordering on the undirected shadow.
///
/// Components are decomposed independently and hung below a chain of empty
/// bags. Bags contained in a neighbouring bag are merged away.
pub fn heuristic_decomposition(g: &WeightedGraph) -> TreeDecomposition {
    let n = g.n() as usize;
    let mut adj: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n + 1];
    for (_, t, h) in g.edges() {
        if t != h {
            adj[t as usize].insert(h);
            adj[h as usize].insert(t);
        }
    }
    let fill_of = |adj: &[BTreeSet<u32>], v: usize| -> usize {
        let nb: Vec<u32> = adj[v].iter().copied().collect();
        let mut missing = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !adj[a as usize].contains(&b) {
                    missing += 1;
                }
            }
        }
        missing
    };

    let mut fill = vec![0usize; n + 1];
    let mut queue: BTreeSet<(usize, u32)> = BTreeSet::new();
    for v in 1..=n {
        fill[v] = fill_of(&adj, v);
        queue.insert((fill[v], v as u32));
    }
    let mut eliminated = vec![false; n + 1];
    let mut order_pos = vec![0usize; n + 1];
    let mut bag_of: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    let mut step = 0;
    while let Some((_, v)) = queue.pop_first() {
        let v = v as usize;
        eliminated[v] = true;
        order_pos[v] = step;
        step += 1;
        let nb: Vec<u32> = adj[v].iter().copied().collect();
        let mut bag = nb.clone();
        bag.push(v as u32);
        bag.sort_unstable();
        bag_of[v] = bag;
        for (i, &a) in nb.iter().enumerate() {
            adj[a as usize].remove(&(v as u32));
            for &b in &nb[i + 1..] {
                adj[a as usize].insert(b);
                adj[b as usize].insert(a);
            }
        }
        let mut dirty: BTreeSet<u32> = nb.iter().copied().collect();
        for &a in &nb {
            dirty.extend(adj[a as usize].iter().copied());
        }
        for x in dirty {
            let x = x as usize;
            if eliminated[x] {
                continue;
            }
            let f = fill_of(&adj, x);
            if f != fill[x] {
                queue.remove(&(fill[x], x as u32));
                fill[x] = f;
                queue.insert((f, x as u32));
            }
        }
    }

    // bag of v hangs below the bag of its earliest-eliminated later neighbour
    let mut parent: Vec<Option<usize>> = vec![None; n + 1];
    for v in 1..=n {
        parent[v] = bag_of[v]
            .iter()
            .map(|&u| u as usize)
            .filter(|&u| u != v)
            .min_by_key(|&u| order_pos[u]);
    }

    // merge bags contained in their parent or child
    let mut rep: Vec<usize> = (0..=n).collect();
    fn find(rep: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while rep[r] != r {
            r = rep[r];
        }
        let mut y = x;
        while rep[y] != r {
            let next = rep[y];
            rep[y] = r;
            y = next;
        }
        r
    }
    let mut vs: Vec<usize> = (1..=n).collect();
    vs.sort_by_key(|&v| order_pos[v]);
    for &v in &vs {
        if let Some(p) = parent[v] {
            let (a, b) = (find(&mut rep, v), find(&mut rep, p));
            if a == b {
                continue;
            }
            let sa: BTreeSet<u32> = bag_of[a].iter().copied().collect();
            let sb: BTreeSet<u32> = bag_of[b].iter().copied().collect();
            if sa.is_subset(&sb) {
                rep[a] = b;
            } else if sb.is_subset(&sa) {
                rep[b] = a;
            }
        }
    }

    let mut index = vec![usize::MAX; n + 1];
    let mut bags = Vec::new();
    for &v in &vs {
        let r = find(&mut rep, v);
        if index[r] == usize::MAX {
            index[r] = bags.len();
            bags.push(bag_of[r].clone());
        }
    }
    let mut edges = BTreeSet::new();
    let mut roots = Vec::new();
    for &v in &vs {
        let a = index[find(&mut rep, v)];
        match parent[v] {
            Some(p) => {
                let b = index[find(&mut rep, p)];
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            None => roots.push(a),
        }
    }
    roots.sort_unstable();
    roots.dedup();
    let mut tree_edges: Vec<(usize, usize)> = edges.into_iter().collect();
    if roots.len() > 1 {
        let mut prev: Option<usize> = None;
        for &r in &roots {
            let hub = bags.len();
            bags.push(Vec::new());
            tree_edges.push((r, hub));
            if let Some(p) = prev {
                tree_edges.push((p, hub));
            }
            prev = Some(hub);
        }
    }
    if bags.is_empty() {
        bags.push(Vec::new());
    }
    TreeDecomposition {
        n_vertices: g.n(),
        bags,
        tree_edges,
        root: None,
    }
}

/// A rooted binary decomposition with recorded depth and width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShallowDecomposition {
    /// Rooted at bag 0; bags are numbered in breadth-first order.
    pub td: TreeDecomposition,
    pub children: Vec<Vec<usize>>,
    pub depth: usize,
    pub width: usize,
}

impl ShallowDecomposition {
    pub fn root(&self) -> usize {
        0
    }

    pub fn bag(&self, b: usize) -> &[u32] {
        &self.td.bags[b]
    }

    /// Parent of every bag (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.td.bags.len()];
        for (b, cs) in self.children.iter().enumerate() {
            for &c in cs {
                p[c] = Some(b);
            }
        }
        p
    }

    /// Roots an arbitrary valid decomposition at bag 0 without reshaping it.
    /// Fails if some bag would get more than two children.
    pub fn from_rooted(td: &TreeDecomposition) -> Result<Self, TdError> {
        let adj = td.adjacency();
        let root = td.root.unwrap_or(0);
        let mut order = vec![root];
        let mut parent = vec![usize::MAX; td.bags.len()];
        parent[root] = root;
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            for &y in &adj[x] {
                if parent[y] == usize::MAX {
                    parent[y] = x;
                    order.push(y);
                }
            }
            i += 1;
        }
        let mut new_id = vec![0; td.bags.len()];
        for (k, &x) in order.iter().enumerate() {
            new_id[x] = k;
        }
        let mut children = vec![Vec::new(); order.len()];
        let mut depth = vec![0usize; order.len()];
        let mut edges = Vec::new();
        for &x in order.iter().skip(1) {
            let (c, p) = (new_id[x], new_id[parent[x]]);
            children[p].push(c);
            depth[c] = depth[p] + 1;
            edges.push((p, c));
        }
        if children.iter().any(|c| c.len() > 2) {
            return Err(TdError::Invalid("bag with more than two children".into()));
        }
        let bags = order.iter().map(|&x| td.bags[x].clone()).collect();
        let td = TreeDecomposition {
            n_vertices: td.n_vertices,
            bags,
            tree_edges: edges,
            root: Some(0),
        };
        Ok(ShallowDecomposition {
            width: td.width(),
            depth: depth.into_iter().max().unwrap_or(0),
            children,
            td,
        })
    }
}

/// `⌈log2(x)⌉` for `x ≥ 1`.
pub fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

struct Balancer<'a> {
    bags: &'a [Vec<u32>],
    adj: Vec<Vec<usize>>,
    // cluster membership stamp
    stamp: Vec<u32>,
    generation: u32,
    // scratch, reset to NONE after each use
    parent: Vec<usize>,
    size: Vec<usize>,
    owner: Vec<usize>,
    out_bags: Vec<Vec<u32>>,
    out_children: Vec<Vec<usize>>,
}

const NONE: usize = usize::MAX;

impl Balancer<'_> {
    fn new(bags: &[Vec<u32>], adj: Vec<Vec<usize>>) -> Balancer<'_> {
        let n = bags.len();
        Balancer {
            bags,
            adj,
            stamp: vec![0; n],
            generation: 0,
            parent: vec![NONE; n],
            size: vec![0; n],
            owner: vec![NONE; n],
            out_bags: Vec::new(),
            out_children: Vec::new(),
        }
    }

    fn separator(&self, a: usize, b: usize) -> Vec<u32> {
        let (x, y) = (&self.bags[a], &self.bags[b]);
        x.iter().filter(|v| y.binary_search(v).is_ok()).copied().collect()
    }

    fn mark(&mut self, cluster: &[usize]) -> u32 {
        self.generation += 1;
        for &x in cluster {
            self.stamp[x] = self.generation;
        }
        self.generation
    }

    /// BFS over the marked cluster from `root`, filling `self.parent`.
    fn bfs(&mut self, root: usize, g: u32) -> Vec<usize> {
        let mut order = vec![root];
        self.parent[root] = root;
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            for k in 0..self.adj[x].len() {
                let y = self.adj[x][k];
                if self.stamp[y] == g && self.parent[y] == NONE {
                    self.parent[y] = x;
                    order.push(y);
                }
            }
            i += 1;
        }
        order
    }

    fn clear_parents(&mut self, order: &[usize]) {
        for &x in order {
            self.parent[x] = NONE;
        }
    }

    /// Node minimizing the largest component left after its removal.
    fn centroid(&mut self, cluster: &[usize], g: u32) -> usize {
        let root = cluster[0];
        let order = self.bfs(root, g);
        for &x in order.iter().rev() {
            self.size[x] += 1;
            if x != root {
                let p = self.parent[x];
                self.size[p] += self.size[x];
            }
        }
        let total = order.len();
        let mut best = (NONE, NONE);
        for &x in &order {
            let mut worst = total - self.size[x];
            for &y in &self.adj[x] {
                if self.stamp[y] == g && y != root && self.parent[y] == x {
                    worst = worst.max(self.size[y]);
                }
            }
            if (worst, x) < best {
                best = (worst, x);
            }
        }
        for &x in &order {
            self.size[x] = 0;
        }
        self.clear_parents(&order);
        best.1
    }

    /// Where the paths from `a` and `b` to `c` meet, i.e. the projection of
    /// `c` onto the tree path between `a` and `b`.
    fn meeting_point(&mut self, c: usize, a: usize, b: usize, g: u32) -> usize {
        let order = self.bfs(c, g);
        let mut on_a = vec![a];
        let mut x = a;
        while x != c {
            x = self.parent[x];
            on_a.push(x);
        }
        on_a.sort_unstable();
        let mut y = b;
        while on_a.binary_search(&y).is_err() {
            y = self.parent[y];
        }
        self.clear_parents(&order);
        y
    }

    fn build(&mut self, cluster: Vec<usize>, boundary: Vec<(usize, usize)>) -> usize {
        let mut sep: BTreeSet<u32> = BTreeSet::new();
        for &(inside, outside) in &boundary {
            sep.extend(self.separator(inside, outside));
        }
        if cluster.len() == 1 {
            let x = cluster[0];
            let mut bag: BTreeSet<u32> = self.bags[x].iter().copied().collect();
            bag.extend(sep);
            return self.push(bag.into_iter().collect(), Vec::new());
        }

        let g = self.mark(&cluster);
        let mut c = self.centroid(&cluster, g);
        let mut att: Vec<usize> = boundary.iter().map(|b| b.0).collect();
        att.sort_unstable();
        att.dedup();
        debug_assert!(att.len() <= 2);
        if att.len() == 2 {
            // keep the split on the path between the two attachments
            c = self.meeting_point(c, att[0], att[1], g);
        }

        let mut bag: BTreeSet<u32> = self.bags[c].iter().copied().collect();
        bag.extend(sep);
        let bag: Vec<u32> = bag.into_iter().collect();

        let mut parts: Vec<(Vec<usize>, Vec<(usize, usize)>)> = Vec::new();
        let neighbors: Vec<usize> = self.adj[c].iter().copied().filter(|&y| self.stamp[y] == g).collect();
        for &start in &neighbors {
            let k = parts.len();
            let mut comp = vec![start];
            self.owner[start] = k;
            let mut i = 0;
            while i < comp.len() {
                let x = comp[i];
                for &y in &self.adj[x] {
                    if y != c && self.stamp[y] == g && self.owner[y] == NONE {
                        self.owner[y] = k;
                        comp.push(y);
                    }
                }
                i += 1;
            }
            parts.push((comp, vec![(start, c)]));
        }
        for &(inside, outside) in &boundary {
            if inside != c {
                parts[self.owner[inside]].1.push((inside, outside));
            }
        }
        for &x in &cluster {
            self.owner[x] = NONE;
        }
        drop(cluster);
        // larger components closer to the root
        parts.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0[0].cmp(&b.0[0])));
        let mut built: Vec<usize> = parts.into_iter().map(|(comp, bd)| self.build(comp, bd)).collect();
        match built.len() {
            0..=2 => self.push(bag, built),
            3 => {
                let rest = built.split_off(1);
                let mid = self.push(bag.clone(), rest);
                built.push(mid);
                self.push(bag, built)
            }
            _ => unreachable!("binarized tree has degree at most 3"),
        }
    }

    fn push(&mut self, bag: Vec<u32>, children: Vec<usize>) -> usize {
        self.out_bags.push(bag);
        self.out_children.push(children);
        self.out_bags.len() - 1
    }
}

/// Splits bags of degree > 3 into chains of copies so that every bag has at
/// most three tree neighbours.
fn binarize(td: &TreeDecomposition) -> (Vec<Vec<u32>>, Vec<Vec<usize>>) {
    let adj = td.adjacency();
    let mut bags = td.bags.clone();
    let mut new_adj: Vec<Vec<usize>> = vec![Vec::new(); bags.len()];
    for (x, nbrs) in adj.iter().enumerate() {
        if nbrs.len() <= 3 {
            for &y in nbrs {
                new_adj[x].push(y);
            }
        }
    }
    // `slot[x][i]` is the copy of x that takes neighbour adj[x][i]
    let mut slot: Vec<Vec<usize>> = adj.iter().enumerate().map(|(x, n)| vec![x; n.len()]).collect();
    for (x, nbrs) in adj.iter().enumerate() {
        let d = nbrs.len();
        if d <= 3 {
            continue;
        }
        let mut chain = vec![x];
        for _ in 0..d - 3 {
            bags.push(bags[x].clone());
            new_adj.push(Vec::new());
            chain.push(bags.len() - 1);
        }
        for w in chain.windows(2) {
            new_adj[w[0]].push(w[1]);
            new_adj[w[1]].push(w[0]);
        }
        for i in 0..d {
            let k = if i < 2 { 0 } else { (i - 1).min(chain.len() - 1) };
            slot[x][i] = chain[k];
        }
    }
    for (x, nbrs) in adj.iter().enumerate() {
        if nbrs.len() <= 3 {
            // neighbours that were split point at their proper copy
            for y in new_adj[x].iter_mut() {
                let i = adj[*y].iter().position(|&z| z == x).unwrap();
                *y = slot[*y][i];
            }
        } else {
            for (i, &y) in nbrs.iter().enumerate() {
                if adj[y].len() > 3 {
                    let j = adj[y].iter().position(|&z| z == x).unwrap();
                    let (a, b) = (slot[x][i], slot[y][j]);
                    if x < y {
                        new_adj[a].push(b);
                        new_adj[b].push(a);
                    }
                } else {
                    let a = slot[x][i];
                    new_adj[a].push(y);
                }
            }
        }
    }
    for list in &mut new_adj {
        list.sort_unstable();
    }
    (bags, new_adj)
}

/// Turns a valid decomposition into a rooted binary one of logarithmic depth.
///
/// Recursive centroid splitting over clusters of bags attached to the rest
/// of the tree at no more than two bags. Each output bag is a split bag plus the cluster's boundary
/// separators, so bags grow to at most three times their input size.
pub fn balance(td: &TreeDecomposition, g: &WeightedGraph) -> Result<ShallowDecomposition, TdError> {
    let report = validate(td, g);
    if !report.is_valid() {
        let msg: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(TdError::Invalid(msg.join("; ")));
    }
    let (bags, adj) = binarize(td);
    let mut b = Balancer::new(&bags, adj);
    let all: Vec<usize> = (0..bags.len()).collect();
    let root = b.build(all, Vec::new());

    // renumber breadth-first from the root
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        order.extend(b.out_children[order[i]].iter().copied());
        i += 1;
    }
    let mut new_id = vec![0; order.len()];
    for (k, &x) in order.iter().enumerate() {
        new_id[x] = k;
    }
    let mut children = vec![Vec::new(); order.len()];
    let mut depth = vec![0usize; order.len()];
    let mut edges = Vec::new();
    let mut out_bags = vec![Vec::new(); order.len()];
    for &x in &order {
        let p = new_id[x];
        out_bags[p] = b.out_bags[x].clone();
        for &c in &b.out_children[x] {
            children[p].push(new_id[c]);
            depth[new_id[c]] = depth[p] + 1;
            edges.push((p, new_id[c]));
        }
    }
    let td = TreeDecomposition {
        n_vertices: td.n_vertices,
        bags: out_bags,
        tree_edges: edges,
        root: Some(0),
    };
    Ok(ShallowDecomposition {
        width: td.width(),
        depth: depth.into_iter().max().unwrap_or(0),
        children,
        td,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_graph;

    fn path(n: u32) -> WeightedGraph {
        WeightedGraph::new(n, false, (1..n).map(|i| (i, i + 1, 1)).collect()).unwrap()
    }

    fn k3() -> WeightedGraph {
        load_graph("p kbest 3 3 0\ne 1 2 1\ne 2 3 1\ne 1 3 5\n").unwrap()
    }

    #[test]
    fn validate_examples() {
        let td = TreeDecomposition::new(3, vec![vec![1, 2, 3]], vec![]);
        let r = validate(&td, &k3());
        assert!(r.is_valid());
        assert_eq!(r.width, 2);

        let td = TreeDecomposition::new(3, vec![vec![1, 2], vec![2, 3]], vec![(0, 1)]);
        let r = validate(&td, &k3());
        assert_eq!(
            r.violations,
            vec![Violation::UncoveredEdge {
                edge: 3,
                tail: 1,
                head: 3
            }]
        );

        let td = TreeDecomposition::new(3, vec![vec![1, 2], vec![3]], vec![(0, 1)]);
        let r = validate(&td, &path(3));
        assert_eq!(
            r.violations,
            vec![Violation::UncoveredEdge {
                edge: 2,
                tail: 2,
                head: 3
            }]
        );
    }

    #[test]
    fn validate_reports_missing_and_disconnected() {
        let g = path(3);
        let td = TreeDecomposition::new(3, vec![vec![1, 2], vec![3], vec![2, 3]], vec![(0, 1), (1, 2)]);
        let r = validate(&td, &g);
        assert_eq!(
            r.violations,
            vec![Violation::Disconnected {
                vertex: 2,
                bag_a: 0,
                bag_b: 2
            }]
        );
        let td = TreeDecomposition::new(3, vec![vec![1, 2]], vec![]);
        let r = validate(&td, &g);
        assert!(r.violations.contains(&Violation::MissingVertex(3)));
        let td = TreeDecomposition::new(3, vec![vec![1, 2], vec![2, 3]], vec![]);
        assert!(matches!(validate(&td, &g).violations[0], Violation::NotATree(_)));
    }

    #[test]
    fn td_io() {
        let td = load_td("s td 1 3 3\nb 1 1 2 3\n").unwrap();
        assert_eq!(td.bags, vec![vec![1, 2, 3]]);
        let text = "c example\ns td 2 2 3\nb 1 1 2\nb 2 2 3\n1 2\n";
        let td = load_td(text).unwrap();
        assert_eq!(td.bags, vec![vec![1, 2], vec![2, 3]]);
        assert_eq!(td.tree_edges, vec![(0, 1)]);
        let again = load_td(&save_td(&td)).unwrap();
        assert_eq!(again, td);
        assert_eq!(save_td(&td), "s td 2 2 3\nb 1 1 2\nb 2 2 3\n1 2\n");
    }

    #[test]
    fn td_io_errors() {
        assert!(load_td("s td 2 2 3\nb 1 1 2\n").is_err());
        assert!(load_td("b 1 1 2\n").is_err());
        assert!(load_td("s td 1 2 3\nb 1 1 2\nb 1 1 2\n").is_err());
        assert!(load_td("s td 1 2 3\nb 3 1 2\n").is_err());
        assert!(load_td("s td 2 2 3\nb 1 1 2\nb 2 2 3\n1 3\n").is_err());
        assert!(load_td("s td 1 1 3\nb 1 1 2\n").is_err());
        let err = load_td("s td 1 2 3\nb 1 x\n").unwrap_err();
        assert!(matches!(err, TdError::Parse { line: 2, .. }));
    }

    #[test]
    fn heuristic_widths() {
        let td = heuristic_decomposition(&path(5));
        let r = validate(&td, &path(5));
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.width, 1);

        let k4 = WeightedGraph::new(
            4,
            false,
            vec![(1, 2, 1), (1, 3, 1), (1, 4, 1), (2, 3, 1), (2, 4, 1), (3, 4, 1)],
        )
        .unwrap();
        let r = validate(&heuristic_decomposition(&k4), &k4);
        assert!(r.is_valid());
        assert_eq!(r.width, 3);

        let mut edges = Vec::new();
        let id = |r: u32, c: u32| r * 3 + c + 1;
        for r in 0..3 {
            for c in 0..3 {
                if c + 1 < 3 {
                    edges.push((id(r, c), id(r, c + 1), 1));
                }
                if r + 1 < 3 {
                    edges.push((id(r, c), id(r + 1, c), 1));
                }
            }
        }
        let grid = WeightedGraph::new(9, false, edges).unwrap();
        let r = validate(&heuristic_decomposition(&grid), &grid);
        assert!(r.is_valid());
        assert!(r.width <= 3);
    }

    #[test]
    fn heuristic_disconnected_and_isolated() {
        let g = WeightedGraph::new(6, false, vec![(1, 2, 1), (3, 4, 1), (4, 4, 2), (3, 4, 9)]).unwrap();
        let td = heuristic_decomposition(&g);
        assert!(validate(&td, &g).is_valid());
        let single = WeightedGraph::new(1, false, vec![]).unwrap();
        let td = heuristic_decomposition(&single);
        assert!(validate(&td, &single).is_valid());
    }

    fn check_balanced(td: &TreeDecomposition, g: &WeightedGraph) -> ShallowDecomposition {
        let sd = balance(td, g).unwrap();
        let r = validate(&sd.td, g);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert!(sd.children.iter().all(|c| c.len() <= 2));
        assert!(sd.width <= 3 * td.width() + 2, "width {} from {}", sd.width, td.width());
        let bound = C_DEPTH * ceil_log2(td.num_bags() + 1);
        assert!(sd.depth <= bound, "depth {} > {}", sd.depth, bound);
        sd
    }

    #[test]
    fn balance_long_path() {
        let g = path(1024);
        let bags: Vec<Vec<u32>> = (1..1024).map(|i| vec![i, i + 1]).collect();
        let edges = (0..1022).map(|i| (i, i + 1)).collect();
        let td = TreeDecomposition::new(1024, bags, edges);
        let sd = check_balanced(&td, &g);
        assert!(sd.depth <= C_DEPTH * 10);
        assert!(sd.width <= 5);
    }

    #[test]
    fn balance_single_bag_is_identity() {
        let td = TreeDecomposition::new(3, vec![vec![1, 2, 3]], vec![]);
        let sd = check_balanced(&td, &k3());
        assert_eq!(sd.depth, 0);
        assert_eq!(sd.td.bags, vec![vec![1, 2, 3]]);
    }

    #[test]
    fn balance_star() {
        // center bag {1}, 100 leaves {1, i}
        let n = 101;
        let g = WeightedGraph::new(n, false, (2..=n).map(|i| (1, i, 1)).collect()).unwrap();
        let mut bags = vec![vec![1]];
        let mut edges = Vec::new();
        for i in 2..=n {
            bags.push(vec![1, i]);
            edges.push((0, bags.len() - 1));
        }
        let td = TreeDecomposition::new(n, bags, edges);
        let sd = check_balanced(&td, &g);
        assert!(sd.depth <= C_DEPTH * 7);
    }

    #[test]
    fn balance_rejects_invalid_input() {
        let td = TreeDecomposition::new(3, vec![vec![1, 2], vec![2, 3]], vec![(0, 1)]);
        assert!(balance(&td, &k3()).is_err());
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(
            (1..=9).map(ceil_log2).collect::<Vec<_>>(),
            vec![0, 1, 2, 2, 3, 3, 3, 3, 4]
        );
    }

    proptest::proptest! {
        #[test]
        fn balance_random_graphs(
            n in 1u32..40,
            raw in proptest::collection::vec((1u32..40, 1u32..40), 0..80),
        ) {
            let edges: Vec<(u32, u32, i64)> = raw
                .into_iter()
                .filter(|&(a, b)| a <= n && b <= n)
                .map(|(a, b)| (a, b, 1))
                .collect();
            let g = WeightedGraph::new(n, false, edges).unwrap();
            let td = heuristic_decomposition(&g);
            proptest::prop_assert!(validate(&td, &g).is_valid());
            check_balanced(&td, &g);
        }

        #[test]
        fn balance_random_trees(parents in proptest::collection::vec(0usize..1000, 1..300)) {
            // a random tree of bags {i} ∪ {parent}, edges along the tree
            let nb = parents.len() + 1;
            let mut bags = vec![vec![1]];
            let mut tree_edges = Vec::new();
            let mut g_edges = Vec::new();
            for (i, p) in parents.iter().enumerate() {
                let child = i + 1;
                let p = p % child;
                bags.push(vec![p as u32 + 1, child as u32 + 1]);
                tree_edges.push((p, child));
                g_edges.push((p as u32 + 1, child as u32 + 1, 1));
            }
            let g = WeightedGraph::new(nb as u32, false, g_edges).unwrap();
            let td = TreeDecomposition::new(nb as u32, bags, tree_edges);
            check_balanced(&td, &g);
        }
    }
}
