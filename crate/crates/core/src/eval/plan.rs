//! The cost-aware static part of an evaluation: relevant states per node,
//! their fitting pairs, and the leaf solution universes.
//!
//! Inner nodes with the same operator, the same reachable child states, and
//! the same relevant states share one transition table, so periodic graphs
//! compile in time proportional to their number of distinct node shapes.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;

use crate::algebra::{Operator, ParseTree};
use crate::error::EvalError;
use crate::graph::{solution_value, CostModel, ExtWeight, Solution};
use crate::problems::{EvalAutomaton, State};

/// Fitting pairs of the relevant states of an inner node, as child-local
/// indices. Relevant states are numbered in byte order of their encoding.
struct Table {
    spans: Vec<[u32; 2]>,
    pairs: Vec<[u32; 2]>,
}

pub struct Plan {
    pub(crate) tree: ParseTree,
    pub(crate) automaton: Box<dyn EvalAutomaton>,
    pub(crate) cost: CostModel,
    /// Inner node: index into `tables`. Leaf: index into `leaf_base`.
    slot: Vec<u32>,
    tables: Vec<Table>,
    /// Per leaf, a range of `leaf_spans`; each span is a range of `sel`.
    leaf_base: Vec<u32>,
    leaf_spans: Vec<[u32; 2]>,
    /// Universe indices of a leaf state's solutions, ascending.
    sel: Vec<u32>,
    uni_base: Vec<u32>,
    uvals: Vec<ExtWeight>,
    feasible_root: bool,
    reachable: usize,
    relevant: usize,
    pair_count: usize,
    distinct: usize,
}

/// Interned sets of state ids, sorted by state bytes.
#[derive(Default)]
struct Sets {
    list: Vec<Vec<u32>>,
    ids: HashMap<Vec<u32>, u32>,
}

impl Sets {
    fn intern(&mut self, set: Vec<u32>) -> u32 {
        if let Some(&i) = self.ids.get(&set) {
            return i;
        }
        let i = self.list.len() as u32;
        self.ids.insert(set.clone(), i);
        self.list.push(set);
        i
    }
}

/// Result of the top-down step at one inner node shape.
struct Down {
    table: u32,
    masks: [u32; 2],
}

impl Plan {
    pub fn new(tree: ParseTree, automaton: Box<dyn EvalAutomaton>, cost: CostModel) -> Result<Plan, EvalError> {
        if automaton.var_types() != cost.var_types() {
            return Err(EvalError::CostModel(format!(
                "automaton {} expects {:?}, cost model has {:?}",
                automaton.name(),
                automaton.var_types(),
                cost.var_types()
            )));
        }
        let n = tree.len();
        let mut tf = Transitions::new(automaton.as_ref());
        let mut sets = Sets::default();
        let mut reach: Vec<u32> = Vec::with_capacity(n);
        let mut up: HashMap<(u32, u32, u32), u32> = HashMap::default();
        let mut ops: Vec<u32> = vec![u32::MAX; n];
        let mut leaf_sel: Vec<Vec<Vec<u32>>> = Vec::new();
        let mut slot = vec![0u32; n];
        let mut uni_base = Vec::with_capacity(n + 1);
        let mut uvals = Vec::new();
        let mut reachable = 0;
        for (u, node) in tree.nodes().iter().enumerate() {
            uni_base.push(uvals.len() as u32);
            let set = match node.children {
                None => {
                    let table = automaton
                        .leaf_states(node)
                        .map_err(|e| EvalError::CostModel(e.to_string()))?;
                    let universe = leaf_universe(&table, &cost)?;
                    let mut by_state: BTreeMap<State, Vec<u32>> = BTreeMap::new();
                    for (q, sols) in table {
                        let ids = by_state.entry(q).or_default();
                        for s in &sols {
                            let i = universe.iter().position(|(_, x)| x == s).expect("solution in universe");
                            ids.push(i as u32);
                        }
                    }
                    uvals.extend(universe.iter().map(|(v, _)| *v));
                    let mut states = Vec::with_capacity(by_state.len());
                    let mut lists = Vec::with_capacity(by_state.len());
                    for (q, mut ids) in by_state {
                        ids.sort_unstable();
                        ids.dedup();
                        states.push(tf.intern(q));
                        lists.push(ids);
                    }
                    slot[u] = leaf_sel.len() as u32;
                    leaf_sel.push(lists);
                    sets.intern(states)
                }
                Some([a, b]) => {
                    let op = tf.op(&node.op);
                    ops[u] = op;
                    let key = (op, reach[a], reach[b]);
                    match up.get(&key) {
                        Some(&s) => s,
                        None => {
                            let mut out = Vec::new();
                            for &x in &sets.list[reach[a] as usize] {
                                for &y in &sets.list[reach[b] as usize] {
                                    if let Some(q) = tf.apply(op, x, y) {
                                        out.push(q);
                                    }
                                }
                            }
                            out.sort_unstable();
                            out.dedup();
                            tf.sort(&mut out);
                            let s = sets.intern(out);
                            up.insert(key, s);
                            s
                        }
                    }
                }
            };
            reachable += sets.list[set as usize].len();
            reach.push(set);
        }
        uni_base.push(uvals.len() as u32);

        // top-down relevance, as interned masks over the reachable sets
        let mut masks = Sets::default();
        let empty = |len: usize| vec![0u32; len];
        let mut rel: Vec<u32> = vec![u32::MAX; n];
        let root = tree.root();
        let root_state = tf.intern(automaton.root_state());
        let root_set = &sets.list[reach[root] as usize];
        let mut root_mask = empty(root_set.len());
        let feasible_root = match root_set.iter().position(|&q| q == root_state) {
            Some(i) => {
                root_mask[i] = 1;
                true
            }
            None => false,
        };
        rel[root] = masks.intern(root_mask);
        let mut down: HashMap<(u32, u32, u32, u32), Down> = HashMap::default();
        let mut tables: Vec<Table> = Vec::new();
        for u in (0..n).rev() {
            let Some([a, b]) = tree.node(u).children else { continue };
            let key = (ops[u], reach[a], reach[b], rel[u]);
            if !down.contains_key(&key) {
                let (sa, sb) = (&sets.list[reach[a] as usize], &sets.list[reach[b] as usize]);
                let su = &sets.list[reach[u] as usize];
                let mu = &masks.list[rel[u] as usize];
                let mut local = HashMap::default();
                for (i, &q) in su.iter().enumerate() {
                    if mu[i] == 1 {
                        let k = local.len();
                        local.insert(q, k);
                    }
                }
                let mut lists = vec![Vec::new(); local.len()];
                let (mut ma, mut mb) = (empty(sa.len()), empty(sb.len()));
                for (i, &x) in sa.iter().enumerate() {
                    for (j, &y) in sb.iter().enumerate() {
                        let Some(q) = tf.apply(ops[u], x, y) else { continue };
                        if let Some(&k) = local.get(&q) {
                            lists[k].push([i as u32, j as u32]);
                            ma[i] = 1;
                            mb[j] = 1;
                        }
                    }
                }
                let rank = |m: &[u32]| {
                    let mut next = 0;
                    m.iter()
                        .map(|&keep| {
                            let r = next;
                            next += keep;
                            r
                        })
                        .collect::<Vec<u32>>()
                };
                let (ra, rb) = (rank(&ma), rank(&mb));
                let mut table = Table {
                    spans: Vec::with_capacity(lists.len()),
                    pairs: Vec::new(),
                };
                for list in lists {
                    let lo = table.pairs.len() as u32;
                    table
                        .pairs
                        .extend(list.iter().map(|&[i, j]| [ra[i as usize], rb[j as usize]]));
                    table.spans.push([lo, table.pairs.len() as u32]);
                }
                let d = Down {
                    table: tables.len() as u32,
                    masks: [masks.intern(ma), masks.intern(mb)],
                };
                tables.push(table);
                down.insert(key, d);
            }
            let d = &down[&key];
            slot[u] = d.table;
            rel[a] = d.masks[0];
            rel[b] = d.masks[1];
        }

        let distinct = tf.states.len();
        drop(tf);
        let mut leaf_base = vec![0u32];
        let mut leaf_spans = Vec::new();
        let mut sel = Vec::new();
        let mut relevant = 0;
        let mut pair_count = 0;
        for u in 0..n {
            let m = &masks.list[rel[u] as usize];
            relevant += m.iter().filter(|&&x| x == 1).count();
            match tree.node(u).children {
                None => {
                    let lists = &leaf_sel[slot[u] as usize];
                    for (i, list) in lists.iter().enumerate() {
                        if m[i] == 1 {
                            let lo = sel.len() as u32;
                            sel.extend_from_slice(list);
                            leaf_spans.push([lo, sel.len() as u32]);
                        }
                    }
                    slot[u] = leaf_base.len() as u32 - 1;
                    leaf_base.push(leaf_spans.len() as u32);
                }
                Some(_) => pair_count += tables[slot[u] as usize].pairs.len(),
            }
        }
        Ok(Plan {
            tree,
            automaton,
            cost,
            slot,
            tables,
            leaf_base,
            leaf_spans,
            sel,
            uni_base,
            uvals,
            feasible_root,
            reachable,
            relevant,
            pair_count,
            distinct,
        })
    }

    pub fn tree(&self) -> &ParseTree {
        &self.tree
    }

    pub fn automaton(&self) -> &dyn EvalAutomaton {
        self.automaton.as_ref()
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    fn is_leaf(&self, u: usize) -> bool {
        self.tree.node(u).children.is_none()
    }

    /// Number of relevant states at `u`.
    pub fn n_states(&self, u: usize) -> usize {
        let s = self.slot[u] as usize;
        if self.is_leaf(u) {
            (self.leaf_base[s + 1] - self.leaf_base[s]) as usize
        } else {
            self.tables[s].spans.len()
        }
    }

    pub fn total_states(&self) -> usize {
        self.relevant
    }

    pub fn reachable_states(&self) -> usize {
        self.reachable
    }

    /// Distinct states seen anywhere during compilation.
    pub fn distinct_states(&self) -> usize {
        self.distinct
    }

    /// Distinct transition tables of inner nodes.
    pub fn distinct_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn max_states(&self) -> usize {
        (0..self.tree.len()).map(|u| self.n_states(u)).max().unwrap_or(0)
    }

    pub fn total_pairs(&self) -> usize {
        self.pair_count
    }

    /// Local index of the root state at the root, if it is reachable.
    pub fn root_state(&self) -> Option<usize> {
        self.feasible_root.then_some(0)
    }

    /// Fitting pairs of state `q` at inner node `u`, as child-local indices.
    pub fn pairs(&self, u: usize, q: usize) -> &[[u32; 2]] {
        let t = &self.tables[self.slot[u] as usize];
        let [lo, hi] = t.spans[q];
        &t.pairs[lo as usize..hi as usize]
    }

    /// Universe indices of leaf `u` in state `q` before any filtering.
    pub fn leaf_selection(&self, u: usize, q: usize) -> &[u32] {
        let [lo, hi] = self.leaf_spans[self.leaf_base[self.slot[u] as usize] as usize + q];
        &self.sel[lo as usize..hi as usize]
    }

    /// Sorted values of the leaf universe of `u`.
    pub fn universe_values(&self, u: usize) -> &[ExtWeight] {
        &self.uvals[self.uni_base[u] as usize..self.uni_base[u + 1] as usize]
    }

    /// The leaf universe with solutions, recomputed on demand.
    pub fn universe(&self, u: usize) -> Vec<(ExtWeight, Solution)> {
        let table = self
            .automaton
            .leaf_states(self.tree.node(u))
            .expect("leaf table was computed before");
        leaf_universe(&table, &self.cost).expect("values were computed before")
    }
}

/// Interned states with a memoized transition function. States never
/// mention vertex ids, so few distinct states and operators occur.
struct Transitions<'a> {
    automaton: &'a dyn EvalAutomaton,
    states: Vec<State>,
    ids: HashMap<State, u32>,
    ops: HashMap<Operator, u32>,
    op_list: Vec<Operator>,
    memo: HashMap<(u32, u32, u32), u32>,
}

const NONE: u32 = u32::MAX;

impl<'a> Transitions<'a> {
    fn new(automaton: &'a dyn EvalAutomaton) -> Self {
        Transitions {
            automaton,
            states: Vec::new(),
            ids: HashMap::default(),
            ops: HashMap::default(),
            op_list: Vec::new(),
            memo: HashMap::default(),
        }
    }

    fn intern(&mut self, q: State) -> u32 {
        if let Some(&i) = self.ids.get(&q) {
            return i;
        }
        let i = self.states.len() as u32;
        self.ids.insert(q.clone(), i);
        self.states.push(q);
        i
    }

    fn op(&mut self, op: &Operator) -> u32 {
        if let Some(&i) = self.ops.get(op) {
            return i;
        }
        let i = self.op_list.len() as u32;
        self.ops.insert(op.clone(), i);
        self.op_list.push(op.clone());
        i
    }

    fn apply(&mut self, op: u32, x: u32, y: u32) -> Option<u32> {
        if let Some(&q) = self.memo.get(&(op, x, y)) {
            return (q != NONE).then_some(q);
        }
        let r = self.automaton.apply(
            &self.op_list[op as usize],
            &self.states[x as usize],
            &self.states[y as usize],
        );
        let q = match r {
            Some(q) => self.intern(q),
            None => NONE,
        };
        self.memo.insert((op, x, y), q);
        (q != NONE).then_some(q)
    }

    /// Orders ids by the bytes of their states.
    fn sort(&self, ids: &mut [u32]) {
        ids.sort_unstable_by(|&a, &b| self.states[a as usize].cmp(&self.states[b as usize]));
    }
}

/// Distinct solutions of a leaf table, sorted by value then encoding.
fn leaf_universe(table: &[(State, Vec<Solution>)], cost: &CostModel) -> Result<Vec<(ExtWeight, Solution)>, EvalError> {
    let mut all = Vec::new();
    for (_, sols) in table {
        for s in sols {
            let v = solution_value(s, cost).map_err(|e| EvalError::CostModel(e.to_string()))?;
            all.push((v, s.clone()));
        }
    }
    all.sort();
    all.dedup();
    Ok(all)
}
