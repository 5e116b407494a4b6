//! Evaluation trees with ranks, decompositions, and solution IDs.
//!
//! Records live in an append-only arena. A record belongs to one parse
//! node and points at child records; versions built by path copying share
//! every record they do not replace.

use rustc_hash::FxHashMap;

use crate::error::EvalError;
use crate::graph::{ExtWeight, Solution};

use super::plan::Plan;
use super::structure::Top2Value;

pub(crate) const NONE: u32 = u32::MAX;

/// One ranked solution of a state: its value, its ID at the node, and how
/// it decomposes (universe index at leaves; fitting-pair index and child
/// ranks at inner nodes). Packed into 16 bytes since path copies store one
/// pair per state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    /// `i64::MAX` encodes `∞`.
    value: i64,
    id: u32,
    /// Low 30 bits: the choice; bits 30 and 31: the child ranks.
    packed: u32,
}

const CHOICE_BITS: u32 = (1 << 30) - 1;

impl Entry {
    pub const ABSENT: Entry = Entry {
        value: i64::MAX,
        id: NONE,
        packed: CHOICE_BITS,
    };

    fn new(value: ExtWeight, choice: u32, ranks: [u8; 2]) -> Result<Entry, EvalError> {
        let value = match value {
            ExtWeight::Finite(v) if v != i64::MAX => v,
            ExtWeight::Finite(_) => return Err(EvalError::Overflow),
            ExtWeight::Infinite => return Ok(Entry::ABSENT),
        };
        if choice > CHOICE_BITS {
            return Err(EvalError::CostModel("too many fitting pairs for one state".into()));
        }
        Ok(Entry {
            value,
            id: NONE,
            packed: choice | (ranks[0] as u32) << 30 | (ranks[1] as u32) << 31,
        })
    }

    pub fn value(&self) -> ExtWeight {
        if self.value == i64::MAX {
            ExtWeight::Infinite
        } else {
            ExtWeight::Finite(self.value)
        }
    }

    pub fn is_present(&self) -> bool {
        self.value != i64::MAX
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn choice(&self) -> u32 {
        self.packed & CHOICE_BITS
    }

    /// 0-based ranks of the two child entries.
    pub fn ranks(&self) -> [u8; 2] {
        [(self.packed >> 30 & 1) as u8, (self.packed >> 31) as u8]
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Rec {
    pub u: u32,
    pub kids: [u32; 2],
    chunk: u32,
    off: u32,
    /// Index into the filtered leaf selections, or `NONE` for the plan's own.
    pub sel: u32,
}

/// Decomposition forced to rank 1 for one state of a re-evaluated node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Forced {
    pub state: usize,
    pub choice: u32,
    pub ranks: [u8; 2],
}

/// Entries live in fixed-size chunks so the arena never moves on growth.
const CHUNK: usize = 1 << 20;

#[derive(Default)]
struct Arena {
    chunks: Vec<Vec<Entry>>,
    len: usize,
}

impl Arena {
    fn get(&self, r: &Rec, i: usize) -> &Entry {
        &self.chunks[r.chunk as usize][r.off as usize + i]
    }

    /// Room for `n` contiguous entries; returns (chunk, offset).
    fn reserve(&mut self, n: usize) -> (u32, u32) {
        let full = self.chunks.last().is_none_or(|c| c.len() + n > c.capacity());
        if full {
            self.chunks.push(Vec::with_capacity(CHUNK.max(n)));
        }
        let c = self.chunks.len() - 1;
        (c as u32, self.chunks[c].len() as u32)
    }

    fn extend(&mut self, es: &[Entry]) {
        self.chunks.last_mut().unwrap().extend_from_slice(es);
        self.len += es.len();
    }
}

pub struct EvaluationTree {
    plan: Plan,
    pub(crate) recs: Vec<Rec>,
    arena: Arena,
    pub(crate) leaf_sets: Vec<Vec<Vec<u32>>>,
    scratch: (Vec<Entry>, Vec<[u32; 2]>, FxHashMap<[u32; 2], u32>),
}

type Cand = (ExtWeight, u32, [u8; 2]);

const RANKS: [[u8; 2]; 3] = [[0, 0], [0, 1], [1, 0]];

impl EvaluationTree {
    /// Evaluates every node bottom-up with the top-2 structure and assigns
    /// solution IDs. Records `0..len` form the unconstrained version.
    pub fn build(plan: Plan) -> Result<Self, EvalError> {
        let n = plan.tree().len();
        let mut et = EvaluationTree {
            recs: Vec::with_capacity(n),
            plan,
            arena: Arena::default(),
            leaf_sets: Vec::new(),
            scratch: Default::default(),
        };
        for u in 0..n {
            let kids = et
                .plan
                .tree()
                .node(u)
                .children
                .map_or([NONE; 2], |[a, b]| [a as u32, b as u32]);
            et.push_record(u, kids, NONE, None)?;
        }
        Ok(et)
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    /// Root record of the unconstrained tree.
    pub fn base_root(&self) -> u32 {
        self.plan.tree().root() as u32
    }

    pub fn records(&self) -> usize {
        self.recs.len()
    }

    /// Ranked entries stored over all records.
    pub fn entry_count(&self) -> usize {
        self.arena.len
    }

    pub(crate) fn entry(&self, rec: u32, q: usize, rank: usize) -> &Entry {
        self.arena.get(&self.recs[rec as usize], 2 * q + rank)
    }

    /// Top-2 value of state `q` at record `rec`.
    pub fn value(&self, rec: u32, q: usize) -> Top2Value {
        Top2Value {
            best: self.entry(rec, q, 0).value(),
            second: self.entry(rec, q, 1).value(),
        }
    }

    /// The ID of rank `rank` (0-based) of state `q` at `rec`.
    pub fn id(&self, rec: u32, q: usize, rank: usize) -> Option<u32> {
        let e = self.entry(rec, q, rank);
        e.is_present().then_some(e.id)
    }

    /// Top-2 value of the whole family below root record `rec`.
    pub fn root_value(&self, rec: u32) -> Top2Value {
        match self.plan.root_state() {
            Some(q) => self.value(rec, q),
            None => Top2Value::EMPTY,
        }
    }

    pub(crate) fn selection(&self, rec: u32, q: usize) -> &[u32] {
        let r = &self.recs[rec as usize];
        if r.sel == NONE {
            self.plan.leaf_selection(r.u as usize, q)
        } else {
            &self.leaf_sets[r.sel as usize][q]
        }
    }

    /// Evaluates node `u` over child records `kids` and appends the record.
    pub(crate) fn push_record(
        &mut self,
        u: usize,
        kids: [u32; 2],
        sel: u32,
        forced: Option<Forced>,
    ) -> Result<u32, EvalError> {
        let nq = self.plan.n_states(u);
        let (mut out, mut raw, mut keys) = std::mem::take(&mut self.scratch);
        out.clear();
        raw.clear();
        keys.clear();
        let rec = self.recs.len() as u32;
        if kids[0] == NONE {
            let uv = self.plan.universe_values(u);
            let pick = |i: u32| -> Result<Entry, EvalError> {
                let mut e = Entry::new(uv[i as usize], i, [0, 0])?;
                e.id = i;
                Ok(e)
            };
            for q in 0..nq {
                let list = if sel == NONE {
                    self.plan.leaf_selection(u, q)
                } else {
                    &self.leaf_sets[sel as usize][q]
                };
                let (first, rest) = match forced.filter(|f| f.state == q) {
                    Some(f) => (Some(f.choice), list.iter().find(|&&i| i != f.choice)),
                    None => (list.first().copied(), list.get(1)),
                };
                out.push(first.map_or(Ok(Entry::ABSENT), pick)?);
                out.push(rest.map_or(Ok(Entry::ABSENT), |&i| pick(i))?);
            }
        } else {
            let [ra, rb] = kids.map(|k| self.recs[k as usize]);
            let arena = &self.arena;
            let value = |r: &Rec, q: u32, rank: u8| arena.get(r, 2 * q as usize + rank as usize).value();
            for q in 0..nq {
                let pairs = self.plan.pairs(u, q);
                let cand = |p: u32, ranks: [u8; 2]| -> Result<ExtWeight, EvalError> {
                    let [i, j] = pairs[p as usize];
                    Ok(value(&ra, i, ranks[0]).checked_add(value(&rb, j, ranks[1]))?)
                };
                let mut top: [Cand; 2] = [(ExtWeight::Infinite, NONE, [0, 0]); 2];
                let skip = forced.filter(|f| f.state == q);
                let first = match skip {
                    Some(f) => {
                        top[0] = (cand(f.choice, f.ranks)?, f.choice, f.ranks);
                        1
                    }
                    None => 0,
                };
                for p in 0..pairs.len() as u32 {
                    for ranks in RANKS {
                        if skip.is_some_and(|f| f.choice == p && f.ranks == ranks) {
                            continue;
                        }
                        let v = cand(p, ranks)?;
                        if !v.is_finite() {
                            continue;
                        }
                        let c = (v, p, ranks);
                        if c < top[first] {
                            if first == 0 {
                                top[1] = top[0];
                            }
                            top[first] = c;
                        } else if first == 0 && c < top[1] {
                            top[1] = c;
                        }
                    }
                }
                debug_assert!(!top[1].0.is_finite() || top[1].0 >= top[0].0);
                for (v, p, ranks) in top {
                    if v.is_finite() {
                        let [i, j] = pairs[p as usize];
                        let a = arena.get(&ra, 2 * i as usize + ranks[0] as usize).id;
                        let b = arena.get(&rb, 2 * j as usize + ranks[1] as usize).id;
                        raw.push([a, b]);
                        out.push(Entry::new(v, p, ranks)?);
                    } else {
                        raw.push([NONE, NONE]);
                        out.push(Entry::ABSENT);
                    }
                }
            }
            // number distinct child ID pairs in order of first occurrence
            for (e, k) in out.iter_mut().zip(&raw) {
                if k[0] != NONE {
                    let next = keys.len() as u32;
                    e.id = *keys.entry(*k).or_insert(next);
                }
            }
        }
        let (chunk, off) = self.arena.reserve(out.len());
        self.arena.extend(&out);
        self.recs.push(Rec {
            u: u as u32,
            kids,
            chunk,
            off,
            sel,
        });
        self.scratch = (out, raw, keys);
        Ok(rec)
    }

    /// The solution denoted by rank `rank` of state `q` below record `rec`.
    pub fn reconstruct(&self, rec: u32, q: usize, rank: usize) -> Result<Solution, EvalError> {
        if !self.entry(rec, q, rank).is_present() {
            return Err(EvalError::NoSuchRank { rank: rank + 1 });
        }
        let mut out = Solution::empty(self.plan.automaton().n_free());
        let mut stack = vec![(rec, q, rank)];
        while let Some((rec, q, rank)) = stack.pop() {
            let e = *self.entry(rec, q, rank);
            let r = self.recs[rec as usize];
            if r.kids[0] == NONE {
                let (_, sol) = &self.plan.universe(r.u as usize)[e.choice() as usize];
                out.absorb(sol);
            } else {
                let [i, j] = self.plan.pairs(r.u as usize, q)[e.choice() as usize];
                let ranks = e.ranks();
                stack.push((r.kids[1], j as usize, ranks[1] as usize));
                stack.push((r.kids[0], i as usize, ranks[0] as usize));
            }
        }
        Ok(out)
    }

    /// Rank `rank` (0-based) of the whole family below root record `rec`.
    pub fn reconstruct_root(&self, rec: u32, rank: usize) -> Result<Solution, EvalError> {
        match self.plan.root_state() {
            Some(q) => self.reconstruct(rec, q, rank),
            None => Err(EvalError::NoSuchRank { rank: rank + 1 }),
        }
    }
}
