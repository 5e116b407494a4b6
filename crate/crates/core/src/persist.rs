//! Versions of an evaluation tree: pivot queries and path-copied
//! constraint updates.

use std::sync::Arc;

use crate::error::{Error, PersistError};
use crate::eval::{EvaluationTree, Forced, Top2Value, NONE};
use crate::graph::{Constraint, FeatureId, Polarity, Solution};

#[derive(Debug)]
struct Link {
    c: Constraint,
    next: Option<Arc<Link>>,
}

/// A handle on one immutable evaluation tree inside an [`EvaluationTree`]
/// arena. Cloning is cheap.
#[derive(Clone, Debug)]
pub struct Version {
    root: u32,
    constraints: Option<Arc<Link>>,
    copied: usize,
}

impl Version {
    pub fn root_record(&self) -> u32 {
        self.root
    }

    /// Records allocated when this version was created.
    pub fn copied(&self) -> usize {
        self.copied
    }

    /// Accumulated constraints, newest first.
    pub fn constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        let mut at = self.constraints.as_deref();
        while let Some(l) = at {
            out.push(l.c);
            at = l.next.as_deref();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Step {
    rec: u32,
    /// (state, rank) of the best and of the second-best solution.
    tracked: [(usize, usize); 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PivotReport {
    pub feature: FeatureId,
    pub var: usize,
    /// Parse nodes from the root down to the leaf.
    pub path: Vec<usize>,
    pub leaf: usize,
    version_root: u32,
    steps: Vec<Step>,
    /// Whether the best solution contains the feature.
    in_best: bool,
}

pub fn initial_version(et: &EvaluationTree) -> Version {
    Version {
        root: et.base_root(),
        constraints: None,
        copied: 0,
    }
}

pub fn best_pair(et: &EvaluationTree, v: &Version) -> Top2Value {
    et.root_value(v.root)
}

/// Rank `rank` (0 = best) of the version's solutions.
pub fn solution(et: &EvaluationTree, v: &Version, rank: usize) -> Result<Solution, Error> {
    Ok(et.reconstruct_root(v.root, rank)?)
}

/// Walks one root-to-leaf path along which the best and second-best
/// solutions differ, and picks the smallest differing feature at the leaf.
pub fn pivot_query(et: &EvaluationTree, v: &Version) -> Result<PivotReport, PersistError> {
    let Some(q) = et.plan().root_state() else {
        return Err(PersistError::NotExpandable);
    };
    if !best_pair(et, v).second.is_finite() {
        return Err(PersistError::NotExpandable);
    }
    let mut rec = v.root;
    let mut tracked = [(q, 0), (q, 1)];
    let mut steps = Vec::new();
    let mut path = Vec::new();
    loop {
        steps.push(Step { rec, tracked });
        let r = et.recs[rec as usize];
        let u = r.u as usize;
        path.push(u);
        if r.kids[0] == NONE {
            let universe = et.plan().universe(u);
            let [b, s] = tracked.map(|(q, rank)| &universe[et.entry(rec, q, rank).choice() as usize].1);
            let (var, feature) = b.first_difference(s).expect("ranked solutions differ");
            return Ok(PivotReport {
                feature,
                var,
                path,
                leaf: u,
                version_root: v.root,
                steps,
                in_best: b.contains(var, feature),
            });
        }
        let child = |side: usize, (q, rank): (usize, usize)| {
            let e = et.entry(rec, q, rank);
            let pair = et.plan().pairs(u, q)[e.choice() as usize];
            (pair[side] as usize, e.ranks()[side] as usize)
        };
        let side = {
            let [b, s] = tracked.map(|t| child(0, t));
            let id = |(q, rank): (usize, usize)| et.entry(r.kids[0], q, rank).id();
            if id(b) != id(s) {
                0
            } else {
                1
            }
        };
        tracked = tracked.map(|t| child(side, t));
        rec = r.kids[side];
    }
}

/// New version restricted by `polarity` on the report's feature. The
/// solution of `v` that satisfies the constraint stays rank 1.
pub fn constrain(et: &mut EvaluationTree, v: &Version, p: &PivotReport, polarity: Polarity) -> Result<Version, Error> {
    if p.version_root != v.root || p.steps.first().map(|s| s.rec) != Some(v.root) {
        return Err(PersistError::ReportMismatch.into());
    }
    let c = Constraint {
        feature: p.feature,
        var: p.var,
        polarity,
    };
    let survivor = usize::from(p.in_best != (polarity == Polarity::Forced));
    let leaf = *p.steps.last().unwrap();
    let universe = et.plan().universe(p.leaf);
    let sets: Vec<Vec<u32>> = (0..et.plan().n_states(p.leaf))
        .map(|q| {
            et.selection(leaf.rec, q)
                .iter()
                .copied()
                .filter(|&i| c.holds(&universe[i as usize].1))
                .collect()
        })
        .collect();
    let sel = et.leaf_sets.len() as u32;
    et.leaf_sets.push(sets);
    let (q, rank) = leaf.tracked[survivor];
    let forced = Forced {
        state: q,
        choice: et.entry(leaf.rec, q, rank).choice(),
        ranks: [0, 0],
    };
    let mut new = et.push_record(p.leaf, [NONE; 2], sel, Some(forced))?;
    for w in p.steps.windows(2).rev() {
        let (step, below) = (w[0], w[1]);
        let r = et.recs[step.rec as usize];
        let side = usize::from(r.kids[1] == below.rec);
        let mut kids = r.kids;
        kids[side] = new;
        let (q, rank) = step.tracked[survivor];
        let e = *et.entry(step.rec, q, rank);
        let mut ranks = e.ranks();
        ranks[side] = 0;
        let forced = Forced {
            state: q,
            choice: e.choice(),
            ranks,
        };
        new = et.push_record(r.u as usize, kids, NONE, Some(forced))?;
    }
    let out = Version {
        root: new,
        constraints: Some(Arc::new(Link {
            c,
            next: v.constraints.clone(),
        })),
        copied: p.steps.len(),
    };
    debug_assert_eq!(
        best_pair(et, &out).best,
        if survivor == 0 {
            best_pair(et, v).best
        } else {
            best_pair(et, v).second
        }
    );
    Ok(out)
}

/// Both children of an expandable version from a single pivot query.
pub fn expand(et: &mut EvaluationTree, v: &Version) -> Result<(PivotReport, [Version; 2]), Error> {
    let p = pivot_query(et, v)?;
    let forced = constrain(et, v, &p, Polarity::Forced)?;
    let excluded = constrain(et, v, &p, Polarity::Excluded)?;
    Ok((p, [forced, excluded]))
}

impl PivotReport {
    /// Whether the best solution of the queried version contains the pivot.
    pub fn in_best(&self) -> bool {
        self.in_best
    }
}
