//! Keeps pairwise factors only between circles whose buffered boxes meet.
//!
//! Each iteration the reasoner refreshes every circle's box in the r-tree,
//! asks for intersecting pairs, detaches pair factors whose circles drifted
//! apart into a pool, and attaches factors for new pairs, re-parameterizing
//! pooled ones before creating fresh ones.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use twa_core::{EditReport, FactorId, GlobalContext, GlobalReasoner, GraphEdit};

use crate::geometry::PairFactor;
use crate::instance::{CircleVars, PackingInstance};
use crate::overlap::{overlap_from_pairs, OverlapReport};
use crate::rtree::{Aabb, RTree};

/// Counters published after every iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PairStats {
    pub iteration: u64,
    pub active: usize,
    pub pool: usize,
    pub created: usize,
    pub peak_active: usize,
    pub overlap: OverlapReport,
}

#[derive(Debug)]
pub struct PairMaintainer {
    radius: f64,
    half_extent: f64,
    vars: Arc<CircleVars>,
    tree: RTree<usize>,
    active: HashMap<(usize, usize), FactorId>,
    pool: Vec<FactorId>,
    /// Pairs whose fresh factors are created by this iteration's edits.
    pending: Vec<(usize, usize)>,
    stats: PairStats,
    shared: Arc<Mutex<PairStats>>,
}

impl PairMaintainer {
    pub fn new(instance: &PackingInstance, vars: Arc<CircleVars>) -> (Self, Arc<Mutex<PairStats>>) {
        let shared = Arc::new(Mutex::new(PairStats::default()));
        let r = instance.radius;
        let reasoner = PairMaintainer {
            radius: r,
            half_extent: r + instance.buffer_fraction * 2.0 * r,
            vars,
            tree: RTree::new(),
            active: HashMap::new(),
            pool: Vec::new(),
            pending: Vec::new(),
            stats: PairStats::default(),
            shared: shared.clone(),
        };
        (reasoner, shared)
    }

    pub fn tree(&self) -> &RTree<usize> {
        &self.tree
    }

    fn publish(&mut self) {
        self.stats.active = self.active.len();
        self.stats.pool = self.pool.len();
        self.stats.peak_active = self.stats.peak_active.max(self.active.len());
        *self.shared.lock().expect("stats lock") = self.stats.clone();
    }
}

impl GlobalReasoner<()> for PairMaintainer {
    fn name(&self) -> &str {
        "pairs"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, ()>) {
        let positions = self.vars.positions(ctx.graph());
        for (i, p) in positions.iter().enumerate() {
            self.tree.upsert(i, Aabb::around(*p, self.half_extent));
        }
        let pairs = self.tree.query_pairs();
        self.stats.iteration = ctx.iteration();
        self.stats.overlap = overlap_from_pairs(&positions, self.radius, pairs.iter().copied());

        let mut stale: Vec<(usize, usize)> = self
            .active
            .keys()
            .filter(|k| pairs.binary_search(k).is_err())
            .copied()
            .collect();
        stale.sort_unstable();
        for key in stale {
            let f = self.active.remove(&key).expect("stale pair is active");
            let edges = ctx.graph().factor(f).expect("active pair factor is live").edges.clone();
            for e in edges {
                ctx.queue_edit(GraphEdit::RemoveEdge(e));
            }
            self.pool.push(f);
        }

        for &(a, b) in &pairs {
            if self.active.contains_key(&(a, b)) {
                continue;
            }
            let [xa, ya] = self.vars.all()[a];
            let [xb, yb] = self.vars.all()[b];
            let params = PairFactor::new(self.radius, a, b);
            match self.pool.pop() {
                Some(f) => {
                    ctx.queue_edit(GraphEdit::Reparameterize {
                        factor: f,
                        params: Box::new(params),
                    });
                    for v in [xa, ya, xb, yb] {
                        ctx.queue_edit(GraphEdit::AddEdge { factor: f, variable: v });
                    }
                    self.active.insert((a, b), f);
                }
                None => {
                    ctx.queue_edit(GraphEdit::AddFactor {
                        factor: Box::new(params),
                        variables: vec![xa, ya, xb, yb],
                    });
                    self.pending.push((a, b));
                }
            }
        }
        if self.pending.is_empty() {
            self.publish();
        }
    }

    fn edits_applied(&mut self, report: &EditReport) {
        if self.pending.is_empty() {
            return;
        }
        // this reasoner runs first, so its factors lead the created list
        let pending = std::mem::take(&mut self.pending);
        for (key, &f) in pending.iter().zip(&report.created_factors) {
            self.active.insert(*key, f);
        }
        self.stats.created += pending.len();
        self.publish();
    }
}
