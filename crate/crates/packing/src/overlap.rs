use serde::{Deserialize, Serialize};

use crate::rtree::RTree;

/// The circle with the deepest pairwise penetration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// `None` when no two circles overlap.
    pub circle: Option<usize>,
    /// `2r` minus the smallest centre distance involving `circle`; 0 when feasible.
    pub depth: f64,
}

/// Worst overlap among candidate pairs; the lowest id wins ties.
pub fn overlap_from_pairs(
    positions: &[[f64; 2]],
    radius: f64,
    pairs: impl IntoIterator<Item = (usize, usize)>,
) -> OverlapReport {
    let mut best = OverlapReport::default();
    for (a, b) in pairs {
        let (pa, pb) = (positions[a], positions[b]);
        let depth = 2.0 * radius - (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
        if depth <= 0.0 {
            continue;
        }
        let circle = a.min(b);
        let better = match best.circle {
            None => true,
            Some(c) => depth > best.depth || (depth == best.depth && circle < c),
        };
        if better {
            best = OverlapReport {
                circle: Some(circle),
                depth,
            };
        }
    }
    best
}

/// Deepest overlap, using `tree` (boxes of half-width at least `radius`
/// around the current `positions`) to find candidate pairs.
pub fn max_overlap(positions: &[[f64; 2]], radius: f64, tree: &RTree<usize>) -> OverlapReport {
    overlap_from_pairs(positions, radius, tree.query_pairs())
}

/// Largest amount by which any centre leaves `[r, 1 − r]²`.
pub fn box_violation(positions: &[[f64; 2]], radius: f64) -> f64 {
    positions
        .iter()
        .flat_map(|p| p.iter())
        .map(|&v| (radius - v).max(v - (1.0 - radius)).max(0.0))
        .fold(0.0, f64::max)
}
