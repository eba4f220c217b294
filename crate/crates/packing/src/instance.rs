use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twa_core::{FactorGraph, FactorId, VariableId};

use crate::geometry::BoxFactor;

/// Densest possible packing of congruent circles in the plane.
pub const HEXAGONAL_DENSITY: f64 = 0.9069;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PackingError {
    #[error("{n} circles of radius {radius} cover {density:.4} of the box, above the hexagonal bound")]
    InfeasibleRadius { n: usize, radius: f64, density: f64 },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// `n` congruent circles in the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PackingInstance {
    pub n: usize,
    pub radius: f64,
    /// Neighbourhood buffer as a fraction of the circle diameter, added to
    /// each side of a circle's bounding box.
    pub buffer_fraction: f64,
}

impl PackingInstance {
    pub fn new(n: usize, radius: f64) -> Result<Self, PackingError> {
        let inst = PackingInstance {
            n,
            radius,
            buffer_fraction: 0.05,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Radius giving `n` circles the requested area density.
    pub fn with_density(n: usize, density: f64) -> Result<Self, PackingError> {
        if n == 0 || density.is_nan() || density <= 0.0 {
            return Err(PackingError::Invalid(format!("{n} circles at density {density}")));
        }
        Self::new(n, radius_for_density(n, density))
    }

    pub fn validate(&self) -> Result<(), PackingError> {
        if !(self.radius > 0.0 && self.radius < 0.5) {
            return Err(PackingError::Invalid(format!(
                "radius {} outside (0, 0.5)",
                self.radius
            )));
        }
        if !(self.buffer_fraction >= 0.0 && self.buffer_fraction.is_finite()) {
            return Err(PackingError::Invalid(format!(
                "buffer fraction {} must be non-negative",
                self.buffer_fraction
            )));
        }
        let d = self.density();
        if d > HEXAGONAL_DENSITY {
            return Err(PackingError::InfeasibleRadius {
                n: self.n,
                radius: self.radius,
                density: d,
            });
        }
        Ok(())
    }

    pub fn density(&self) -> f64 {
        density(self.n, self.radius)
    }
}

/// Fraction of the unit square covered by `n` circles of radius `r`.
pub fn density(n: usize, r: f64) -> f64 {
    n as f64 * PI * r * r
}

pub fn radius_for_density(n: usize, density: f64) -> f64 {
    (density / (n as f64 * PI)).sqrt()
}

/// Circle id ↔ coordinate variables.
#[derive(Debug, Clone)]
pub struct CircleVars {
    coords: Vec<[VariableId; 2]>,
    boxes: Vec<FactorId>,
    owner: HashMap<VariableId, usize>,
}

impl CircleVars {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, circle: usize) -> Option<[VariableId; 2]> {
        self.coords.get(circle).copied()
    }

    pub fn all(&self) -> &[[VariableId; 2]] {
        &self.coords
    }

    pub fn box_factor(&self, circle: usize) -> Option<FactorId> {
        self.boxes.get(circle).copied()
    }

    /// Circle owning a coordinate variable.
    pub fn circle_of(&self, v: VariableId) -> Option<usize> {
        self.owner.get(&v).copied()
    }

    /// Current concurred centres.
    pub fn positions(&self, graph: &FactorGraph) -> Vec<[f64; 2]> {
        self.coords
            .iter()
            .map(|[x, y]| {
                [
                    graph.value(*x).expect("circle variables are never pruned"),
                    graph.value(*y).expect("circle variables are never pruned"),
                ]
            })
            .collect()
    }
}

/// Uniform random centres in `[r, 1 − r]²`.
pub fn initial_positions(instance: &PackingInstance, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (instance.radius, 1.0 - instance.radius);
    (0..instance.n)
        .map(|_| [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)])
        .collect()
}

/// Two variables and one box factor per circle; pair factors are left to the
/// maintenance reasoner.
pub fn build_instance(instance: &PackingInstance, seed: u64) -> Result<(FactorGraph, CircleVars), PackingError> {
    instance.validate()?;
    build_from_positions(instance, &initial_positions(instance, seed))
}

pub fn build_from_positions(
    instance: &PackingInstance,
    positions: &[[f64; 2]],
) -> Result<(FactorGraph, CircleVars), PackingError> {
    instance.validate()?;
    if positions.len() != instance.n {
        return Err(PackingError::Invalid(format!(
            "{} positions for {} circles",
            positions.len(),
            instance.n
        )));
    }
    let mut graph = FactorGraph::new();
    let mut coords = Vec::with_capacity(instance.n);
    let mut boxes = Vec::with_capacity(instance.n);
    let mut owner = HashMap::with_capacity(2 * instance.n);
    for (i, p) in positions.iter().enumerate() {
        let xy = [graph.add_variable(p[0]), graph.add_variable(p[1])];
        let f = graph
            .add_factor(
                Box::new(BoxFactor {
                    radius: instance.radius,
                }),
                &xy,
            )
            .map_err(|e| PackingError::Invalid(e.to_string()))?;
        owner.insert(xy[0], i);
        owner.insert(xy[1], i);
        coords.push(xy);
        boxes.push(f);
    }
    Ok((graph, CircleVars { coords, boxes, owner }))
}
