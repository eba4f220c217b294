use std::io::{self, BufRead, Write};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use twa_core::{Engine, EngineConfig, EngineError, IterationStatus};

use crate::instance::{build_from_positions, initial_positions, CircleVars, PackingError, PackingInstance};
use crate::maintain::{PairMaintainer, PairStats};
use crate::overlap::{box_violation, overlap_from_pairs, OverlapReport};
use crate::steering::{SteerHandle, SteeringReasoner};

#[derive(Debug, Clone, PartialEq)]
pub struct PackConfig {
    pub engine: EngineConfig,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            engine: EngineConfig {
                epsilon_convergence: 1e-6,
                max_iterations: 200_000,
                ..EngineConfig::default()
            },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PackError {
    #[error(transparent)]
    Instance(#[from] PackingError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One iteration of a packing run.
#[derive(Debug, Clone, Serialize)]
pub struct PackStatus {
    pub iteration: u64,
    pub converged: bool,
    pub max_overlap_depth: f64,
    pub active_factors: usize,
    pub pool_size: usize,
    pub max_message_delta: f64,
    #[serde(skip)]
    pub engine: IterationStatus,
    #[serde(skip)]
    pub pairs: PairStats,
}

impl PackStatus {
    /// One json line: iteration, max_overlap_depth, active_factors, pool_size.
    pub fn telemetry_line(&self) -> String {
        serde_json::to_string(self).expect("status serializes")
    }
}

/// A live packing: engine, pair maintenance and steering.
pub struct Packer {
    instance: PackingInstance,
    engine: Engine<()>,
    vars: Arc<CircleVars>,
    pairs: Arc<Mutex<PairStats>>,
    steer: SteerHandle,
}

impl Packer {
    pub fn new(instance: PackingInstance, seed: u64, config: &PackConfig) -> Result<Self, PackError> {
        instance.validate()?;
        Self::from_positions(instance, &initial_positions(&instance, seed), config)
    }

    pub fn from_positions(
        instance: PackingInstance,
        positions: &[[f64; 2]],
        config: &PackConfig,
    ) -> Result<Self, PackError> {
        let (graph, vars) = build_from_positions(&instance, positions)?;
        let vars = Arc::new(vars);
        let mut engine = Engine::new(graph, config.engine.clone())?;
        let (maintainer, pairs) = PairMaintainer::new(&instance, vars.clone());
        let (steering, steer) = SteeringReasoner::new(vars.clone(), pairs.clone());
        // order matters: each finds its created factors by position in the report
        engine.add_global_reasoner(maintainer);
        engine.add_global_reasoner(steering);
        Ok(Packer {
            instance,
            engine,
            vars,
            pairs,
            steer,
        })
    }

    pub fn instance(&self) -> &PackingInstance {
        &self.instance
    }

    pub fn engine(&self) -> &Engine<()> {
        &self.engine
    }

    pub fn vars(&self) -> &CircleVars {
        &self.vars
    }

    pub fn steer(&self) -> SteerHandle {
        self.steer.clone()
    }

    pub fn iteration(&self) -> u64 {
        self.engine.iteration()
    }

    pub fn pair_stats(&self) -> PairStats {
        self.pairs.lock().expect("stats lock").clone()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.vars.positions(self.engine.graph())
    }

    pub fn step(&mut self) -> Result<PackStatus, PackError> {
        let engine = self.engine.step()?;
        let pairs = self.pair_stats();
        Ok(PackStatus {
            iteration: engine.iteration,
            converged: engine.converged,
            max_overlap_depth: pairs.overlap.depth,
            active_factors: pairs.active,
            pool_size: pairs.pool,
            max_message_delta: engine.max_message_delta,
            engine,
            pairs,
        })
    }

    /// Steps until convergence or the iteration cap.
    pub fn run_with(&mut self, mut observer: impl FnMut(&PackStatus)) -> Result<PackStatus, PackError> {
        loop {
            let status = self.step()?;
            observer(&status);
            if status.converged || self.iteration() >= self.engine.config().max_iterations {
                return Ok(status);
            }
        }
    }

    pub fn run(&mut self) -> Result<PackStatus, PackError> {
        self.run_with(|_| {})
    }
}

/// Worst overlap and box violation over all pairs, by direct O(n²) scan.
pub fn feasibility(positions: &[[f64; 2]], radius: f64) -> (OverlapReport, f64) {
    let n = positions.len();
    let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
    (
        overlap_from_pairs(positions, radius, pairs),
        box_violation(positions, radius),
    )
}

/// Writes the header `n=<n> r=<radius> density=<d>` and one `id,x,y` line per circle.
pub fn write_packing(out: &mut impl Write, instance: &PackingInstance, positions: &[[f64; 2]]) -> io::Result<()> {
    writeln!(
        out,
        "n={} r={:.12} density={:.12}",
        instance.n,
        instance.radius,
        instance.density()
    )?;
    for (i, p) in positions.iter().enumerate() {
        writeln!(out, "{i},{:.12},{:.12}", p[0], p[1])?;
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ReadPackingError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

/// Reads a file written by [`write_packing`]: `(n, radius, positions)`.
pub fn read_packing(input: impl BufRead) -> Result<(usize, f64, Vec<[f64; 2]>), ReadPackingError> {
    let syntax = |line: usize, reason: &str| ReadPackingError::Syntax {
        line,
        reason: reason.into(),
    };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| syntax(1, "missing header"))??;
    let mut n = None;
    let mut r = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            Some(("r", v)) => r = v.parse::<f64>().ok(),
            Some(("density", _)) => {}
            _ => return Err(syntax(1, "unexpected header field")),
        }
    }
    let (n, r) = n.zip(r).ok_or_else(|| syntax(1, "header needs n and r"))?;
    let mut positions = vec![[f64::NAN; 2]; n];
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.trim().split(',').collect();
        let parsed = match parts[..] {
            [id, x, y] => id
                .parse::<usize>()
                .ok()
                .zip(x.parse::<f64>().ok().zip(y.parse::<f64>().ok())),
            _ => None,
        };
        let (id, (x, y)) = parsed.ok_or_else(|| syntax(i + 2, "expected id,x,y"))?;
        if id >= n {
            return Err(syntax(i + 2, "id out of range"));
        }
        positions[id] = [x, y];
        seen += 1;
    }
    if seen != n {
        return Err(syntax(n + 1, "wrong number of circles"));
    }
    Ok((n, r, positions))
}
