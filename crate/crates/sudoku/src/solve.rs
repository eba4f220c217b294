//! Running the engine on a puzzle.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use twa_core::{Engine, EngineConfig, EngineError, IterationStatus};

use crate::encode::build_graph;
use crate::puzzle::Puzzle;
use crate::reasoners::{PossibilityReasoner, PruningReasoner, Removal, SolutionDetector};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub engine: EngineConfig,
    /// Prune dead graph structure as certainty propagates.
    pub dynamics: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            engine: EngineConfig {
                max_iterations: 100_000,
                ..EngineConfig::default()
            },
            dynamics: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: u64,
    pub initial_factors: usize,
    pub initial_variables: usize,
    pub final_factors: usize,
    pub final_variables: usize,
    pub final_edges: usize,
    /// Iterations after certainty propagation stalled.
    pub search_iterations: u64,
    /// Open cells determined by certainty alone.
    pub certain_cells: usize,
    pub open_cells: usize,
    pub solve_ms: f64,
    pub ms_per_iter: f64,
    /// Engine time per iteration, in order.
    #[serde(skip)]
    pub iteration_us: Vec<u64>,
}

impl SolveStats {
    pub fn final_graph_size(&self) -> usize {
        self.final_factors + self.final_variables
    }

    pub fn initial_graph_size(&self) -> usize {
        self.initial_factors + self.initial_variables
    }

    /// Mean engine time per iteration over the last quarter of the run, in ms.
    pub fn final_quartile_ms(&self) -> f64 {
        let n = self.iteration_us.len();
        if n == 0 {
            return 0.0;
        }
        let tail = &self.iteration_us[n - n.div_ceil(4)..];
        tail.iter().sum::<u64>() as f64 / tail.len() as f64 / 1000.0
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "iterations={}\nfinal_factors={}\nfinal_variables={}\nms_per_iter={:.6}\nsolve_ms={:.3}\nsearch_iterations={}\ncertain_cells={}\n",
            self.iterations,
            self.final_factors,
            self.final_variables,
            self.ms_per_iter,
            self.solve_ms,
            self.search_iterations,
            self.certain_cells,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub grid: Puzzle,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("no solution after {} iterations", stats.iterations)]
    Unsolved { stats: Box<SolveStats> },
    #[error("puzzle is inconsistent: {reason}")]
    Inconsistent { reason: String, stats: Box<SolveStats> },
    #[error(transparent)]
    Engine(EngineError),
}

impl SolveError {
    pub fn stats(&self) -> Option<&SolveStats> {
        match self {
            SolveError::Unsolved { stats } | SolveError::Inconsistent { stats, .. } => Some(stats),
            SolveError::Engine(_) => None,
        }
    }
}

/// Solves `puzzle`, reporting every iteration to `observer`.
pub fn solve_with(
    puzzle: &Puzzle,
    config: &SolveConfig,
    mut observer: impl FnMut(&IterationStatus),
) -> Result<Solution, SolveError> {
    let clock = Instant::now();
    let encoded = build_graph(puzzle);
    let n = puzzle.n();
    let index = Arc::new(encoded.index);
    let initial = encoded.graph.counts();

    let mut engine: Engine<Removal> = Engine::new(encoded.graph, config.engine.clone()).map_err(SolveError::Engine)?;
    let mut cell_reasoners = vec![None; n * n];
    for row in 0..n {
        for col in 0..n {
            if let Some(vars) = index.cell(row, col) {
                let id = engine
                    .add_local_reasoner(vars, PossibilityReasoner::new(row, col))
                    .map_err(SolveError::Engine)?;
                cell_reasoners[row * n + col] = Some(id);
            }
        }
    }
    if config.dynamics {
        let pruning = PruningReasoner::new(engine.graph(), index.clone(), encoded.constraints, cell_reasoners);
        engine.add_global_reasoner(pruning);
    }
    let (detector, report) = SolutionDetector::new(puzzle.clone(), index);
    engine.add_global_reasoner(detector);

    let mut iteration_us = Vec::new();
    let outcome = engine.run_with(|status, _| {
        iteration_us.push(status.timings.total_us());
        observer(status);
    });

    let solve_ms = clock.elapsed().as_secs_f64() * 1000.0;
    let report = report.lock().expect("report lock").clone();
    let counts = engine.graph().counts();
    let iterations = engine.iteration();
    let stats = SolveStats {
        iterations,
        initial_factors: initial.factors,
        initial_variables: initial.variables,
        final_factors: counts.factors,
        final_variables: counts.variables,
        final_edges: counts.edges,
        search_iterations: report.search_iterations,
        certain_cells: report.certain_cells,
        open_cells: puzzle.open_cells(),
        solve_ms,
        ms_per_iter: if iterations > 0 {
            solve_ms / iterations as f64
        } else {
            0.0
        },
        iteration_us,
    };

    match outcome {
        Err(EngineError::Infeasible { source, .. }) => {
            return Err(SolveError::Inconsistent {
                reason: source.to_string(),
                stats: Box::new(stats),
            })
        }
        Err(EngineError::Conflict { source, .. }) => {
            return Err(SolveError::Inconsistent {
                reason: source.to_string(),
                stats: Box::new(stats),
            })
        }
        Err(e) => return Err(SolveError::Engine(e)),
        Ok(_) => {}
    }
    if let Some(reason) = report.contradiction {
        return Err(SolveError::Inconsistent {
            reason,
            stats: Box::new(stats),
        });
    }
    match report.solution {
        Some(grid) => Ok(Solution {
            grid: puzzle.with_cells(grid).expect("detector validated the grid"),
            stats,
        }),
        None => Err(SolveError::Unsolved { stats: Box::new(stats) }),
    }
}

pub fn solve(puzzle: &Puzzle, config: &SolveConfig) -> Result<Solution, SolveError> {
    solve_with(puzzle, config, |_| {})
}
