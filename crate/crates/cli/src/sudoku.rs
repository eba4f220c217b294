use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use twa_core::EngineConfig;
use twa_sudoku::{parse_puzzle, solve_with, PuzzleError, SolveConfig, SolveError, SolveStats};

use crate::report::{json_line, Format, Switch, Timing};
use crate::Outcome;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Puzzle file: optional `n=<N>` line, then N rows of digits with `.` or `0` for blanks.
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub dynamics: Switch,
    #[arg(long, env = "TWA_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub report: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct ConfigEcho<'a> {
    task: &'static str,
    file: &'a str,
    dynamics: bool,
    threads: usize,
    max_iters: u64,
    epsilon: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Summary {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<u8>>,
    iterations: u64,
    initial_graph_size: usize,
    final_graph_size: usize,
    search_iterations: u64,
    certain_cells: usize,
    open_cells: usize,
    threads: usize,
    timings: Timing,
}

impl Summary {
    fn new(status: &'static str, stats: &SolveStats, threads: usize) -> Self {
        Summary {
            status,
            reason: None,
            grid: None,
            iterations: stats.iterations,
            initial_graph_size: stats.initial_graph_size(),
            final_graph_size: stats.final_graph_size(),
            search_iterations: stats.search_iterations,
            certain_cells: stats.certain_cells,
            open_cells: stats.open_cells,
            threads,
            timings: Timing {
                solve_seconds: stats.solve_ms / 1000.0,
                ms_per_iter: stats.ms_per_iter,
            },
        }
    }

    fn write_text(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "status: {}", self.status)?;
        if let Some(r) = &self.reason {
            writeln!(out, "reason: {r}")?;
        }
        writeln!(out, "iterations: {}", self.iterations)?;
        writeln!(out, "initial graph size: {}", self.initial_graph_size)?;
        writeln!(out, "final graph size: {}", self.final_graph_size)?;
        writeln!(out, "search iterations: {}", self.search_iterations)?;
        writeln!(out, "certain cells: {}/{}", self.certain_cells, self.open_cells)?;
        writeln!(out, "threads: {}", self.threads)?;
        writeln!(out, "solve seconds: {:.6}", self.timings.solve_seconds)?;
        writeln!(out, "ms/iteration: {:.6}", self.timings.ms_per_iter)
    }
}

pub fn run(args: &Args) -> Outcome {
    match execute(args, &mut BufWriter::new(io::stdout().lock())) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("twa sudoku: {e}");
            Outcome::Usage
        }
    }
}

fn execute(args: &Args, out: &mut impl Write) -> io::Result<Outcome> {
    let text = match std::fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("twa sudoku: cannot read {}: {e}", args.file.display());
            eprintln!("usage: twa sudoku --file PATH [--dynamics on|off] [--threads K] [--max-iters M]");
            return Ok(Outcome::Usage);
        }
    };
    let puzzle = match parse_puzzle(&text) {
        Ok(p) => p,
        Err(e @ PuzzleError::Invalid(_)) => {
            eprintln!("twa sudoku: {e}");
            return Ok(Outcome::Infeasible);
        }
        Err(e) => {
            eprintln!("twa sudoku: {}: {e}", args.file.display());
            return Ok(Outcome::Usage);
        }
    };
    let config = SolveConfig {
        engine: EngineConfig {
            epsilon_convergence: args.epsilon,
            max_iterations: args.max_iters,
            thread_count: args.threads,
            rng_seed: args.seed,
            ..EngineConfig::default()
        },
        dynamics: args.dynamics.is_on(),
    };
    if let Err(e) = config.engine.validate() {
        eprintln!("twa sudoku: {e}");
        return Ok(Outcome::Usage);
    }
    let json = args.report == Format::JsonLines;
    if json {
        let file = args.file.display().to_string();
        json_line(
            out,
            "config",
            &ConfigEcho {
                task: "sudoku",
                file: &file,
                dynamics: config.dynamics,
                threads: args.threads,
                max_iters: args.max_iters,
                epsilon: args.epsilon,
                seed: args.seed,
            },
        )?;
    }
    let mut write_err = None;
    let result = solve_with(&puzzle, &config, |status| {
        if json && write_err.is_none() {
            if let Err(e) = json_line(out, "iteration", status) {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let (outcome, summary, grid) = match result {
        Ok(sol) => {
            let mut s = Summary::new("solved", &sol.stats, args.threads);
            s.grid = Some(sol.grid.cells().to_vec());
            (Outcome::Solved, s, Some(sol.grid))
        }
        Err(SolveError::Unsolved { stats }) => {
            (Outcome::Unsolved, Summary::new("unsolved", &stats, args.threads), None)
        }
        Err(SolveError::Inconsistent { reason, stats }) => {
            let mut s = Summary::new("inconsistent", &stats, args.threads);
            s.reason = Some(reason);
            (Outcome::Infeasible, s, None)
        }
        Err(SolveError::Engine(e)) => {
            eprintln!("twa sudoku: {e}");
            return Ok(Outcome::Usage);
        }
    };
    if json {
        json_line(out, "summary", &summary)?;
    } else {
        if let Some(g) = grid {
            write!(out, "{}", g.to_text())?;
            writeln!(out)?;
        }
        summary.write_text(out)?;
    }
    out.flush()?;
    Ok(outcome)
}
