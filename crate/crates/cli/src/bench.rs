use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use twa_core::EngineConfig;
use twa_sudoku::{parse_puzzle, solve, Puzzle, SolveConfig, SolveError, SolveStats};

use crate::report::{json_line, Format, Switch};
use crate::Outcome;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of puzzle files, or of one subdirectory per puzzle class.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threads: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "on,off")]
    pub dynamics: Vec<Switch>,
    /// Puzzles per class.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub report: Format,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct RunTiming {
    solve_seconds: f64,
    ms_per_iter: f64,
    final_quartile_ms: f64,
}

#[derive(Debug, Serialize)]
struct Run {
    class: String,
    puzzle: String,
    dynamics: bool,
    threads: usize,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    iterations: u64,
    initial_graph_size: usize,
    final_graph_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<u8>>,
    timings: RunTiming,
}

#[derive(Debug, Serialize)]
struct Row {
    class: String,
    dynamics: bool,
    threads: usize,
    puzzles: usize,
    solved: usize,
    mean_iterations: f64,
    mean_initial_graph_size: f64,
    mean_final_graph_size: f64,
    timings: RowTiming,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct RowTiming {
    mean_solve_seconds: f64,
    mean_ms_per_iter: f64,
    mean_final_quartile_ms: f64,
}

#[derive(Debug, Serialize)]
struct Scaling {
    class: String,
    dynamics: bool,
    threads: usize,
    baseline_threads: usize,
    timings: ScalingTiming,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ScalingTiming {
    mean_ms_per_iter: f64,
    speedup: f64,
}

pub fn run(args: &Args) -> Outcome {
    match execute(args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("twa bench: {e}");
            Outcome::Usage
        }
    }
}

/// `(class, [(name, puzzle or why it could not be read)])`, sorted by class
/// then file name.
type Corpus = Vec<(String, Vec<(String, Result<Puzzle, String>)>)>;

fn load_corpus(dir: &Path, limit: Option<usize>) -> io::Result<Corpus> {
    let mut subdirs = Vec::new();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            subdirs.push(path);
        } else if path.is_file() {
            files.push(path);
        }
    }
    let class_name = |p: &Path| {
        p.file_name()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    };
    let mut classes = Vec::new();
    if !files.is_empty() {
        classes.push((class_name(dir), files));
    }
    for sub in subdirs {
        let mut files = Vec::new();
        for entry in fs::read_dir(&sub)? {
            let path = entry?.path();
            if path.is_file() {
                files.push(path);
            }
        }
        if !files.is_empty() {
            classes.push((class_name(&sub), files));
        }
    }
    classes.sort_by(|a, b| a.0.cmp(&b.0));
    let mut corpus = Vec::new();
    for (class, mut files) in classes {
        files.sort();
        files.truncate(limit.unwrap_or(usize::MAX));
        let mut puzzles = Vec::new();
        for f in files {
            let puzzle = fs::read_to_string(&f)
                .map_err(|e| e.to_string())
                .and_then(|text| parse_puzzle(&text).map_err(|e| e.to_string()));
            puzzles.push((class_name(&f), puzzle));
        }
        corpus.push((class, puzzles));
    }
    Ok(corpus)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

struct RunKey<'a> {
    class: &'a str,
    name: &'a str,
    dynamics: bool,
    threads: usize,
}

/// Status, grid and error message of a finished run.
type Verdict = (&'static str, Option<Vec<u8>>, Option<String>);

fn run_record(key: &RunKey, (status, grid, error): Verdict, stats: Option<&SolveStats>) -> Run {
    Run {
        class: key.class.to_string(),
        puzzle: key.name.to_string(),
        dynamics: key.dynamics,
        threads: key.threads,
        status,
        error,
        iterations: stats.map_or(0, |s| s.iterations),
        initial_graph_size: stats.map_or(0, SolveStats::initial_graph_size),
        final_graph_size: stats.map_or(0, SolveStats::final_graph_size),
        grid,
        timings: RunTiming {
            solve_seconds: stats.map_or(0.0, |s| s.solve_ms / 1000.0),
            ms_per_iter: stats.map_or(0.0, |s| s.ms_per_iter),
            final_quartile_ms: stats.map_or(0.0, SolveStats::final_quartile_ms),
        },
    }
}

/// Solves one puzzle; failures become part of the record.
fn bench_one(key: &RunKey, puzzle: &Result<Puzzle, String>, config: &SolveConfig) -> Run {
    let puzzle = match puzzle {
        Ok(p) => p,
        Err(reason) => return run_record(key, ("error", None, Some(reason.clone())), None),
    };
    match solve(puzzle, config) {
        Ok(sol) => run_record(key, ("solved", Some(sol.grid.cells().to_vec()), None), Some(&sol.stats)),
        Err(SolveError::Unsolved { stats }) => run_record(key, ("unsolved", None, None), Some(&stats)),
        Err(SolveError::Inconsistent { reason, stats }) => {
            run_record(key, ("inconsistent", None, Some(reason)), Some(&stats))
        }
        Err(SolveError::Engine(e)) => run_record(key, ("error", None, Some(e.to_string())), None),
    }
}

fn execute(args: &Args) -> io::Result<Outcome> {
    if args.threads.is_empty() || args.threads.contains(&0) {
        eprintln!("twa bench: --threads needs positive counts");
        return Ok(Outcome::Usage);
    }
    let corpus = match load_corpus(&args.corpus, args.limit) {
        Ok(c) if c.is_empty() => {
            eprintln!("twa bench: no puzzles under {}", args.corpus.display());
            return Ok(Outcome::Usage);
        }
        Ok(c) => c,
        Err(e) => {
            eprintln!("twa bench: {}: {e}", args.corpus.display());
            return Ok(Outcome::Usage);
        }
    };
    let json = args.report == Format::JsonLines;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut runs = Vec::new();
    for (class, puzzles) in &corpus {
        for &dynamics in &args.dynamics {
            for &threads in &args.threads {
                for (name, puzzle) in puzzles {
                    let config = SolveConfig {
                        engine: EngineConfig {
                            epsilon_convergence: args.epsilon,
                            max_iterations: args.max_iters,
                            thread_count: threads,
                            rng_seed: args.seed,
                            ..EngineConfig::default()
                        },
                        dynamics: dynamics.is_on(),
                    };
                    let key = RunKey {
                        class,
                        name,
                        dynamics: dynamics.is_on(),
                        threads,
                    };
                    let run = bench_one(&key, puzzle, &config);
                    if let Some(e) = &run.error {
                        eprintln!("twa bench: {class}/{name}: {e}");
                    }
                    if json {
                        json_line(&mut out, "run", &run)?;
                    }
                    runs.push(run);
                }
            }
        }
    }

    let mut rows = Vec::new();
    let mut groups: BTreeMap<(&str, bool, usize), Vec<&Run>> = BTreeMap::new();
    for r in &runs {
        groups.entry((&r.class, r.dynamics, r.threads)).or_default().push(r);
    }
    // keep the corpus and command-line order
    for (class, _) in &corpus {
        for &dynamics in &args.dynamics {
            for &threads in &args.threads {
                let Some(group) = groups.get(&(class.as_str(), dynamics.is_on(), threads)) else {
                    continue;
                };
                rows.push(Row {
                    class: class.clone(),
                    dynamics: dynamics.is_on(),
                    threads,
                    puzzles: group.len(),
                    solved: group.iter().filter(|r| r.status == "solved").count(),
                    mean_iterations: mean(group.iter().map(|r| r.iterations as f64)),
                    mean_initial_graph_size: mean(group.iter().map(|r| r.initial_graph_size as f64)),
                    mean_final_graph_size: mean(group.iter().map(|r| r.final_graph_size as f64)),
                    timings: RowTiming {
                        mean_solve_seconds: mean(group.iter().map(|r| r.timings.solve_seconds)),
                        mean_ms_per_iter: mean(group.iter().map(|r| r.timings.ms_per_iter)),
                        mean_final_quartile_ms: mean(group.iter().map(|r| r.timings.final_quartile_ms)),
                    },
                });
            }
        }
    }

    let baseline_threads = *args.threads.iter().min().expect("threads is non-empty");
    let scaling: Vec<Scaling> = rows
        .iter()
        .map(|row| {
            let base = rows
                .iter()
                .find(|b| b.class == row.class && b.dynamics == row.dynamics && b.threads == baseline_threads)
                .expect("baseline row exists");
            Scaling {
                class: row.class.clone(),
                dynamics: row.dynamics,
                threads: row.threads,
                baseline_threads,
                timings: ScalingTiming {
                    mean_ms_per_iter: row.timings.mean_ms_per_iter,
                    speedup: if row.timings.mean_ms_per_iter > 0.0 {
                        base.timings.mean_ms_per_iter / row.timings.mean_ms_per_iter
                    } else {
                        0.0
                    },
                },
            }
        })
        .collect();

    if json {
        for row in &rows {
            json_line(&mut out, "row", row)?;
        }
        for s in &scaling {
            json_line(&mut out, "scaling", s)?;
        }
    } else {
        write_tables(&mut out, &rows, &scaling)?;
    }
    out.flush()?;

    Ok(if runs.iter().any(|r| r.status == "error") {
        Outcome::Usage
    } else if runs.iter().any(|r| r.status == "inconsistent") {
        Outcome::Infeasible
    } else if runs.iter().any(|r| r.status != "solved") {
        Outcome::Unsolved
    } else {
        Outcome::Solved
    })
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn write_tables(out: &mut impl Write, rows: &[Row], scaling: &[Scaling]) -> io::Result<()> {
    writeln!(
        out,
        "{:<12} {:>8} {:>7} {:>7} {:>10} {:>12} {:>10} {:>12} {:>10}",
        "class", "dynamics", "threads", "solved", "iters", "final size", "ms/iter", "last-q ms", "solve s"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:<12} {:>8} {:>7} {:>7} {:>10.1} {:>12.1} {:>10.4} {:>12.4} {:>10.4}",
            r.class,
            on_off(r.dynamics),
            r.threads,
            format!("{}/{}", r.solved, r.puzzles),
            r.mean_iterations,
            r.mean_final_graph_size,
            r.timings.mean_ms_per_iter,
            r.timings.mean_final_quartile_ms,
            r.timings.mean_solve_seconds,
        )?;
    }
    writeln!(out)?;
    writeln!(
        out,
        "{:<12} {:>8} {:>7} {:>10} {:>8}",
        "class", "dynamics", "threads", "ms/iter", "speedup"
    )?;
    for s in scaling {
        writeln!(
            out,
            "{:<12} {:>8} {:>7} {:>10.4} {:>8.2}",
            s.class,
            on_off(s.dynamics),
            s.threads,
            s.timings.mean_ms_per_iter,
            s.timings.speedup
        )?;
    }
    Ok(())
}
