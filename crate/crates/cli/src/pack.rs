use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use twa_core::EngineConfig;
use twa_packing::{
    feasibility, write_packing, PackConfig, PackError, PackStatus, Packer, PackingError, PackingInstance,
};
use twa_steer::{ServeConfig, ServeError, Service, DEFAULT_PORT};

use crate::report::{json_line, Format, Timing};
use crate::Outcome;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub circles: usize,
    #[arg(long, conflicts_with = "density", required_unless_present = "density")]
    pub radius: Option<f64>,
    /// Area fraction of the unit square; sets the radius.
    #[arg(long)]
    pub density: Option<f64>,
    /// Neighbourhood buffer as a fraction of the diameter.
    #[arg(long, default_value_t = 0.05)]
    pub buffer: f64,
    #[arg(long, env = "TWA_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write final positions here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Serve the run over WebSocket and keep serving after it converges.
    #[arg(long)]
    pub serve: bool,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value_t = 1)]
    pub snapshot_every: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub report: Format,
}

#[derive(Debug, Serialize)]
struct ConfigEcho {
    task: &'static str,
    circles: usize,
    radius: f64,
    density: f64,
    buffer: f64,
    threads: usize,
    max_iters: u64,
    epsilon: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Summary {
    status: &'static str,
    iterations: u64,
    max_overlap_depth: f64,
    box_violation: f64,
    active_factors: usize,
    pool_size: usize,
    peak_active: usize,
    created_pair_factors: usize,
    threads: usize,
    timings: Timing,
}

pub fn run(args: &Args) -> Outcome {
    match execute(args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("twa pack: {e}");
            Outcome::Usage
        }
    }
}

fn instance(args: &Args) -> Result<PackingInstance, PackingError> {
    let mut inst = match (args.radius, args.density) {
        (Some(r), _) => PackingInstance::new(args.circles, r)?,
        (None, Some(d)) => PackingInstance::with_density(args.circles, d)?,
        (None, None) => unreachable!("clap requires one of --radius and --density"),
    };
    inst.buffer_fraction = args.buffer;
    inst.validate()?;
    Ok(inst)
}

fn execute(args: &Args) -> io::Result<Outcome> {
    let inst = match instance(args) {
        Ok(i) => i,
        Err(e @ PackingError::InfeasibleRadius { .. }) => {
            eprintln!("twa pack: {e}");
            return Ok(Outcome::Infeasible);
        }
        Err(e) => {
            eprintln!("twa pack: {e}");
            return Ok(Outcome::Usage);
        }
    };
    let config = PackConfig {
        engine: EngineConfig {
            epsilon_convergence: args.epsilon,
            max_iterations: args.max_iters,
            thread_count: args.threads,
            rng_seed: args.seed,
            ..EngineConfig::default()
        },
    };
    let packer = match Packer::new(inst, args.seed, &config) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("twa pack: {e}");
            return Ok(Outcome::Usage);
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let json = args.report == Format::JsonLines;
    if json {
        json_line(
            &mut out,
            "config",
            &ConfigEcho {
                task: "pack",
                circles: inst.n,
                radius: inst.radius,
                density: inst.density(),
                buffer: inst.buffer_fraction,
                threads: args.threads,
                max_iters: args.max_iters,
                epsilon: args.epsilon,
                seed: args.seed,
            },
        )?;
        out.flush()?;
    } else {
        writeln!(
            out,
            "circles: {}  radius: {:.9}  density: {:.6}",
            inst.n,
            inst.radius,
            inst.density()
        )?;
    }
    drop(out);

    if args.serve {
        return serve(args, packer, json);
    }

    let mut packer = packer;
    let mut out = BufWriter::new(stdout.lock());
    let clock = Instant::now();
    let mut write_err = None;
    let result = packer.run_with(|s| {
        if json && write_err.is_none() {
            if let Err(e) = json_line(&mut out, "iteration", s) {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let last = match result {
        Ok(s) => s,
        Err(e) => {
            eprintln!("twa pack: {e}");
            return Ok(match e {
                PackError::Engine(
                    twa_core::EngineError::Infeasible { .. } | twa_core::EngineError::Conflict { .. },
                ) => Outcome::Infeasible,
                _ => Outcome::Usage,
            });
        }
    };
    finish(args, &packer, &last, elapsed, &mut out)
}

fn finish(args: &Args, packer: &Packer, last: &PackStatus, elapsed: f64, out: &mut impl Write) -> io::Result<Outcome> {
    let positions = packer.positions();
    let (overlap, box_violation) = feasibility(&positions, packer.instance().radius);
    let stats = packer.pair_stats();
    let feasible = last.converged && overlap.depth <= 1e-6 && box_violation <= 1e-6;
    let summary = Summary {
        status: if feasible { "converged" } else { "not_converged" },
        iterations: last.iteration,
        max_overlap_depth: overlap.depth,
        box_violation,
        active_factors: stats.active,
        pool_size: stats.pool,
        peak_active: stats.peak_active,
        created_pair_factors: stats.created,
        threads: args.threads,
        timings: Timing {
            solve_seconds: elapsed,
            ms_per_iter: if last.iteration > 0 {
                elapsed * 1000.0 / last.iteration as f64
            } else {
                0.0
            },
        },
    };
    if let Some(path) = &args.out {
        let mut file = BufWriter::new(File::create(path)?);
        write_packing(&mut file, packer.instance(), &positions)?;
        file.flush()?;
    }
    if args.report == Format::JsonLines {
        json_line(out, "summary", &summary)?;
    } else {
        writeln!(out, "status: {}", summary.status)?;
        writeln!(out, "iterations: {}", summary.iterations)?;
        writeln!(out, "max overlap depth: {:e}", summary.max_overlap_depth)?;
        writeln!(out, "box violation: {:e}", summary.box_violation)?;
        writeln!(
            out,
            "active pair factors: {} (peak {})",
            summary.active_factors, summary.peak_active
        )?;
        writeln!(out, "pooled pair factors: {}", summary.pool_size)?;
        writeln!(out, "solve seconds: {:.6}", summary.timings.solve_seconds)?;
    }
    out.flush()?;
    Ok(if feasible { Outcome::Solved } else { Outcome::Unsolved })
}

#[derive(Debug, Serialize)]
struct Settled {
    iteration: u64,
    converged: bool,
    max_overlap_depth: f64,
    box_violation: f64,
}

/// Runs under the steering service until the process is killed. A
/// `settled` report (and the `--out` file) is written each time the run
/// comes to rest.
fn serve(args: &Args, packer: Packer, json: bool) -> io::Result<Outcome> {
    let serve = ServeConfig {
        port: args.port,
        snapshot_every: args.snapshot_every.max(1),
        ..ServeConfig::default()
    };
    let sink: twa_steer::StatusSink = if json {
        Box::new(|s: &PackStatus| {
            let _ = json_line(&mut io::stdout().lock(), "iteration", s);
        })
    } else {
        Box::new(|_| {})
    };
    let inst = *packer.instance();
    let service = match Service::start_with(packer, &serve, sink) {
        Ok(s) => s,
        Err(e @ ServeError::PortInUse(_)) => {
            eprintln!("twa pack: {e}");
            return Ok(Outcome::Usage);
        }
        Err(ServeError::Io(e)) => return Err(e),
    };
    eprintln!("twa pack: serving on ws://{}", service.local_addr());
    let mut reported = None;
    loop {
        thread::sleep(Duration::from_millis(50));
        if !service.is_settled() {
            continue;
        }
        let snap = service.latest_snapshot();
        if reported == Some(snap.iteration) {
            continue;
        }
        reported = Some(snap.iteration);
        let positions: Vec<[f64; 2]> = snap.circles.iter().map(|&(_, x, y)| [x, y]).collect();
        let (overlap, box_violation) = feasibility(&positions, inst.radius);
        if let Some(path) = &args.out {
            let mut file = BufWriter::new(File::create(path)?);
            write_packing(&mut file, &inst, &positions)?;
            file.flush()?;
        }
        let settled = Settled {
            iteration: snap.iteration,
            converged: snap.converged,
            max_overlap_depth: overlap.depth,
            box_violation,
        };
        let mut out = io::stdout().lock();
        if json {
            json_line(&mut out, "settled", &settled)?;
        } else {
            writeln!(
                out,
                "settled at iteration {}: max overlap depth {:e}, box violation {:e}",
                settled.iteration, settled.max_overlap_depth, settled.box_violation
            )?;
        }
        out.flush()?;
    }
}
