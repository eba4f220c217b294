//! `twa`: solve Sudoku, pack circles, and benchmark the three-weight engine.
//!
//! Exit codes: 0 solved/converged, 2 unsolved within the iteration cap,
//! 3 inconsistent or infeasible input, 1 usage or I/O error.

mod bench;
mod pack;
mod report;
mod sudoku;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "twa",
    version,
    about = "Three-weight message passing with dynamic factor graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Solve one Sudoku puzzle file.
    Sudoku(sudoku::Args),
    /// Pack congruent circles into the unit square.
    Pack(pack::Args),
    /// Compare dynamics on/off and thread counts over a puzzle corpus.
    Bench(bench::Args),
}

/// Process outcome shared by the subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Solved,
    Usage,
    Unsolved,
    Infeasible,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> ExitCode {
        ExitCode::from(match o {
            Outcome::Solved => 0,
            Outcome::Usage => 1,
            Outcome::Unsolved => 2,
            Outcome::Infeasible => 3,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Outcome::Usage.into()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Cmd::Sudoku(args) => sudoku::run(&args),
        Cmd::Pack(args) => pack::run(&args),
        Cmd::Bench(args) => bench::run(&args),
    }
    .into()
}
