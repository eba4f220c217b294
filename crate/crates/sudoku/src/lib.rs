//! N×N Sudoku on the three-weight engine.
//!
//! Each open cell gets one indicator variable per digit; one-on factors
//! require exactly one indicator per cell, and each digit exactly once per
//! row, column and region. Clue certainty propagates as infinite-weight
//! messages; the pruning reasoner removes structure that can no longer
//! matter, and the solution detector halts once the grid is determined.

pub mod encode;
pub mod one_on;
pub mod oracle;
pub mod puzzle;
pub mod reasoners;
pub mod solve;

pub use encode::{build_graph, Constraint, ConstraintInfo, IndicatorIndex, SudokuGraph};
pub use one_on::OneOnFactor;
pub use oracle::{is_logic_only, propagate_singles, solve_bruteforce, BruteForceError};
pub use puzzle::{format_grid, parse_puzzle, Puzzle, PuzzleError};
pub use reasoners::{DetectorReport, PossibilityReasoner, PruningReasoner, Removal, SolutionDetector};
pub use solve::{solve, solve_with, Solution, SolveConfig, SolveError, SolveStats};
