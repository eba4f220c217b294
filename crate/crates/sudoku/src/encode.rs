//! Indicator-variable encoding of a puzzle as a factor graph.

use std::collections::HashMap;

use twa_core::{FactorGraph, FactorId, VariableId};

use crate::one_on::OneOnFactor;
use crate::puzzle::Puzzle;

/// Constraint family of a one-on factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// One digit per cell.
    Cell {
        row: usize,
        col: usize,
    },
    /// Each digit once per row.
    Row {
        row: usize,
        digit: u8,
    },
    Column {
        col: usize,
        digit: u8,
    },
    Region {
        region: usize,
        digit: u8,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintInfo {
    pub constraint: Constraint,
    /// The group's digit is already placed by a clue; every member is off.
    pub placed: bool,
}

/// Bijection between open-cell (row, column, digit) triples and variables.
#[derive(Debug, Clone)]
pub struct IndicatorIndex {
    n: usize,
    /// Row-major per cell, digit-major within; `None` for clue cells.
    slots: Vec<Option<VariableId>>,
    triples: HashMap<VariableId, (usize, usize, u8)>,
}

impl IndicatorIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variable(&self, row: usize, col: usize, digit: u8) -> Option<VariableId> {
        if row >= self.n || col >= self.n || digit == 0 || digit as usize > self.n {
            return None;
        }
        self.slots[(row * self.n + col) * self.n + digit as usize - 1]
    }

    pub fn triple(&self, v: VariableId) -> Option<(usize, usize, u8)> {
        self.triples.get(&v).copied()
    }

    /// The indicators of an open cell in digit order, or `None` for a clue cell.
    pub fn cell(&self, row: usize, col: usize) -> Option<Vec<VariableId>> {
        let base = (row * self.n + col) * self.n;
        self.slots[base..base + self.n].iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

#[derive(Debug)]
pub struct SudokuGraph {
    pub graph: FactorGraph,
    pub index: IndicatorIndex,
    pub constraints: HashMap<FactorId, ConstraintInfo>,
}

/// Encodes `puzzle`: one indicator per open-cell digit, and one-on factors
/// for every cell, row-digit, column-digit and region-digit group that has
/// open members. A group whose digit a clue already places becomes a
/// `satisfied` factor that holds its members off.
pub fn build_graph(puzzle: &Puzzle) -> SudokuGraph {
    let n = puzzle.n();
    let mut graph = FactorGraph::new();
    let mut slots = vec![None; n * n * n];
    let mut triples = HashMap::new();
    for row in 0..n {
        for col in 0..n {
            if puzzle.get(row, col).is_some() {
                continue;
            }
            for d in 1..=n as u8 {
                let v = graph.add_variable(1.0 / n as f64);
                slots[(row * n + col) * n + d as usize - 1] = Some(v);
                triples.insert(v, (row, col, d));
            }
        }
    }
    let index = IndicatorIndex { n, slots, triples };

    let mut in_row = vec![vec![false; n + 1]; n];
    let mut in_col = vec![vec![false; n + 1]; n];
    let mut in_region = vec![vec![false; n + 1]; n];
    for ((r, c), d) in puzzle.clues() {
        in_row[r][d as usize] = true;
        in_col[c][d as usize] = true;
        in_region[puzzle.region(r, c)][d as usize] = true;
    }

    let mut constraints = HashMap::new();
    let mut add = |graph: &mut FactorGraph, constraint: Constraint, placed: bool, vars: Vec<VariableId>| {
        if vars.is_empty() {
            return;
        }
        let factor = if placed {
            OneOnFactor::satisfied()
        } else {
            OneOnFactor::open()
        };
        let id = graph
            .add_factor(Box::new(factor), &vars)
            .expect("indicators were just created");
        constraints.insert(id, ConstraintInfo { constraint, placed });
    };

    for row in 0..n {
        for col in 0..n {
            if let Some(vars) = index.cell(row, col) {
                add(&mut graph, Constraint::Cell { row, col }, false, vars);
            }
        }
    }
    for (row, placed) in in_row.iter().enumerate() {
        for digit in 1..=n as u8 {
            let vars = (0..n).filter_map(|c| index.variable(row, c, digit)).collect();
            add(&mut graph, Constraint::Row { row, digit }, placed[digit as usize], vars);
        }
    }
    for (col, placed) in in_col.iter().enumerate() {
        for digit in 1..=n as u8 {
            let vars = (0..n).filter_map(|r| index.variable(r, col, digit)).collect();
            add(
                &mut graph,
                Constraint::Column { col, digit },
                placed[digit as usize],
                vars,
            );
        }
    }
    for (region, placed) in in_region.iter().enumerate() {
        for digit in 1..=n as u8 {
            let vars = puzzle
                .region_cells(region)
                .filter_map(|(r, c)| index.variable(r, c, digit))
                .collect();
            add(
                &mut graph,
                Constraint::Region { region, digit },
                placed[digit as usize],
                vars,
            );
        }
    }

    SudokuGraph {
        graph,
        index,
        constraints,
    }
}
