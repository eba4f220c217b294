//! Sudoku knowledge hooks: per-cell possibility tracking, pruning of dead
//! graph structure, and solution detection.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use twa_core::{
    FactorId, GlobalContext, GlobalReasoner, GraphEdit, LocalReasoner, LocalReasonerId, LocalView, Message, Outbox,
    VariableId,
};

use crate::encode::{ConstraintInfo, IndicatorIndex};
use crate::puzzle::Puzzle;

/// A digit that has become certainly impossible for a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Removal {
    pub row: usize,
    pub col: usize,
    pub digit: u8,
}

/// Watches one open cell's indicators and reports each digit once it is
/// certainly off.
#[derive(Debug, Clone)]
pub struct PossibilityReasoner {
    row: usize,
    col: usize,
    reported: u64,
}

impl PossibilityReasoner {
    pub fn new(row: usize, col: usize) -> Self {
        PossibilityReasoner { row, col, reported: 0 }
    }
}

impl LocalReasoner<Removal> for PossibilityReasoner {
    fn reason(&mut self, view: &LocalView<'_>, _outbox: &mut Outbox, events: &mut Vec<Removal>) {
        for slot in 0..view.len() {
            if self.reported & (1 << slot) != 0 {
                continue;
            }
            if let Some((z, w)) = view.concurred(slot) {
                if w.is_infinite() && z < 0.5 {
                    self.reported |= 1 << slot;
                    events.push(Removal {
                        row: self.row,
                        col: self.col,
                        digit: slot as u8 + 1,
                    });
                }
            }
        }
    }
}

/// Removes the edges of impossible indicators. A one-on group left with a
/// single candidate has that candidate pinned on through its cell's
/// possibility reasoner and is removed; emptied groups are removed.
pub struct PruningReasoner {
    index: Arc<IndicatorIndex>,
    cell_reasoners: Vec<Option<LocalReasonerId>>,
    constraints: HashMap<FactorId, ConstraintInfo>,
    members: HashMap<FactorId, Vec<VariableId>>,
    memberships: HashMap<VariableId, Vec<FactorId>>,
    handled: HashSet<VariableId>,
    removed: HashSet<FactorId>,
}

impl PruningReasoner {
    pub fn new(
        graph: &twa_core::FactorGraph,
        index: Arc<IndicatorIndex>,
        constraints: HashMap<FactorId, ConstraintInfo>,
        cell_reasoners: Vec<Option<LocalReasonerId>>,
    ) -> Self {
        let mut members: HashMap<FactorId, Vec<VariableId>> = HashMap::new();
        let mut memberships: HashMap<VariableId, Vec<FactorId>> = HashMap::new();
        for f in graph.factors() {
            let vars: Vec<VariableId> = f
                .edges
                .iter()
                .map(|&e| graph.edge(e).expect("live edge").variable)
                .collect();
            for &v in &vars {
                memberships.entry(v).or_default().push(f.id);
            }
            members.insert(f.id, vars);
        }
        PruningReasoner {
            index,
            cell_reasoners,
            constraints,
            members,
            memberships,
            handled: HashSet::new(),
            removed: HashSet::new(),
        }
    }

    fn pin_on(&self, ctx: &mut GlobalContext<'_, Removal>, v: VariableId) {
        let (row, col, digit) = self.index.triple(v).expect("indexed indicator");
        if let Some(reasoner) = self.cell_reasoners[row * self.index.n() + col] {
            ctx.request_emission(reasoner, digit as usize - 1, Message::certain(1.0));
        }
    }
}

impl GlobalReasoner<Removal> for PruningReasoner {
    fn name(&self) -> &str {
        "pruning"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, Removal>) {
        let events = ctx.events().to_vec();
        for ev in events {
            let Some(v) = self.index.variable(ev.row, ev.col, ev.digit) else {
                continue;
            };
            if !self.handled.insert(v) {
                continue;
            }
            if let Some(node) = ctx.graph().variable(v) {
                let edges: Vec<_> = node
                    .edges
                    .iter()
                    .copied()
                    .filter(|&e| {
                        let f = ctx.graph().edge(e).expect("live edge").factor;
                        !self.removed.contains(&f)
                    })
                    .collect();
                for e in edges {
                    ctx.queue_edit(GraphEdit::RemoveEdge(e));
                }
            }
            for f in self.memberships.remove(&v).unwrap_or_default() {
                if self.removed.contains(&f) {
                    continue;
                }
                let left = self.members.get_mut(&f).expect("tracked factor");
                left.retain(|&m| m != v);
                let placed = self.constraints.get(&f).is_some_and(|c| c.placed);
                match left.len() {
                    0 => {}
                    1 if !placed => {
                        let last = left[0];
                        self.pin_on(ctx, last);
                    }
                    _ => continue,
                }
                self.removed.insert(f);
                ctx.queue_edit(GraphEdit::RemoveFactor(f));
            }
        }
    }
}

/// What the solution detector concluded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectorReport {
    pub solution: Option<Vec<u8>>,
    /// Solved by certainty alone (every open cell down to one possibility).
    pub by_certainty: bool,
    /// Iterations spent reading off dominant digits after propagation stalled.
    pub search_iterations: u64,
    /// Open cells whose possibility set is a single digit.
    pub certain_cells: usize,
    pub contradiction: Option<String>,
}

/// Halts the run once the grid is determined.
///
/// Maintains per-cell possibility sets from removal events. When every open
/// cell is down to one digit the grid is certain. Once propagation has been
/// quiet for two iterations, each further iteration reads the dominant digit
/// of each cell (the unique possibility with concurred value above 0.5) and
/// halts if the grid passes the rule checker.
pub struct SolutionDetector {
    puzzle: Puzzle,
    index: Arc<IndicatorIndex>,
    possible: Vec<u64>,
    quiet: u32,
    report: Arc<Mutex<DetectorReport>>,
}

const STALL_AFTER: u32 = 2;

impl SolutionDetector {
    pub fn new(puzzle: Puzzle, index: Arc<IndicatorIndex>) -> (Self, Arc<Mutex<DetectorReport>>) {
        let n = puzzle.n();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let possible = puzzle.cells().iter().map(|&d| if d == 0 { full } else { 0 }).collect();
        let report = Arc::new(Mutex::new(DetectorReport::default()));
        (
            SolutionDetector {
                puzzle,
                index,
                possible,
                quiet: 0,
                report: report.clone(),
            },
            report,
        )
    }

    fn certain_grid(&self) -> Option<Vec<u8>> {
        self.puzzle
            .cells()
            .iter()
            .zip(&self.possible)
            .map(|(&d, &p)| match (d, p.count_ones()) {
                (0, 1) => Some(p.trailing_zeros() as u8 + 1),
                (0, _) => None,
                (d, _) => Some(d),
            })
            .collect()
    }

    fn dominant_grid(&self, graph: &twa_core::FactorGraph) -> Option<Vec<u8>> {
        let n = self.puzzle.n();
        let mut grid = self.puzzle.cells().to_vec();
        for (cell, slot) in grid.iter_mut().enumerate() {
            if *slot != 0 {
                continue;
            }
            let p = self.possible[cell];
            if p.count_ones() == 1 {
                *slot = p.trailing_zeros() as u8 + 1;
                continue;
            }
            let (row, col) = (cell / n, cell % n);
            let mut found = None;
            for d in 1..=n as u8 {
                if p & (1 << (d - 1)) == 0 {
                    continue;
                }
                let v = self.index.variable(row, col, d)?;
                if graph.value(v).is_some_and(|z| z > 0.5) {
                    if found.is_some() {
                        return None;
                    }
                    found = Some(d);
                }
            }
            *slot = found?;
        }
        Some(grid)
    }
}

impl GlobalReasoner<Removal> for SolutionDetector {
    fn name(&self) -> &str {
        "solution"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, Removal>) {
        let n = self.puzzle.n();
        let mut report = self.report.lock().expect("report lock");
        for ev in ctx.events() {
            let cell = ev.row * n + ev.col;
            self.possible[cell] &= !(1 << (ev.digit - 1));
            if self.possible[cell] == 0 && report.contradiction.is_none() {
                report.contradiction = Some(format!("no digit left for cell ({}, {})", ev.row + 1, ev.col + 1));
            }
        }
        report.certain_cells = self
            .puzzle
            .cells()
            .iter()
            .zip(&self.possible)
            .filter(|(&d, p)| d == 0 && p.count_ones() == 1)
            .count();
        if report.contradiction.is_some() {
            ctx.halt();
            return;
        }
        if ctx.events().is_empty() {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }

        if let Some(grid) = self.certain_grid() {
            if self.puzzle.accepts(&grid) {
                report.solution = Some(grid);
                report.by_certainty = true;
                ctx.halt();
                return;
            }
        }
        if self.quiet >= STALL_AFTER {
            report.search_iterations += 1;
            if let Some(grid) = self.dominant_grid(ctx.graph()) {
                if self.puzzle.accepts(&grid) {
                    report.solution = Some(grid);
                    ctx.halt();
                }
            }
        }
    }
}
