//! Reference solvers independent of the message-passing engine: a
//! depth-first search that counts solutions, and a singles-only propagator
//! that classifies puzzles solvable by pure deduction.

use crate::puzzle::Puzzle;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BruteForceError {
    #[error("puzzle has no solution")]
    NoSolution,
    #[error("puzzle has more than one solution")]
    MultipleSolutions,
}

/// Candidate bitmasks plus the peer structure of the grid.
#[derive(Clone)]
struct Board {
    n: usize,
    grid: Vec<u8>,
    cand: Vec<u64>,
}

struct Layout {
    units: Vec<Vec<usize>>,
    /// Units each cell belongs to (row, column, region).
    cell_units: Vec<[usize; 3]>,
}

impl Layout {
    fn new(p: &Puzzle) -> Self {
        let n = p.n();
        let mut units = Vec::with_capacity(3 * n);
        for r in 0..n {
            units.push((0..n).map(|c| r * n + c).collect());
        }
        for c in 0..n {
            units.push((0..n).map(|r| r * n + c).collect());
        }
        for k in 0..n {
            units.push(p.region_cells(k).map(|(r, c)| r * n + c).collect());
        }
        let cell_units = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                [r, n + c, 2 * n + p.region(r, c)]
            })
            .collect();
        Layout { units, cell_units }
    }
}

impl Board {
    fn new(p: &Puzzle, layout: &Layout) -> Option<Self> {
        let n = p.n();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut b = Board {
            n,
            grid: vec![0; n * n],
            cand: vec![full; n * n],
        };
        for ((r, c), d) in p.clues() {
            if !b.assign(layout, r * n + c, d) {
                return None;
            }
        }
        Some(b)
    }

    /// Places `d` and removes it from every peer; false on a wipe-out.
    fn assign(&mut self, layout: &Layout, cell: usize, d: u8) -> bool {
        let bit = 1u64 << (d - 1);
        if self.cand[cell] & bit == 0 {
            return false;
        }
        self.grid[cell] = d;
        self.cand[cell] = bit;
        for &u in &layout.cell_units[cell] {
            for &p in &layout.units[u] {
                if p != cell {
                    if self.grid[p] == d {
                        return false;
                    }
                    self.cand[p] &= !bit;
                    if self.grid[p] == 0 && self.cand[p] == 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Applies naked and hidden singles to a fixed point; false on contradiction.
    fn propagate(&mut self, layout: &Layout) -> bool {
        loop {
            let mut progress = false;
            for cell in 0..self.grid.len() {
                if self.grid[cell] == 0 && self.cand[cell].count_ones() == 1 {
                    let d = self.cand[cell].trailing_zeros() as u8 + 1;
                    if !self.assign(layout, cell, d) {
                        return false;
                    }
                    progress = true;
                }
            }
            for unit in &layout.units {
                for d in 1..=self.n as u8 {
                    let bit = 1u64 << (d - 1);
                    let mut spot = None;
                    let mut count = 0;
                    let mut placed = false;
                    for &cell in unit {
                        if self.grid[cell] == d {
                            placed = true;
                            break;
                        }
                        if self.grid[cell] == 0 && self.cand[cell] & bit != 0 {
                            count += 1;
                            spot = Some(cell);
                        }
                    }
                    if placed {
                        continue;
                    }
                    match (count, spot) {
                        (0, _) => return false,
                        (1, Some(cell)) => {
                            if !self.assign(layout, cell, d) {
                                return false;
                            }
                            progress = true;
                        }
                        _ => {}
                    }
                }
            }
            if !progress {
                return true;
            }
        }
    }

    fn most_constrained(&self) -> Option<usize> {
        (0..self.grid.len())
            .filter(|&c| self.grid[c] == 0)
            .min_by_key(|&c| self.cand[c].count_ones())
    }
}

struct Search<'a> {
    layout: &'a Layout,
    limit: usize,
    nodes_left: u64,
    found: Vec<Vec<u8>>,
}

impl Search<'_> {
    /// False once the node budget is exhausted.
    fn run(&mut self, mut board: Board) -> bool {
        if self.nodes_left == 0 {
            return false;
        }
        self.nodes_left -= 1;
        if !board.propagate(self.layout) {
            return true;
        }
        let Some(cell) = board.most_constrained() else {
            self.found.push(board.grid);
            return true;
        };
        let mut cand = board.cand[cell];
        while cand != 0 && self.found.len() < self.limit {
            let d = cand.trailing_zeros() as u8 + 1;
            cand &= cand - 1;
            let mut next = board.clone();
            if next.assign(self.layout, cell, d) && !self.run(next) {
                return false;
            }
        }
        true
    }
}

/// Up to `limit` distinct solutions, or `None` if the search visits more
/// than `max_nodes` nodes first.
pub fn solutions_within(puzzle: &Puzzle, limit: usize, max_nodes: u64) -> Option<Vec<Vec<u8>>> {
    let layout = Layout::new(puzzle);
    let mut search = Search {
        layout: &layout,
        limit,
        nodes_left: max_nodes,
        found: Vec::new(),
    };
    match Board::new(puzzle, &layout) {
        Some(board) => search.run(board).then_some(search.found),
        None => Some(Vec::new()),
    }
}

/// Up to `limit` distinct solutions.
pub fn solutions(puzzle: &Puzzle, limit: usize) -> Vec<Vec<u8>> {
    solutions_within(puzzle, limit, u64::MAX).expect("unbounded search completes")
}

/// The unique solution, found by depth-first search with forward checking.
pub fn solve_bruteforce(puzzle: &Puzzle) -> Result<Vec<u8>, BruteForceError> {
    let mut found = solutions(puzzle, 2);
    match found.len() {
        0 => Err(BruteForceError::NoSolution),
        1 => Ok(found.pop().expect("one solution")),
        _ => Err(BruteForceError::MultipleSolutions),
    }
}

/// Grid after repeatedly placing naked and hidden singles; open cells stay 0.
/// `None` if deduction hits a contradiction.
pub fn propagate_singles(puzzle: &Puzzle) -> Option<Vec<u8>> {
    let layout = Layout::new(puzzle);
    let mut board = Board::new(puzzle, &layout)?;
    board.propagate(&layout).then_some(board.grid)
}

/// Whether singles alone complete the grid.
pub fn is_logic_only(puzzle: &Puzzle) -> bool {
    propagate_singles(puzzle).is_some_and(|g| g.iter().all(|&d| d != 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::puzzle::parse_puzzle;

    const SOLVED: &str = "\
5 3 4 6 7 8 9 1 2
6 7 2 1 9 5 3 4 8
1 9 8 3 4 2 5 6 7
8 5 9 7 6 1 4 2 3
4 2 6 8 5 3 7 9 1
7 1 3 9 2 4 8 5 6
9 6 1 5 3 7 2 8 4
2 8 7 4 1 9 6 3 5
3 4 5 2 8 6 1 7 9
";

    #[test]
    fn empty_four_by_four_is_ambiguous() {
        let p = Puzzle::empty(4).unwrap();
        assert_eq!(solve_bruteforce(&p), Err(BruteForceError::MultipleSolutions));
        // 288 distinct 4×4 grids exist
        assert_eq!(solutions(&p, 1000).len(), 288);
    }

    #[test]
    fn fills_single_hole() {
        let full = parse_puzzle(SOLVED).unwrap();
        let mut cells = full.cells().to_vec();
        cells[40] = 0;
        let p = Puzzle::new(9, cells).unwrap();
        assert_eq!(solve_bruteforce(&p).unwrap(), full.cells());
        assert!(is_logic_only(&p));
    }

    #[test]
    fn no_solution_detected() {
        // the last row needs its 9 in column 8, which already holds one
        let mut cells = parse_puzzle(SOLVED).unwrap().cells().to_vec();
        cells[8] = 0;
        cells[17] = 0;
        cells[8 * 9 + 8] = 0;
        cells[7 * 9 + 8] = 9;
        cells[7 * 9 + 5] = 0;
        let p = Puzzle::new(9, cells).unwrap();
        assert_eq!(solve_bruteforce(&p), Err(BruteForceError::NoSolution));
    }
}
