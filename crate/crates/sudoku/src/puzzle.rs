//! Puzzle grids, the text format, and the rule checker.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PuzzleError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("invalid puzzle: {0}")]
    Invalid(String),
}

/// An N×N square-in-square grid, row-major, 0 for an open cell.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Puzzle {
    n: usize,
    box_size: usize,
    cells: Vec<u8>,
}

fn box_size_of(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s >= 2 && s * s == n && n <= 255).then_some(s)
}

impl Puzzle {
    /// Builds a puzzle from row-major cells and checks clue consistency.
    pub fn new(n: usize, cells: Vec<u8>) -> Result<Self, PuzzleError> {
        let box_size = box_size_of(n).ok_or_else(|| PuzzleError::Invalid(format!("n = {n} is not a square ≥ 4")))?;
        if cells.len() != n * n {
            return Err(PuzzleError::Invalid(format!(
                "expected {} cells, got {}",
                n * n,
                cells.len()
            )));
        }
        if let Some(d) = cells.iter().find(|&&d| d as usize > n) {
            return Err(PuzzleError::Invalid(format!("digit {d} out of range 1..={n}")));
        }
        let p = Puzzle { n, box_size, cells };
        if let Some(conflict) = p.first_conflict() {
            return Err(PuzzleError::Invalid(conflict));
        }
        Ok(p)
    }

    pub fn empty(n: usize) -> Result<Self, PuzzleError> {
        Puzzle::new(n, vec![0; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_size(&self) -> usize {
        self.box_size
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u8> {
        match self.cells[row * self.n + col] {
            0 => None,
            d => Some(d),
        }
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn region(&self, row: usize, col: usize) -> usize {
        (row / self.box_size) * self.box_size + col / self.box_size
    }

    /// Cells of region `k`, row-major.
    pub fn region_cells(&self, k: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let s = self.box_size;
        let (r0, c0) = ((k / s) * s, (k % s) * s);
        (0..s).flat_map(move |dr| (0..s).map(move |dc| (r0 + dr, c0 + dc)))
    }

    /// Clues as ((row, column), digit), row-major.
    pub fn clues(&self) -> impl Iterator<Item = ((usize, usize), u8)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .map(|(i, &d)| ((i / self.n, i % self.n), d))
    }

    pub fn clue_count(&self) -> usize {
        self.cells.iter().filter(|&&d| d != 0).count()
    }

    pub fn open_cells(&self) -> usize {
        self.n * self.n - self.clue_count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|&d| d != 0)
    }

    /// Describes the first repeated digit in a row, column or region.
    fn first_conflict(&self) -> Option<String> {
        let n = self.n;
        for unit in 0..n {
            let mut row = vec![false; n + 1];
            let mut col = vec![false; n + 1];
            let mut reg = vec![false; n + 1];
            for i in 0..n {
                let d = self.cells[unit * n + i] as usize;
                if d != 0 && std::mem::replace(&mut row[d], true) {
                    return Some(format!("digit {d} repeated in row {}", unit + 1));
                }
                let d = self.cells[i * n + unit] as usize;
                if d != 0 && std::mem::replace(&mut col[d], true) {
                    return Some(format!("digit {d} repeated in column {}", unit + 1));
                }
            }
            for (r, c) in self.region_cells(unit) {
                let d = self.cells[r * n + c] as usize;
                if d != 0 && std::mem::replace(&mut reg[d], true) {
                    return Some(format!("digit {d} repeated in region {}", unit + 1));
                }
            }
        }
        None
    }

    /// Whether `grid` is a complete, rule-valid grid agreeing with every clue.
    pub fn accepts(&self, grid: &[u8]) -> bool {
        grid.len() == self.cells.len()
            && grid.iter().all(|&d| d >= 1 && d as usize <= self.n)
            && self.cells.iter().zip(grid).all(|(&c, &g)| c == 0 || c == g)
            && Puzzle {
                n: self.n,
                box_size: self.box_size,
                cells: grid.to_vec(),
            }
            .first_conflict()
            .is_none()
    }

    /// The puzzle with `grid`'s digits filled into every cell.
    pub fn with_cells(&self, grid: Vec<u8>) -> Result<Self, PuzzleError> {
        Puzzle::new(self.n, grid)
    }

    pub fn to_text(&self) -> String {
        format_grid(self.n, &self.cells)
    }
}

/// Grid text: one row per line, whitespace-separated tokens, "." for open cells.
pub fn format_grid(n: usize, cells: &[u8]) -> String {
    let width = if n > 9 { 2 } else { 1 };
    let mut out = String::new();
    for row in cells.chunks(n) {
        let tokens: Vec<String> = row
            .iter()
            .map(|&d| match d {
                0 => format!("{:>width$}", "."),
                d => format!("{d:>width$}"),
            })
            .collect();
        out.push_str(&tokens.join(" "));
        out.push('\n');
    }
    out
}

impl fmt::Debug for Puzzle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Puzzle(n={}, clues={})", self.n, self.clue_count())
    }
}

impl fmt::Display for Puzzle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Puzzle {
    type Err = PuzzleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_puzzle(s)
    }
}

/// Parses the grid text format. An optional first line `n=<N>` fixes the
/// size; otherwise it is the number of tokens on the first row. Blank lines
/// and lines starting with `#` are ignored.
pub fn parse_puzzle(text: &str) -> Result<Puzzle, PuzzleError> {
    let mut declared = None;
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n=") {
            if declared.is_some() || !rows.is_empty() {
                return Err(PuzzleError::Syntax {
                    line: line_no,
                    reason: "size declaration must come first".into(),
                });
            }
            let n = rest.trim().parse::<usize>().map_err(|_| PuzzleError::Syntax {
                line: line_no,
                reason: format!("bad size {rest:?}"),
            })?;
            declared = Some(n);
            continue;
        }
        rows.push((line_no, line.split_whitespace().collect()));
    }
    let n = match (declared, rows.first()) {
        (Some(n), _) => n,
        (None, Some((_, first))) => first.len(),
        (None, None) => {
            return Err(PuzzleError::Syntax {
                line: 1,
                reason: "no grid rows".into(),
            })
        }
    };
    if rows.len() != n {
        return Err(PuzzleError::Syntax {
            line: rows.last().map_or(1, |r| r.0),
            reason: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    let mut cells = Vec::with_capacity(n * n);
    for (line_no, tokens) in rows {
        if tokens.len() != n {
            return Err(PuzzleError::Syntax {
                line: line_no,
                reason: format!("expected {n} tokens, found {}", tokens.len()),
            });
        }
        for tok in tokens {
            let d = match tok {
                "." | "0" => 0,
                t => match t.parse::<u8>() {
                    Ok(d) if d >= 1 && d as usize <= n => d,
                    _ => {
                        return Err(PuzzleError::Syntax {
                            line: line_no,
                            reason: format!("bad token {t:?}"),
                        })
                    }
                },
            };
            cells.push(d);
        }
    }
    Puzzle::new(n, cells)
}
