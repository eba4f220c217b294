//! Regenerates the shipped puzzle corpus.
//!
//! ```text
//! cargo run --release -p twa-sudoku --example gen_corpus -- corpus/sudoku [set...]
//! ```
//!
//! Every puzzle has a unique solution (checked by the depth-first oracle).
//! Easy 9×9 puzzles are solvable by singles alone; hard 9×9 puzzles are
//! minimal and need search. Larger puzzles are thinned to the limit of
//! singles and then lose one more clue, chosen so that singles still get as
//! far as possible.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twa_sudoku::oracle::{is_logic_only, propagate_singles, solutions_within};
use twa_sudoku::Puzzle;

fn full_grid(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let s = (n as f64).sqrt() as usize;
    let pattern = |r: usize, c: usize| (s * (r % s) + r / s + c) % n;

    let mut digits: Vec<u8> = (1..=n as u8).collect();
    digits.shuffle(rng);
    let shuffled_axis = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let mut bands: Vec<usize> = (0..s).collect();
        bands.shuffle(rng);
        bands
            .into_iter()
            .flat_map(|b| {
                let mut within: Vec<usize> = (0..s).collect();
                within.shuffle(rng);
                within.into_iter().map(move |w| b * s + w)
            })
            .collect()
    };
    let rows = shuffled_axis(rng);
    let cols = shuffled_axis(rng);
    let transpose = rng.gen_bool(0.5);
    let mut grid = vec![0u8; n * n];
    for r in 0..n {
        for c in 0..n {
            let (rr, cc) = if transpose {
                (cols[c], rows[r])
            } else {
                (rows[r], cols[c])
            };
            grid[r * n + c] = digits[pattern(rr, cc)];
        }
    }
    grid
}

/// Search budget for the uniqueness check; puzzles that exceed it are skipped.
const MAX_NODES: u64 = 200_000;

fn unique(n: usize, cells: &[u8]) -> bool {
    let p = Puzzle::new(n, cells.to_vec()).expect("valid grid");
    solutions_within(&p, 2, MAX_NODES).is_some_and(|s| s.len() == 1)
}

/// Cells singles can fill; 0 on contradiction.
fn singles_progress(n: usize, cells: &[u8]) -> usize {
    let p = Puzzle::new(n, cells.to_vec()).expect("valid grid");
    propagate_singles(&p).map_or(0, |g| g.iter().filter(|&&d| d != 0).count())
}

fn logic_only(n: usize, cells: &[u8]) -> bool {
    is_logic_only(&Puzzle::new(n, cells.to_vec()).expect("valid grid"))
}

/// Removes clues in random order while `keep` holds.
fn thin(n: usize, cells: &mut [u8], rng: &mut ChaCha8Rng, keep: impl Fn(&[u8]) -> bool) {
    let mut order: Vec<usize> = (0..n * n).collect();
    order.shuffle(rng);
    for i in order {
        let d = std::mem::replace(&mut cells[i], 0);
        if !keep(cells) {
            cells[i] = d;
        }
    }
}

fn easy(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut cells = full_grid(9, rng);
    thin(9, &mut cells, rng, |c| logic_only(9, c));
    cells
}

fn hard(rng: &mut ChaCha8Rng) -> Vec<u8> {
    loop {
        let mut cells = full_grid(9, rng);
        thin(9, &mut cells, rng, |c| unique(9, c));
        if !logic_only(9, &cells) {
            return cells;
        }
    }
}

/// Thins to the singles limit, then removes the one further clue that keeps
/// the solution unique while leaving singles the most progress.
fn just_past_logic(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    loop {
        let mut cells = full_grid(n, rng);
        thin(n, &mut cells, rng, |c| logic_only(n, c));
        let mut candidates: Vec<(usize, usize)> = (0..n * n)
            .filter(|&i| cells[i] != 0)
            .filter_map(|i| {
                let mut trial = cells.clone();
                trial[i] = 0;
                let progress = singles_progress(n, &trial);
                (progress < n * n).then_some((progress, i))
            })
            .collect();
        candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, i) in candidates {
            let mut trial = cells.clone();
            trial[i] = 0;
            if unique(n, &trial) {
                return trial;
            }
        }
    }
}

fn write(dir: &Path, name: &str, n: usize, cells: &[u8]) {
    let p = Puzzle::new(n, cells.to_vec()).expect("valid puzzle");
    fs::write(dir.join(name), format!("n={n}\n{}", p.to_text())).expect("write puzzle");
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corpus/sudoku".into()));
    let sets: [(&str, usize, usize, u64); 4] = [
        ("9x9-easy", 9, 20, 1),
        ("9x9-hard", 9, 20, 2),
        ("16x16", 16, 10, 3),
        ("25x25", 25, 10, 4),
    ];
    let only: Vec<String> = std::env::args().skip(2).collect();
    for (name, n, count, seed) in sets {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let dir = root.join(name);
        fs::create_dir_all(&dir).expect("create corpus dir");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..count {
            let cells = match name {
                "9x9-easy" => easy(&mut rng),
                "9x9-hard" => hard(&mut rng),
                _ => just_past_logic(n, &mut rng),
            };
            write(&dir, &format!("{:02}.txt", i + 1), n, &cells);
            eprintln!(
                "{name}/{:02}: {} clues",
                i + 1,
                cells.iter().filter(|&&d| d != 0).count()
            );
        }
    }
}
