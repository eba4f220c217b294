use std::path::PathBuf;

use proptest::prelude::*;
use twa_core::EngineConfig;
use twa_sudoku::oracle::{is_logic_only, solutions};
use twa_sudoku::{build_graph, parse_puzzle, solve, solve_bruteforce, solve_with, Puzzle, SolveConfig, SolveError};

fn corpus(set: &str) -> Vec<(String, Puzzle)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus/sudoku")
        .join(set);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                parse_puzzle(&text).unwrap(),
            )
        })
        .collect()
}

fn config(dynamics: bool) -> SolveConfig {
    SolveConfig {
        dynamics,
        ..SolveConfig::default()
    }
}

/// Rule checker written independently of the crate's own.
fn valid_grid(n: usize, grid: &[u8]) -> bool {
    let s = (n as f64).sqrt() as usize;
    let full: u64 = (1 << n) - 1;
    let mut ok = true;
    for u in 0..n {
        let (mut row, mut col, mut reg) = (0u64, 0u64, 0u64);
        for i in 0..n {
            row |= 1 << (grid[u * n + i] - 1);
            col |= 1 << (grid[i * n + u] - 1);
            let (r, c) = ((u / s) * s + i / s, (u % s) * s + i % s);
            reg |= 1 << (grid[r * n + c] - 1);
        }
        ok &= row == full && col == full && reg == full;
    }
    ok
}

#[test]
fn complete_grid_is_returned_unchanged() {
    let (_, p) = &corpus("9x9-easy")[0];
    let full = Puzzle::new(9, solve_bruteforce(p).unwrap()).unwrap();
    let s = solve(&full, &config(true)).unwrap();
    assert_eq!(s.grid, full);
    assert_eq!(s.stats.iterations, 1);
    assert_eq!(s.stats.final_graph_size(), 0);
}

#[test]
fn corpus_puzzles_have_unique_solutions() {
    for set in ["9x9-easy", "9x9-hard", "16x16"] {
        for (name, p) in corpus(set) {
            assert_eq!(solutions(&p, 2).len(), 1, "{set}/{name}");
        }
    }
    assert_eq!(corpus("9x9-easy").len(), 20);
    assert_eq!(corpus("9x9-hard").len(), 20);
    assert_eq!(corpus("16x16").len(), 10);
    assert_eq!(corpus("25x25").len(), 10);
}

#[test]
fn corpus_classification() {
    for (name, p) in corpus("9x9-easy") {
        assert!(is_logic_only(&p), "easy/{name}");
    }
    for set in ["9x9-hard", "16x16", "25x25"] {
        for (name, p) in corpus(set) {
            assert!(!is_logic_only(&p), "{set}/{name}");
        }
    }
}

#[test]
fn easy_puzzles_resolve_by_certainty() {
    for (name, p) in corpus("9x9-easy") {
        let mut counts = Vec::new();
        let s = solve_with(&p, &config(true), |status| {
            counts.push(status.counts.variables + status.counts.factors)
        })
        .unwrap();
        assert_eq!(s.grid.cells(), solve_bruteforce(&p).unwrap(), "{name}");
        assert_eq!(s.stats.search_iterations, 0, "{name}");
        assert_eq!(s.stats.final_graph_size(), 0, "{name}");
        assert_eq!(s.stats.certain_cells, s.stats.open_cells, "{name}");
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{name}: graph grew");
    }
}

#[test]
fn hard_puzzles_match_the_oracle_both_ways() {
    for (name, p) in corpus("9x9-hard") {
        let oracle = solve_bruteforce(&p).unwrap();
        let on = solve(&p, &config(true)).unwrap();
        let off = solve(&p, &config(false)).unwrap();
        assert_eq!(on.grid.cells(), oracle, "{name}");
        assert_eq!(off.grid.cells(), oracle, "{name}");
        assert!(valid_grid(9, on.grid.cells()));
        assert!(on.stats.final_graph_size() < on.stats.initial_graph_size(), "{name}");
        assert_eq!(off.stats.final_graph_size(), off.stats.initial_graph_size(), "{name}");
    }
}

#[test]
fn rounded_snapshot_is_a_valid_assignment() {
    for (name, p) in corpus("9x9-hard").into_iter().take(5) {
        let cfg = config(false);
        let encoded = build_graph(&p);
        let s = solve(&p, &cfg).unwrap();
        // rerun to the same halt and inspect the raw indicators; values are
        // rounded to {0, 1} with exact halves going to 0
        let mut engine = twa_core::Engine::<twa_sudoku::Removal>::new(encoded.graph, cfg.engine.clone()).unwrap();
        for _ in 0..s.stats.iterations {
            engine.step().unwrap();
        }
        let snap = engine.graph().snapshot().unwrap();
        let mut grid = p.cells().to_vec();
        for r in 0..9 {
            for c in 0..9 {
                let Some(vars) = encoded.index.cell(r, c) else { continue };
                let on: Vec<u8> = vars
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| snap[v] > 0.5)
                    .map(|(d, _)| d as u8 + 1)
                    .collect();
                assert_eq!(on.len(), 1, "{name} ({r},{c}): {on:?}");
                grid[r * 9 + c] = on[0];
            }
        }
        assert!(valid_grid(9, &grid), "{name}");
        assert_eq!(grid, s.grid.cells(), "{name}");
    }
}

#[test]
fn contradictory_puzzle_is_inconsistent() {
    // row 0 forces digit 4 into (0,3); column 3 already has a 4
    let p = parse_puzzle("1 2 3 .\n. . . .\n. . . 4\n. . . .\n").unwrap();
    assert!(solutions(&p, 2).is_empty());
    match solve(&p, &config(true)) {
        Err(SolveError::Inconsistent { .. }) => {}
        other => panic!("expected inconsistency, got {other:?}"),
    }
}

#[test]
fn iteration_cap_reports_unsolved() {
    let (_, p) = &corpus("9x9-hard")[0];
    let cfg = SolveConfig {
        engine: EngineConfig {
            max_iterations: 3,
            ..EngineConfig::default()
        },
        dynamics: true,
    };
    match solve(p, &cfg) {
        Err(SolveError::Unsolved { stats }) => assert_eq!(stats.iterations, 3),
        other => panic!("expected unsolved, got {other:?}"),
    }
}

#[test]
fn thread_count_does_not_change_the_run() {
    let (_, p) = &corpus("16x16")[0];
    let base = solve(p, &config(true)).unwrap();
    for threads in [2, 4] {
        let mut cfg = config(true);
        cfg.engine.thread_count = threads;
        let s = solve(p, &cfg).unwrap();
        assert_eq!(s.grid, base.grid);
        assert_eq!(s.stats.iterations, base.stats.iterations);
    }
}

/// A solved 4×4 grid with clues removed by a bit mask.
fn four_by_four(mask: u16, relabel: [u8; 4]) -> Puzzle {
    const GRID: [u8; 16] = [1, 2, 3, 4, 3, 4, 1, 2, 2, 1, 4, 3, 4, 3, 2, 1];
    let cells = GRID
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if mask & (1 << i) != 0 {
                relabel[d as usize - 1]
            } else {
                0
            }
        })
        .collect();
    Puzzle::new(4, cells).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unique_four_by_fours_match_the_oracle(mask in any::<u16>(), perm in Just(vec![1u8, 2, 3, 4]).prop_shuffle()) {
        let p = four_by_four(mask, perm.try_into().unwrap());
        let found = solutions(&p, 2);
        prop_assume!(found.len() == 1);
        for dynamics in [true, false] {
            let s = solve(&p, &config(dynamics)).unwrap();
            prop_assert_eq!(s.grid.cells(), &found[0][..]);
        }
    }
}
