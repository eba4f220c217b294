use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use twa_core::{
    ConstantFactor, Engine, EngineConfig, FactorGraph, GlobalContext, GlobalReasoner, LocalReasoner, LocalView, Outbox,
    WeightClass,
};
use twa_sudoku::{build_graph, parse_puzzle, OneOnFactor, PossibilityReasoner, PruningReasoner, Puzzle, Removal};

/// Records every event it sees, per iteration.
struct Recorder(Arc<Mutex<Vec<(u64, Removal)>>>);

impl GlobalReasoner<Removal> for Recorder {
    fn name(&self) -> &str {
        "recorder"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, Removal>) {
        let it = ctx.iteration();
        self.0.lock().unwrap().extend(ctx.events().iter().map(|e| (it, *e)));
    }
}

/// Raises fixed removal events on a chosen iteration.
struct Inject {
    at: u64,
    events: Vec<Removal>,
}

impl LocalReasoner<Removal> for Inject {
    fn reason(&mut self, view: &LocalView<'_>, _outbox: &mut Outbox, events: &mut Vec<Removal>) {
        if view.iteration() == self.at {
            events.extend(self.events.iter().copied());
        }
    }
}

fn config() -> EngineConfig {
    EngineConfig {
        max_iterations: 50,
        ..EngineConfig::default()
    }
}

type RemovalLog = Arc<Mutex<Vec<(u64, Removal)>>>;

fn with_possibility_reasoners(puzzle: &Puzzle) -> (Engine<Removal>, RemovalLog) {
    let encoded = build_graph(puzzle);
    let n = puzzle.n();
    let mut engine = Engine::new(encoded.graph, config()).unwrap();
    for r in 0..n {
        for c in 0..n {
            if let Some(vars) = encoded.index.cell(r, c) {
                engine.add_local_reasoner(vars, PossibilityReasoner::new(r, c)).unwrap();
            }
        }
    }
    let log = Arc::new(Mutex::new(Vec::new()));
    engine.add_global_reasoner(Recorder(log.clone()));
    (engine, log)
}

#[test]
fn single_clue_removes_exactly_its_peers() {
    let p = parse_puzzle(". . . .\n. 3 . .\n. . . .\n. . . .\n").unwrap();
    let (mut engine, log) = with_possibility_reasoners(&p);
    for _ in 0..10 {
        engine.step().unwrap();
    }
    let events = log.lock().unwrap().clone();
    // peer-set oracle: cells sharing a row, column or region with (1,1)
    let mut peers = BTreeSet::new();
    for r in 0..4 {
        for c in 0..4 {
            let same_region = r / 2 == 0 && c / 2 == 0;
            if (r, c) != (1, 1) && (r == 1 || c == 1 || same_region) {
                peers.insert((r, c, 3u8));
            }
        }
    }
    assert_eq!(peers.len(), 3 + 3 + 1);
    let got: BTreeSet<_> = events.iter().map(|(_, e)| (e.row, e.col, e.digit)).collect();
    assert_eq!(got, peers);
    // each removal exactly once, all in the first iteration
    assert_eq!(events.len(), peers.len());
    assert!(events.iter().all(|(it, _)| *it == 1));
}

#[test]
fn no_certainty_no_events() {
    let (mut engine, log) = with_possibility_reasoners(&Puzzle::empty(4).unwrap());
    for _ in 0..20 {
        engine.step().unwrap();
    }
    assert!(log.lock().unwrap().is_empty());
}

#[test]
fn removal_queues_four_edge_removals() {
    let p = Puzzle::empty(9).unwrap();
    let encoded = build_graph(&p);
    let index = Arc::new(encoded.index);
    let mut engine: Engine<Removal> = Engine::new(encoded.graph, config()).unwrap();
    let target = index.variable(1, 3, 7).unwrap();
    let inject = Inject {
        at: 1,
        events: vec![
            Removal {
                row: 1,
                col: 3,
                digit: 7
            };
            2
        ],
    };
    engine.add_local_reasoner(vec![target], inject).unwrap();
    let pruning = PruningReasoner::new(engine.graph(), index.clone(), encoded.constraints, vec![None; 81]);
    engine.add_global_reasoner(pruning);
    let before = engine.graph().counts();
    let status = engine.step().unwrap();
    // the duplicate event is ignored
    assert_eq!(status.edits_applied, 4);
    let after = engine.graph().counts();
    assert_eq!(before.edges - after.edges, 4);
    assert_eq!(before.variables - after.variables, 1);
    assert_eq!(before.factors, after.factors);
    assert!(!engine.graph().contains_variable(target));
}

#[test]
fn last_candidate_of_a_cell_is_pinned_and_its_factor_removed() {
    let p = Puzzle::empty(4).unwrap();
    let encoded = build_graph(&p);
    let index = Arc::new(encoded.index);
    let cell_factor = *encoded
        .constraints
        .iter()
        .find(|(_, info)| info.constraint == twa_sudoku::Constraint::Cell { row: 2, col: 0 })
        .unwrap()
        .0;
    let mut engine: Engine<Removal> = Engine::new(encoded.graph, config()).unwrap();
    let mut cell_reasoners = vec![None; 16];
    for r in 0..4 {
        for c in 0..4 {
            let vars = index.cell(r, c).unwrap();
            cell_reasoners[r * 4 + c] = Some(engine.add_local_reasoner(vars, PossibilityReasoner::new(r, c)).unwrap());
        }
    }
    let removals = [1u8, 2, 4].map(|digit| Removal { row: 2, col: 0, digit });
    let anchor = index.variable(0, 0, 1).unwrap();
    engine
        .add_local_reasoner(
            vec![anchor],
            Inject {
                at: 1,
                events: removals.to_vec(),
            },
        )
        .unwrap();
    let pruning = PruningReasoner::new(engine.graph(), index.clone(), encoded.constraints, cell_reasoners);
    engine.add_global_reasoner(pruning);

    engine.step().unwrap();
    assert!(!engine.graph().contains_factor(cell_factor));
    let survivor = index.variable(2, 0, 3).unwrap();
    assert!(engine.graph().contains_variable(survivor));
    let status = engine.step();
    // a pinned 3 at (2,0) is consistent on an empty grid
    status.unwrap();
    let node = engine.graph().variable(survivor).unwrap();
    assert_eq!((node.concurred, node.weight), (1.0, WeightClass::Infinite));
}

#[test]
fn one_clue_one_on_converges_to_certainty() {
    let mut g = FactorGraph::new();
    let vars: Vec<_> = (0..3).map(|_| g.add_variable(1.0 / 3.0)).collect();
    g.add_factor(Box::new(OneOnFactor::open()), &vars).unwrap();
    g.add_factor(Box::new(ConstantFactor::pin(1.0)), &vars[..1]).unwrap();
    let mut engine: Engine = Engine::new(g, config()).unwrap();
    let status = engine.run().unwrap();
    assert!(status.converged);
    assert!(status.iteration <= 3);
    let values: Vec<_> = vars
        .iter()
        .map(|&v| {
            let node = engine.graph().variable(v).unwrap();
            assert_eq!(node.weight, WeightClass::Infinite);
            node.concurred
        })
        .collect();
    assert_eq!(values, vec![1.0, 0.0, 0.0]);
}
