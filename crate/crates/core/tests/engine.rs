use twa_core::{
    ConstantFactor, Engine, EngineConfig, EngineError, EqualityFactor, FactorGraph, GlobalContext, GlobalReasoner,
    IterationStatus, LocalReasoner, LocalView, Message, Outbox, PriorFactor, VariableId, WeightClass,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(threads: usize) -> EngineConfig {
    EngineConfig {
        max_iterations: 2_000,
        thread_count: threads,
        ..EngineConfig::default()
    }
}

/// A chain of variables joined by equality factors, each with a standard prior.
fn prior_chain(priors: &[f64]) -> (FactorGraph, Vec<VariableId>) {
    let mut g = FactorGraph::new();
    let vars: Vec<VariableId> = priors.iter().map(|_| g.add_variable(0.0)).collect();
    for (v, &p) in vars.iter().zip(priors) {
        g.add_factor(
            Box::new(PriorFactor {
                target: p,
                stiffness: 1.0,
            }),
            &[*v],
        )
        .unwrap();
    }
    for w in vars.windows(2) {
        g.add_factor(Box::new(EqualityFactor), w).unwrap();
    }
    (g, vars)
}

fn strip_timings(s: &IterationStatus) -> IterationStatus {
    let mut s = s.clone();
    s.timings = Default::default();
    s
}

#[test]
fn pinned_variable_snapshot() {
    let mut g = FactorGraph::new();
    let v = g.add_variable(0.3);
    g.add_factor(Box::new(ConstantFactor::pin(1.0)), &[v]).unwrap();
    let mut engine: Engine = Engine::new(g, config(1)).unwrap();
    engine.step().unwrap();
    let snap = engine.graph().snapshot().unwrap();
    assert_eq!(snap.get(&v), Some(&1.0));
    assert_eq!(engine.graph().variable(v).unwrap().weight, WeightClass::Infinite);
    assert_eq!(snap, engine.graph().snapshot().unwrap());
}

#[test]
fn zero_factor_graph_converges_immediately() {
    let mut g = FactorGraph::new();
    g.add_variable(0.5);
    let mut engine: Engine = Engine::new(g, config(1)).unwrap();
    let status = engine.run().unwrap();
    assert!(status.converged);
    assert_eq!(status.iteration, 1);

    let mut empty: Engine = Engine::new(FactorGraph::new(), config(1)).unwrap();
    let status = empty.run().unwrap();
    assert!(status.converged);
    assert_eq!(status.iteration, 1);
}

struct HaltAt(u64);

impl GlobalReasoner<()> for HaltAt {
    fn name(&self) -> &str {
        "halt-at"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, ()>) {
        if ctx.iteration() == self.0 {
            ctx.halt();
        }
    }
}

#[test]
fn halt_signal_ends_run() {
    // far-apart priors on a long chain need many iterations to converge
    let priors: Vec<f64> = (0..40).map(|i| i as f64).collect();
    let (g, _) = prior_chain(&priors);
    let mut engine = Engine::new(g, config(1)).unwrap();
    engine.add_global_reasoner(HaltAt(5));
    let statuses = engine.run_collect().unwrap();
    assert_eq!(statuses.len(), 5);
    let last = statuses.last().unwrap();
    assert_eq!(last.halted_by.as_deref(), Some("halt-at"));
    assert!(!last.converged);
    assert!(statuses[..4].iter().all(|s| !s.finished()));
}

#[test]
fn consensus_matches_mean_of_priors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for threads in [1, 3] {
        let priors: Vec<f64> = (0..12).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let oracle = priors.iter().sum::<f64>() / priors.len() as f64;
        let (g, vars) = prior_chain(&priors);
        let mut engine: Engine = Engine::new(
            g,
            EngineConfig {
                epsilon_convergence: 1e-10,
                max_iterations: 50_000,
                ..config(threads)
            },
        )
        .unwrap();
        let status = engine.run().unwrap();
        assert!(status.converged, "no convergence in {} iterations", status.iteration);
        for v in vars {
            let z = engine.graph().value(v).unwrap();
            assert!((z - oracle).abs() < 1e-6, "{z} vs {oracle}");
        }
    }
}

#[test]
fn convergence_flag_is_stable_under_one_more_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.gen_range(2..10);
        let priors: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (g, _) = prior_chain(&priors);
        let mut engine: Engine = Engine::new(g, config(1)).unwrap();
        let status = engine.run().unwrap();
        assert!(status.converged);
        assert!(status.max_message_delta < engine.config().epsilon_convergence);
        let eps = engine.config().epsilon_convergence;
        let before: Vec<f64> = engine.graph().edges().map(|(_, e)| e.msg_to_factor).collect();
        engine.step().unwrap();
        let after: Vec<f64> = engine.graph().edges().map(|(_, e)| e.msg_to_factor).collect();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < eps);
        }
    }
}

#[test]
fn runs_are_deterministic_per_thread_count() {
    let priors: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64).collect();
    for threads in [1, 2, 4] {
        let streams: Vec<Vec<IterationStatus>> = (0..2)
            .map(|_| {
                let (g, _) = prior_chain(&priors);
                let mut engine: Engine = Engine::new(g, config(threads)).unwrap();
                engine.run_collect().unwrap().iter().map(strip_timings).collect()
            })
            .collect();
        assert_eq!(streams[0], streams[1]);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let priors: Vec<f64> = (0..25).map(|i| (i as f64).sin()).collect();
    let snapshots: Vec<_> = [1, 2, 5]
        .iter()
        .map(|&t| {
            let (g, _) = prior_chain(&priors);
            let mut engine: Engine = Engine::new(g, config(t)).unwrap();
            engine.run().unwrap();
            engine.graph().snapshot().unwrap()
        })
        .collect();
    assert_eq!(snapshots[0], snapshots[1]);
    assert_eq!(snapshots[0], snapshots[2]);
}

/// Attached to every variable; never changes its outbox.
struct Silent;

impl LocalReasoner<()> for Silent {
    fn reason(&mut self, view: &LocalView<'_>, _outbox: &mut Outbox, _events: &mut Vec<()>) {
        for slot in 0..view.len() {
            let _ = view.concurred(slot);
        }
    }
}

#[test]
fn zero_weight_reasoner_is_neutral() {
    let priors: Vec<f64> = (0..15).map(|i| (i as f64 * 0.7).cos()).collect();
    let trace = |with_reasoner: bool| {
        let (g, vars) = prior_chain(&priors);
        let mut engine: Engine = Engine::new(g, config(2)).unwrap();
        if with_reasoner {
            engine.add_local_reasoner(vars.clone(), Silent).unwrap();
            for v in &vars {
                engine.add_local_reasoner(vec![*v], Silent).unwrap();
            }
        }
        let mut snaps = Vec::new();
        engine
            .run_with(|_, g| snaps.push(g.snapshot().unwrap().values().map(|v| v.to_bits()).collect::<Vec<_>>()))
            .unwrap();
        snaps
    };
    assert_eq!(trace(false), trace(true));
}

#[test]
fn certainty_is_monotone_and_spreads() {
    // one pinned end of an equality chain
    let mut g = FactorGraph::new();
    let vars: Vec<VariableId> = (0..6).map(|i| g.add_variable(i as f64)).collect();
    g.add_factor(Box::new(ConstantFactor::pin(2.5)), &[vars[0]]).unwrap();
    for w in vars.windows(2) {
        g.add_factor(Box::new(EqualityFactor), w).unwrap();
    }
    let mut engine: Engine = Engine::new(g, config(1)).unwrap();
    let mut certain = vec![false; vars.len()];
    let status = engine
        .run_with(|_, g| {
            for (i, v) in vars.iter().enumerate() {
                let now = g.variable(*v).unwrap().weight.is_infinite();
                assert!(now || !certain[i], "certainty reverted on {v}");
                certain[i] = now;
            }
        })
        .unwrap();
    assert!(status.converged);
    assert!(certain.iter().all(|c| *c));
    for v in &vars {
        assert_eq!(engine.graph().value(*v), Some(2.5));
    }
    assert!(engine.graph().unsatisfied_factors(1e-9).is_empty());
}

#[test]
fn conflicting_pins_report_iteration() {
    let mut g = FactorGraph::new();
    let v = g.add_variable(0.0);
    g.add_factor(Box::new(ConstantFactor::pin(0.0)), &[v]).unwrap();
    g.add_factor(Box::new(ConstantFactor::pin(1.0)), &[v]).unwrap();
    let mut engine: Engine = Engine::new(g, config(1)).unwrap();
    match engine.run() {
        Err(EngineError::Conflict { iteration, .. }) => assert_eq!(iteration, 1),
        other => panic!("expected conflict, got {other:?}"),
    }
}

/// Pushes a certain value onto its variable once asked to by a global reasoner.
struct Emitter;

impl LocalReasoner<u64> for Emitter {
    fn reason(&mut self, view: &LocalView<'_>, _outbox: &mut Outbox, events: &mut Vec<u64>) {
        events.push(view.iteration());
    }
}

struct Requester {
    id: Option<twa_core::LocalReasonerId>,
    seen: Vec<u64>,
}

impl GlobalReasoner<u64> for Requester {
    fn name(&self) -> &str {
        "requester"
    }

    fn reason(&mut self, ctx: &mut GlobalContext<'_, u64>) {
        self.seen.extend_from_slice(ctx.events());
        if ctx.iteration() == 3 {
            ctx.request_emission(self.id.unwrap(), 0, Message::certain(-4.0));
        }
    }
}

#[test]
fn requested_emission_takes_effect_next_iteration() {
    let (g, vars) = prior_chain(&[1.0, 2.0, 3.0]);
    let mut engine: Engine<u64> = Engine::new(g, config(1)).unwrap();
    let id = engine.add_local_reasoner(vec![vars[1]], Emitter).unwrap();
    engine.add_global_reasoner(Requester {
        id: Some(id),
        seen: Vec::new(),
    });
    for _ in 0..3 {
        let s = engine.step().unwrap();
        assert!(!engine.graph().variable(vars[1]).unwrap().weight.is_infinite());
        assert!(!s.converged || s.iteration < 3);
    }
    engine.step().unwrap();
    assert_eq!(engine.graph().value(vars[1]), Some(-4.0));
    assert_eq!(engine.outbox(id).unwrap().get(0), Message::certain(-4.0));
}

#[test]
fn telemetry_line_is_json() {
    let (g, _) = prior_chain(&[0.0, 1.0]);
    let mut engine: Engine = Engine::new(g, config(1)).unwrap();
    let s = engine.step().unwrap();
    let v: serde_json::Value = serde_json::from_str(&s.telemetry_line()).unwrap();
    assert_eq!(v["iteration"], 1);
    assert_eq!(v["counts"]["variables"], 2);
    assert!(v["timings"]["minimize_us"].is_u64());
}

#[test]
fn config_validation() {
    let bad = [
        EngineConfig {
            epsilon_convergence: 0.0,
            ..EngineConfig::default()
        },
        EngineConfig {
            max_iterations: 0,
            ..EngineConfig::default()
        },
        EngineConfig {
            thread_count: 0,
            ..EngineConfig::default()
        },
        EngineConfig {
            rho_standard: -1.0,
            ..EngineConfig::default()
        },
    ];
    for c in bad {
        assert!(matches!(
            Engine::<()>::new(FactorGraph::new(), c),
            Err(EngineError::Config(_))
        ));
    }
}
