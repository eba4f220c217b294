//! The one-on minimizer against exhaustive one-hot enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twa_core::{Factor, FactorGraph, Message, MinimizeContext, WeightClass};
use twa_sudoku::OneOnFactor;

fn ctx() -> MinimizeContext {
    let mut g = FactorGraph::new();
    let v = g.add_variable(0.0);
    let factor = g.add_factor(Box::new(OneOnFactor::open()), &[v]).unwrap();
    MinimizeContext {
        factor,
        iteration: 1,
        rho: 1.0,
        seed: 0,
    }
}

/// Feasible one-hot index minimizing the weighted cost, ties broken by the
/// unweighted cost and then the lowest index. `None` if nothing is feasible.
fn enumerate(incoming: &[Message]) -> Option<usize> {
    let feasible = |k: usize| {
        incoming
            .iter()
            .enumerate()
            .all(|(j, m)| !m.weight.is_infinite() || (m.value > 0.5) == (j == k))
    };
    let cost = |k: usize, weighted: bool| -> f64 {
        incoming
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.weight.is_infinite())
            .map(|(j, m)| {
                let v = if j == k { 1.0 } else { 0.0 };
                let w = if weighted { m.weight.magnitude() } else { 1.0 };
                0.5 * w * (v - m.value).powi(2)
            })
            .sum()
    };
    (0..incoming.len()).filter(|&k| feasible(k)).min_by(|&a, &b| {
        cost(a, true)
            .partial_cmp(&cost(b, true))
            .unwrap()
            .then(cost(a, false).partial_cmp(&cost(b, false)).unwrap())
            .then(a.cmp(&b))
    })
}

fn random_message(rng: &mut ChaCha8Rng) -> Message {
    let value = rng.gen_range(-0.5..1.5);
    let weight = match rng.gen_range(0..10) {
        0 => WeightClass::Zero,
        1 => WeightClass::Infinite,
        2..=4 => WeightClass::Standard(rng.gen_range(0.1..5.0)),
        _ => WeightClass::STANDARD,
    };
    if weight.is_infinite() {
        // certain messages are 0 or 1
        Message::certain(if rng.gen_bool(0.15) { 1.0 } else { 0.0 })
    } else {
        Message::new(value, weight)
    }
}

#[test]
fn matches_enumeration_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ctx = ctx();
    let factor = OneOnFactor::open();
    let mut feasible_cases = 0;
    for _ in 0..10_000 {
        let arity = rng.gen_range(1..10);
        let incoming: Vec<Message> = (0..arity).map(|_| random_message(&mut rng)).collect();
        let mut out = vec![Message::zero(0.0); arity];
        let result = factor.minimize(&incoming, &mut out, &ctx);
        match enumerate(&incoming) {
            None => assert!(result.is_err(), "{incoming:?}"),
            Some(k) => {
                feasible_cases += 1;
                result.unwrap();
                let chosen: Vec<usize> = (0..arity).filter(|&j| out[j].value == 1.0).collect();
                assert_eq!(chosen, vec![k], "{incoming:?} -> {out:?}");
                assert!(out.iter().all(|m| m.value == 0.0 || m.value == 1.0));
            }
        }
    }
    assert!(feasible_cases > 5_000);
}
