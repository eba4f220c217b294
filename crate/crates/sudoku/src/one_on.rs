//! The one-on constraint: exactly one attached indicator equals 1.

use std::any::Any;

use twa_core::{Factor, FactorError, Message, MinimizeContext};

/// Exactly one of the attached indicators is on.
///
/// A `satisfied` factor stands for a group whose digit is already placed by a
/// clue, so every attached indicator must be off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OneOnFactor {
    pub satisfied: bool,
}

impl OneOnFactor {
    pub const KIND: &'static str = "one-on";

    pub fn open() -> Self {
        OneOnFactor { satisfied: false }
    }

    pub fn satisfied() -> Self {
        OneOnFactor { satisfied: true }
    }
}

fn pinned_on(m: &Message) -> bool {
    m.weight.is_infinite() && m.value > 0.5
}

fn pinned_off(m: &Message) -> bool {
    m.weight.is_infinite() && m.value <= 0.5
}

/// Index of the one-hot choice minimizing `Σ (w/2)(v − n)²` over the edges
/// not pinned off. Choosing `k` costs `w_k(1 − 2n_k)/2` relative to all-off,
/// so the best candidate maximizes `w_k(2n_k − 1)`; ties go to the largest
/// `n_k` (closest to the messages irrespective of weight), then the lowest index.
pub fn best_candidate(incoming: &[Message]) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, m) in incoming.iter().enumerate() {
        if pinned_off(m) {
            continue;
        }
        let gain = m.weight.magnitude() * (2.0 * m.value - 1.0);
        let closeness = 2.0 * m.value - 1.0;
        let better = match best {
            None => true,
            Some((_, g, c)) => gain > g || (gain == g && closeness > c),
        };
        if better {
            best = Some((k, gain, closeness));
        }
    }
    best.map(|b| b.0)
}

impl Factor for OneOnFactor {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        ctx: &MinimizeContext,
    ) -> Result<(), FactorError> {
        if self.satisfied {
            if incoming.iter().any(pinned_on) {
                return Err(FactorError::InfeasibleCertainty(
                    "indicator pinned on in a group whose digit is already placed".into(),
                ));
            }
            outgoing.fill(Message::certain(0.0));
            return Ok(());
        }

        let mut on = incoming.iter().enumerate().filter(|(_, m)| pinned_on(m));
        let forced = match (on.next(), on.next()) {
            (Some(_), Some(_)) => return Err(FactorError::InfeasibleCertainty("two indicators pinned on".into())),
            (Some((k, _)), None) => Some(k),
            (None, _) => {
                let mut free = incoming.iter().enumerate().filter(|(_, m)| !pinned_off(m));
                match (free.next(), free.next()) {
                    (None, _) => return Err(FactorError::InfeasibleCertainty("every indicator pinned off".into())),
                    (Some((k, _)), None) => Some(k),
                    _ => None,
                }
            }
        };

        if let Some(k) = forced {
            for (j, out) in outgoing.iter_mut().enumerate() {
                *out = Message::certain(if j == k { 1.0 } else { 0.0 });
            }
            return Ok(());
        }

        let k = best_candidate(incoming).expect("at least two free indicators");
        let standard = ctx.standard();
        for (j, (m, out)) in incoming.iter().zip(outgoing.iter_mut()).enumerate() {
            *out = if pinned_off(m) {
                Message::certain(0.0)
            } else {
                Message::new(if j == k { 1.0 } else { 0.0 }, standard)
            };
        }
        Ok(())
    }

    fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        let on = values.iter().filter(|v| (*v - 1.0).abs() <= tolerance).count();
        let off = values.iter().filter(|v| v.abs() <= tolerance).count();
        let want_on = usize::from(!self.satisfied);
        // a pruned factor may have lost its single on edge already
        on <= want_on && on + off == values.len()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twa_core::{FactorGraph, WeightClass};

    fn ctx() -> MinimizeContext {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let f = g.add_factor(Box::new(OneOnFactor::open()), &[v]).unwrap();
        MinimizeContext {
            factor: f,
            iteration: 1,
            rho: 1.0,
            seed: 0,
        }
    }

    fn run(f: OneOnFactor, incoming: &[Message]) -> Result<Vec<Message>, FactorError> {
        let mut out = vec![Message::zero(0.0); incoming.len()];
        f.minimize(incoming, &mut out, &ctx()).map(|_| out)
    }

    const S: WeightClass = WeightClass::STANDARD;

    #[test]
    fn already_optimal() {
        let inc = [Message::new(1.0, S), Message::new(0.0, S), Message::new(0.0, S)];
        let out = run(OneOnFactor::open(), &inc).unwrap();
        assert_eq!(out, inc.to_vec());
    }

    #[test]
    fn two_pinned_off_force_the_third() {
        let inc = [Message::certain(0.0), Message::new(0.3, S), Message::certain(0.0)];
        let out = run(OneOnFactor::open(), &inc).unwrap();
        assert_eq!(
            out,
            vec![Message::certain(0.0), Message::certain(1.0), Message::certain(0.0)]
        );
    }

    #[test]
    fn enumeration_example() {
        // one-hot costs: 0.225, 0.325, 0.625
        let inc = [Message::new(0.6, S), Message::new(0.5, S), Message::new(0.2, S)];
        let costs: Vec<f64> = (0..3)
            .map(|k| {
                inc.iter()
                    .enumerate()
                    .map(|(j, m)| 0.5 * ((j == k) as u8 as f64 - m.value).powi(2))
                    .sum()
            })
            .collect();
        assert!((costs[0] - 0.225).abs() < 1e-12);
        assert!((costs[1] - 0.325).abs() < 1e-12);
        assert!((costs[2] - 0.625).abs() < 1e-12);
        let out = run(OneOnFactor::open(), &inc).unwrap();
        let values: Vec<f64> = out.iter().map(|m| m.value).collect();
        assert_eq!(values, vec![1.0, 0.0, 0.0]);
        assert!(out.iter().all(|m| m.weight == S));
    }

    #[test]
    fn contradictions() {
        let all_off = [Message::certain(0.0); 3];
        assert!(run(OneOnFactor::open(), &all_off).is_err());
        let two_on = [Message::certain(1.0), Message::certain(1.0), Message::new(0.0, S)];
        assert!(run(OneOnFactor::open(), &two_on).is_err());
        let on_in_placed = [Message::certain(1.0), Message::new(0.0, S)];
        assert!(run(OneOnFactor::satisfied(), &on_in_placed).is_err());
    }

    #[test]
    fn one_pinned_on_turns_the_rest_off() {
        let inc = [Message::new(0.9, S), Message::certain(1.0), Message::new(0.2, S)];
        let out = run(OneOnFactor::open(), &inc).unwrap();
        assert_eq!(
            out,
            vec![Message::certain(0.0), Message::certain(1.0), Message::certain(0.0)]
        );
    }

    #[test]
    fn zero_weights_fall_back_to_closeness() {
        let inc = [
            Message::zero(0.2),
            Message::zero(0.7),
            Message::zero(0.7),
            Message::new(0.3, S),
        ];
        assert_eq!(best_candidate(&inc), Some(1));
        let inc = [Message::zero(0.9), Message::new(0.55, S)];
        assert_eq!(best_candidate(&inc), Some(1));
    }

    #[test]
    fn satisfied_factor_pins_everything_off() {
        let inc = [Message::new(0.8, S), Message::zero(0.1)];
        let out = run(OneOnFactor::satisfied(), &inc).unwrap();
        assert_eq!(out, vec![Message::certain(0.0); 2]);
    }
}
