//! Box-containment and pairwise non-overlap factors.

use std::any::Any;
use std::f64::consts::TAU;

use twa_core::{Factor, FactorError, Message, MinimizeContext, WeightClass};

/// Keeps every attached coordinate of one circle inside `[radius, 1 − radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxFactor {
    pub radius: f64,
}

impl BoxFactor {
    pub const KIND: &'static str = "box";
}

impl Factor for BoxFactor {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0 && self.radius < 0.5) {
            return Err(format!("radius {} outside (0, 0.5)", self.radius));
        }
        Ok(())
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        ctx: &MinimizeContext,
    ) -> Result<(), FactorError> {
        let (lo, hi) = (self.radius, 1.0 - self.radius);
        for (m, out) in incoming.iter().zip(outgoing.iter_mut()) {
            *out = if m.value < lo {
                Message::new(lo, ctx.standard())
            } else if m.value > hi {
                Message::new(hi, ctx.standard())
            } else {
                Message::zero(m.value)
            };
        }
        Ok(())
    }

    fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        values
            .iter()
            .all(|&v| v >= self.radius - tolerance && v <= 1.0 - self.radius + tolerance)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Keeps two circles at least `2 · radius` apart.
///
/// Edges are `[x_a, y_a, x_b, y_b]`. `circles` names the pair the factor is
/// currently parameterized for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFactor {
    pub radius: f64,
    pub circles: (usize, usize),
}

impl PairFactor {
    pub const KIND: &'static str = "pair";

    pub fn new(radius: f64, a: usize, b: usize) -> Self {
        PairFactor {
            radius,
            circles: (a, b),
        }
    }
}

/// Mobility of one circle: `None` if it is pinned, else its weight.
fn mobility(x: WeightClass, y: WeightClass) -> Option<f64> {
    if x.is_infinite() || y.is_infinite() {
        None
    } else {
        Some(0.5 * (x.magnitude() + y.magnitude()))
    }
}

/// Moves overlapping centres `a` and `b` apart along their centre line until
/// they are `2 · radius` apart, splitting the displacement inversely to the
/// weights. `None` means pinned. Coincident centres separate along `angle`.
pub fn separate(
    a: [f64; 2],
    b: [f64; 2],
    wa: Option<f64>,
    wb: Option<f64>,
    radius: f64,
    angle: f64,
) -> Result<([f64; 2], [f64; 2]), FactorError> {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    let d = dx.hypot(dy);
    let gap = 2.0 * radius - d;
    if gap <= 0.0 {
        return Ok((a, b));
    }
    let (ux, uy) = if d > 1e-12 {
        (dx / d, dy / d)
    } else {
        (angle.cos(), angle.sin())
    };
    let share_a = match (wa, wb) {
        (None, None) => {
            if gap > 1e-9 {
                return Err(FactorError::InfeasibleCertainty(format!(
                    "pinned circles {d} apart, need {}",
                    2.0 * radius
                )));
            }
            return Ok((a, b));
        }
        (None, Some(_)) => 0.0,
        (Some(_), None) => 1.0,
        (Some(wa), Some(wb)) if wa + wb > 0.0 => wb / (wa + wb),
        _ => 0.5,
    };
    let (sa, sb) = (share_a * gap, (1.0 - share_a) * gap);
    Ok(([a[0] + sa * ux, a[1] + sa * uy], [b[0] - sb * ux, b[1] - sb * uy]))
}

impl Factor for PairFactor {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(format!("radius {} must be positive", self.radius));
        }
        if self.circles.0 == self.circles.1 {
            return Err("a circle cannot be paired with itself".into());
        }
        Ok(())
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        ctx: &MinimizeContext,
    ) -> Result<(), FactorError> {
        let [xa, ya, xb, yb] = incoming else {
            return Err(FactorError::InfeasibleCertainty(format!(
                "pair factor needs 4 edges, has {}",
                incoming.len()
            )));
        };
        let (a, b) = ([xa.value, ya.value], [xb.value, yb.value]);
        if (a[0] - b[0]).hypot(a[1] - b[1]) >= 2.0 * self.radius {
            for (m, out) in incoming.iter().zip(outgoing.iter_mut()) {
                *out = Message::zero(m.value);
            }
            return Ok(());
        }
        let (pa, pb) = separate(
            a,
            b,
            mobility(xa.weight, ya.weight),
            mobility(xb.weight, yb.weight),
            self.radius,
            TAU * ctx.unit_random(0),
        )?;
        let w = ctx.standard();
        for (out, v) in outgoing.iter_mut().zip([pa[0], pa[1], pb[0], pb[1]]) {
            *out = Message::new(v, w);
        }
        Ok(())
    }

    fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        match values {
            [xa, ya, xb, yb] => (xa - xb).hypot(ya - yb) >= 2.0 * self.radius - tolerance,
            _ => false,
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twa_core::FactorGraph;

    fn ctx() -> MinimizeContext {
        let mut g = FactorGraph::new();
        let v = g.add_variable(0.0);
        let factor = g.add_factor(Box::new(BoxFactor { radius: 0.1 }), &[v]).unwrap();
        MinimizeContext {
            factor,
            iteration: 1,
            rho: 1.0,
            seed: 0,
        }
    }

    fn run(f: &dyn Factor, values: &[f64]) -> Vec<Message> {
        let incoming: Vec<_> = values.iter().map(|&v| Message::new(v, WeightClass::STANDARD)).collect();
        let mut out = vec![Message::zero(0.0); values.len()];
        f.minimize(&incoming, &mut out, &ctx()).unwrap();
        out
    }

    #[test]
    fn box_inside_is_inactive() {
        let out = run(&BoxFactor { radius: 0.1 }, &[0.5, 0.5]);
        assert_eq!(out, vec![Message::zero(0.5); 2]);
    }

    #[test]
    fn box_clamps_violated_coordinates() {
        let out = run(&BoxFactor { radius: 0.1 }, &[-0.05, 0.5]);
        assert_eq!(out[0], Message::new(0.1, WeightClass::STANDARD));
        assert_eq!(out[1], Message::zero(0.5));
        let out = run(&BoxFactor { radius: 0.1 }, &[0.95, 1.2]);
        assert!((out[0].value - 0.9).abs() < 1e-15 && (out[1].value - 0.9).abs() < 1e-15);
        assert!(out.iter().all(|m| m.weight == WeightClass::STANDARD));
    }

    #[test]
    fn far_pair_is_inactive() {
        let out = run(&PairFactor::new(0.1, 0, 1), &[0.2, 0.2, 0.8, 0.8]);
        assert!(out.iter().all(|m| m.weight.is_zero()));
        assert_eq!(out.iter().map(|m| m.value).collect::<Vec<_>>(), [0.2, 0.2, 0.8, 0.8]);
    }

    #[test]
    fn pinned_side_does_not_move() {
        let (a, b) = separate([0.0, 0.0], [0.1, 0.0], None, Some(1.0), 0.1, 0.0).unwrap();
        assert_eq!(a, [0.0, 0.0]);
        assert!((b[0] - 0.2).abs() < 1e-15);
        assert!(separate([0.0, 0.0], [0.1, 0.0], None, None, 0.1, 0.0).is_err());
    }
}
