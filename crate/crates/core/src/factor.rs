//! The factor contract: a local minimization over the factor's own edges.

use std::any::Any;
use std::fmt;

use crate::graph::FactorId;
use crate::weight::{Message, WeightClass};

/// Per-call information available to a factor's minimizer.
#[derive(Debug, Clone, Copy)]
pub struct MinimizeContext {
    pub factor: FactorId,
    pub iteration: u64,
    /// Magnitude used for `Standard` outgoing weights.
    pub rho: f64,
    pub seed: u64,
}

impl MinimizeContext {
    pub fn standard(&self) -> WeightClass {
        WeightClass::Standard(self.rho)
    }

    /// Deterministic per-(seed, factor, iteration) stream for degenerate cases,
    /// independent of which worker thread runs the factor.
    pub fn unit_random(&self, salt: u64) -> f64 {
        let mut x = self.seed
            ^ (self.factor.raw_index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ self.iteration.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ salt.wrapping_mul(0x1656_67B1_9E37_79F9);
        // splitmix64 finalizer
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
        (x >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    /// Certain inputs make the factor's hard constraint unsatisfiable.
    #[error("infeasible certainty: {0}")]
    InfeasibleCertainty(String),
}

/// A cost or constraint node.
///
/// `minimize` receives one incoming message per edge, in the factor's edge
/// order, and must fill `outgoing` (same length) with the local assignment and
/// the weight it attaches to each edge. The assignment should minimize the
/// local cost plus `Σ (w/2)(v − n)²`, with infinite-weight inputs treated as
/// equalities and zero-weight inputs ignored.
pub trait Factor: fmt::Debug + Send + Sync + 'static {
    /// Tag used to check that a re-parameterization keeps the factor kind.
    fn kind(&self) -> &'static str;

    fn validate(&self) -> Result<(), String> {
        Ok(())
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        ctx: &MinimizeContext,
    ) -> Result<(), FactorError>;

    /// Whether a hard constraint holds on the given values (edge order).
    /// Soft factors return `true`.
    fn is_satisfied(&self, _values: &[f64], _tolerance: f64) -> bool {
        true
    }

    fn as_any(&self) -> &dyn Any;
}

/// Emits a fixed message on every edge regardless of input.
///
/// With an infinite weight this pins variables. With a standard weight it is
/// still a hard constraint from the solver's point of view; use
/// [`PriorFactor`] for a soft pull towards a value.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFactor {
    pub message: Message,
}

impl ConstantFactor {
    pub fn pin(value: f64) -> Self {
        ConstantFactor {
            message: Message::certain(value),
        }
    }
}

impl Factor for ConstantFactor {
    fn kind(&self) -> &'static str {
        "constant"
    }

    fn validate(&self) -> Result<(), String> {
        if !self.message.value.is_finite() {
            return Err("constant value must be finite".into());
        }
        if !self.message.weight.is_valid() {
            return Err("constant weight must be a valid weight class".into());
        }
        Ok(())
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        _ctx: &MinimizeContext,
    ) -> Result<(), FactorError> {
        if self.message.weight.is_infinite() {
            for m in incoming {
                if m.weight.is_infinite() && (m.value - self.message.value).abs() > 1e-9 {
                    return Err(FactorError::InfeasibleCertainty(format!(
                        "pinned {} against certain {}",
                        self.message.value, m.value
                    )));
                }
            }
        }
        outgoing.fill(self.message);
        Ok(())
    }

    fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        !self.message.weight.is_infinite() || values.iter().all(|v| (v - self.message.value).abs() <= tolerance)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Quadratic cost `(stiffness/2)(v − target)²` on every attached variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorFactor {
    pub target: f64,
    pub stiffness: f64,
}

impl Factor for PriorFactor {
    fn kind(&self) -> &'static str {
        "prior"
    }

    fn validate(&self) -> Result<(), String> {
        if !self.target.is_finite() {
            return Err("prior target must be finite".into());
        }
        if !(self.stiffness.is_finite() && self.stiffness > 0.0) {
            return Err("prior stiffness must be positive and finite".into());
        }
        Ok(())
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        ctx: &MinimizeContext,
    ) -> Result<(), FactorError> {
        for (m, out) in incoming.iter().zip(outgoing.iter_mut()) {
            *out = match m.weight {
                WeightClass::Infinite => Message::certain(m.value),
                WeightClass::Standard(w) => Message::new(
                    (self.stiffness * self.target + w * m.value) / (self.stiffness + w),
                    ctx.standard(),
                ),
                WeightClass::Zero => Message::new(self.target, ctx.standard()),
            };
        }
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Soft equality: every edge receives the weighted mean of the incoming values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EqualityFactor;

impl Factor for EqualityFactor {
    fn kind(&self) -> &'static str {
        "equality"
    }

    fn minimize(
        &self,
        incoming: &[Message],
        outgoing: &mut [Message],
        ctx: &MinimizeContext,
    ) -> Result<(), FactorError> {
        let certain: Vec<f64> = incoming
            .iter()
            .filter(|m| m.weight.is_infinite())
            .map(|m| m.value)
            .collect();
        let (value, weight) = if let Some(&first) = certain.first() {
            if certain.iter().any(|v| (v - first).abs() > 1e-9) {
                return Err(FactorError::InfeasibleCertainty(
                    "conflicting certain inputs to equality".into(),
                ));
            }
            (first, WeightClass::Infinite)
        } else {
            let (num, den) = incoming
                .iter()
                .filter(|m| m.weight.is_standard())
                .fold((0.0, 0.0), |(n, d), m| {
                    let w = m.weight.magnitude();
                    (n + w * m.value, d + w)
                });
            if den > 0.0 {
                (num / den, ctx.standard())
            } else {
                let mean = incoming.iter().map(|m| m.value).sum::<f64>() / incoming.len().max(1) as f64;
                (mean, WeightClass::Zero)
            }
        };
        outgoing.fill(Message::new(value, weight));
        Ok(())
    }

    fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        values.windows(2).all(|w| (w[0] - w[1]).abs() <= tolerance)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
