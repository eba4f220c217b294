//! Message and weight algebra for the concur and edge-update steps.

use crate::graph::EdgeState;
use crate::weight::{Message, WeightClass};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("certain inputs disagree: {low} vs {high}")]
pub struct CertaintyConflict {
    pub low: f64,
    pub high: f64,
}

/// Fuses incoming factor opinions into one value.
///
/// Certain inputs dominate and are averaged (they must agree within
/// `tolerance`). Without certainty, standard inputs are averaged by magnitude.
/// With only zero-weight inputs the previous value is kept and the variable
/// reports no opinion. Zero-weight entries never enter the arithmetic.
pub fn concur_variable(
    incoming: impl IntoIterator<Item = Message>,
    previous: f64,
    rho: f64,
    tolerance: f64,
) -> Result<(f64, WeightClass), CertaintyConflict> {
    let mut certain_sum = 0.0;
    let mut certain_n = 0usize;
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    let mut num = 0.0;
    let mut den = 0.0;
    for m in incoming {
        match m.weight {
            WeightClass::Infinite => {
                certain_sum += m.value;
                certain_n += 1;
                low = low.min(m.value);
                high = high.max(m.value);
            }
            WeightClass::Standard(w) => {
                num += w * m.value;
                den += w;
            }
            WeightClass::Zero => {}
        }
    }
    if certain_n > 0 {
        if high - low > tolerance {
            return Err(CertaintyConflict { low, high });
        }
        Ok((certain_sum / certain_n as f64, WeightClass::Infinite))
    } else if den > 0.0 {
        Ok((num / den, WeightClass::Standard(rho)))
    } else {
        Ok((previous, WeightClass::Zero))
    }
}

/// Factor→variable message: the local assignment shifted by the accumulated
/// error while the factor speaks with standard weight, the bare assignment otherwise.
#[inline]
pub fn factor_message(x: f64, error_accum: f64, factor_weight: WeightClass) -> f64 {
    if factor_weight.is_standard() {
        x + error_accum
    } else {
        x
    }
}

/// Advances one edge after its variable concurred on `z`.
///
/// The error term accumulates `x − z` only while both directions carry
/// standard weights and is cleared otherwise. The new variable→factor message
/// is `z − error`; the previous one is kept for the convergence test.
pub fn update_edge(edge: &mut EdgeState, x: f64, z: f64, factor_weight: WeightClass, variable_weight: WeightClass) {
    edge.msg_to_variable = factor_message(x, edge.error_accum, factor_weight);
    edge.local = x;
    edge.weight_to_variable = factor_weight;
    edge.weight_to_factor = variable_weight;
    if factor_weight.is_standard() && variable_weight.is_standard() {
        edge.error_accum += x - z;
    } else {
        edge.error_accum = 0.0;
    }
    edge.prev_msg_to_factor = edge.msg_to_factor;
    edge.msg_to_factor = z - edge.error_accum;
}
