//! Weight classes and the (value, weight) message pair.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Reliability attached to a message.
///
/// `Zero` carries no opinion, `Infinite` is certain, and `Standard` carries an
/// ordinary positive magnitude (usually 1.0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "magnitude", rename_all = "lowercase")]
pub enum WeightClass {
    Zero,
    Standard(f64),
    Infinite,
}

impl WeightClass {
    pub const STANDARD: WeightClass = WeightClass::Standard(1.0);

    /// Builds a standard weight, rejecting non-positive or non-finite magnitudes.
    pub fn standard(magnitude: f64) -> Result<Self, InvalidWeight> {
        if magnitude.is_finite() && magnitude > 0.0 {
            Ok(WeightClass::Standard(magnitude))
        } else {
            Err(InvalidWeight(magnitude))
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, WeightClass::Zero)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, WeightClass::Infinite)
    }

    pub fn is_standard(self) -> bool {
        matches!(self, WeightClass::Standard(_))
    }

    /// Numeric magnitude for finite classes; `f64::INFINITY` for certainty.
    pub fn magnitude(self) -> f64 {
        match self {
            WeightClass::Zero => 0.0,
            WeightClass::Standard(m) => m,
            WeightClass::Infinite => f64::INFINITY,
        }
    }

    fn rank(self) -> u8 {
        match self {
            WeightClass::Zero => 0,
            WeightClass::Standard(_) => 1,
            WeightClass::Infinite => 2,
        }
    }

    /// Dominance order between classes: `Infinite > Standard > Zero`.
    /// Standard magnitudes are not compared.
    pub fn dominance(self, other: WeightClass) -> Ordering {
        self.rank().cmp(&other.rank())
    }

    /// The more dominant of two weights; between two standard weights the larger magnitude.
    pub fn max_dominant(self, other: WeightClass) -> WeightClass {
        match (self, other) {
            (WeightClass::Standard(a), WeightClass::Standard(b)) => WeightClass::Standard(a.max(b)),
            _ if self.dominance(other) == Ordering::Less => other,
            _ => self,
        }
    }

    pub fn is_valid(self) -> bool {
        match self {
            WeightClass::Standard(m) => m.is_finite() && m > 0.0,
            _ => true,
        }
    }
}

impl Default for WeightClass {
    fn default() -> Self {
        WeightClass::STANDARD
    }
}

impl fmt::Display for WeightClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightClass::Zero => f.write_str("0"),
            WeightClass::Standard(m) => write!(f, "{m}"),
            WeightClass::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("standard weight magnitude must be positive and finite, got {0}")]
pub struct InvalidWeight(pub f64);

/// A value paired with its weight; the unit exchanged on every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub value: f64,
    pub weight: WeightClass,
}

impl Message {
    pub const fn new(value: f64, weight: WeightClass) -> Self {
        Message { value, weight }
    }

    pub const fn zero(value: f64) -> Self {
        Message::new(value, WeightClass::Zero)
    }

    pub const fn certain(value: f64) -> Self {
        Message::new(value, WeightClass::Infinite)
    }

    pub const fn standard(value: f64, rho: f64) -> Self {
        Message::new(value, WeightClass::Standard(rho))
    }
}
