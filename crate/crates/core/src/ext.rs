//! Extended-real values used throughout the model.
//!
//! A lead-time quote lives in `[0, ∞]`, where `∞` means the provider never
//! pays compensation. An expected utility lives in `[−∞, ∞)`, where `−∞`
//! arises when the service rate cannot absorb the customer's risk aversion.
//! Both get their own type so threshold logic has to branch explicitly.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A lead-time quote `d ∈ [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quote {
    Finite(f64),
    /// No compensation is ever paid.
    Infinite,
}

impl Quote {
    pub const ZERO: Quote = Quote::Finite(0.0);

    pub fn finite(d: f64) -> Result<Self, Error> {
        if d.is_nan() || d < 0.0 {
            return Err(Error::Domain(format!("lead-time quote must be >= 0, got {d}")));
        }
        if d.is_infinite() {
            return Ok(Quote::Infinite);
        }
        Ok(Quote::Finite(d))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Quote::Infinite)
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Quote::Finite(d) => Some(d),
            Quote::Infinite => None,
        }
    }

    /// `f64` view with `∞` mapped to `f64::INFINITY`; for sorting and display only.
    pub fn to_f64(self) -> f64 {
        match self {
            Quote::Finite(d) => d,
            Quote::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Quote {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Quote::Infinite, Quote::Infinite) => Some(Ordering::Equal),
            (Quote::Infinite, Quote::Finite(_)) => Some(Ordering::Greater),
            (Quote::Finite(_), Quote::Infinite) => Some(Ordering::Less),
            (Quote::Finite(a), Quote::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Quote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quote::Finite(d) => match f.precision() {
                Some(p) => write!(f, "{d:.p$}"),
                None => write!(f, "{d}"),
            },
            Quote::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Quote {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(Quote::Infinite);
        }
        let d: f64 = t.parse().map_err(|_| Error::Domain(format!("cannot parse quote `{t}`")))?;
        Quote::finite(d)
    }
}

/// An expected utility in `[−∞, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Finite(f64),
    NegInfinity,
}

impl Utility {
    /// A customer joins on a weak preference: `B ≥ 0`.
    pub fn joins(self) -> bool {
        match self {
            Utility::Finite(b) => b >= 0.0,
            Utility::NegInfinity => false,
        }
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Utility::Finite(b) => Some(b),
            Utility::NegInfinity => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Utility::Finite(b) => b,
            Utility::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

impl PartialOrd for Utility {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Utility::Finite(b) => match f.precision() {
                Some(p) => write!(f, "{b:.p$}"),
                None => write!(f, "{b}"),
            },
            Utility::NegInfinity => f.write_str("-inf"),
        }
    }
}
