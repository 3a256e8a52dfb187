use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// μ ≤ r(c−l): every expected utility is −∞ and no customer ever joins.
    #[error("infeasible service: mu = {service_rate} <= r(c-l) = {required}; no customer ever joins")]
    InfeasibleService { service_rate: f64, required: f64 },

    #[error("loss of precision in alternating tail sum (cancellation ratio {ratio:.3e})")]
    PrecisionLoss { ratio: f64 },

    #[error("threshold {n0} outside feasible range [{lower}, {upper}]")]
    ThresholdOutOfBounds { n0: usize, lower: usize, upper: String },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("risk-neutral solve requires r = 0 (got r = {0})")]
    NonZeroRisk(f64),

    #[error("root bracket not found: {0}")]
    NoBracket(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("threshold search exceeded cap of {0} states")]
    SearchCapExceeded(usize),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}
