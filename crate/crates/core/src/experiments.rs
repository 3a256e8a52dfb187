//! Parameter sweeps, per-state quote tables, risk-aversion curves and
//! minimum-capacity curves.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ext::Quote;
use crate::optimize::{solve, Problem, SolveResult};
use crate::quotes::{self, QuoteKind, ThresholdBounds};
use crate::sim::{simulate, Estimate, SimConfig};
use crate::utility::{expected_utility, Scenario};

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Fee,
    Compensation,
    RiskAversion,
    ServiceRate,
    ArrivalRate,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Fee => "p",
            Axis::Compensation => "l",
            Axis::RiskAversion => "r",
            Axis::ServiceRate => "mu",
            Axis::ArrivalRate => "lambda",
        }
    }

    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        let mut s = *base;
        match self {
            Axis::Fee => s.fee = value,
            Axis::Compensation => s.compensation = value,
            Axis::RiskAversion => s.risk_aversion = value,
            Axis::ServiceRate => s.service_rate = value,
            Axis::ArrivalRate => s.arrival_rate = value,
        }
        s
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "p" => Axis::Fee,
            "l" => Axis::Compensation,
            "r" => Axis::RiskAversion,
            "mu" => Axis::ServiceRate,
            "lambda" => Axis::ArrivalRate,
            other => return Err(Error::Domain(format!("unknown axis `{other}` (expected p, l, r, mu or lambda)"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub problems: Vec<Problem>,
    /// Simulate each optimal policy with this configuration.
    pub simulation: Option<SimConfig>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Domain("sweep grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("sweep grid must be strictly increasing".into()));
        }
        if self.problems.is_empty() {
            return Err(Error::Domain("sweep needs at least one problem".into()));
        }
        for &v in &self.grid {
            self.axis.apply(&self.base, v).validate()?;
        }
        Ok(())
    }
}

/// One problem's outcome at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub problem: Problem,
    pub threshold: usize,
    pub objective: f64,
    /// The single quote, or `d_0` for dynamic policies.
    pub quote: Quote,
    pub simulated: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub scenario: Scenario,
    /// `None` when `μ ≤ r(c − l)`.
    pub bounds: Option<ThresholdBounds>,
    pub cells: Vec<SweepCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub problems: Vec<Problem>,
    pub rows: Vec<SweepRow>,
}

fn cell(s: &Scenario, problem: Problem, sim: Option<&SimConfig>) -> Result<SweepCell> {
    if !s.feasible_service() {
        return Ok(SweepCell { problem, threshold: 0, objective: 0.0, quote: Quote::ZERO, simulated: None });
    }
    let r = solve(s, problem)?;
    let simulated = match sim {
        Some(cfg) if r.threshold() > 0 => {
            let e = simulate(s, &r.policy, cfg)?;
            Some(if problem.is_social() { e.social_rate } else { e.profit_rate })
        }
        _ => None,
    };
    Ok(SweepCell { problem, threshold: r.threshold(), objective: r.objective, quote: r.headline_quote(), simulated })
}

/// Solves every problem at every grid point, in parallel over the grid.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = spec
        .grid
        .par_iter()
        .map(|&value| {
            let s = spec.axis.apply(&spec.base, value);
            let bounds = if s.feasible_service() { Some(quotes::threshold_bounds(&s)?) } else { None };
            let cells =
                spec.problems.iter().map(|&p| cell(&s, p, spec.simulation.as_ref())).collect::<Result<Vec<_>>>()?;
            Ok(SweepRow { value, scenario: s, bounds, cells })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis: spec.axis, problems: spec.problems.clone(), rows })
}

/// A quote-table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuoteCell {
    Finite(f64),
    /// Only quotes strictly above this value are optimal (ε-optimum).
    Above(f64),
    Infinite,
    /// The customer balks at this state.
    Balk,
}

impl QuoteCell {
    /// Two-decimal presentation: finite values truncated, ε-optimal values
    /// shown as the smallest two-decimal number strictly above the bound.
    pub fn present(&self) -> String {
        match *self {
            QuoteCell::Finite(d) => format!("{:.2}", truncate2(d)),
            QuoteCell::Above(d) => format!("{:.2}", above2(d)),
            QuoteCell::Infinite => "inf".into(),
            QuoteCell::Balk => "-".into(),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            QuoteCell::Finite(d) | QuoteCell::Above(d) => Some(d),
            QuoteCell::Infinite => Some(f64::INFINITY),
            QuoteCell::Balk => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuoteRow {
    pub n: usize,
    /// One cell per problem, in [`Problem::ALL`] order.
    pub cells: [QuoteCell; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuoteTable {
    pub scenario: Scenario,
    pub bounds: ThresholdBounds,
    /// Optimal thresholds in [`Problem::ALL`] order.
    pub thresholds: [usize; 4],
    pub rows: Vec<QuoteRow>,
}

/// Quotes offered at each state `n = 0..=n̄` under each optimal policy.
pub fn quote_table(s: &Scenario) -> Result<QuoteTable> {
    let bounds = quotes::threshold_bounds(s)?;
    let results: Vec<SolveResult> = Problem::ALL.iter().map(|&p| solve(s, p)).collect::<Result<_>>()?;
    let last = match bounds.upper {
        Some(u) => u,
        None => results.iter().map(|r| r.threshold()).max().unwrap_or(0),
    };
    let single_kinds: Vec<Option<QuoteKind>> = results
        .iter()
        .map(|r| {
            (r.problem == Problem::SocialSingle && r.threshold() > 0)
                .then(|| quotes::social_single_quote(s, r.threshold()).ok().map(|q| q.kind))
                .flatten()
        })
        .collect();
    let rows = (0..=last)
        .map(|n| {
            let cells = std::array::from_fn(|i| {
                let r = &results[i];
                if n >= r.threshold() {
                    return QuoteCell::Balk;
                }
                match r.policy.quote(n) {
                    Quote::Infinite => QuoteCell::Infinite,
                    Quote::Finite(d) if single_kinds[i] == Some(QuoteKind::EpsilonOnly) => {
                        let lo = quotes::single_quote_interval(s, r.threshold()).map(|iv| iv.lo).unwrap_or(d);
                        QuoteCell::Above(lo)
                    }
                    Quote::Finite(d) => QuoteCell::Finite(d),
                }
            });
            QuoteRow { n, cells }
        })
        .collect();
    Ok(QuoteTable { scenario: *s, bounds, thresholds: std::array::from_fn(|i| results[i].threshold()), rows })
}

/// Truncation to two decimals, the presentation used in reports.
pub fn truncate2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let nudged = scaled + scaled.signum() * 1e-9 * scaled.abs().max(1.0);
    nudged.trunc() / 100.0
}

/// Smallest two-decimal number strictly above `x`.
pub fn above2(x: f64) -> f64 {
    ((x * 100.0).floor() + 1.0) / 100.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskCurves {
    pub r_grid: Vec<f64>,
    /// Objective per problem over the grid, at the scenario's compensation.
    pub compensated: Vec<(Problem, Vec<f64>)>,
    /// Same with `l = 0`.
    pub uncompensated: Vec<(Problem, Vec<f64>)>,
    /// `μ/c`: beyond it the uncompensated market is empty.
    pub uncompensated_cutoff: f64,
    /// `μ/(c − l)`: beyond it service is infeasible.
    pub compensated_cutoff: f64,
}

fn objective_or_zero(s: &Scenario, p: Problem) -> Result<f64> {
    if !s.feasible_service() {
        return Ok(0.0);
    }
    Ok(solve(s, p)?.objective)
}

/// Optimal objectives as functions of `r`, with and without compensation.
pub fn risk_aversion_curves(base: &Scenario, r_grid: &[f64]) -> Result<RiskCurves> {
    if r_grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Domain("risk aversion grid must be nonnegative".into()));
    }
    let curve = |s0: Scenario, p: Problem| -> Result<Vec<f64>> {
        r_grid.par_iter().map(|&r| objective_or_zero(&s0.with_risk_aversion(r), p)).collect()
    };
    let free = base.with_compensation(0.0);
    let compensated = Problem::ALL.iter().map(|&p| Ok((p, curve(*base, p)?))).collect::<Result<_>>()?;
    let uncompensated = Problem::ALL.iter().map(|&p| Ok((p, curve(free, p)?))).collect::<Result<_>>()?;
    let gap = base.waiting_cost - base.compensation;
    Ok(RiskCurves {
        r_grid: r_grid.to_vec(),
        compensated,
        uncompensated,
        uncompensated_cutoff: base.service_rate / base.waiting_cost,
        compensated_cutoff: if gap > 0.0 { base.service_rate / gap } else { f64::INFINITY },
    })
}

/// Largest service rate tried before giving up.
pub const CAPACITY_CAP: f64 = 1e6;

/// Smallest `μ` at which a customer arriving to an empty system joins,
/// `B_0(d) ≥ 0`, at risk aversion `r`. The scenario's own `μ` is ignored.
pub fn min_capacity(s: &Scenario, d: Quote, r: f64) -> Result<f64> {
    let s = s.with_risk_aversion(r);
    let b0 = |mu: f64| -> f64 {
        let sc = s.with_service_rate(mu);
        if !sc.feasible_service() {
            return f64::NEG_INFINITY;
        }
        expected_utility(&sc, 0, d).value.to_f64()
    };
    let mut lo = r * (s.waiting_cost - s.compensation);
    let mut hi = (2.0 * lo).max(1.0);
    while b0(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > CAPACITY_CAP {
            return Err(Error::NoSolution(format!(
                "no service rate up to {CAPACITY_CAP} makes an empty-system customer join at d = {d}"
            )));
        }
    }
    // B_0 is increasing in μ; keep b0(lo) < 0 ≤ b0(hi).
    for _ in 0..400 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let m = 0.5 * (lo + hi);
        if b0(m) >= 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityCurve {
    pub r: f64,
    /// `(d, μ_min)`.
    pub points: Vec<(f64, f64)>,
}

/// Minimum-capacity curves over a quote grid, one per risk aversion.
pub fn min_capacity_curves(s: &Scenario, d_grid: &[f64], r_values: &[f64]) -> Result<Vec<CapacityCurve>> {
    r_values
        .iter()
        .map(|&r| {
            let points = d_grid
                .par_iter()
                .map(|&d| Ok((d, min_capacity(s, Quote::finite(d)?, r)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(CapacityCurve { r, points })
        })
        .collect()
}
