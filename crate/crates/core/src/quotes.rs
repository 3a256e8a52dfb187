//! Optimal lead-time quotes.
//!
//! Every characterization here is the crossing of a nonincreasing function,
//! located by bisection:
//!
//! * the provider quote `d̃ᴾ_n` is the largest `d` with `B_n(d) ≥ 0`;
//! * the social dynamic quote `d̃ˢ_n` solves `a(d) = 0`, capped at `d̃ᴾ_n`;
//! * the social single quote solves `a_c(d) = 0` on the feasible interval of
//!   a threshold `n0`.
//!
//! At `r = 0` the social criteria are replaced by their first-order limits in
//! `r`, which have the same roots as `r → 0`.

use crate::dist::{self, ErlangSpec, FiniteQueueSojourn};
use crate::error::{Error, Result};
use crate::ext::Quote;
use crate::root::{self, Bracket};
use crate::utility::{expected_utility, Scenario};

/// Relative and absolute offsets of the published quote when only an
/// ε-optimum exists above `d̃ᴾ_{n0}`.
pub const EPSILON_REL: f64 = 1e-6;
pub const EPSILON_ABS: f64 = 1e-9;

/// Universal bounds on any policy's balking threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdBounds {
    /// `n̲`: every customer seeing fewer joins even without compensation.
    pub lower: usize,
    /// `n̄`: no quote induces a customer seeing `n̄` to join; `None` is `∞`.
    pub upper: Option<usize>,
}

impl ThresholdBounds {
    /// A customer in an empty system joins at `d = 0`.
    pub fn join_feasible(&self) -> bool {
        self.upper != Some(0)
    }

    pub fn contains(&self, n0: usize) -> bool {
        n0 >= self.lower && self.upper.map_or(true, |u| n0 <= u)
    }

    pub fn check(&self, n0: usize) -> Result<()> {
        if self.contains(n0) {
            Ok(())
        } else {
            Err(Error::ThresholdOutOfBounds { n0, lower: self.lower, upper: self.upper_label() })
        }
    }

    pub fn upper_label(&self) -> String {
        self.upper.map_or_else(|| "inf".to_string(), |u| u.to_string())
    }
}

fn joins(s: &Scenario, n: usize, d: Quote) -> bool {
    expected_utility(s, n, d).value.joins()
}

/// Smallest `n ≥ 0` with `B_n(d) < 0`, starting the scan from `guess`.
fn first_balking(s: &Scenario, d: Quote, guess: usize) -> usize {
    let mut n = guess;
    while n > 0 && !joins(s, n - 1, d) {
        n -= 1;
    }
    while joins(s, n, d) {
        n += 1;
    }
    n
}

/// `n̲ = ⌊r(R−p)/ln(μ/(μ−rc))⌋` and `n̄ = ⌊r(R−p)/ln(μ/v)⌋`, with the
/// risk-neutral floors at `r = 0`.
///
/// The floors are confirmed against the sign of `B_n` so that the bounds
/// agree with [`expected_utility`] at exact ties.
pub fn threshold_bounds(s: &Scenario) -> Result<ThresholdBounds> {
    s.require_feasible_service()?;
    let (r, mu) = (s.risk_aversion, s.service_rate);
    let guess = |x: f64| if x.is_finite() { x.floor().clamp(0.0, 1e9) as usize } else { 0 };
    let (lo_guess, hi_guess) = if s.is_risk_neutral() {
        let (lo, hi) = crate::utility::naor_thresholds(s);
        (lo, hi)
    } else {
        let a = s.uncompensated_rate();
        let lo = if a > 0.0 { guess(r * s.surplus() / (mu / a).ln()) } else { 0 };
        let hi = (s.compensation < s.waiting_cost).then(|| guess(r * s.surplus() / (mu / s.effective_rate()).ln()));
        (lo, hi)
    };
    let lower = if s.is_risk_neutral() || s.uncompensated_rate() > 0.0 {
        first_balking(s, Quote::Infinite, lo_guess)
    } else {
        0
    };
    let upper = hi_guess.map(|h| first_balking(s, Quote::ZERO, h));
    Ok(ThresholdBounds { lower, upper: upper.map(|u| u.max(lower)) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteKind {
    /// Root of the characterizing function strictly inside the bracket.
    InteriorRoot,
    /// An endpoint of the feasible range is optimal.
    Boundary,
    /// `d = ∞`.
    Infinite,
    /// No quote makes the customer join (`B_n(0) < 0`).
    Infeasible,
    /// The supremum sits at an open endpoint and is not attained.
    EpsilonOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteSolution {
    /// `None` only for [`QuoteKind::Infeasible`]. For
    /// [`QuoteKind::EpsilonOnly`] this is the published quote just above the
    /// open endpoint.
    pub value: Option<Quote>,
    pub kind: QuoteKind,
    /// Final root-finding bracket, or the feasible interval for boundary and
    /// ε-only outcomes.
    pub bracket: Option<(f64, f64)>,
    /// `|f(value)|` for interior roots, zero otherwise.
    pub residual: f64,
}

impl QuoteSolution {
    fn fixed(value: Quote, kind: QuoteKind) -> Self {
        let kind = if value.is_infinite() { QuoteKind::Infinite } else { kind };
        Self { value: Some(value), kind, bracket: None, residual: 0.0 }
    }

    fn infeasible() -> Self {
        Self { value: None, kind: QuoteKind::Infeasible, bracket: None, residual: 0.0 }
    }

    fn root(b: Bracket) -> Self {
        let (d, residual) = b.feasible();
        Self { value: Some(Quote::Finite(d)), kind: QuoteKind::InteriorRoot, bracket: Some((b.lo, b.hi)), residual }
    }

    /// The quote, or an error for an infeasible state.
    pub fn quote(&self) -> Result<Quote> {
        self.value.ok_or_else(|| Error::NoSolution("no quote induces this customer to join".into()))
    }
}

/// `d̃ᴾ_n = sup{d ≥ 0 : B_n(d) ≥ 0}`.
pub fn provider_quote(s: &Scenario, n: usize) -> Result<QuoteSolution> {
    s.require_feasible_service()?;
    if joins(s, n, Quote::Infinite) {
        return Ok(QuoteSolution::fixed(Quote::Infinite, QuoteKind::Infinite));
    }
    if !joins(s, n, Quote::ZERO) {
        return Ok(QuoteSolution::infeasible());
    }
    let b = root::bisect_decreasing_unbounded(|d| expected_utility(s, n, Quote::Finite(d)).value.to_f64(), 0.0, 1.0)?;
    Ok(QuoteSolution::root(b))
}

/// Provider quotes `d̃ᴾ_0, …, d̃ᴾ_{count−1}`.
pub fn provider_quotes(s: &Scenario, count: usize) -> Result<Vec<QuoteSolution>> {
    (0..count).map(|n| provider_quote(s, n)).collect()
}

/// `a(d) = F̄_{n+1,μ}(d)/F̄_{n+1,v}(d) · e^{−rld} − (μ/v)^{n+1} e^{−r(R−p)}`,
/// whose sign is that of `∂(G_n + B_n)/∂d`. At `r = 0` returns the
/// first-order coefficient in `r`.
pub fn dynamic_social_criterion(s: &Scenario, n: usize, d: f64) -> f64 {
    let k = n + 1;
    let (mu, l) = (s.service_rate, s.compensation);
    if s.is_risk_neutral() {
        let spec = ErlangSpec { shape: k, rate: mu };
        let tail = dist::erlang_tail(spec, d).unwrap_or(0.0);
        let pmf = dist::ln_poisson_pmf(n, mu * d).exp();
        let hazard_term = if tail > 0.0 { d * pmf / tail } else { d };
        return s.surplus() - l * d - (s.waiting_cost - l) * (k as f64 / mu + hazard_term);
    }
    let r = s.risk_aversion;
    let v = s.effective_rate();
    let ln_ratio = dist::ln_poisson_lower(k, mu * d) - dist::ln_poisson_lower(k, v * d) - r * l * d;
    let ln_target = k as f64 * (mu / v).ln() - r * s.surplus();
    ln_ratio.exp() - ln_target.exp()
}

/// Socially optimal dynamic quote `d̃ˢ_n`.
pub fn social_dynamic_quote(s: &Scenario, n: usize) -> Result<QuoteSolution> {
    let dp = provider_quote(s, n)?;
    let cap = match dp.value {
        None => return Ok(dp),
        Some(q) => q,
    };
    // Without compensation the social objective does not depend on d.
    if s.compensation == 0.0 {
        return Ok(QuoteSolution::fixed(cap, QuoteKind::Boundary));
    }
    let a = |d: f64| dynamic_social_criterion(s, n, d);
    match cap {
        Quote::Finite(hi) => {
            if a(hi) >= 0.0 {
                return Ok(QuoteSolution::fixed(cap, QuoteKind::Boundary));
            }
            if a(0.0) < 0.0 {
                return Ok(QuoteSolution::fixed(Quote::ZERO, QuoteKind::Boundary));
            }
            Ok(QuoteSolution::root(root::bisect_decreasing(a, 0.0, hi)?))
        }
        Quote::Infinite => {
            if a(0.0) < 0.0 {
                return Ok(QuoteSolution::fixed(Quote::ZERO, QuoteKind::Boundary));
            }
            Ok(QuoteSolution::root(root::bisect_decreasing_unbounded(a, 0.0, 1.0)?))
        }
    }
}

/// Feasible single quotes for threshold `n0`: `d` with `B_n(d) ≥ 0` for
/// `n < n0` and `B_{n0}(d) < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteInterval {
    pub lo: f64,
    /// `lo` belongs to the interval (only at `n0 = n̄`, where `lo = 0`).
    pub lo_closed: bool,
    /// Always included.
    pub hi: Quote,
}

impl QuoteInterval {
    pub fn contains(&self, d: Quote) -> bool {
        let x = d.to_f64();
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        above && d <= self.hi
    }
}

/// `(d̃ᴾ_{n0}, d̃ᴾ_{n0−1}]` in general, `(d̃ᴾ_{n̲}, ∞]` at `n0 = n̲` and
/// `[0, d̃ᴾ_{n̄−1}]` at `n0 = n̄` (which wins when `n̲ = n̄`).
pub fn single_quote_interval(s: &Scenario, n0: usize) -> Result<QuoteInterval> {
    let bounds = threshold_bounds(s)?;
    single_quote_interval_with(s, &bounds, n0)
}

fn single_quote_interval_with(s: &Scenario, bounds: &ThresholdBounds, n0: usize) -> Result<QuoteInterval> {
    bounds.check(n0)?;
    if n0 == 0 {
        return Err(Error::ThresholdOutOfBounds { n0, lower: bounds.lower, upper: bounds.upper_label() });
    }
    let hi = if n0 == bounds.lower { Quote::Infinite } else { provider_quote(s, n0 - 1)?.quote()? };
    if Some(n0) == bounds.upper {
        return Ok(QuoteInterval { lo: 0.0, lo_closed: true, hi });
    }
    let lo = provider_quote(s, n0)?.quote()?;
    match lo {
        Quote::Finite(lo) => Ok(QuoteInterval { lo, lo_closed: false, hi }),
        Quote::Infinite => Err(Error::NoSolution(format!(
            "threshold {n0} cannot be enforced: the customer seeing {n0} joins at every quote"
        ))),
    }
}

/// Provider-optimal single quote for threshold `n0`: the top of its interval.
pub fn provider_single_quote(s: &Scenario, n0: usize) -> Result<QuoteSolution> {
    let iv = single_quote_interval(s, n0)?;
    Ok(QuoteSolution::fixed(iv.hi, QuoteKind::Boundary))
}

/// Sums `ln Σ_{k<m} x^k` without overflow.
fn ln_geometric_sum(x: f64, m: usize) -> f64 {
    if x <= 1.0 {
        (0..m).map(|k| x.powi(k as i32)).sum::<f64>().ln()
    } else {
        let inv = 1.0 / x;
        (m as f64 - 1.0) * x.ln() + (0..m).map(|j| inv.powi(j as i32)).sum::<f64>().ln()
    }
}

/// `β = Σ_{n<n0} q̃(n) (μ/v)^{n+1}` with `q̃ ∝ ρ^n` over joining states,
/// i.e. `(μ/v) Σ_{k<n0}(λ/v)^k / Σ_{k<n0} ρ^k`; regular at `v = λ`.
pub fn mixture_beta(s: &Scenario, n0: usize) -> f64 {
    mixture_beta_ln(s, n0).exp()
}

fn mixture_beta_ln(s: &Scenario, n0: usize) -> f64 {
    let (lam, mu, v) = (s.arrival_rate, s.service_rate, s.effective_rate());
    (mu / v).ln() + ln_geometric_sum(lam / v, n0) - ln_geometric_sum(lam / mu, n0)
}

/// `a_c(d) = (F̄_μ(d)/F̄_v(d)) e^{−rld} − β e^{−r(R−p)}` for threshold `n0`,
/// with `F̄_μ, F̄_v` the joining-customer sojourn tails at capacity `n0`.
/// Its sign is that of the derivative of the single-quote social objective.
/// At `r = 0` returns the first-order coefficient in `r`.
pub fn single_social_criterion(s: &Scenario, n0: usize, d: f64) -> Result<f64> {
    let (lam, mu, l) = (s.arrival_rate, s.service_rate, s.compensation);
    let fmu = FiniteQueueSojourn::new(n0, lam, mu)?;
    if s.is_risk_neutral() {
        let w = fmu.weights();
        let mean_k: f64 = w.iter().enumerate().map(|(n, wn)| wn * (n + 1) as f64).sum();
        let mean_n = mean_k - 1.0;
        let tail = fmu.tail(d)?;
        let mut dphi = 0.0;
        for (n, wn) in w.iter().enumerate() {
            let t = dist::erlang_tail(ErlangSpec { shape: n + 1, rate: mu }, d)?;
            let p = dist::ln_poisson_pmf(n, mu * d).exp();
            dphi += wn * (-(n as f64 - mean_n) / mu * t - d * p);
        }
        let dln = if tail > 0.0 { dphi / tail } else { -d };
        return Ok(s.surplus() - l * d - (s.waiting_cost - l) * (mean_k / mu - dln));
    }
    let fv = FiniteQueueSojourn::new(n0, lam, s.effective_rate())?;
    let ln_ratio = fmu.ln_tail(d)? - fv.ln_tail(d)? - s.risk_aversion * l * d;
    let ln_target = mixture_beta_ln(s, n0) - s.risk_aversion * s.surplus();
    Ok(ln_ratio.exp() - ln_target.exp())
}

/// Published quote for an ε-only threshold: just above the open endpoint,
/// and never beyond the interval midpoint.
pub fn epsilon_quote(iv: &QuoteInterval) -> f64 {
    let d = iv.lo * (1.0 + EPSILON_REL) + EPSILON_ABS;
    match iv.hi {
        Quote::Finite(hi) => d.min(iv.lo + 0.5 * (hi - iv.lo)),
        Quote::Infinite => d,
    }
}

/// Socially optimal single quote for threshold `n0`.
pub fn social_single_quote(s: &Scenario, n0: usize) -> Result<QuoteSolution> {
    let bounds = threshold_bounds(s)?;
    let iv = single_quote_interval_with(s, &bounds, n0)?;
    let span = Some((iv.lo, iv.hi.to_f64()));
    if s.compensation == 0.0 {
        return Ok(QuoteSolution { bracket: span, ..QuoteSolution::fixed(iv.hi, QuoteKind::Boundary) });
    }
    let a = |d: f64| single_social_criterion(s, n0, d).unwrap_or(f64::NEG_INFINITY);
    if let Quote::Finite(hi) = iv.hi {
        if a(hi) >= 0.0 {
            return Ok(QuoteSolution { bracket: span, ..QuoteSolution::fixed(iv.hi, QuoteKind::Boundary) });
        }
    }
    if a(iv.lo) <= 0.0 {
        if iv.lo_closed {
            return Ok(QuoteSolution {
                bracket: span,
                ..QuoteSolution::fixed(Quote::Finite(iv.lo), QuoteKind::Boundary)
            });
        }
        return Ok(QuoteSolution {
            value: Some(Quote::Finite(epsilon_quote(&iv))),
            kind: QuoteKind::EpsilonOnly,
            bracket: span,
            residual: 0.0,
        });
    }
    let b = match iv.hi {
        Quote::Finite(hi) => root::bisect_decreasing(a, iv.lo, hi)?,
        Quote::Infinite => root::bisect_decreasing_unbounded(a, iv.lo, (2.0 * iv.lo).max(1.0))?,
    };
    Ok(QuoteSolution::root(b))
}
