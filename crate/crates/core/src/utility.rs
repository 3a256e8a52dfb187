//! Scenario primitives and the customer/provider per-visit quantities.
//!
//! A customer who joins behind `n` others waits `X_n ~ Erlang(n+1, μ)` and
//! receives `w = R − p − cX + l(X − d)^+`. With CARA utility
//! `U(w) = (1 − e^{−rw})/r`, the expected utility has a closed form built from
//! two Erlang pieces at rates `μ − rc` (below the quote) and
//! `v = μ − r(c − l)` (above it).

use std::fmt;

use crate::dist::{self, ErlangSpec};
use crate::error::{Error, Result};
use crate::ext::{Quote, Utility};
use crate::quad;

/// Below this `|μ − rc| / μ` the closed form is replaced by quadrature.
pub const POLE_BAND: f64 = 1e-6;

/// Market and system primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    /// Service value `R`.
    pub service_value: f64,
    /// Entrance fee `p`.
    pub fee: f64,
    /// Waiting cost rate `c`.
    pub waiting_cost: f64,
    /// Compensation rate `l` paid per unit of lateness.
    pub compensation: f64,
    /// Absolute risk aversion `r`; zero means risk neutral.
    pub risk_aversion: f64,
    /// Arrival rate `λ`.
    pub arrival_rate: f64,
    /// Service rate `μ`.
    pub service_rate: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::base()
    }
}

impl Scenario {
    /// `R=15, p=10, c=8, l=3, r=0.5, λ=10, μ=12`.
    pub fn base() -> Self {
        Self {
            service_value: 15.0,
            fee: 10.0,
            waiting_cost: 8.0,
            compensation: 3.0,
            risk_aversion: 0.5,
            arrival_rate: 10.0,
            service_rate: 12.0,
        }
    }

    pub fn with_fee(mut self, p: f64) -> Self {
        self.fee = p;
        self
    }

    pub fn with_compensation(mut self, l: f64) -> Self {
        self.compensation = l;
        self
    }

    pub fn with_risk_aversion(mut self, r: f64) -> Self {
        self.risk_aversion = r;
        self
    }

    pub fn with_service_rate(mut self, mu: f64) -> Self {
        self.service_rate = mu;
        self
    }

    pub fn with_arrival_rate(mut self, lambda: f64) -> Self {
        self.arrival_rate = lambda;
        self
    }

    /// Checks `p ≤ R`, `0 ≤ l ≤ c`, positive rates and `c > 0`, `r ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("R", self.service_value),
            ("p", self.fee),
            ("c", self.waiting_cost),
            ("l", self.compensation),
            ("r", self.risk_aversion),
            ("lambda", self.arrival_rate),
            ("mu", self.service_rate),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidScenario(format!("{name} must be finite, got {v}")));
            }
        }
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.fee > self.service_value {
            return bad(format!("p = {} exceeds R = {}", self.fee, self.service_value));
        }
        if self.waiting_cost <= 0.0 {
            return bad(format!("c must be > 0, got {}", self.waiting_cost));
        }
        if self.compensation < 0.0 || self.compensation > self.waiting_cost {
            return bad(format!("l must satisfy 0 <= l <= c = {}, got {}", self.waiting_cost, self.compensation));
        }
        if self.risk_aversion < 0.0 {
            return bad(format!("r must be >= 0, got {}", self.risk_aversion));
        }
        if self.arrival_rate <= 0.0 {
            return bad(format!("lambda must be > 0, got {}", self.arrival_rate));
        }
        if self.service_rate <= 0.0 {
            return bad(format!("mu must be > 0, got {}", self.service_rate));
        }
        Ok(())
    }

    /// `v = μ − r(c − l)`.
    pub fn effective_rate(&self) -> f64 {
        self.service_rate - self.risk_aversion * (self.waiting_cost - self.compensation)
    }

    /// `μ − rc`, the rate of the uncompensated piece.
    pub fn uncompensated_rate(&self) -> f64 {
        self.service_rate - self.risk_aversion * self.waiting_cost
    }

    /// `ρ = λ/μ`.
    pub fn rho(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    /// `R − p`.
    pub fn surplus(&self) -> f64 {
        self.service_value - self.fee
    }

    pub fn is_risk_neutral(&self) -> bool {
        self.risk_aversion == 0.0
    }

    /// `μ > r(c − l)`; otherwise every expected utility is `−∞`.
    pub fn feasible_service(&self) -> bool {
        self.effective_rate() > 0.0
    }

    pub fn require_feasible_service(&self) -> Result<()> {
        if self.feasible_service() {
            Ok(())
        } else {
            Err(Error::InfeasibleService {
                service_rate: self.service_rate,
                required: self.risk_aversion * (self.waiting_cost - self.compensation),
            })
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R={} p={} c={} l={} r={} lambda={} mu={}",
            self.service_value,
            self.fee,
            self.waiting_cost,
            self.compensation,
            self.risk_aversion,
            self.arrival_rate,
            self.service_rate
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    ClosedForm,
    QuadratureFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityEval {
    pub value: Utility,
    pub method: EvalMethod,
}

impl UtilityEval {
    fn closed(value: Utility) -> Self {
        Self { value, method: EvalMethod::ClosedForm }
    }
}

/// Expected CARA utility `B_n(d)` of joining behind `n` customers with quote `d`.
pub fn expected_utility(s: &Scenario, n: usize, d: Quote) -> UtilityEval {
    if !s.feasible_service() {
        return UtilityEval::closed(Utility::NegInfinity);
    }
    let k = n + 1;
    let mu = s.service_rate;
    if s.is_risk_neutral() {
        let b = s.surplus() - s.waiting_cost * k as f64 / mu + s.compensation * lateness(mu, k, d);
        return UtilityEval::closed(Utility::Finite(b));
    }
    let r = s.risk_aversion;
    let a = s.uncompensated_rate();
    let shift = -r * s.surplus();
    let d = match d {
        Quote::Infinite => {
            if a <= 0.0 {
                return UtilityEval::closed(Utility::NegInfinity);
            }
            let ln_m = k as f64 * (mu / a).ln() + shift;
            return UtilityEval::closed(Utility::Finite(-ln_m.exp_m1() / r));
        }
        Quote::Finite(d) => d,
    };
    if a > POLE_BAND * mu {
        // Lower piece (μ/a)^k P(Pois(ad) ≥ k) and upper piece
        // e^{rld} (μ/v)^k P(Pois(vd) < k), both kept in log space.
        let v = s.effective_rate();
        let ln_lo =
            if d == 0.0 { f64::NEG_INFINITY } else { k as f64 * (mu / a).ln() + dist::ln_poisson_upper(k, a * d) };
        let ln_hi = r * s.compensation * d + k as f64 * (mu / v).ln() + dist::ln_poisson_lower(k, v * d);
        let m =
            (shift + ln_lo.max(ln_hi)).exp() * ((ln_lo - ln_lo.max(ln_hi)).exp() + (ln_hi - ln_lo.max(ln_hi)).exp());
        return UtilityEval::closed(Utility::Finite((1.0 - m) / r));
    }
    let m = shift.exp() * quadrature_pieces(s, n, d);
    UtilityEval { value: Utility::Finite((1.0 - m) / r), method: EvalMethod::QuadratureFallback }
}

/// `E[e^{rcX} 1{X≤d}] + E[e^{rcX − rl(X−d)} 1{X>d}]` by adaptive quadrature.
fn quadrature_pieces(s: &Scenario, n: usize, d: f64) -> f64 {
    let k = n + 1;
    let mu = s.service_rate;
    let (r, c, l) = (s.risk_aversion, s.waiting_cost, s.compensation);
    // Exponents are combined before exponentiating so e^{rcx} cannot overflow.
    let ln_pdf = move |x: f64| mu.ln() + dist::ln_poisson_pmf(k - 1, mu * x);

    let lower = if d > 0.0 {
        let f = |x: f64| (r * c * x + ln_pdf(x)).exp();
        // The integrand is increasing when μ ≤ rc, so d·f(d)/k bounds it below.
        let scale = (d * f(d) / k as f64).max(f64::MIN_POSITIVE);
        quad::integrate(f, 0.0, d, 1e-14 * scale).value
    } else {
        0.0
    };
    let v = s.effective_rate();
    let window = 40.0 * (k as f64 + 1.0) / v;
    let g = |x: f64| (r * c * x - r * l * (x - d) + ln_pdf(x)).exp();
    let scale = (r * l * d + k as f64 * (mu / v).ln()).exp();
    let upper = quad::integrate(g, d, d + window, 1e-14 * scale).value;
    lower + upper
}

fn lateness(mu: f64, k: usize, d: Quote) -> f64 {
    match d {
        Quote::Infinite => 0.0,
        Quote::Finite(d) => dist::expected_excess(ErlangSpec { shape: k, rate: mu }, d).unwrap_or(0.0),
    }
}

/// Expected lateness `L_n(d) = E(X_n − d)^+`, zero for `d = ∞`.
pub fn expected_lateness(s: &Scenario, n: usize, d: Quote) -> f64 {
    lateness(s.service_rate, n + 1, d)
}

/// `p − l·L_n(d)`: profit from a customer who joins, whatever their utility.
pub fn entrant_margin(s: &Scenario, n: usize, d: Quote) -> f64 {
    s.fee - s.compensation * expected_lateness(s, n, d)
}

/// `G_n(d)`: `p − l·L_n(d)` if the customer joins (`B_n(d) ≥ 0`), else 0.
/// May be negative when compensation outweighs the fee.
pub fn entrant_profit(s: &Scenario, n: usize, d: Quote) -> f64 {
    if expected_utility(s, n, d).value.joins() {
        entrant_margin(s, n, d)
    } else {
        0.0
    }
}

/// Risk-neutral thresholds `(⌊μ(R−p)/c⌋, ⌊μ(R−p)/(c−l)⌋)`; the upper one is
/// `None` (infinite) when `l = c`.
pub fn naor_thresholds(s: &Scenario) -> (usize, Option<usize>) {
    let base = s.service_rate * s.surplus();
    let lower = (base / s.waiting_cost).floor().max(0.0) as usize;
    let gap = s.waiting_cost - s.compensation;
    let upper = (gap > 0.0).then(|| (base / gap).floor().max(0.0) as usize);
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &Scenario, n: usize, d: f64) -> f64 {
        expected_utility(s, n, Quote::Finite(d)).value.to_f64()
    }

    #[test]
    fn validation() {
        assert!(Scenario::base().validate().is_ok());
        assert!(Scenario::base().with_fee(16.0).validate().is_err());
        assert!(Scenario::base().with_compensation(9.0).validate().is_err());
        assert!(Scenario::base().with_risk_aversion(-0.1).validate().is_err());
        let infeasible = Scenario { service_rate: 2.0, risk_aversion: 1.0, compensation: 5.0, ..Scenario::base() };
        assert!(matches!(infeasible.require_feasible_service(), Err(Error::InfeasibleService { .. })));
    }

    #[test]
    fn base_states_nine_and_ten() {
        let s = Scenario::base();
        assert!(b(&s, 9, 0.0) >= 0.0);
        assert!(b(&s, 10, 0.0) < 0.0);
    }

    #[test]
    fn risk_neutral_limit() {
        let s = Scenario::base().with_risk_aversion(1e-8);
        let s0 = Scenario::base().with_risk_aversion(0.0);
        for n in [0, 3, 9] {
            for d in [0.0, 0.2, 0.8] {
                let rn = s0.surplus() - s0.waiting_cost * (n + 1) as f64 / 12.0
                    + s0.compensation * expected_lateness(&s0, n, Quote::Finite(d));
                assert!((b(&s, n, d) - rn).abs() < 1e-5);
                assert!((b(&s0, n, d) - rn).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn infinite_quote_limit() {
        let s = Scenario::base();
        let inf = expected_utility(&s, 4, Quote::Infinite).value.to_f64();
        assert!((b(&s, 4, 60.0) - inf).abs() < 1e-9);
        let steep = Scenario::base().with_risk_aversion(1.6);
        assert_eq!(expected_utility(&steep, 0, Quote::Infinite).value, Utility::NegInfinity);
    }

    #[test]
    fn infeasible_service_is_neg_infinity() {
        let s = Scenario { service_rate: 2.0, risk_aversion: 1.0, compensation: 5.0, ..Scenario::base() };
        assert_eq!(expected_utility(&s, 0, Quote::ZERO).value, Utility::NegInfinity);
    }

    #[test]
    fn closed_form_vs_quadrature_route() {
        let s = Scenario::base();
        for n in [0, 3, 12] {
            for d in [0.0, 0.5, 1.7] {
                let cf = b(&s, n, d);
                let q = (1.0 - (-s.risk_aversion * s.surplus()).exp() * quadrature_pieces(&s, n, d)) / s.risk_aversion;
                assert!((cf - q).abs() < 1e-9 * cf.abs().max(1.0), "n={n} d={d}: {cf} vs {q}");
            }
        }
    }

    #[test]
    fn pole_route_is_continuous() {
        // μ − rc = 8(1.5 − r); the band edge sits at 1.5 ∓ 1.5e-6.
        let s = |r: f64| Scenario::base().with_risk_aversion(r);
        let method = |r: f64| expected_utility(&s(r), 2, Quote::Finite(0.3)).method;
        for (inside, outside) in [(1.5 - 1e-6, 1.5 - 2e-6), (1.5 + 1e-6, 1.5 + 2e-6)] {
            assert_eq!(method(inside), EvalMethod::QuadratureFallback);
            let gap = (b(&s(inside), 2, 0.3) - b(&s(outside), 2, 0.3)).abs();
            assert!(gap < 1e-5, "{inside}: {gap}");
        }
        assert_eq!(method(1.5 - 2e-6), EvalMethod::ClosedForm);
    }

    #[test]
    fn lateness_and_profit() {
        let s = Scenario::base();
        assert!((expected_lateness(&s, 0, Quote::ZERO) - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(expected_lateness(&s, 5, Quote::Infinite), 0.0);
        let s0 = s.with_compensation(0.0);
        assert_eq!(entrant_profit(&s0, 3, Quote::Finite(0.2)), s.fee);
        assert_eq!(entrant_profit(&s, 11, Quote::ZERO), 0.0);
    }

    #[test]
    fn naor() {
        let s = Scenario::base().with_risk_aversion(0.0);
        assert_eq!(naor_thresholds(&s), (7, Some(12)));
        assert_eq!(naor_thresholds(&s.with_compensation(0.0)), (7, Some(7)));
        assert_eq!(naor_thresholds(&s.with_compensation(8.0)), (7, None));
    }
}
