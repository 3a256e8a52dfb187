//! Erlang tails, expected excess, and the sojourn law of an M/M/1/n0 queue.
//!
//! Erlang tails are Poisson partial sums, `P(Erlang(k, a) > x) = P(N < k)`
//! with `N ~ Poisson(a·x)`. Sums are anchored at the largest term (computed
//! in log space) and extended by the ratio recurrence, so shapes in the
//! hundreds neither overflow factorials nor underflow `e^{-a·x}`.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Cancellation ratio `Σ|t_k| / |Σ t_k|` above which a signed sum is rejected.
pub const CANCELLATION_LIMIT: f64 = 1e8;

/// Erlang law with `shape` exponential stages of rate `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangSpec {
    pub shape: usize,
    pub rate: f64,
}

impl ErlangSpec {
    pub fn new(shape: usize, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::Domain("Erlang shape must be >= 1".into()));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::Domain(format!("Erlang rate must be finite and > 0, got {rate}")));
        }
        Ok(Self { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape as f64 / self.rate
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `ln P(N = i)` for `N ~ Poisson(y)`.
pub(crate) fn ln_poisson_pmf(i: usize, y: f64) -> f64 {
    if y == 0.0 {
        return if i == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -y + i as f64 * y.ln() - ln_factorial(i as u64)
}

/// Calls `visit(i, p_i)` for `i in 0..count` with Poisson(y) probabilities.
pub(crate) fn poisson_for_each(y: f64, count: usize, mut visit: impl FnMut(usize, f64)) {
    if count == 0 {
        return;
    }
    if y == 0.0 {
        visit(0, 1.0);
        for i in 1..count {
            visit(i, 0.0);
        }
        return;
    }
    let mode = (y.floor() as usize).min(count - 1);
    let pm = ln_poisson_pmf(mode, y).exp();
    let mut p = pm;
    visit(mode, p);
    for i in (0..mode).rev() {
        p *= (i + 1) as f64 / y;
        visit(i, p);
    }
    p = pm;
    for i in mode + 1..count {
        p *= y / i as f64;
        visit(i, p);
    }
}

/// `P(N < k)` for `N ~ Poisson(y)`.
pub(crate) fn poisson_lower(k: usize, y: f64) -> f64 {
    if y < k as f64 && y > 0.0 {
        // The upper tail is the small side; subtracting it keeps the result
        // accurate near 1.
        return -ln_poisson_upper(k, y).exp_m1();
    }
    let mut s = 0.0;
    poisson_for_each(y, k, |_, p| s += p);
    s.min(1.0)
}

/// `ln P(N < k)`, accurate when the probability underflows.
pub(crate) fn ln_poisson_lower(k: usize, y: f64) -> f64 {
    if k == 0 {
        return f64::NEG_INFINITY;
    }
    if y < k as f64 {
        return poisson_lower(k, y).ln();
    }
    // Terms decrease walking down from k−1.
    let lead = ln_poisson_pmf(k - 1, y);
    let mut rel = 1.0;
    let mut t = 1.0;
    for i in (1..k).rev() {
        t *= i as f64 / y;
        rel += t;
        if t < 1e-18 * rel {
            break;
        }
    }
    lead + rel.ln()
}

/// `ln P(N ≥ k)`, accurate when the probability underflows.
pub(crate) fn ln_poisson_upper(k: usize, y: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if y == 0.0 {
        return f64::NEG_INFINITY;
    }
    if y >= k as f64 {
        return (-poisson_lower(k, y)).ln_1p();
    }
    // Terms decrease walking up from k.
    let lead = ln_poisson_pmf(k, y);
    let mut rel = 1.0;
    let mut t = 1.0;
    let mut i = k;
    loop {
        i += 1;
        t *= y / i as f64;
        rel += t;
        if t < 1e-18 * rel {
            break;
        }
    }
    lead + rel.ln()
}

/// `P(X > x)` for `X ~ Erlang(shape, rate)`.
pub fn erlang_tail(spec: ErlangSpec, x: f64) -> Result<f64> {
    check_x(x)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(poisson_lower(spec.shape, spec.rate * x))
}

/// `ln P(X > x)`; finite well beyond the point where the tail underflows.
pub fn ln_erlang_tail(spec: ErlangSpec, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(ln_poisson_lower(spec.shape, spec.rate * x))
}

/// Erlang density.
pub fn erlang_pdf(spec: ErlangSpec, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(spec.rate * ln_poisson_pmf(spec.shape - 1, spec.rate * x).exp())
}

/// Analytic continuation `e^{-a·x} Σ_{k<shape} (a·x)^k / k!` for any real `a`.
///
/// For `a > 0` this is [`erlang_tail`]. For `a < 0` the series alternates;
/// the sum is compensated and rejected when the cancellation ratio exceeds
/// [`CANCELLATION_LIMIT`].
pub fn poisson_tail_sum_signed(shape: usize, a: f64, x: f64) -> Result<f64> {
    check_x(x)?;
    if shape == 0 {
        return Err(Error::Domain("shape must be >= 1".into()));
    }
    if !a.is_finite() {
        return Err(Error::Domain(format!("rate must be finite, got {a}")));
    }
    let y = a * x;
    if y == 0.0 {
        return Ok(1.0);
    }
    if a > 0.0 {
        return Ok(poisson_lower(shape, y));
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs_sum = 0.0f64;
    let mut t = 1.0f64;
    for k in 0..shape {
        if k > 0 {
            t *= y / k as f64;
        }
        abs_sum += t.abs();
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
    }
    let total = sum + comp;
    let ratio = abs_sum / total.abs();
    if !(ratio <= CANCELLATION_LIMIT) {
        return Err(Error::PrecisionLoss { ratio });
    }
    Ok((-y).exp() * total)
}

/// `E(X − d)^+` for `X ~ Erlang(shape, rate)`.
///
/// Uses `(1/rate) Σ_{i<shape} (shape − i) P(N = i)`, `N ~ Poisson(rate·d)`,
/// which has no cancellation.
pub fn expected_excess(spec: ErlangSpec, d: f64) -> Result<f64> {
    check_x(d)?;
    if d.is_infinite() {
        return Ok(0.0);
    }
    let k = spec.shape;
    let mut s = 0.0;
    poisson_for_each(spec.rate * d, k, |i, p| s += (k - i) as f64 * p);
    Ok(s / spec.rate)
}

/// Geometric weights `x^n / Σ_{k<len} x^k`, `n < len`.
pub(crate) fn geometric_weights(x: f64, len: usize) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    // Scale by the largest power so neither x<1 nor x>1 over/underflows.
    let mut w: Vec<f64> = if x <= 1.0 {
        (0..len).map(|n| x.powi(n as i32)).collect()
    } else {
        (0..len).map(|n| x.powi(n as i32 - (len as i32 - 1))).collect()
    };
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Stationary law `q(n; n0) ∝ ρ^n`, `n = 0..=n0`, of the M/M/1/n0 queue.
pub fn stationary_dist(n0: usize, lambda: f64, mu: f64) -> Result<Vec<f64>> {
    if n0 == 0 {
        return Err(Error::Domain("capacity n0 must be >= 1".into()));
    }
    if !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::Domain("rates must be > 0".into()));
    }
    let rho = lambda / mu;
    if rho == 1.0 {
        return Ok(vec![1.0 / (n0 + 1) as f64; n0 + 1]);
    }
    Ok(geometric_weights(rho, n0 + 1))
}

/// Sojourn time of a joining customer in a FIFO M/M/1/n0 queue.
///
/// An arrival sees `n` with probability `q(n; n0)` (PASTA); conditioned on
/// joining (`n < n0`) the sojourn is `Erlang(n + 1, μ)`. The mixture weights
/// are therefore `ρ^n` renormalized over `n < n0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteQueueSojourn {
    pub capacity: usize,
    pub arrival_rate: f64,
    pub service_rate: f64,
    weights: Vec<f64>,
}

impl FiniteQueueSojourn {
    pub fn new(capacity: usize, arrival_rate: f64, service_rate: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Domain("capacity n0 must be >= 1".into()));
        }
        if !(arrival_rate > 0.0) || !(service_rate > 0.0) {
            return Err(Error::Domain("rates must be > 0".into()));
        }
        let rho = arrival_rate / service_rate;
        let weights = if rho == 1.0 { vec![1.0 / capacity as f64; capacity] } else { geometric_weights(rho, capacity) };
        Ok(Self { capacity, arrival_rate, service_rate, weights })
    }

    /// Probability that a joining customer saw `n` customers.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `F̄(x) = Σ_n w_n · P(Erlang(n+1, μ) > x)`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        if x.is_infinite() {
            return Ok(0.0);
        }
        // Cumulative Poisson sums give every Erlang tail in one pass.
        let mut pmf = vec![0.0; self.capacity];
        poisson_for_each(self.service_rate * x, self.capacity, |i, p| pmf[i] = p);
        let mut cum = 0.0;
        let mut s = 0.0;
        for (w, p) in self.weights.iter().zip(&pmf) {
            cum += p;
            s += w * cum.min(1.0);
        }
        Ok(s)
    }

    /// `ln F̄(x)`, finite where the tail underflows.
    pub fn ln_tail(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let y = self.service_rate * x;
        if y < self.capacity as f64 {
            return Ok(self.tail(x)?.ln());
        }
        let terms: Vec<f64> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(n, w)| w.ln() + ln_poisson_lower(n + 1, y))
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Ok(m);
        }
        Ok(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
    }

    /// Mixture density `Σ_n w_n f_{n+1,μ}(x)`.
    pub fn density(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let mu = self.service_rate;
        let mut s = 0.0;
        let w = &self.weights;
        poisson_for_each(mu * x, self.capacity, |i, p| s += w[i] * mu * p);
        Ok(s)
    }

    /// Closed form `(μ−λ) e^{-(μ−λ)x} P(Pois(λx) ≤ n0−1) / (1 − ρ^{n0})`,
    /// with the `λ = μ` limit `(μ/n0) P(Pois(μx) ≤ n0−1)`.
    pub fn density_closed_form(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let (lam, mu, n0) = (self.arrival_rate, self.service_rate, self.capacity);
        if lam == mu {
            return Ok(mu / n0 as f64 * poisson_lower(n0, mu * x));
        }
        let rho = lam / mu;
        let delta = mu - lam;
        Ok(delta * (-delta * x).exp() * poisson_lower(n0, lam * x) / (1.0 - rho.powi(n0 as i32)))
    }

    /// Hazard rate `f(x) / F̄(x)`.
    pub fn hazard(&self, x: f64) -> Result<f64> {
        let tail = self.tail(x)?;
        if tail <= 0.0 {
            return Err(Error::Domain(format!("sojourn tail underflows at x = {x}")));
        }
        Ok(self.density(x)? / tail)
    }
}

/// `F̄(x)` of the M/M/1/n0 joining-customer sojourn.
pub fn marginal_sojourn_tail(q: &FiniteQueueSojourn, x: f64) -> Result<f64> {
    q.tail(x)
}

/// Hazard rate of the M/M/1/n0 joining-customer sojourn.
pub fn marginal_hazard(q: &FiniteQueueSojourn, x: f64) -> Result<f64> {
    q.hazard(x)
}
