//! Oracles and property checks shared by the integration suites.

#![allow(dead_code)]

use leadtime_core::dist::{self, ErlangSpec, FiniteQueueSojourn};
use leadtime_core::optimize::{solve, threshold_objective, Problem};
use leadtime_core::quotes::{self, threshold_bounds};
use leadtime_core::utility::{entrant_margin, expected_lateness, expected_utility};
use leadtime_core::{Quote, Scenario};
use rand::Rng;

pub type Check = Result<(), String>;

/// Random scenario with `μ − rc` away from zero and a finite, moderate `n̄`.
pub fn random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    loop {
        let service_value = rng.random_range(8.0..20.0);
        let s = Scenario {
            service_value,
            fee: service_value * rng.random_range(0.3..0.85),
            waiting_cost: rng.random_range(2.0..10.0),
            compensation: 0.0,
            risk_aversion: rng.random_range(0.05..1.2),
            arrival_rate: rng.random_range(2.0..15.0),
            service_rate: rng.random_range(5.0..15.0),
        };
        let s = s.with_compensation(s.waiting_cost * rng.random_range(0.0..0.85));
        if s.uncompensated_rate() < 0.5 {
            continue;
        }
        match threshold_bounds(&s) {
            Ok(b) if b.lower >= 1 && matches!(b.upper, Some(u) if u <= 40) => return s,
            _ => continue,
        }
    }
}

/// `q(n; n0) ∝ ρ^n`, `n = 0..=n0`, by direct summation.
pub fn occupancy(s: &Scenario, n0: usize) -> Vec<f64> {
    let rho = s.rho();
    let w: Vec<f64> = (0..=n0).map(|n| rho.powi(n as i32)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 1..=m {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre rule with `panels` equal panels.
pub struct Composite {
    rule: Vec<(f64, f64)>,
}

impl Composite {
    pub fn new() -> Self {
        Self { rule: gauss_legendre(20) }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for j in 0..panels {
            let c = a + (j as f64 + 0.5) * h;
            let part: f64 = self.rule.iter().map(|&(x, w)| w * f(c + 0.5 * h * x)).sum();
            total += 0.5 * h * part;
        }
        total
    }
}

fn ln_erlang_pdf(k: usize, mu: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if k == 1 { mu.ln() } else { f64::NEG_INFINITY };
    }
    let ln_fact: f64 = (1..k).map(|i| (i as f64).ln()).sum();
    k as f64 * mu.ln() + (k - 1) as f64 * x.ln() - mu * x - ln_fact
}

/// Expected CARA utility by direct integration of `U(w) f(x)`.
pub fn utility_by_quadrature(q: &Composite, s: &Scenario, n: usize, d: f64) -> f64 {
    let k = n + 1;
    let (r, c, l, mu) = (s.risk_aversion, s.waiting_cost, s.compensation, s.service_rate);
    let surplus = s.surplus();
    let wealth = |x: f64| surplus - c * x + l * (x - d).max(0.0);
    let integrand = |x: f64| {
        let lf = ln_erlang_pdf(k, mu, x);
        if r == 0.0 {
            wealth(x) * lf.exp()
        } else {
            (lf.exp() - (lf - r * wealth(x)).exp()) / r
        }
    };
    let v = s.effective_rate().min(mu);
    let width = (2.0 * k as f64 + 60.0) / v;
    let below = if d > 0.0 { q.integrate(integrand, 0.0, d, 400) } else { 0.0 };
    below + q.integrate(integrand, d, d + width, 4000)
}

/// `E(X − d)^+` by direct integration.
pub fn lateness_by_quadrature(q: &Composite, mu: f64, n: usize, d: f64) -> f64 {
    let k = n + 1;
    let width = (2.0 * k as f64 + 60.0) / mu;
    q.integrate(|x| (x - d) * ln_erlang_pdf(k, mu, x).exp(), d, d + width, 2000)
}

fn le(a: f64, b: f64) -> bool {
    a <= b + 1e-10 * a.abs().max(b.abs()).max(1.0)
}

fn b(s: &Scenario, n: usize, d: Quote) -> f64 {
    expected_utility(s, n, d).value.to_f64()
}

fn d_grid() -> Vec<Quote> {
    let mut g: Vec<Quote> = (0..=30).map(|i| Quote::Finite(0.1 * i as f64)).collect();
    g.push(Quote::Infinite);
    g
}

/// Utility falls in `n` and in `d`; lateness rises in `n` and falls in `d`;
/// entrant profit falls in `n` and rises in `d` where the customer joins.
pub fn lemma_utility_monotone(s: &Scenario) -> Check {
    let grid = d_grid();
    let top = threshold_bounds(s).map_err(|e| e.to_string())?.upper.unwrap_or(30) + 2;
    for n in 0..top {
        for w in grid.windows(2) {
            let (d1, d2) = (w[0], w[1]);
            if !le(b(s, n, d2), b(s, n, d1)) {
                return Err(format!("B_{n} increases from {d1} to {d2} at {s}"));
            }
            if !le(expected_lateness(s, n, d2), expected_lateness(s, n, d1)) {
                return Err(format!("L_{n} increases from {d1} to {d2} at {s}"));
            }
            if b(s, n, d2) >= 0.0 && !le(entrant_margin(s, n, d1), entrant_margin(s, n, d2)) {
                return Err(format!("G_{n} decreases from {d1} to {d2} at {s}"));
            }
        }
        for &d in &grid {
            if !le(b(s, n + 1, d), b(s, n, d)) {
                return Err(format!("B increases from n={n} to n+1 at d={d}, {s}"));
            }
            if !le(expected_lateness(s, n, d), expected_lateness(s, n + 1, d)) {
                return Err(format!("L decreases from n={n} to n+1 at d={d}, {s}"));
            }
            if b(s, n + 1, d) >= 0.0 && !le(entrant_margin(s, n + 1, d), entrant_margin(s, n, d)) {
                return Err(format!("G increases from n={n} to n+1 at d={d}, {s}"));
            }
        }
    }
    Ok(())
}

/// Provider quotes fall in `n`, and so does the entrant profit they earn.
pub fn lemma_provider_quotes(s: &Scenario) -> Check {
    let bounds = threshold_bounds(s).map_err(|e| e.to_string())?;
    let upper = bounds.upper.unwrap_or(bounds.lower + 20);
    let mut prev: Option<(Quote, f64)> = None;
    for n in 0..upper {
        let sol = quotes::provider_quote(s, n).map_err(|e| e.to_string())?;
        let d = sol.quote().map_err(|e| e.to_string())?;
        if (n < bounds.lower) != d.is_infinite() {
            return Err(format!("d~P_{n} = {d} disagrees with lower bound {} at {s}", bounds.lower));
        }
        let g = entrant_margin(s, n, d);
        if let Some((pd, pg)) = prev {
            if d > pd {
                return Err(format!("d~P increases at n={n}: {pd} -> {d}, {s}"));
            }
            if !le(g, pg) {
                return Err(format!("G(d~P) increases at n={n}: {pg} -> {g}, {s}"));
            }
        }
        prev = Some((d, g));
    }
    Ok(())
}

/// Social dynamic quotes never exceed the provider's and leave the customer
/// at least as well off.
pub fn lemma_social_below_provider(s: &Scenario) -> Check {
    let bounds = threshold_bounds(s).map_err(|e| e.to_string())?;
    for n in 0..bounds.upper.unwrap_or(bounds.lower + 20) {
        let dp = quotes::provider_quote(s, n).and_then(|q| q.quote()).map_err(|e| e.to_string())?;
        let ds = quotes::social_dynamic_quote(s, n).and_then(|q| q.quote()).map_err(|e| e.to_string())?;
        if ds > dp {
            return Err(format!("d~S_{n} = {ds} exceeds d~P_{n} = {dp} at {s}"));
        }
        if !le(b(s, n, dp), b(s, n, ds)) {
            return Err(format!("B_{n}(d~S) < B_{n}(d~P) at {s}"));
        }
    }
    Ok(())
}

/// Single-quote feasibility intervals move down as the threshold grows.
pub fn lemma_intervals_decrease(s: &Scenario) -> Check {
    let bounds = threshold_bounds(s).map_err(|e| e.to_string())?;
    let Some(upper) = bounds.upper else { return Ok(()) };
    let mut prev: Option<(f64, Quote)> = None;
    for n0 in bounds.lower.max(1)..=upper {
        let iv = quotes::single_quote_interval(s, n0).map_err(|e| e.to_string())?;
        if let Some((lo, hi)) = prev {
            if iv.lo > lo || iv.hi > hi {
                return Err(format!("interval at n0={n0} not below its predecessor at {s}"));
            }
            if !le(iv.hi.to_f64(), lo) {
                return Err(format!("interval at n0={n0} overlaps its predecessor at {s}"));
            }
        }
        prev = Some((iv.lo, iv.hi));
    }
    Ok(())
}

/// Tail ratios `F̄_μ/F̄_v` fall in `d` for `v < μ`, for fixed Erlang shapes
/// and for the finite-queue mixture; the mixture hazard rises in `μ`.
pub fn lemma_tail_ratios(s: &Scenario) -> Check {
    let (mu, v) = (s.service_rate, s.effective_rate());
    if !(v > 0.0 && v < mu) {
        return Ok(());
    }
    let xs: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
    for k in 1..=12 {
        let (fm, fv) = (ErlangSpec::new(k, mu).unwrap(), ErlangSpec::new(k, v).unwrap());
        let ratio = |x: f64| (dist::ln_erlang_tail(fm, x).unwrap() - dist::ln_erlang_tail(fv, x).unwrap()).exp();
        for w in xs.windows(2) {
            if !le(ratio(w[1]), ratio(w[0])) {
                return Err(format!("Erlang({k}) tail ratio rises at x={} for mu={mu}, v={v}", w[1]));
            }
        }
    }
    for n0 in 1..=10 {
        let qm = FiniteQueueSojourn::new(n0, s.arrival_rate, mu).unwrap();
        let qv = FiniteQueueSojourn::new(n0, s.arrival_rate, v).unwrap();
        let ratio = |x: f64| (qm.ln_tail(x).unwrap() - qv.ln_tail(x).unwrap()).exp();
        for w in xs.windows(2) {
            if !le(ratio(w[1]), ratio(w[0])) {
                return Err(format!("mixture tail ratio rises at x={}, n0={n0}, {s}", w[1]));
            }
        }
        for &x in &xs {
            let lo = dist::marginal_hazard(&FiniteQueueSojourn::new(n0, s.arrival_rate, 0.9 * mu).unwrap(), x);
            let hi = dist::marginal_hazard(&qm, x);
            if let (Ok(lo), Ok(hi)) = (lo, hi) {
                if !le(lo, hi) {
                    return Err(format!("hazard falls in mu at x={x}, n0={n0}, {s}"));
                }
            }
        }
    }
    Ok(())
}

/// Dynamic policies do at least as well as single ones.
pub fn dominance(s: &Scenario) -> Check {
    let obj = |p| solve(s, p).map(|r| r.objective).map_err(|e| e.to_string());
    let (pd, pc) = (obj(Problem::ProviderDynamic)?, obj(Problem::ProviderSingle)?);
    let (sd, sc) = (obj(Problem::SocialDynamic)?, obj(Problem::SocialSingle)?);
    if !le(pc, pd) {
        return Err(format!("P*c = {pc} > P* = {pd} at {s}"));
    }
    if !le(sc, sd) {
        return Err(format!("S*c = {sc} > S* = {sd} at {s}"));
    }
    if !le(pd, sd) {
        return Err(format!("P* = {pd} > S* = {sd} at {s}"));
    }
    Ok(())
}

/// Provider objectives are nonincreasing in the risk aversion. Social ones
/// are nonincreasing wherever `n̲` is unchanged: a drop in `n̲` makes a
/// shorter queue enforceable, which can raise the social optimum.
pub fn monotone_in_risk(s: &Scenario) -> Check {
    let top = (s.service_rate / (s.waiting_cost - s.compensation)).min(3.0);
    let grid: Vec<f64> = (0..12).map(|i| top * i as f64 / 12.0).collect();
    for p in Problem::ALL {
        let mut prev = (f64::INFINITY, usize::MAX);
        for &r in &grid {
            let sr = s.with_risk_aversion(r);
            let v = solve(&sr, p).map_err(|e| e.to_string())?.objective;
            let lower = threshold_bounds(&sr).map_err(|e| e.to_string())?.lower;
            let comparable = !p.is_social() || lower == prev.1;
            if comparable && !le(v, prev.0) {
                return Err(format!("{p} objective rises to {v} at r={r}, {s}"));
            }
            prev = (v, lower);
        }
    }
    Ok(())
}

/// The width of the threshold band grows with compensation.
pub fn band_widens_in_compensation(s: &Scenario) -> Check {
    let mut prev = 0usize;
    for i in 0..10 {
        let l = s.waiting_cost * 0.09 * i as f64;
        let b = threshold_bounds(&s.with_compensation(l)).map_err(|e| e.to_string())?;
        let Some(u) = b.upper else { break };
        let width = u - b.lower;
        if width < prev {
            return Err(format!("n̄ − n̲ shrinks from {prev} to {width} at l={l}, {s}"));
        }
        prev = width;
    }
    Ok(())
}

/// `(argmax, max)` of the threshold objective over the feasible band.
pub fn exhaustive(s: &Scenario, problem: Problem) -> Result<(usize, f64), String> {
    let bounds = threshold_bounds(s).map_err(|e| e.to_string())?;
    let upper = bounds.upper.ok_or("unbounded band")?;
    let mut best = (0, f64::NEG_INFINITY);
    for n0 in bounds.lower.max(1)..=upper {
        let v = threshold_objective(s, problem, n0).map_err(|e| e.to_string())?;
        if v > best.1 {
            best = (n0, v);
        }
    }
    Ok(best)
}

/// Optimal objective over all thresholds and quotes on `{k·step} ∪ {∞}`,
/// built from per-state utilities and margins alone.
pub fn grid_optimum(s: &Scenario, problem: Problem, step: f64) -> f64 {
    let bounds = threshold_bounds(s).expect("feasible scenario");
    let upper = bounds.upper.expect("finite band");
    let mut top = 1.0;
    while b(s, bounds.lower, Quote::Finite(top)) >= 0.0 {
        top *= 2.0;
    }
    let mut grid: Vec<Quote> = (0..=(top / step).ceil() as usize).map(|j| Quote::Finite(j as f64 * step)).collect();
    grid.push(Quote::Infinite);
    let states = upper + 1;
    // `n̄` itself never joins, so every threshold up to it can be enforced.
    let mut joins = vec![vec![false; grid.len()]; states];
    let mut value = vec![vec![0.0; grid.len()]; states];
    for n in 0..states {
        for (j, &d) in grid.iter().enumerate() {
            let u = b(s, n, d);
            joins[n][j] = u >= 0.0;
            value[n][j] = entrant_margin(s, n, d) + if problem.is_social() { u } else { 0.0 };
        }
    }
    let lambda = s.arrival_rate;
    let mut best = 0.0f64;
    for n0 in bounds.lower.max(1)..=upper {
        let q = occupancy(s, n0);
        if problem.is_single() {
            for j in 0..grid.len() {
                if joins[n0 - 1][j] && !joins[n0][j] {
                    let v: f64 = (0..n0).map(|n| q[n] * value[n][j]).sum();
                    best = best.max(lambda * v);
                }
            }
        } else {
            let mut total = 0.0;
            for n in 0..n0 {
                let m = (0..grid.len()).filter(|&j| joins[n][j]).map(|j| value[n][j]).fold(f64::NEG_INFINITY, f64::max);
                total += q[n] * m;
            }
            best = best.max(lambda * total);
        }
    }
    best
}

/// `A(n0) = G_{n0} Σ_{n≤n0} ρ^n − ρ Σ_{n<n0} ρ^n G_n` at the provider quotes
/// is nonincreasing over the band.
pub fn provider_gain_decreasing(s: &Scenario) -> Check {
    let bounds = threshold_bounds(s).map_err(|e| e.to_string())?;
    let upper = bounds.upper.unwrap_or(bounds.lower + 20);
    let rho = s.rho();
    let g: Vec<f64> = (0..upper)
        .map(|n| {
            let d = quotes::provider_quote(s, n).and_then(|q| q.quote()).map_err(|e| e.to_string())?;
            Ok(entrant_margin(s, n, d))
        })
        .collect::<Result<_, String>>()?;
    let mut prev = f64::INFINITY;
    for n0 in 0..upper {
        let mass: f64 = (0..=n0).map(|n| rho.powi(n as i32)).sum();
        let earned: f64 = (0..n0).map(|n| rho.powi(n as i32) * g[n]).sum();
        let a = g[n0] * mass - rho * earned;
        if !le(a, prev) {
            return Err(format!("A({n0}) = {a} exceeds A({}) = {prev} at {s}", n0.wrapping_sub(1)));
        }
        prev = a;
    }
    Ok(())
}
