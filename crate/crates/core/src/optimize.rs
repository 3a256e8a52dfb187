//! Two-stage solvers for the provider and social problems.
//!
//! The outer stage picks a balking threshold `n0`; the inner stage picks the
//! quotes. Dynamic problems use the per-state quotes of [`crate::quotes`] and
//! locate `n0` with a first-sign-change rule; single-quote problems search
//! `n0` exhaustively over `[n̲, n̄]`.

use std::fmt;
use std::str::FromStr;

use crate::dist::stationary_dist;
use crate::error::{Error, Result};
use crate::ext::{Quote, Utility};
use crate::quotes::{self, provider_quote, social_dynamic_quote, QuoteKind, QuoteSolution, ThresholdBounds};
use crate::utility::{entrant_margin, expected_utility, Scenario};

/// Exhaustive searches stop `n̲ + SEARCH_CAP` states in when `n̄ = ∞`.
pub const SEARCH_CAP: usize = 200;
/// Consecutive sub-`TAIL_EPS` improvements that end an unbounded search.
pub const TAIL_RUN: usize = 10;
pub const TAIL_EPS: f64 = 1e-12;
/// Safety cap for the first-sign-change scan when `n̄ = ∞`.
pub const SCAN_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    ProviderDynamic,
    ProviderSingle,
    SocialDynamic,
    SocialSingle,
}

impl Problem {
    pub const ALL: [Problem; 4] =
        [Problem::ProviderDynamic, Problem::ProviderSingle, Problem::SocialDynamic, Problem::SocialSingle];

    pub fn name(self) -> &'static str {
        match self {
            Problem::ProviderDynamic => "provider-dynamic",
            Problem::ProviderSingle => "provider-single",
            Problem::SocialDynamic => "social-dynamic",
            Problem::SocialSingle => "social-single",
        }
    }

    /// Labels as printed in reports: `(threshold, objective)`.
    pub fn labels(self) -> (&'static str, &'static str) {
        match self {
            Problem::ProviderDynamic => ("n_P", "P*"),
            Problem::ProviderSingle => ("n_Pc", "P*_c"),
            Problem::SocialDynamic => ("n_S", "S*"),
            Problem::SocialSingle => ("n_Sc", "S*_c"),
        }
    }

    pub fn is_social(self) -> bool {
        matches!(self, Problem::SocialDynamic | Problem::SocialSingle)
    }

    pub fn is_single(self) -> bool {
        matches!(self, Problem::ProviderSingle | Problem::SocialSingle)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL.into_iter().find(|p| p.name() == s.trim()).ok_or_else(|| {
            Error::Domain(format!(
                "unknown problem `{s}` (expected provider-dynamic, provider-single, social-dynamic or social-single)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyQuotes {
    /// `d_0, …, d_{n0}`; the last entry enforces balking at `n0`.
    Dynamic(Vec<Quote>),
    Single(Quote),
}

/// A balking threshold with the quotes that induce it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotationPolicy {
    pub threshold: usize,
    pub quotes: PolicyQuotes,
}

impl QuotationPolicy {
    pub fn dynamic(threshold: usize, quotes: Vec<Quote>) -> Self {
        Self { threshold, quotes: PolicyQuotes::Dynamic(quotes) }
    }

    pub fn single(threshold: usize, quote: Quote) -> Self {
        Self { threshold, quotes: PolicyQuotes::Single(quote) }
    }

    pub fn is_single(&self) -> bool {
        matches!(self.quotes, PolicyQuotes::Single(_))
    }

    /// Quote offered to a customer seeing `n ≤ n0`.
    pub fn quote(&self, n: usize) -> Quote {
        match &self.quotes {
            PolicyQuotes::Single(d) => *d,
            PolicyQuotes::Dynamic(v) => v[n.min(v.len() - 1)],
        }
    }

    /// Checks `B_n(d_n) ≥ 0` for `n < n0` and `B_{n0}(d_{n0}) < 0`.
    pub fn verify(&self, s: &Scenario) -> Result<()> {
        if let PolicyQuotes::Dynamic(v) = &self.quotes {
            if v.len() != self.threshold + 1 {
                return Err(Error::InvalidPolicy(format!(
                    "dynamic policy with threshold {} needs {} quotes, got {}",
                    self.threshold,
                    self.threshold + 1,
                    v.len()
                )));
            }
        }
        for n in 0..=self.threshold {
            let d = self.quote(n);
            let joins = expected_utility(s, n, d).value.joins();
            if n < self.threshold && !joins {
                return Err(Error::InvalidPolicy(format!(
                    "customer seeing {n} balks at quote {d} but the threshold is {}",
                    self.threshold
                )));
            }
            if n == self.threshold && joins {
                return Err(Error::InvalidPolicy(format!(
                    "customer seeing {n} joins at quote {d}, so the threshold {n} is not enforced"
                )));
            }
        }
        Ok(())
    }
}

fn rate(s: &Scenario, n0: usize, social: bool, quote: impl Fn(usize) -> Quote) -> Result<f64> {
    if n0 == 0 {
        return Ok(0.0);
    }
    let q = stationary_dist(n0, s.arrival_rate, s.service_rate)?;
    let mut total = 0.0;
    for (n, qn) in q.iter().take(n0).enumerate() {
        let d = quote(n);
        let mut v = entrant_margin(s, n, d);
        if social {
            v += expected_utility(s, n, d).value.to_f64();
        }
        total += qn * v;
    }
    Ok(s.arrival_rate * total)
}

/// `P(D) = λ Σ_{n<n0} q(n; n0) G_n(d_n)`.
pub fn eval_profit_rate(s: &Scenario, policy: &QuotationPolicy) -> Result<f64> {
    policy.verify(s)?;
    rate(s, policy.threshold, false, |n| policy.quote(n))
}

/// `S(D) = λ Σ_{n<n0} q(n; n0) (G_n(d_n) + B_n(d_n))`.
pub fn eval_social_rate(s: &Scenario, policy: &QuotationPolicy) -> Result<f64> {
    policy.verify(s)?;
    rate(s, policy.threshold, true, |n| policy.quote(n))
}

/// One row of a solved policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDiagnostic {
    pub n: usize,
    pub quote: Quote,
    pub utility: Utility,
    /// `G_n(d_n)`; zero at the balking state, possibly negative elsewhere.
    pub profit: f64,
    /// `q(n; n0)`.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub problem: Problem,
    pub policy: QuotationPolicy,
    pub objective: f64,
    pub per_state: Vec<StateDiagnostic>,
    pub bounds: ThresholdBounds,
    /// `(n0, objective at n0)` for every threshold examined.
    pub search_trace: Vec<(usize, f64)>,
    pub notes: Vec<String>,
}

impl SolveResult {
    pub fn threshold(&self) -> usize {
        self.policy.threshold
    }

    /// Quote for the threshold in a single-quote policy, or `d_0` otherwise.
    pub fn headline_quote(&self) -> Quote {
        self.policy.quote(0)
    }

    /// Re-evaluates the objective from the policy.
    pub fn reevaluate(&self, s: &Scenario) -> Result<f64> {
        if self.problem.is_social() {
            eval_social_rate(s, &self.policy)
        } else {
            eval_profit_rate(s, &self.policy)
        }
    }
}

/// Lazily computed per-state quotes of one scenario.
struct QuoteCache<'a> {
    s: &'a Scenario,
    provider: Vec<QuoteSolution>,
    social: Vec<QuoteSolution>,
}

impl<'a> QuoteCache<'a> {
    fn new(s: &'a Scenario) -> Self {
        Self { s, provider: Vec::new(), social: Vec::new() }
    }

    fn provider(&mut self, n: usize) -> Result<QuoteSolution> {
        while self.provider.len() <= n {
            let k = self.provider.len();
            self.provider.push(provider_quote(self.s, k)?);
        }
        Ok(self.provider[n])
    }

    fn social(&mut self, n: usize) -> Result<QuoteSolution> {
        while self.social.len() <= n {
            let k = self.social.len();
            self.social.push(social_dynamic_quote(self.s, k)?);
        }
        Ok(self.social[n])
    }

    /// A quote at which the customer seeing `n0` balks.
    fn enforcement(&mut self, n0: usize) -> Result<Quote> {
        let q = self.provider(n0)?;
        Ok(match q.value {
            None => Quote::ZERO,
            Some(Quote::Finite(d)) => Quote::Finite(match q.bracket {
                Some((_, hi)) => (d * (1.0 + quotes::EPSILON_REL) + quotes::EPSILON_ABS).max(hi),
                None => d * (1.0 + quotes::EPSILON_REL) + quotes::EPSILON_ABS,
            }),
            Some(Quote::Infinite) => {
                return Err(Error::InvalidPolicy(format!("customer seeing {n0} joins at every quote")))
            }
        })
    }

    fn dynamic_quote(&mut self, social: bool, n: usize) -> Result<Quote> {
        let q = if social { self.social(n)? } else { self.provider(n)? };
        q.quote()
    }
}

/// Objective of the problem restricted to threshold `n0`, with the optimal
/// quotes for that threshold: `H`, `H_c`, `Z` or `Z_c`.
pub fn threshold_objective(s: &Scenario, problem: Problem, n0: usize) -> Result<f64> {
    let bounds = quotes::threshold_bounds(s)?;
    bounds.check(n0)?;
    let mut cache = QuoteCache::new(s);
    let (policy, _) = policy_for(s, &mut cache, &bounds, problem, n0)?;
    rate(s, n0, problem.is_social(), |n| policy.quote(n))
}

/// Optimal policy for a fixed threshold, with the inner quote kind for
/// single problems.
fn policy_for(
    s: &Scenario,
    cache: &mut QuoteCache<'_>,
    bounds: &ThresholdBounds,
    problem: Problem,
    n0: usize,
) -> Result<(QuotationPolicy, Option<QuoteKind>)> {
    if n0 == 0 {
        let d = cache.enforcement(0)?;
        return Ok(if problem.is_single() {
            (QuotationPolicy::single(0, d), None)
        } else {
            (QuotationPolicy::dynamic(0, vec![d]), None)
        });
    }
    match problem {
        Problem::ProviderDynamic | Problem::SocialDynamic => {
            let social = problem.is_social();
            let mut v = (0..n0).map(|n| cache.dynamic_quote(social, n)).collect::<Result<Vec<_>>>()?;
            v.push(cache.enforcement(n0)?);
            Ok((QuotationPolicy::dynamic(n0, v), None))
        }
        Problem::ProviderSingle => {
            let d = if n0 == bounds.lower { Quote::Infinite } else { cache.provider(n0 - 1)?.quote()? };
            Ok((QuotationPolicy::single(n0, d), None))
        }
        Problem::SocialSingle => {
            let q = quotes::social_single_quote(s, n0)?;
            Ok((QuotationPolicy::single(n0, q.quote()?), Some(q.kind)))
        }
    }
}

fn empty_market(s: &Scenario, problem: Problem, bounds: ThresholdBounds) -> Result<SolveResult> {
    let mut cache = QuoteCache::new(s);
    let (policy, _) = policy_for(s, &mut cache, &bounds, problem, 0)?;
    Ok(SolveResult {
        problem,
        per_state: diagnostics(s, &policy)?,
        policy,
        objective: 0.0,
        bounds,
        search_trace: vec![(0, 0.0)],
        notes: vec!["no customer joins an empty system even at d = 0; market is empty".into()],
    })
}

fn diagnostics(s: &Scenario, policy: &QuotationPolicy) -> Result<Vec<StateDiagnostic>> {
    let n0 = policy.threshold;
    let q = if n0 == 0 { vec![1.0] } else { stationary_dist(n0, s.arrival_rate, s.service_rate)? };
    Ok((0..=n0)
        .map(|n| {
            let d = policy.quote(n);
            StateDiagnostic {
                n,
                quote: d,
                utility: expected_utility(s, n, d).value,
                profit: if n < n0 { entrant_margin(s, n, d) } else { 0.0 },
                probability: q[n],
            }
        })
        .collect())
}

fn finish(
    s: &Scenario,
    problem: Problem,
    bounds: ThresholdBounds,
    policy: QuotationPolicy,
    search_trace: Vec<(usize, f64)>,
    mut notes: Vec<String>,
) -> Result<SolveResult> {
    let per_state = diagnostics(s, &policy)?;
    let objective = rate(s, policy.threshold, problem.is_social(), |n| policy.quote(n))?;
    if let Some(row) = per_state.iter().find(|r| r.n < policy.threshold && r.profit < 0.0) {
        notes.push(format!(
            "per-entrant profit is negative at n = {} ({:.6}): compensation exceeds the fee",
            row.n, row.profit
        ));
    }
    if problem == Problem::ProviderSingle && policy.threshold == bounds.lower && s.compensation > 0.0 {
        notes.push("threshold at the lower bound: quote is infinite, so no compensation is paid and G_n = p".into());
    }
    Ok(SolveResult { problem, policy, objective, per_state, bounds, search_trace, notes })
}

fn prepare(s: &Scenario) -> Result<ThresholdBounds> {
    s.validate()?;
    quotes::threshold_bounds(s)
}

/// Dynamic problems: the threshold is the first `n0 ≥ n̲` at which
/// `W_{n0} − ρ·(objective at n0)/λ` turns negative, clamped to `[n̲, n̄]`,
/// where `W_n` is the per-entrant value (profit, or profit plus utility) at
/// the optimal quote and `W_n = 0` for `n ≥ n̄`.
fn solve_dynamic(s: &Scenario, problem: Problem) -> Result<SolveResult> {
    let bounds = prepare(s)?;
    if !bounds.join_feasible() {
        return empty_market(s, problem, bounds);
    }
    let social = problem.is_social();
    let mut cache = QuoteCache::new(s);
    let rho = s.rho();
    let lower = bounds.lower.max(1);
    let cap = bounds.upper.unwrap_or(lower + SCAN_CAP);

    let value = |cache: &mut QuoteCache<'_>, n: usize| -> Result<f64> {
        if bounds.upper.is_some_and(|u| n >= u) {
            return Ok(0.0);
        }
        let d = cache.dynamic_quote(social, n)?;
        let mut w = entrant_margin(s, n, d);
        if social {
            w += expected_utility(s, n, d).value.to_f64();
        }
        Ok(w)
    };

    // Running Σ_{n<n0} ρ^n W_n and Σ_{k≤n0} ρ^k, rescaled as ρ^n grows.
    let mut weighted = 0.0;
    let mut norm = 0.0;
    let mut pw = 1.0;
    for n in 0..lower {
        weighted += pw * value(&mut cache, n)?;
        norm += pw;
        pw *= rho;
    }
    let mut trace = Vec::new();
    let mut n0 = lower;
    loop {
        norm += pw;
        let objective = s.arrival_rate * weighted / norm;
        trace.push((n0, objective));
        let w = value(&mut cache, n0)?;
        if n0 >= cap {
            if bounds.upper.is_none() {
                return Err(Error::SearchCapExceeded(SCAN_CAP));
            }
            break;
        }
        if w - rho * objective / s.arrival_rate < 0.0 {
            break;
        }
        weighted += pw * w;
        pw *= rho;
        if pw > 1e200 {
            weighted /= pw;
            norm /= pw;
            pw = 1.0;
        }
        n0 += 1;
    }
    let (policy, _) = policy_for(s, &mut cache, &bounds, problem, n0)?;
    finish(s, problem, bounds, policy, trace, Vec::new())
}

/// Single problems: exhaustive search over `[n̲, n̄]`, ties to the smaller
/// threshold.
fn solve_single(s: &Scenario, problem: Problem) -> Result<SolveResult> {
    let bounds = prepare(s)?;
    if !bounds.join_feasible() {
        return empty_market(s, problem, bounds);
    }
    let mut cache = QuoteCache::new(s);
    let lower = bounds.lower.max(1);
    let upper = bounds.upper.unwrap_or(lower + SEARCH_CAP);
    let mut best: Option<(usize, f64, QuotationPolicy, Option<QuoteKind>)> = None;
    let mut trace = Vec::new();
    let mut epsilon = Vec::new();
    let mut flat_run = 0;
    let mut prev = f64::NEG_INFINITY;
    for n0 in lower..=upper {
        let (policy, kind) = policy_for(s, &mut cache, &bounds, problem, n0)?;
        let obj = rate(s, n0, problem.is_social(), |n| policy.quote(n))?;
        trace.push((n0, obj));
        if kind == Some(QuoteKind::EpsilonOnly) {
            epsilon.push(n0);
        }
        if best.as_ref().map_or(true, |b| obj > b.1) {
            best = Some((n0, obj, policy, kind));
        }
        if bounds.upper.is_none() {
            flat_run = if (obj - prev).abs() < TAIL_EPS { flat_run + 1 } else { 0 };
            prev = obj;
            if flat_run >= TAIL_RUN {
                break;
            }
        }
    }
    let (n0, _, policy, kind) = best.expect("search range is nonempty");
    let mut notes = Vec::new();
    if !epsilon.is_empty() {
        notes.push(format!(
            "thresholds {epsilon:?} admit only epsilon-optimal quotes; they are valued at the published quote just above d^P_n0"
        ));
    }
    if kind == Some(QuoteKind::EpsilonOnly) {
        notes.push(format!(
            "optimal threshold {n0} is epsilon-optimal: the objective is a supremum approached as d decreases to d^P_{n0}"
        ));
    }
    if bounds.upper.is_none() {
        notes.push(format!("upper bound is infinite; search stopped at n0 = {}", trace.last().map_or(n0, |t| t.0)));
    }
    finish(s, problem, bounds, policy, trace, notes)
}

/// Provider, per-state quotes.
pub fn solve_provider_dynamic(s: &Scenario) -> Result<SolveResult> {
    solve_dynamic(s, Problem::ProviderDynamic)
}

/// Provider, one quote for all states.
pub fn solve_provider_single(s: &Scenario) -> Result<SolveResult> {
    solve_single(s, Problem::ProviderSingle)
}

/// Social optimizer, per-state quotes.
pub fn solve_social_dynamic(s: &Scenario) -> Result<SolveResult> {
    solve_dynamic(s, Problem::SocialDynamic)
}

/// Social optimizer, one quote for all states.
pub fn solve_social_single(s: &Scenario) -> Result<SolveResult> {
    solve_single(s, Problem::SocialSingle)
}

pub fn solve(s: &Scenario, problem: Problem) -> Result<SolveResult> {
    match problem {
        Problem::ProviderDynamic => solve_provider_dynamic(s),
        Problem::ProviderSingle => solve_provider_single(s),
        Problem::SocialDynamic => solve_social_dynamic(s),
        Problem::SocialSingle => solve_social_single(s),
    }
}

/// Solve for a risk-neutral scenario (`r = 0`), where utilities are linear
/// and the thresholds are the Naor floors.
pub fn risk_neutral_solve(s: &Scenario, problem: Problem) -> Result<SolveResult> {
    if !s.is_risk_neutral() {
        return Err(Error::NonZeroRisk(s.risk_aversion));
    }
    solve(s, problem)
}

/// Exhaustive argmax of [`threshold_objective`] over the bounds (capped as
/// in the single-quote search), ties to the smaller threshold.
pub fn exhaustive_threshold(s: &Scenario, problem: Problem) -> Result<(usize, f64)> {
    let bounds = prepare(s)?;
    if !bounds.join_feasible() {
        return Ok((0, 0.0));
    }
    let lower = bounds.lower.max(1);
    let upper = bounds.upper.unwrap_or(lower + SEARCH_CAP);
    let mut cache = QuoteCache::new(s);
    let mut best = (lower, f64::NEG_INFINITY);
    for n0 in lower..=upper {
        let (policy, _) = policy_for(s, &mut cache, &bounds, problem, n0)?;
        let obj = rate(s, n0, problem.is_social(), |n| policy.quote(n))?;
        if obj > best.1 {
            best = (n0, obj);
        }
    }
    Ok(best)
}
