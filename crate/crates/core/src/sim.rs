//! Discrete-event simulation of the observable queue under a quotation policy.
//!
//! Arrivals are Poisson, services exponential, and the discipline FIFO. A
//! customer who arrives seeing `n < n0` joins and is quoted `d_n`; on
//! completion the provider earns `p − l(X − d_n)^+` and the customer realizes
//! `U(R − p − cX + l(X − d_n)^+)`. Rates are estimated by batch means over
//! replications, each replication driven by its own ChaCha stream so results
//! do not depend on the thread count.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ext::Quote;
use crate::optimize::QuotationPolicy;
use crate::utility::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Events (arrivals, including balks, plus departures) per replication.
    Events(u64),
    /// Simulated time per replication.
    Time(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: Horizon,
    /// Fraction of the horizon discarded before measuring.
    pub warmup: f64,
    pub replications: usize,
    pub seed: u64,
    /// Batches per replication.
    pub batch_count: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { horizon: Horizon::Events(200_000), warmup: 0.1, replications: 20, seed: 7, batch_count: 20 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be >= 1");
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return bad("warmup must lie in [0, 1)");
        }
        if self.batch_count == 0 {
            return bad("batch_count must be >= 1");
        }
        if self.replications * self.batch_count < 2 {
            return bad("need at least two batches in total for a confidence interval");
        }
        match self.horizon {
            Horizon::Events(n) if n < 10 * self.batch_count as u64 => {
                bad("event horizon too short for the batch count")
            }
            Horizon::Time(t) if !(t > 0.0) || !t.is_finite() => bad("time horizon must be > 0"),
            _ => Ok(()),
        }
    }
}

/// Sample mean with a 95% half-width and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn covers(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }

    /// `|x − mean| ≤ k·se`.
    pub fn within_sigmas(&self, x: f64, k: f64) -> bool {
        (x - self.mean).abs() <= k * self.std_error
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len();
        let mean = xs.iter().sum::<f64>() / m as f64;
        if m < 2 {
            return Self { mean, half_width: f64::INFINITY, std_error: f64::INFINITY, samples: m };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (m - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(1.96);
        Self { mean, half_width: t * se, std_error: se, samples: m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    pub profit_rate: Estimate,
    pub social_rate: Estimate,
    /// Time-average fraction in each state `0..=n0`, from batch means.
    pub occupancy: Vec<Estimate>,
    /// Fraction of arrivals seeing `n` who join.
    pub join_fraction_by_state: Vec<f64>,
    /// Compensation `l(X − d_n)^+` per joining customer, by state seen.
    pub mean_lateness_paid: Vec<Option<Estimate>>,
    /// Realized utility per joining customer, by state seen.
    pub realized_utility: Vec<Option<Estimate>>,
    /// Joining customers measured, by state seen.
    pub customers: Vec<u64>,
    pub replications: usize,
}

impl SimEstimate {
    pub fn occupancy_means(&self) -> Vec<f64> {
        self.occupancy.iter().map(|e| e.mean).collect()
    }
}

#[derive(Debug, Clone, Default)]
struct Batch {
    duration: f64,
    profit: f64,
    social: f64,
    time_in_state: Vec<f64>,
}

#[derive(Debug, Clone)]
struct RepStats {
    batches: Vec<Batch>,
    arrivals: Vec<u64>,
    joins: Vec<u64>,
    lateness: Vec<(u64, f64)>,
    utility: Vec<(u64, f64)>,
}

fn utility(r: f64, w: f64) -> f64 {
    if r == 0.0 {
        w
    } else {
        -(-r * w).exp_m1() / r
    }
}

fn stream(cfg: &SimConfig, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    rng
}

fn new_batch(states: usize) -> Batch {
    Batch { time_in_state: vec![0.0; states], ..Default::default() }
}

fn run_replication(s: &Scenario, policy: &QuotationPolicy, cfg: &SimConfig, rep: usize) -> RepStats {
    let n0 = policy.threshold;
    let states = n0 + 1;
    let quotes: Vec<Quote> = (0..=n0).map(|n| policy.quote(n)).collect();
    let (lam, mu) = (s.arrival_rate, s.service_rate);
    let (r, c, l, surplus, fee) = (s.risk_aversion, s.waiting_cost, s.compensation, s.surplus(), s.fee);
    let mut rng = stream(cfg, rep);

    let mut stats = RepStats {
        batches: Vec::with_capacity(cfg.batch_count),
        arrivals: vec![0; states],
        joins: vec![0; states],
        lateness: vec![(0, 0.0); states],
        utility: vec![(0, 0.0); states],
    };
    let mut batch = new_batch(states);
    // Arrival time, state seen, and whether the arrival fell in the measured window.
    let mut queue: VecDeque<(f64, usize, bool)> = VecDeque::new();
    let mut t = 0.0f64;

    // Event horizon: warmup and batch lengths in events.
    let (warm_events, batch_events) = match cfg.horizon {
        Horizon::Events(total) => {
            let warm = (cfg.warmup * total as f64).floor() as u64;
            (warm, ((total - warm) / cfg.batch_count as u64).max(1))
        }
        Horizon::Time(_) => (0, 0),
    };
    let mut events = 0u64;
    let mut batch_start_event = warm_events;
    // Time horizon: warmup end and the end of the current batch.
    let (warm_time, batch_time) = match cfg.horizon {
        Horizon::Time(total) => (cfg.warmup * total, (1.0 - cfg.warmup) * total / cfg.batch_count as f64),
        Horizon::Events(_) => (0.0, 0.0),
    };
    let mut batch_end = warm_time + batch_time;
    let by_events = matches!(cfg.horizon, Horizon::Events(_));
    let mut measuring = by_events && warm_events == 0;

    loop {
        let n = queue.len();
        let total_rate = if n > 0 { lam + mu } else { lam };
        let dt = Exp::new(total_rate).expect("positive rate").sample(&mut rng);
        let next = t + dt;

        if by_events {
            if measuring {
                batch.time_in_state[n] += dt;
                batch.duration += dt;
            }
        } else if next > warm_time {
            let mut start = t.max(warm_time);
            while next >= batch_end {
                batch.time_in_state[n] += batch_end - start;
                batch.duration += batch_end - start;
                stats.batches.push(std::mem::replace(&mut batch, new_batch(states)));
                if stats.batches.len() == cfg.batch_count {
                    return stats;
                }
                start = batch_end;
                batch_end += batch_time;
            }
            batch.time_in_state[n] += next - start;
            batch.duration += next - start;
            measuring = true;
        }
        t = next;

        let is_arrival = n == 0 || rng.random::<f64>() * total_rate < lam;
        if is_arrival {
            if measuring {
                stats.arrivals[n] += 1;
            }
            if n < n0 {
                if measuring {
                    stats.joins[n] += 1;
                }
                queue.push_back((t, n, measuring));
            }
        } else {
            let (arrived, seen, counted) = queue.pop_front().expect("departure from a nonempty queue");
            let x = t - arrived;
            let late = match quotes[seen] {
                Quote::Finite(d) => (x - d).max(0.0),
                Quote::Infinite => 0.0,
            };
            let paid = l * late;
            let u = utility(r, surplus - c * x + paid);
            if measuring {
                batch.profit += fee - paid;
                batch.social += fee - paid + u;
            }
            if counted {
                stats.lateness[seen].0 += 1;
                stats.lateness[seen].1 += paid;
                stats.utility[seen].0 += 1;
                stats.utility[seen].1 += u;
            }
        }

        if by_events {
            events += 1;
            if !measuring {
                measuring = events >= warm_events;
            } else if events - batch_start_event >= batch_events {
                stats.batches.push(std::mem::replace(&mut batch, new_batch(states)));
                if stats.batches.len() == cfg.batch_count {
                    return stats;
                }
                batch_start_event = events;
            }
        }
    }
}

/// Simulates `policy` and returns batch-means estimates.
pub fn simulate(s: &Scenario, policy: &QuotationPolicy, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    s.validate()?;
    s.require_feasible_service()?;
    policy.verify(s)?;
    let reps: Vec<RepStats> =
        (0..cfg.replications).into_par_iter().map(|k| run_replication(s, policy, cfg, k)).collect();

    let states = policy.threshold + 1;
    let batches: Vec<&Batch> = reps.iter().flat_map(|r| r.batches.iter()).collect();
    let profit: Vec<f64> = batches.iter().map(|b| b.profit / b.duration).collect();
    let social: Vec<f64> = batches.iter().map(|b| b.social / b.duration).collect();
    let occupancy = (0..states)
        .map(|n| {
            let xs: Vec<f64> = batches.iter().map(|b| b.time_in_state[n] / b.duration).collect();
            Estimate::from_samples(&xs)
        })
        .collect();

    let mut arrivals = vec![0u64; states];
    let mut joins = vec![0u64; states];
    let mut customers = vec![0u64; states];
    for r in &reps {
        for n in 0..states {
            arrivals[n] += r.arrivals[n];
            joins[n] += r.joins[n];
            customers[n] += r.lateness[n].0;
        }
    }
    // Per-state customer means from replication means, which absorbs the
    // correlation between successive customers.
    let per_state = |pick: fn(&RepStats, usize) -> (u64, f64)| -> Vec<Option<Estimate>> {
        (0..states)
            .map(|n| {
                let xs: Vec<f64> =
                    reps.iter().map(|r| pick(r, n)).filter(|(k, _)| *k > 0).map(|(k, s)| s / k as f64).collect();
                (!xs.is_empty()).then(|| Estimate::from_samples(&xs))
            })
            .collect()
    };
    Ok(SimEstimate {
        profit_rate: Estimate::from_samples(&profit),
        social_rate: Estimate::from_samples(&social),
        occupancy,
        join_fraction_by_state: arrivals
            .iter()
            .zip(&joins)
            .map(|(a, j)| if *a == 0 { 0.0 } else { *j as f64 / *a as f64 })
            .collect(),
        mean_lateness_paid: per_state(|r, n| r.lateness[n]),
        realized_utility: per_state(|r, n| r.utility[n]),
        customers,
        replications: cfg.replications,
    })
}

/// Monte-Carlo `E U` for a customer seeing `n` under `policy`, sampling
/// `X_n ~ Erlang(n+1, μ)` directly. Draws per replication equal the event
/// horizon (or `⌈T(λ+μ)⌉` for a time horizon).
pub fn estimate_state_utility(s: &Scenario, policy: &QuotationPolicy, cfg: &SimConfig, n: usize) -> Result<Estimate> {
    cfg.validate()?;
    s.validate()?;
    let d = policy.quote(n);
    let per_rep = match cfg.horizon {
        Horizon::Events(k) => k,
        Horizon::Time(t) => (t * (s.arrival_rate + s.service_rate)).ceil() as u64,
    };
    let gamma = Gamma::new((n + 1) as f64, 1.0 / s.service_rate).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (r, c, l, surplus) = (s.risk_aversion, s.waiting_cost, s.compensation, s.surplus());
    let sums: Vec<(f64, f64)> = (0..cfg.replications)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg, k);
            let mut acc = (0.0, 0.0);
            for _ in 0..per_rep {
                let x: f64 = gamma.sample(&mut rng);
                let late = match d {
                    Quote::Finite(d) => (x - d).max(0.0),
                    Quote::Infinite => 0.0,
                };
                let u = utility(r, surplus - c * x + l * late);
                acc.0 += u;
                acc.1 += u * u;
            }
            acc
        })
        .collect();
    let m = (per_rep * cfg.replications as u64) as f64;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s1 / m;
    let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
    let se = (var / m).sqrt();
    Ok(Estimate { mean, half_width: 1.959_963_984_540_054 * se, std_error: se, samples: m as usize })
}
