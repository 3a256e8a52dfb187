use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use leadtime_core::experiments::{quote_table, run_sweep, QuoteCell};
use leadtime_core::{
    eval_profit_rate, eval_social_rate, experiments, quotes, solve, Axis, Horizon, Problem, QuotationPolicy, Scenario,
    SimConfig, SweepSpec,
};
use rayon::prelude::*;

use crate::cli::{MinCapacityArgs, QuoteTableArgs, SimArgs, SimulateArgs, SolveArgs, SweepArgs};
use crate::output::{fmt2, quote2, write_csv};
use crate::policy_file;
use crate::scenario_file::{self, ScenarioFile, SimSettings};

fn load_feasible(path: &std::path::Path) -> Result<(ScenarioFile, Scenario)> {
    let file = scenario_file::load(path)?;
    let s = file.with_service_rate()?;
    s.require_feasible_service()?;
    Ok((file, s))
}

fn problems(text: &str) -> Result<Vec<Problem>> {
    scenario_file::parse_problems(text).map_err(anyhow::Error::msg)
}

fn bounds_line(s: &Scenario) -> Result<String> {
    let b = quotes::threshold_bounds(s)?;
    Ok(format!("threshold bounds: n_lo={}, n_hi={}", b.lower, b.upper_label()))
}

pub fn solve_cmd(args: &SolveArgs) -> Result<String> {
    let (_, s) = load_feasible(&args.scenario)?;
    let problems = problems(&args.problem)?;
    if args.policy_out.is_some() && problems.len() != 1 {
        bail!("--policy-out needs exactly one --problem");
    }
    let results = problems.iter().map(|&p| solve(&s, p)).collect::<leadtime_core::Result<Vec<_>>>()?;

    let mut out = format!("scenario: {s}\n{}\n", bounds_line(&s)?);
    let mut rows = Vec::new();
    for r in &results {
        let (n_label, v_label) = r.problem.labels();
        let _ = writeln!(out, "\n{}\n{n_label}={}, {v_label}={}", r.problem, r.threshold(), fmt2(r.objective));
        for note in &r.notes {
            let _ = writeln!(out, "note: {note}");
        }
        let _ = writeln!(out, "{:>4} {:>8} {:>8} {:>8} {:>8}", "n", "quote", "B_n", "G_n", "q(n)");
        for d in &r.per_state {
            let _ = writeln!(
                out,
                "{:>4} {:>8} {:>8} {:>8} {:>8.4}",
                d.n,
                quote2(d.quote),
                fmt2(d.utility.to_f64()),
                fmt2(d.profit),
                d.probability
            );
            rows.push(vec![
                r.problem.to_string(),
                r.threshold().to_string(),
                r.objective.to_string(),
                d.n.to_string(),
                d.quote.to_string(),
                d.utility.to_f64().to_string(),
                d.profit.to_string(),
                d.probability.to_string(),
            ]);
        }
    }
    if let Some(path) = &args.csv {
        let header = ["problem", "threshold", "objective", "n", "quote", "utility", "profit", "probability"];
        write_csv(path, &s, &header.map(String::from), &rows)?;
    }
    if let Some(path) = &args.policy_out {
        let r = &results[0];
        std::fs::write(path, policy_file::render(Some(r.problem), &r.policy, &s))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(out)
}

fn sim_config(file: &SimSettings, args: &SimArgs) -> Result<SimConfig> {
    let d = SimConfig::default();
    let horizon = match (args.events, args.time) {
        (Some(e), _) => Horizon::Events(e),
        (None, Some(t)) => Horizon::Time(t),
        (None, None) => match (file.events, file.time) {
            (Some(e), _) => Horizon::Events(e),
            (None, Some(t)) => Horizon::Time(t),
            (None, None) => d.horizon,
        },
    };
    let cfg = SimConfig {
        horizon,
        warmup: args.warmup.or(file.warmup).unwrap_or(d.warmup),
        replications: args.replications.or(file.replications).unwrap_or(d.replications),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        batch_count: args.batches.or(file.batches).unwrap_or(d.batch_count),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn describe(cfg: &SimConfig) -> String {
    let horizon = match cfg.horizon {
        Horizon::Events(e) => format!("{e} events"),
        Horizon::Time(t) => format!("time {t}"),
    };
    format!(
        "{} replications x {horizon}, warmup {}, {} batches, seed {}",
        cfg.replications, cfg.warmup, cfg.batch_count, cfg.seed
    )
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<String> {
    let file = scenario_file::load(&args.scenario)?;
    let base = file.with_service_rate()?;
    let axis: Axis = match (&args.axis, file.sweep.axis) {
        (Some(a), _) => a.parse()?,
        (None, Some(a)) => a,
        (None, None) => bail!("no sweep axis: pass --axis or set sweep.axis"),
    };
    let grid = match (&args.grid, &file.sweep.grid) {
        (Some(g), _) => scenario_file::parse_grid(g).map_err(anyhow::Error::msg)?,
        (None, Some(g)) => g.clone(),
        (None, None) => bail!("no sweep grid: pass --grid or set sweep.grid"),
    };
    let problems = match (&args.problems, &file.sweep.problems) {
        (Some(p), _) => problems(p)?,
        (None, Some(p)) => p.clone(),
        (None, None) => Problem::ALL.to_vec(),
    };
    let simulation = if args.with_sim { Some(sim_config(&file.sim, &args.sim)?) } else { None };
    let result = run_sweep(&SweepSpec { base, axis, grid, problems, simulation })?;

    let mut out = format!("sweep over {axis}, base {base}\n");
    if let Some(cfg) = &simulation {
        let _ = writeln!(out, "simulation: {}", describe(cfg));
    }
    let _ = write!(out, "{:>8} {:>5} {:>5}", axis.name(), "n_lo", "n_hi");
    let mut header: Vec<String> = [axis.name(), "n_lo", "n_hi"].map(String::from).to_vec();
    for p in &result.problems {
        let (n, v) = p.labels();
        let _ = write!(out, " {n:>5} {v:>8}");
        if simulation.is_some() {
            let _ = write!(out, " {:>8} {:>6}", "sim", "+-");
        }
        header.extend([format!("{p}.threshold"), format!("{p}.objective"), format!("{p}.quote")]);
        if simulation.is_some() {
            header.extend([format!("{p}.sim_mean"), format!("{p}.sim_half_width")]);
        }
    }
    out.push('\n');

    let mut rows = Vec::new();
    for row in &result.rows {
        let (lo, hi) = match &row.bounds {
            Some(b) => (b.lower.to_string(), b.upper_label()),
            None => ("-".to_string(), "-".to_string()),
        };
        let _ = write!(out, "{:>8} {lo:>5} {hi:>5}", row.value);
        let mut rec = vec![row.value.to_string(), lo, hi];
        for c in &row.cells {
            let _ = write!(out, " {:>5} {:>8}", c.threshold, fmt2(c.objective));
            rec.extend([c.threshold.to_string(), c.objective.to_string(), c.quote.to_string()]);
            if simulation.is_some() {
                let (m, h) = c
                    .simulated
                    .map_or((String::new(), String::new()), |e| (e.mean.to_string(), e.half_width.to_string()));
                let shown = c.simulated.map_or(("-".into(), "-".into()), |e| (fmt2(e.mean), fmt2(e.half_width)));
                let _ = write!(out, " {:>8} {:>6}", shown.0, shown.1);
                rec.extend([m, h]);
            }
        }
        out.push('\n');
        rows.push(rec);
    }
    if let Some(path) = &args.csv {
        write_csv(path, &base, &header, &rows)?;
    }
    Ok(out)
}

fn cell_csv(c: &QuoteCell) -> String {
    match *c {
        QuoteCell::Finite(d) => d.to_string(),
        QuoteCell::Above(d) => format!(">{d}"),
        QuoteCell::Infinite => "inf".into(),
        QuoteCell::Balk => "balk".into(),
    }
}

pub fn quote_table_cmd(args: &QuoteTableArgs) -> Result<String> {
    let (_, s) = load_feasible(&args.scenario)?;
    let table = quote_table(&s)?;
    let labels = Problem::ALL.map(|p| p.labels().0.replacen("n_", "d_", 1));

    let mut out = format!("scenario: {s}\n{}\n", bounds_line(&s)?);
    let _ = write!(out, "{:>4}", "n");
    for l in &labels {
        let _ = write!(out, " {l:>7}");
    }
    let _ = write!(out, "\n{:>4}", "n0");
    for t in table.thresholds {
        let _ = write!(out, " {t:>7}");
    }
    out.push('\n');
    let mut rows = Vec::new();
    for row in &table.rows {
        let _ = write!(out, "{:>4}", row.n);
        for c in &row.cells {
            let _ = write!(out, " {:>7}", c.present());
        }
        out.push('\n');
        let mut rec = vec![row.n.to_string()];
        rec.extend(row.cells.iter().map(cell_csv));
        rows.push(rec);
    }
    if let Some(path) = &args.csv {
        let mut header = vec!["n".to_string()];
        header.extend(Problem::ALL.map(|p| p.to_string()));
        write_csv(path, &s, &header, &rows)?;
    }
    Ok(out)
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<String> {
    let (file, s) = load_feasible(&args.scenario)?;
    let mut out = String::new();
    let (label, policy): (String, QuotationPolicy) = match (&args.policy, &args.problem) {
        (Some(path), _) => {
            let pf = policy_file::load(path)?;
            if pf.scenario_sha256.as_deref().is_some_and(|h| h != crate::output::scenario_hash(&s)) {
                eprintln!("warning: {} was saved for a different scenario", path.display());
            }
            let name = pf.problem.map_or_else(|| path.display().to_string(), |p| p.to_string());
            (name, pf.policy)
        }
        (None, Some(p)) => {
            let problem: Problem = p.parse()?;
            (problem.to_string(), solve(&s, problem)?.policy)
        }
        (None, None) => bail!("pass --policy or --problem"),
    };
    policy.verify(&s)?;
    let cfg = sim_config(&file.sim, &args.sim)?;
    let est = leadtime_core::sim::simulate(&s, &policy, &cfg)?;
    let n0 = policy.threshold;
    let q = leadtime_core::dist::stationary_dist(n0, s.arrival_rate, s.service_rate)?;

    let kind = if policy.is_single() { "single quote" } else { "dynamic quotes" };
    let _ = writeln!(out, "scenario: {s}\npolicy: {label}, {kind}, threshold {n0}\nsimulation: {}", describe(&cfg));
    let _ = writeln!(out, "\n{:<12} {:>9} {:>9} {:>9} {:>7}", "rate", "analytic", "simulated", "+-", "z");
    let mut rows = Vec::new();
    for (name, analytic, e) in [
        ("profit", eval_profit_rate(&s, &policy)?, est.profit_rate),
        ("social", eval_social_rate(&s, &policy)?, est.social_rate),
    ] {
        let z = z_score(e.mean, analytic, e.std_error);
        let _ =
            writeln!(out, "{name:<12} {:>9} {:>9} {:>9} {z:>7.2}", fmt2(analytic), fmt2(e.mean), fmt2(e.half_width));
        rows.push(vec![
            name.into(),
            String::new(),
            analytic.to_string(),
            e.mean.to_string(),
            e.half_width.to_string(),
            z.to_string(),
        ]);
    }
    let _ = writeln!(
        out,
        "\n{:>4} {:>8} {:>9} {:>7} {:>7} {:>8} {:>8} {:>8}",
        "n", "q(n)", "occupancy", "z", "joined", "lateness", "utility", "B_n"
    );
    for (n, e) in est.occupancy.iter().enumerate() {
        let z = z_score(e.mean, q[n], e.std_error);
        let lateness = est.mean_lateness_paid.get(n).copied().flatten().map_or("-".into(), |e| fmt2(e.mean));
        let utility = est.realized_utility.get(n).copied().flatten().map_or("-".into(), |e| fmt2(e.mean));
        let b = leadtime_core::utility::expected_utility(&s, n, policy.quote(n)).value.to_f64();
        let _ = writeln!(
            out,
            "{n:>4} {:>8.4} {:>9.4} {z:>7.2} {:>7.4} {lateness:>8} {utility:>8} {:>8}",
            q[n],
            e.mean,
            est.join_fraction_by_state.get(n).copied().unwrap_or(0.0),
            fmt2(b)
        );
        rows.push(vec![
            "occupancy".into(),
            n.to_string(),
            q[n].to_string(),
            e.mean.to_string(),
            e.half_width.to_string(),
            z.to_string(),
        ]);
    }
    if let Some(path) = &args.csv {
        let header = ["metric", "n", "analytic", "simulated", "half_width", "z"].map(String::from);
        write_csv(path, &s, &header, &rows)?;
    }
    Ok(out)
}

fn z_score(x: f64, target: f64, se: f64) -> f64 {
    if se > 0.0 {
        (x - target) / se
    } else if x == target {
        0.0
    } else {
        f64::INFINITY.copysign(x - target)
    }
}

pub fn min_capacity_cmd(args: &MinCapacityArgs) -> Result<String> {
    let file = scenario_file::load(&args.scenario)?;
    let s = file.scenario;
    let quotes = scenario_file::parse_quotes(&args.d_grid).map_err(anyhow::Error::msg)?;
    let r_values = match &args.r {
        Some(text) => scenario_file::parse_grid(text).map_err(anyhow::Error::msg)?,
        None => vec![s.risk_aversion],
    };
    if let Some(r) = r_values.iter().find(|r| !(**r >= 0.0)) {
        bail!("risk aversion must be >= 0, got {r}");
    }
    let grid: Vec<Vec<f64>> = quotes
        .par_iter()
        .map(|&d| r_values.iter().map(|&r| experiments::min_capacity(&s, d, r)).collect())
        .collect::<leadtime_core::Result<_>>()?;

    let mut out = format!(
        "minimum service rate for an empty-system join\nbase: R={} p={} c={} l={}\n{:>8}",
        s.service_value, s.fee, s.waiting_cost, s.compensation, "d"
    );
    for r in &r_values {
        let _ = write!(out, " {:>10}", format!("r={r}"));
    }
    out.push('\n');
    let mut rows = Vec::new();
    for (d, mus) in quotes.iter().zip(&grid) {
        let _ = write!(out, "{:>8}", d.to_string());
        for (r, mu) in r_values.iter().zip(mus) {
            let _ = write!(out, " {:>10}", fmt2(*mu));
            rows.push(vec![d.to_string(), r.to_string(), mu.to_string()]);
        }
        out.push('\n');
    }
    if let Some(path) = &args.csv {
        write_csv(path, &s, &["d", "r", "mu_min"].map(String::from), &rows)?;
    }
    Ok(out)
}
