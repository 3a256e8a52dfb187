//! Saved quotation policies, in the same `key = value` layout as scenarios.
//!
//! ```text
//! problem = provider-dynamic
//! scenario_sha256 = 5d1f...
//! threshold = 2
//! quote.0 = inf
//! quote.1 = 0.8125
//! quote.2 = 0
//! ```
//!
//! A dynamic policy lists `quote.0` through `quote.N` for threshold `N`; the
//! last entry is the quote that turns customers away.
//!
//! Single-quote policies carry one `quote` key instead of `quote.N`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use leadtime_core::{PolicyQuotes, Problem, QuotationPolicy, Quote, Scenario};

use crate::output;
use crate::scenario_file::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub problem: Option<Problem>,
    pub scenario_sha256: Option<String>,
    pub policy: QuotationPolicy,
}

pub fn render(problem: Option<Problem>, policy: &QuotationPolicy, s: &Scenario) -> String {
    let mut out = output::provenance(s);
    if let Some(p) = problem {
        let _ = writeln!(out, "problem = {p}");
    }
    let _ = writeln!(out, "scenario_sha256 = {}", output::scenario_hash(s));
    let _ = writeln!(out, "threshold = {}", policy.threshold);
    match &policy.quotes {
        PolicyQuotes::Single(d) => {
            let _ = writeln!(out, "quote = {d}");
        }
        PolicyQuotes::Dynamic(quotes) => {
            for (n, d) in quotes.iter().enumerate() {
                let _ = writeln!(out, "quote.{n} = {d}");
            }
        }
    }
    out
}

pub fn load(path: &Path) -> Result<PolicyFile, ParseError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        origin: origin.clone(),
        line: None,
        message: e.to_string(),
    })?;
    parse(&text, &origin)
}

pub fn parse(text: &str, origin: &str) -> Result<PolicyFile, ParseError> {
    let err = |line: Option<usize>, message: String| ParseError { origin: origin.to_string(), line, message };
    let mut problem = None;
    let mut hash = None;
    let mut threshold: Option<(usize, usize)> = None;
    let mut single: Option<(usize, Quote)> = None;
    let mut indexed: BTreeMap<usize, (usize, Quote)> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(Some(line), format!("expected 'key = value', found '{content}'")));
        };
        let (key, value) = (key.trim(), value.trim());
        let quote = || value.parse::<Quote>().map_err(|e| err(Some(line), e.to_string()));
        match key {
            "problem" => problem = Some(value.parse::<Problem>().map_err(|e| err(Some(line), e.to_string()))?),
            "scenario_sha256" => hash = Some(value.to_string()),
            "threshold" => {
                let n = value.parse().map_err(|_| err(Some(line), format!("'{value}' is not a threshold")))?;
                threshold = Some((line, n));
            }
            "quote" => single = Some((line, quote()?)),
            _ => {
                let index = key
                    .strip_prefix("quote.")
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| err(Some(line), format!("unknown key '{key}'")))?;
                if indexed.insert(index, (line, quote()?)).is_some() {
                    return Err(err(Some(line), format!("quote.{index} given twice")));
                }
            }
        }
    }

    let (threshold_line, n0) = threshold.ok_or_else(|| err(None, "missing key 'threshold'".into()))?;
    let policy = match (single, indexed.is_empty()) {
        (Some((line, _)), false) => return Err(err(Some(line), "mixes 'quote' with 'quote.N' keys".into())),
        (Some((_, d)), true) => QuotationPolicy::single(n0, d),
        (None, true) => return Err(err(None, "no quotes given".into())),
        (None, false) => {
            if let Some((&n, &(line, _))) = indexed.iter().find(|(&n, _)| n > n0) {
                return Err(err(Some(line), format!("quote.{n} is beyond threshold {n0}")));
            }
            let mut quotes = Vec::with_capacity(n0 + 1);
            for n in 0..=n0 {
                let (_, d) = indexed
                    .get(&n)
                    .ok_or_else(|| err(Some(threshold_line), format!("quote.{n} missing for threshold {n0}")))?;
                quotes.push(*d);
            }
            QuotationPolicy::dynamic(n0, quotes)
        }
    };
    Ok(PolicyFile { problem, scenario_sha256: hash, policy })
}
