//! Flat `key = value` scenario files.
//!
//! ```text
//! # base case
//! R = 15
//! p = 10
//! c = 8
//! l = 3
//! r = 0.5
//! lambda = 10
//! mu = 12
//! sim.seed = 7
//! sweep.axis = p
//! sweep.grid = 5:14:1
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors. Every error names the file and, where one exists, the line.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use leadtime_core::{Axis, Problem, Quote, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.origin, line, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ParseError {}

const MODEL_KEYS: [&str; 7] = ["R", "p", "c", "l", "r", "lambda", "mu"];
const SIM_KEYS: [&str; 6] = ["sim.seed", "sim.replications", "sim.events", "sim.time", "sim.warmup", "sim.batches"];
const SWEEP_KEYS: [&str; 3] = ["sweep.axis", "sweep.grid", "sweep.problems"];

/// Simulation settings a file may carry; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimSettings {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub events: Option<u64>,
    pub time: Option<f64>,
    pub warmup: Option<f64>,
    pub batches: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSettings {
    pub axis: Option<Axis>,
    pub grid: Option<Vec<f64>>,
    pub problems: Option<Vec<Problem>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub origin: String,
    pub scenario: Scenario,
    /// False when `mu` was omitted (allowed for capacity curves).
    pub has_service_rate: bool,
    pub sim: SimSettings,
    pub sweep: SweepSettings,
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [a, b, h] = parts[..] else {
            return Err(format!("range '{text}' must be start:stop:step"));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"));
        let (a, b, h) = (num(a)?, num(b)?, num(h)?);
        if !(h > 0.0) || !(b >= a) {
            return Err(format!("range '{text}' needs step > 0 and stop >= start"));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize;
        // Rounding to 12 significant decimals keeps 0.1-step grids tidy.
        return Ok((0..=count).map(|i| ((a + i as f64 * h) * 1e12).round() / 1e12).collect());
    }
    text.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", s.trim()))).collect()
}

/// Comma-separated quotes; `inf` allowed.
pub fn parse_quotes(text: &str) -> Result<Vec<Quote>, String> {
    if text.contains(':') {
        return Ok(parse_grid(text)?.into_iter().map(Quote::Finite).collect());
    }
    text.split(',').map(|s| s.trim().parse::<Quote>().map_err(|e| e.to_string())).collect()
}

pub fn parse_problems(text: &str) -> Result<Vec<Problem>, String> {
    if text.trim() == "all" {
        return Ok(Problem::ALL.to_vec());
    }
    text.split(',').map(|s| s.trim().parse::<Problem>().map_err(|e| e.to_string())).collect()
}

pub fn load(path: &Path) -> Result<ScenarioFile, ParseError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        origin: origin.clone(),
        line: None,
        message: e.to_string(),
    })?;
    parse(&text, &origin)
}

pub fn parse(text: &str, origin: &str) -> Result<ScenarioFile, ParseError> {
    let err = |line: Option<usize>, message: String| ParseError { origin: origin.to_string(), line, message };
    let mut entries: HashMap<String, (usize, String)> = HashMap::new();
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
        let known = MODEL_KEYS.contains(&key) || SIM_KEYS.contains(&key) || SWEEP_KEYS.contains(&key);
        if !known {
            return Err(err(Some(line), format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(err(Some(line), format!("key '{key}' has no value")));
        }
        if let Some((first, _)) = entries.get(key) {
            return Err(err(Some(line), format!("key '{key}' repeats line {first}")));
        }
        entries.insert(key.to_string(), (line, value.to_string()));
    }

    let line_of = |key: &str| entries.get(key).map(|(l, _)| *l);
    fn typed<T: std::str::FromStr>(
        entries: &HashMap<String, (usize, String)>,
        key: &str,
        origin: &str,
    ) -> Result<Option<T>, ParseError> {
        match entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| ParseError {
                origin: origin.to_string(),
                line: Some(*line),
                message: format!("'{v}' is not a valid value for '{key}'"),
            }),
        }
    }

    let mut values = [0.0; 7];
    for (slot, key) in values.iter_mut().zip(MODEL_KEYS) {
        match typed::<f64>(&entries, key, origin)? {
            Some(v) => *slot = v,
            None if key == "mu" => *slot = f64::NAN,
            None => return Err(err(None, format!("missing key '{key}'"))),
        }
    }
    let has_service_rate = !values[6].is_nan();
    let scenario = Scenario {
        service_value: values[0],
        fee: values[1],
        waiting_cost: values[2],
        compensation: values[3],
        risk_aversion: values[4],
        arrival_rate: values[5],
        // Any positive placeholder passes validation; callers that need μ check `has_service_rate`.
        service_rate: if has_service_rate { values[6] } else { 1.0 },
    };
    if let Err(e) = scenario.validate() {
        let message = e.to_string();
        let line = message.split_whitespace().find(|w| MODEL_KEYS.contains(w)).and_then(line_of);
        return Err(err(line, message));
    }

    let sim = SimSettings {
        seed: typed(&entries, "sim.seed", origin)?,
        replications: typed(&entries, "sim.replications", origin)?,
        events: typed(&entries, "sim.events", origin)?,
        time: typed(&entries, "sim.time", origin)?,
        warmup: typed(&entries, "sim.warmup", origin)?,
        batches: typed(&entries, "sim.batches", origin)?,
    };
    fn anchored<T>(r: Result<T, String>, line: Option<usize>, origin: &str) -> Result<T, ParseError> {
        r.map_err(|message| ParseError { origin: origin.to_string(), line, message })
    }
    let sweep = SweepSettings {
        axis: typed(&entries, "sweep.axis", origin)?,
        grid: entries
            .get("sweep.grid")
            .map(|(_, v)| anchored(parse_grid(v), line_of("sweep.grid"), origin))
            .transpose()?,
        problems: entries
            .get("sweep.problems")
            .map(|(_, v)| anchored(parse_problems(v), line_of("sweep.problems"), origin))
            .transpose()?,
    };
    Ok(ScenarioFile { origin: origin.to_string(), scenario, has_service_rate, sim, sweep })
}

impl ScenarioFile {
    /// The scenario, provided the file gave `mu`.
    pub fn with_service_rate(&self) -> Result<Scenario, ParseError> {
        if self.has_service_rate {
            Ok(self.scenario)
        } else {
            Err(ParseError { origin: self.origin.clone(), line: None, message: "missing key 'mu'".into() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "R = 15\np = 10\nc = 8\nl = 3\nr = 0.5\nlambda = 10\nmu = 12\n";

    #[test]
    fn base_file() {
        let f = parse(BASE, "base.txt").unwrap();
        assert_eq!(f.scenario, Scenario::base());
        assert!(f.has_service_rate);
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse(&format!("{BASE}bogus = 1\n"), "f").unwrap_err();
        assert_eq!((e.line, e.to_string()), (Some(8), "f:8: unknown key 'bogus'".to_string()));
        let e = parse(&BASE.replace("p = 10", "p = 20"), "f").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse(&BASE.replace("l = 3", "l = x"), "f").unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = parse(&format!("{BASE}p = 9\n"), "f").unwrap_err();
        assert!(e.message.contains("repeats line 2"));
        let e = parse(&BASE.replace("c = 8\n", ""), "f").unwrap_err();
        assert_eq!((e.line, e.message.as_str()), (None, "missing key 'c'"));
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("5:14:1").unwrap().len(), 10);
        assert_eq!(parse_grid("0:2:0.1").unwrap()[7], 0.7);
        assert_eq!(parse_grid("0, 2,4").unwrap(), vec![0.0, 2.0, 4.0]);
        assert!(parse_grid("3:1:1").is_err());
        assert_eq!(parse_quotes("0.5,inf").unwrap(), vec![Quote::Finite(0.5), Quote::Infinite]);
    }

    #[test]
    fn optional_blocks() {
        let text = format!("{BASE}sim.seed = 3\nsweep.axis = l\nsweep.grid = 0,2\nsweep.problems = provider-dynamic\n");
        let f = parse(&text, "f").unwrap();
        assert_eq!(f.sim.seed, Some(3));
        assert_eq!(f.sweep.axis, Some(Axis::Compensation));
        assert_eq!(f.sweep.problems, Some(vec![Problem::ProviderDynamic]));
    }
}
