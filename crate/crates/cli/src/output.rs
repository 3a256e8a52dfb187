use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use leadtime_core::experiments::truncate2;
use leadtime_core::{Quote, Scenario};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the scenario's canonical one-line form.
pub fn scenario_hash(s: &Scenario) -> String {
    hex::encode(Sha256::digest(s.to_string().as_bytes()))
}

/// `#` header lines identifying the tool and the scenario.
pub fn provenance(s: &Scenario) -> String {
    format!("# leadtime {VERSION}\n# scenario: {s}\n# scenario_sha256: {}\n", scenario_hash(s))
}

pub fn fmt2(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{:.2}", truncate2(x))
}

pub fn quote2(d: Quote) -> String {
    match d {
        Quote::Finite(x) => fmt2(x),
        Quote::Infinite => "inf".into(),
    }
}

/// Writes the provenance header followed by CSV records.
pub fn write_csv(path: &Path, s: &Scenario, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    file.write_all(provenance(s).as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
