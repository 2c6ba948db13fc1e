//! Report files: versioned JSON records with an integrity digest and a
//! recomputable ~10% spot check.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiments;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub lib_version: String,
    pub experiment: String,
    pub config: Value,
    pub results: Value,
    /// Results of the derived ~10% spot config, recomputed by `verify`.
    pub spot: Value,
    pub ok: bool,
    pub runtime_sec: f64,
    pub integrity: String,
}

fn digest(config: &Value, results: &Value, spot: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(config).unwrap());
    hasher.update(serde_json::to_string(results).unwrap());
    hasher.update(serde_json::to_string(spot).unwrap());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct ProducedReport {
    pub report: ReportFile,
    pub csvs: Vec<(String, String)>,
}

/// Execute an experiment (full budget plus spot budget) and assemble the
/// report record.
pub fn produce(cfg: &ExperimentConfig) -> Result<ProducedReport, String> {
    let started = std::time::Instant::now();
    let full = experiments::run(cfg)?;
    let spot = experiments::run(&cfg.spot_config())?;
    let config = serde_json::to_value(cfg).map_err(|e| e.to_string())?;
    let integrity = digest(&config, &full.results, &spot.results);
    Ok(ProducedReport {
        report: ReportFile {
            schema_version: SCHEMA_VERSION,
            lib_version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: cfg.experiment.name().to_string(),
            config,
            results: full.results,
            spot: spot.results,
            ok: full.ok,
            runtime_sec: started.elapsed().as_secs_f64(),
            integrity,
        },
        csvs: full.csvs,
    })
}

pub enum VerifyOutcome {
    Pass,
    VersionMismatch { report: String, current: String, spot_matches: bool },
    IntegrityMismatch,
    SpotMismatch,
}

/// Re-derive the spot check with the recorded config and confirm numeric
/// agreement; the integrity digest catches edits to any stored field.
pub fn verify(report: &ReportFile) -> Result<VerifyOutcome, String> {
    if report.integrity != digest(&report.config, &report.results, &report.spot) {
        return Ok(VerifyOutcome::IntegrityMismatch);
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(report.config.clone()).map_err(|e| format!("corrupt config: {e}"))?;
    cfg.validate()?;
    let spot = experiments::run(&cfg.spot_config())?;
    let matches = spot.results == report.spot;
    let current = env!("CARGO_PKG_VERSION");
    if report.lib_version != current {
        return Ok(VerifyOutcome::VersionMismatch {
            report: report.lib_version.clone(),
            current: current.to_string(),
            spot_matches: matches,
        });
    }
    Ok(if matches { VerifyOutcome::Pass } else { VerifyOutcome::SpotMismatch })
}
