//! The JSON report and the CSV tables.

use corescale::ensemble::CriticalData;
use corescale::fluid::CriticalTime;
use corescale::fss::FssObjects;
use corescale::omega::OmegaEstimate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FssReport {
    pub config: Config,
    pub critical: Option<CriticalSection>,
    pub fss: Option<FssObjects>,
    pub omega: Option<OmegaSection>,
    pub predictions: Vec<PredictionRow>,
    pub simulation: Vec<SimulationRow>,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSection {
    #[serde(flatten)]
    pub data: CriticalData,
    /// Present when the fluid limit was integrated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidDiagnostics {
    pub theta_bar: f64,
    pub step: f64,
    /// Step-halving disagreement of the trajectory.
    pub integration_error: f64,
    pub touch_tolerance: f64,
    pub critical_times: Vec<CriticalTime>,
    /// `theta(zeta)` at each tangency point.
    pub predicted_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSection {
    #[serde(flatten)]
    pub estimate: OmegaEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<OmegaEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRow {
    pub n: u64,
    pub r: f64,
    pub rho: f64,
    pub p_leading: f64,
    /// `b . grad Phi(r a) Omega n^{-1/6}`, subtracted from the leading term.
    pub correction: f64,
    pub p_corrected: f64,
    /// Whether `p_corrected` left `[0, 1]` and was clipped.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationRow {
    pub n: u64,
    pub r: f64,
    pub rho: f64,
    pub m: u64,
    pub trials: u64,
    pub failures: u64,
    pub p_hat: f64,
    /// Wilson 95% half-width.
    pub ci95: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Seed of this cell; trial `i` replays from stream `i`.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub schema_version: u32,
    pub version: String,
    pub command: String,
    pub seed: u64,
}

impl FssReport {
    pub fn new(config: &Config, command: &str) -> Self {
        FssReport {
            config: config.clone(),
            critical: None,
            fss: None,
            omega: None,
            predictions: Vec::new(),
            simulation: Vec::new(),
            meta: Meta {
                schema_version: SCHEMA_VERSION,
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                seed: config.run.seed,
            },
        }
    }

    /// Pretty JSON; fails if any number is not finite.
    pub fn to_json(&self) -> CliResult<String> {
        let value = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        check_finite(&value, "")?;
        let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> CliResult<FssReport> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Non-finite floats serialise as `null`; nulls are only allowed for absent sections.
fn check_finite(v: &Value, path: &str) -> CliResult<()> {
    match v {
        Value::Null if ["/critical", "/fss", "/omega"].contains(&path) => Ok(()),
        Value::Null => Err(CliError::Model(corescale::Error::Convergence(format!("non-finite value at {path}")))),
        Value::Array(a) => a.iter().enumerate().try_for_each(|(i, x)| check_finite(x, &format!("{path}/{i}"))),
        Value::Object(o) => o.iter().try_for_each(|(k, x)| check_finite(x, &format!("{path}/{k}"))),
        _ => Ok(()),
    }
}

fn table(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

pub fn predictions_csv(rows: &[PredictionRow]) -> String {
    table(
        "n,r,rho,p_leading,correction,p_corrected,clipped",
        rows.iter().map(|p| {
            format!("{},{},{},{},{},{},{}", p.n, p.r, p.rho, p.p_leading, p.correction, p.p_corrected, p.clipped)
        }),
    )
}

pub fn simulation_csv(rows: &[SimulationRow]) -> String {
    table(
        "n,r,rho,trials,failures,p_hat,ci95",
        rows.iter().map(|s| format!("{},{},{},{},{},{},{}", s.n, s.r, s.rho, s.trials, s.failures, s.p_hat, s.ci95)),
    )
}

/// Joined prediction and simulation row.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallRow {
    pub prediction: PredictionRow,
    pub simulation: SimulationRow,
    /// `p_hat - p_corrected`.
    pub deviation: f64,
    /// `p_hat - p_leading`.
    pub deviation_leading: f64,
}

/// Pairs rows with identical `(n, r)` in the same order.
pub fn join(predictions: &[PredictionRow], simulation: &[SimulationRow]) -> CliResult<Vec<WaterfallRow>> {
    if predictions.len() != simulation.len() {
        return Err(CliError::GridMismatch(format!(
            "{} predictions but {} simulated cells",
            predictions.len(),
            simulation.len()
        )));
    }
    predictions
        .iter()
        .zip(simulation)
        .map(|(p, s)| {
            if p.n != s.n || p.r.to_bits() != s.r.to_bits() {
                return Err(CliError::GridMismatch(format!("({}, {}) against ({}, {})", p.n, p.r, s.n, s.r)));
            }
            Ok(WaterfallRow {
                prediction: p.clone(),
                simulation: s.clone(),
                deviation: s.p_hat - p.p_corrected,
                deviation_leading: s.p_hat - p.p_leading,
            })
        })
        .collect()
}

pub fn waterfall_csv(rows: &[WaterfallRow]) -> String {
    table(
        "n,r,rho,p_leading,p_corrected,p_hat,ci95,deviation,deviation_leading",
        rows.iter().map(|w| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                w.prediction.n,
                w.prediction.r,
                w.prediction.rho,
                w.prediction.p_leading,
                w.prediction.p_corrected,
                w.simulation.p_hat,
                w.simulation.ci95,
                w.deviation,
                w.deviation_leading
            )
        }),
    )
}

pub fn omega_csv(o: &OmegaSection) -> String {
    let mut rows = vec![format!("{},{},{}", o.estimate.method, o.estimate.value, o.estimate.ci95)];
    if let Some(c) = &o.cross_check {
        rows.push(format!("{},{},{}", c.method, c.value, c.ci95));
    }
    table("method,value,ci95", rows.into_iter())
}
