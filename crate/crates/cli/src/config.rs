//! Run configuration: one JSON document, unknown keys rejected, defaults filled in.

use std::collections::BTreeMap;

use corescale::ensemble::DegreeSpec;
use corescale::fss::AnalysisSettings;
use corescale::omega::McSettings;
use corescale::peeling::SamplerKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub omega: OmegaConfig,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Largest edge size `L`.
    #[serde(rename = "L")]
    pub max_degree: usize,
    /// `v0(j)` keyed by the decimal degree.
    pub v0: BTreeMap<String, f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_n")]
    pub n: Vec<u64>,
    /// Scaling-window offsets; `rho = rho_c + r / sqrt(n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// Explicit rates, as an alternative to `r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaMethod {
    Mc,
    Airy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    #[serde(default = "default_method")]
    pub method: OmegaMethod,
    #[serde(default = "default_omega_trials")]
    pub trials: u64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Also run the other method and require agreement.
    #[serde(default)]
    pub cross_check: bool,
    /// File holding a previously computed estimate, reused when its settings match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaBarPolicy {
    /// Midway between the last critical time and `theta(1e-6)`.
    Midpoint,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_policy")]
    pub theta_bar_policy: ThetaBarPolicy,
    #[serde(default = "default_touch_floor")]
    pub touch_floor: f64,
    #[serde(default = "default_time_tolerance")]
    pub time_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    /// Output directory.
    #[serde(default = "default_path")]
    pub path: String,
    #[serde(default)]
    pub dump_traces: bool,
}

fn default_epsilon() -> f64 {
    0.01
}
fn default_n() -> Vec<u64> {
    vec![1000]
}
fn default_trials() -> u64 {
    1000
}
fn default_sampler() -> SamplerKind {
    SamplerKind::Multinomial
}
fn default_method() -> OmegaMethod {
    OmegaMethod::Mc
}
fn default_omega_trials() -> u64 {
    McSettings::default().trials
}
fn default_horizon() -> f64 {
    McSettings::default().horizon
}
fn default_delta() -> f64 {
    McSettings::default().step
}
fn default_step() -> f64 {
    AnalysisSettings::default().step
}
fn default_policy() -> ThetaBarPolicy {
    ThetaBarPolicy::Midpoint
}
fn default_touch_floor() -> f64 {
    AnalysisSettings::default().touch_floor
}
fn default_time_tolerance() -> f64 {
    AnalysisSettings::default().time_tolerance
}
fn default_format() -> OutputFormat {
    OutputFormat::Csv
}
fn default_path() -> String {
    "out".into()
}

/// `-3, -2.5, ..., 3`.
pub fn default_r_grid() -> Vec<f64> {
    (0..13).map(|k| -3.0 + 0.5 * k as f64).collect()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: default_n(),
            r: None,
            rho: None,
            trials: default_trials(),
            seed: 0,
            sampler: default_sampler(),
        }
    }
}

impl Default for OmegaConfig {
    fn default() -> Self {
        OmegaConfig {
            method: default_method(),
            trials: default_omega_trials(),
            horizon: default_horizon(),
            delta: default_delta(),
            seed: 0,
            cross_check: false,
            cache: None,
        }
    }
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            step: default_step(),
            theta_bar_policy: default_policy(),
            touch_floor: default_touch_floor(),
            time_tolerance: default_time_tolerance(),
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { format: default_format(), path: default_path(), dump_traces: false }
    }
}

/// One point of the `(n, r)` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: u64,
    pub r: f64,
    pub rho: f64,
}

impl Config {
    /// Parses and validates; whole-line `//` comments are dropped first.
    pub fn parse(text: &str) -> CliResult<Config> {
        let stripped: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with("//"))
            .collect::<Vec<_>>()
            .join("\n");
        let mut cfg: Config = serde_json::from_str(&stripped).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.run.r.is_none() && cfg.run.rho.is_none() {
            cfg.run.r = Some(default_r_grid());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> CliResult<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn degree_spec(&self) -> CliResult<DegreeSpec> {
        let mut pairs = Vec::new();
        for (k, &w) in &self.ensemble.v0 {
            let j: usize = k.parse().map_err(|_| CliError::Config(format!("v0 key {k:?} is not a degree")))?;
            pairs.push((j, w));
        }
        DegreeSpec::new(self.ensemble.max_degree, &pairs).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn analysis_settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            step: self.ode.step,
            epsilon: self.ensemble.epsilon,
            touch_floor: self.ode.touch_floor,
            time_tolerance: self.ode.time_tolerance,
            theta_bar: match self.ode.theta_bar_policy {
                ThetaBarPolicy::Midpoint => None,
                ThetaBarPolicy::Fixed(t) => Some(t),
            },
        }
    }

    pub fn mc_settings(&self) -> McSettings {
        McSettings {
            trials: self.omega.trials,
            horizon: self.omega.horizon,
            step: self.omega.delta,
            seed: self.omega.seed,
            drift: true,
            two_sided: true,
        }
    }

    /// Grid points in `n`-major order.
    pub fn grid(&self, rho_c: f64) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &n in &self.run.n {
            let s = (n as f64).sqrt();
            match (&self.run.r, &self.run.rho) {
                (Some(rs), _) => out.extend(rs.iter().map(|&r| GridPoint { n, r, rho: rho_c + r / s })),
                (None, Some(rhos)) => out.extend(rhos.iter().map(|&rho| GridPoint { n, r: (rho - rho_c) * s, rho })),
                (None, None) => {}
            }
        }
        out
    }

    /// `--seed` replaces both the simulation and the Omega seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.run.seed = seed;
        self.omega.seed = seed;
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.degree_spec()?;
        let e = self.ensemble.epsilon;
        if !(e > 0.0 && e < 0.5) {
            return bad(format!("ensemble.epsilon = {e} must lie in (0, 0.5)"));
        }
        if self.run.n.is_empty() || self.run.n.contains(&0) {
            return bad("run.n must be a nonempty list of positive sizes".into());
        }
        match (&self.run.r, &self.run.rho) {
            (Some(_), Some(_)) => return bad("give either run.r or run.rho, not both".into()),
            (Some(g), None) | (None, Some(g)) if g.is_empty() || g.iter().any(|x| !x.is_finite()) => {
                return bad("the r or rho grid must be a nonempty list of finite numbers".into())
            }
            _ => {}
        }
        if let Some(rhos) = &self.run.rho {
            if rhos.iter().any(|&x| x <= 0.0) {
                return bad("run.rho entries must be positive".into());
            }
        }
        if self.run.trials < 100 {
            return bad(format!("run.trials = {} < 100", self.run.trials));
        }
        let o = &self.omega;
        let mc_used = o.method == OmegaMethod::Mc || o.cross_check;
        if mc_used && (o.horizon < 4.0 || !(o.delta > 0.0 && o.delta <= 1e-3) || o.trials < 10_000) {
            return bad(format!(
                "omega Monte Carlo needs T >= 4, 0 < delta <= 1e-3 and trials >= 1e4; got T = {}, delta = {}, trials = {}",
                o.horizon, o.delta, o.trials
            ));
        }
        if !(self.ode.step > 0.0 && self.ode.step <= 1e-2) {
            return bad(format!("ode.step = {} must lie in (0, 1e-2]", self.ode.step));
        }
        if !(self.ode.touch_floor > 0.0 && self.ode.time_tolerance > 0.0) {
            return bad("ode tolerances must be positive".into());
        }
        if let ThetaBarPolicy::Fixed(t) = self.ode.theta_bar_policy {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("fixed theta_bar = {t} must lie in (0, 1)"));
            }
        }
        if self.output.path.is_empty() {
            return bad("output.path is empty".into());
        }
        Ok(())
    }
}
