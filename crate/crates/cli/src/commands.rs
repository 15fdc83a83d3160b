//! Command implementations. Each returns the report and the CSV it emits.

use std::path::Path;

use corescale::ensemble::{find_rho_c, EnsembleParams};
use corescale::fss::analyse_hypergraph;
use corescale::omega::{omega_airy, omega_mc, OmegaEstimate, OmegaSettings};
use corescale::peeling::{estimate_pnocore, replay_trial, PeelTrace};
use corescale::rng::splitmix64;

use crate::config::{Config, GridPoint, OmegaMethod};
use crate::error::{CliError, CliResult};
use crate::report::{
    join, omega_csv, predictions_csv, simulation_csv, waterfall_csv, CriticalSection, FluidDiagnostics, FssReport,
    OmegaSection, PredictionRow, SimulationRow,
};

/// Largest admissible gap between the two Omega routes, besides twice the interval.
pub const CROSS_CHECK_FLOOR: f64 = 1e-2;

pub struct Output {
    pub report: FssReport,
    /// File name and contents of the command's table.
    pub csv: (String, String),
    /// Extra files, e.g. dumped traces, relative to the output directory.
    pub extra: Vec<(String, String)>,
}

fn estimate(cfg: &Config, method: OmegaMethod) -> CliResult<OmegaEstimate> {
    Ok(match method {
        OmegaMethod::Mc => omega_mc(&cfg.mc_settings())?,
        OmegaMethod::Airy => omega_airy()?,
    })
}

fn wanted_settings(cfg: &Config, method: OmegaMethod) -> Option<OmegaSettings> {
    match method {
        OmegaMethod::Mc => {
            let s = cfg.mc_settings();
            Some(OmegaSettings::MonteCarlo { trials: s.trials, horizon: s.horizon, step: s.step, seed: s.seed })
        }
        // the quadrature has no free settings
        OmegaMethod::Airy => None,
    }
}

fn cached(cfg: &Config) -> Option<OmegaEstimate> {
    let text = std::fs::read_to_string(cfg.omega.cache.as_ref()?).ok()?;
    let e: OmegaEstimate = serde_json::from_str(&text).ok()?;
    let hit = match (cfg.omega.method, wanted_settings(cfg, cfg.omega.method)) {
        (OmegaMethod::Mc, Some(w)) => e.settings == w,
        (OmegaMethod::Airy, _) => matches!(e.settings, OmegaSettings::Airy { .. }),
        _ => false,
    };
    hit.then_some(e)
}

/// Omega by the configured method, through the cache, with the optional cross-check.
pub fn compute_omega(cfg: &Config) -> CliResult<OmegaSection> {
    let primary = match cached(cfg) {
        Some(e) => e,
        None => {
            let e = estimate(cfg, cfg.omega.method)?;
            if let Some(path) = &cfg.omega.cache {
                let text = serde_json::to_string(&e).map_err(|e| CliError::Config(e.to_string()))?;
                std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
            }
            e
        }
    };
    let cross_check = if cfg.omega.cross_check {
        let other = match cfg.omega.method {
            OmegaMethod::Mc => OmegaMethod::Airy,
            OmegaMethod::Airy => OmegaMethod::Mc,
        };
        let e = estimate(cfg, other)?;
        let tol = (2.0 * (primary.ci95 + e.ci95)).max(CROSS_CHECK_FLOOR);
        if (primary.value - e.value).abs() > tol {
            return Err(CliError::CrossCheck(format!("{} vs {} exceeds {tol}", primary.value, e.value)));
        }
        Some(e)
    } else {
        None
    };
    Ok(OmegaSection { estimate: primary, cross_check })
}

pub fn cmd_omega(cfg: &Config) -> CliResult<Output> {
    let mut report = FssReport::new(cfg, "omega");
    let o = compute_omega(cfg)?;
    let csv = omega_csv(&o);
    report.omega = Some(o);
    Ok(Output { report, csv: ("omega.csv".into(), csv), extra: Vec::new() })
}

fn predict_into(cfg: &Config, report: &mut FssReport) -> CliResult<Vec<GridPoint>> {
    let spec = cfg.degree_spec()?;
    let omega = compute_omega(cfg)?;
    let an = analyse_hypergraph(&spec, omega.estimate.value, &cfg.analysis_settings())?;
    let grid = cfg.grid(an.critical.rho_c);
    report.predictions = grid
        .iter()
        .map(|g| {
            let t = an.objects.predict(g.n, g.r);
            PredictionRow {
                n: g.n,
                r: g.r,
                rho: g.rho,
                p_leading: t.leading,
                correction: t.correction,
                p_corrected: t.p,
                clipped: t.clipped,
            }
        })
        .collect();
    report.critical = Some(CriticalSection {
        data: an.critical.clone(),
        fluid: Some(FluidDiagnostics {
            theta_bar: an.theta_bar,
            step: an.step,
            integration_error: an.integration_error,
            touch_tolerance: an.touch_tolerance,
            critical_times: an.critical_times.clone(),
            predicted_times: an.predicted_times.clone(),
        }),
    });
    report.fss = Some(an.objects);
    report.omega = Some(omega);
    Ok(grid)
}

pub fn cmd_predict(cfg: &Config) -> CliResult<Output> {
    let mut report = FssReport::new(cfg, "predict");
    predict_into(cfg, &mut report)?;
    let csv = predictions_csv(&report.predictions);
    Ok(Output { report, csv: ("predictions.csv".into(), csv), extra: Vec::new() })
}

/// Seed of grid cell `index`.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    let mut s = seed ^ (index as u64 + 1).wrapping_mul(0xa076_1d64_78bd_642f);
    splitmix64(&mut s)
}

fn cell_params(cfg: &Config, g: &GridPoint) -> CliResult<EnsembleParams> {
    Ok(EnsembleParams::new(cfg.degree_spec()?, g.n, g.rho)?)
}

fn simulate_into(cfg: &Config, report: &mut FssReport, grid: &[GridPoint]) -> CliResult<Vec<(String, String)>> {
    let mut extra = Vec::new();
    for (i, g) in grid.iter().enumerate() {
        let params = cell_params(cfg, g)?;
        let seed = cell_seed(cfg.run.seed, i);
        let r = estimate_pnocore(&params, cfg.run.trials, seed)?;
        report.simulation.push(SimulationRow {
            n: g.n,
            r: g.r,
            rho: g.rho,
            m: params.m,
            trials: r.trials,
            failures: r.failures,
            p_hat: r.p_nocore_hat,
            ci95: r.ci95,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            seed,
        });
        if cfg.output.dump_traces {
            for t in 0..cfg.run.trials {
                let trace = replay_trial(&params, seed, t, true)?;
                extra.push((format!("traces/cell{i}_trial{t}.csv"), trace_csv(&trace)));
            }
        }
    }
    Ok(extra)
}

fn threshold_section(cfg: &Config) -> CliResult<CriticalSection> {
    Ok(CriticalSection { data: find_rho_c(&cfg.degree_spec()?)?, fluid: None })
}

pub fn cmd_simulate(cfg: &Config) -> CliResult<Output> {
    let mut report = FssReport::new(cfg, "simulate");
    let critical = threshold_section(cfg)?;
    let grid = cfg.grid(critical.data.rho_c);
    report.critical = Some(critical);
    let extra = simulate_into(cfg, &mut report, &grid)?;
    let csv = simulation_csv(&report.simulation);
    Ok(Output { report, csv: ("simulation.csv".into(), csv), extra })
}

pub fn cmd_waterfall(cfg: &Config) -> CliResult<Output> {
    let mut report = FssReport::new(cfg, "waterfall");
    let grid = predict_into(cfg, &mut report)?;
    let extra = simulate_into(cfg, &mut report, &grid)?;
    let rows = join(&report.predictions, &report.simulation)?;
    Ok(Output { report, csv: ("waterfall.csv".into(), waterfall_csv(&rows)), extra })
}

pub fn trace_csv(trace: &PeelTrace) -> String {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("trace CSV is ASCII")
}

/// Replays trial `trial` of grid cell `cell` with the trajectory recorded.
pub fn cmd_trace(cfg: &Config, cell: usize, trial: u64) -> CliResult<Output> {
    let mut report = FssReport::new(cfg, "trace");
    let critical = threshold_section(cfg)?;
    let grid = cfg.grid(critical.data.rho_c);
    report.critical = Some(critical);
    let g = grid
        .get(cell)
        .ok_or_else(|| CliError::Config(format!("cell {cell} outside the {}-point grid", grid.len())))?;
    if trial >= cfg.run.trials {
        return Err(CliError::Config(format!("trial {trial} outside 0..{}", cfg.run.trials)));
    }
    let params = cell_params(cfg, g)?;
    let trace = replay_trial(&params, cell_seed(cfg.run.seed, cell), trial, true)?;
    Ok(Output { report, csv: (format!("trace_cell{cell}_trial{trial}.csv"), trace_csv(&trace)), extra: Vec::new() })
}

/// Writes `report.json`, the table and any extra files under `dir`.
pub fn write_output(out: &Output, dir: &Path) -> CliResult<()> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| CliError::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let json = out.report.to_json()?;
    let files = std::iter::once(("report.json".to_string(), json)).chain(std::iter::once(out.csv.clone())).chain(out.extra.iter().cloned());
    for (name, body) in files {
        let path = dir.join(&name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        std::fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}
