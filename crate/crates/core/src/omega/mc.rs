//! Monte Carlo for `V = inf_t X(t)`, `X(t) = W(t) + t^2/2` on `[-T, T]`.
//!
//! The path is sampled on a grid of step `delta`. Given the grid values, the
//! minimum inside each cell is that of a Brownian bridge with linear drift,
//! and `P(min > m) = prod_k (1 - exp(-2 (x_k - m)(x_{k+1} - m) / delta))`
//! for `m` below every grid value. The exact path minimum is drawn by
//! inverting that product at a single uniform.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OmegaEstimate, OmegaSettings};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::stats::mean_ci;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub trials: u64,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    /// Include the `t^2/2` drift; off only for calibration against pure Brownian motion.
    pub drift: bool,
    /// Sample `[-T, T]`; otherwise `[0, T]`.
    pub two_sided: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { trials: 200_000, horizon: 5.0, step: 2e-4, seed: 0, drift: true, two_sided: true }
    }
}

/// Exponent beyond which a cell cannot hold the minimum.
const IRRELEVANT: f64 = 60.0;

/// Minimum of the path interpolated by Brownian bridges through `x` (grid step `delta`).
fn bridge_minimum(x: &[f64], delta: f64, u: f64) -> f64 {
    let grid_min = x.iter().copied().fold(f64::INFINITY, f64::min);
    // P(min < lo) <= cells * exp(-50): nothing to resolve below
    let lo = grid_min - 5.0 * delta.sqrt();
    // the exponent is smallest at m = grid_min, so this drops only cells that never matter
    let cells: Vec<(f64, f64)> = x
        .windows(2)
        .filter(|w| 2.0 * (w[0] - grid_min) * (w[1] - grid_min) / delta < IRRELEVANT)
        .map(|w| (w[0], w[1]))
        .collect();
    let log_survival = |m: f64| -> f64 {
        cells.iter().map(|&(a, b)| (-(-2.0 * (a - m) * (b - m) / delta).exp()).ln_1p()).sum()
    };
    let target = u.ln();
    let (mut a, mut b) = (lo, grid_min);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        // survival decreases in m; the minimum sits where it equals u
        if log_survival(mid) > target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// One draw of `V` from its own stream.
pub fn sample_minimum(rng: &mut ChaCha8Rng, s: &McSettings, buf: &mut Vec<f64>) -> f64 {
    let cells = (s.horizon / s.step).round() as usize;
    let delta = s.horizon / cells as f64;
    let sd = delta.sqrt();
    let drift = |t: f64| if s.drift { 0.5 * t * t } else { 0.0 };
    buf.clear();
    buf.resize(if s.two_sided { 2 * cells + 1 } else { cells + 1 }, 0.0);
    let origin = if s.two_sided { cells } else { 0 };
    let (mut right, mut left) = (0.0f64, 0.0f64);
    // increments alternate right and left so both halves come from one stream
    for k in 1..=cells {
        let t = k as f64 * delta;
        let zr: f64 = rng.sample(StandardNormal);
        right += sd * zr;
        buf[origin + k] = right + drift(t);
        if s.two_sided {
            let zl: f64 = rng.sample(StandardNormal);
            left += sd * zl;
            buf[origin - k] = left + drift(t);
        }
    }
    let u: f64 = rng.random();
    // u = 0 has probability 2^-53; map it away from the log singularity
    bridge_minimum(buf, delta, u.max(f64::MIN_POSITIVE))
}

/// Draws of `V`, ordered by trial index and independent of the thread count.
pub fn sample_minima(s: &McSettings) -> Result<Vec<f64>> {
    if !(s.horizon > 0.0 && s.step > 0.0 && s.step <= s.horizon) {
        return Err(Error::Domain(format!("horizon {} and step {} must be positive", s.horizon, s.step)));
    }
    Ok((0..s.trials)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| sample_minimum(&mut stream(s.seed, Purpose::Omega, i), s, buf))
        .collect())
}

/// `Omega = -E V` by Monte Carlo, with a normal 95% interval.
pub fn omega_mc(s: &McSettings) -> Result<OmegaEstimate> {
    if s.horizon < 4.0 || s.step > 1e-3 || s.trials < 10_000 || !s.drift || !s.two_sided {
        return Err(Error::Domain(format!(
            "Omega Monte Carlo needs T >= 4, step <= 1e-3, at least 1e4 trials and the two-sided drifted path; got {s:?}"
        )));
    }
    let v = sample_minima(s)?;
    let (mean, half) = mean_ci(&v);
    Ok(OmegaEstimate {
        value: -mean,
        ci95: half,
        method: "monte_carlo".into(),
        settings: OmegaSettings::MonteCarlo { trials: s.trials, horizon: s.horizon, step: s.step, seed: s.seed },
    })
}
