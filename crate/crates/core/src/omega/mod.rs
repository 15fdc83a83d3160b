//! The constant `Omega = -E inf_t (W(t) + t^2/2)` for two-sided Brownian motion `W`.
//!
//! Two routes: the Airy integral `Omega = int_0^inf [1 - K(z)^2] dz`, and a
//! Monte Carlo of the path minimum ([`mc`]).

pub mod airy;
pub mod mc;
pub mod quad;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_3;

use crate::error::{Error, Result};
use airy::airy_ai;

pub use mc::{omega_mc, sample_minima, McSettings};

/// Integrand magnitude below which the `y` tails of `K` are dropped.
pub const TAIL_TARGET: f64 = 1e-12;
/// Largest `|y|` tried before giving up on the tail.
pub const Y_MAX: f64 = 40.0;
/// Largest admissible imaginary part of `K`.
pub const IMAG_TOL: f64 = 1e-8;
/// End of the explicit quadrature in `z`; the rest is extrapolated.
pub const Z_SPLIT: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub value: f64,
    /// Half-width of a 95% interval (Monte Carlo) or the quadrature error bound.
    pub ci95: f64,
    pub method: String,
    pub settings: OmegaSettings,
}

/// How an [`OmegaEstimate`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaSettings {
    Airy { z_split: f64, tail: f64, panels: usize },
    MonteCarlo { trials: u64, horizon: f64, step: f64, seed: u64 },
}

/// `Ai(w) + i Bi(w) = 2 e^{i pi/3} Ai(w e^{-2 pi i/3})`, recessive in the upper half plane.
fn s_plus(w: C) -> Result<C> {
    Ok(C::from_polar(2.0, FRAC_PI_3) * airy_ai(w * C::from_polar(1.0, -2.0 * FRAC_PI_3))?.0)
}

/// `Ai(w) - i Bi(w) = 2 e^{-i pi/3} Ai(w e^{2 pi i/3})`, recessive in the lower half plane.
fn s_minus(w: C) -> Result<C> {
    Ok(C::from_polar(2.0, -FRAC_PI_3) * airy_ai(w * C::from_polar(1.0, 2.0 * FRAC_PI_3))?.0)
}

/// Integrand of `K` at `y`, for shift `c = 2^{1/3} z`:
/// `Bi(c+iy) - Ai(c+iy) Bi(iy) / Ai(iy)`.
///
/// Written through the recessive combinations so that nothing cancels:
/// for `y >= 0`, `Bi = i Ai - i S+`, giving `-i S+(c+iy) + i Ai(c+iy) S+(iy) / Ai(iy)`;
/// for `y < 0`, `Bi = -i Ai + i S-`, giving the mirror expression.
pub fn k_integrand(c: f64, y: f64) -> Result<C> {
    let i = C::new(0.0, 1.0);
    let w = C::new(c, y);
    let iy = C::new(0.0, y);
    let ratio = airy_ai(w)?.0 / airy_ai(iy)?.0;
    if y >= 0.0 {
        Ok(-i * s_plus(w)? + i * ratio * s_plus(iy)?)
    } else {
        Ok(i * s_minus(w)? - i * ratio * s_minus(iy)?)
    }
}

/// Direct form of the integrand, for cross-checks at moderate `|y|` only.
pub fn k_integrand_direct(c: f64, y: f64) -> Result<C> {
    let a = airy::airy(C::new(0.0, y))?;
    let b = airy::airy(C::new(c, y))?;
    Ok((a.ai * b.bi - b.ai * a.bi) / a.ai)
}

/// Smallest half-width `Y` (in steps of 1/2) beyond which the integrand stays below [`TAIL_TARGET`].
fn tail_cutoff(c: f64) -> Result<f64> {
    let mut y = 2.0;
    while y <= Y_MAX {
        let small = [y, y + 0.5, y + 1.0]
            .iter()
            .map(|&t| Ok(k_integrand(c, t)?.norm().max(k_integrand(c, -t)?.norm())))
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .all(|&m| m < TAIL_TARGET);
        if small {
            return Ok(y);
        }
        y += 0.5;
    }
    Err(Error::Truncation { y_max: Y_MAX, magnitude: k_integrand(c, Y_MAX)?.norm() })
}

/// `K(z) = 1/2 int K-integrand dy` and its imaginary part.
pub fn kernel_k_complex(z: f64) -> Result<C> {
    if !(0.0..=Z_SPLIT).contains(&z) {
        return Err(Error::Domain(format!("K(z) needs 0 <= z <= {Z_SPLIT}, got {z}")));
    }
    let c = 2f64.cbrt() * z;
    let y_max = tail_cutoff(c)?;
    let upper = quad::integrate(|y| k_integrand(c, y), 0.0, y_max, 1e-14, 1e-13, 400)?;
    let lower = quad::integrate(|y| k_integrand(c, y), -y_max, 0.0, 1e-14, 1e-13, 400)?;
    Ok((upper.value + lower.value) * 0.5)
}

/// Real part of `K(z)`, after checking the imaginary parts cancel.
pub fn kernel_k(z: f64) -> Result<f64> {
    let k = kernel_k_complex(z)?;
    if k.im.abs() > IMAG_TOL {
        return Err(Error::Convergence(format!("K({z}) has imaginary part {}", k.im)));
    }
    Ok(k.re)
}

/// `P(V <= -z) = 1 - K(z)^2`.
pub fn tail_probability(z: f64) -> Result<f64> {
    let k = kernel_k(z)?;
    Ok(1.0 - k * k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaAiry {
    pub value: f64,
    pub quadrature_error: f64,
    /// Extrapolated contribution of `z > Z_SPLIT`.
    pub tail: f64,
    pub panels: usize,
    /// `(z, 1 - K(z)^2)` at every quadrature node, ascending in `z`.
    pub integrand: Vec<(f64, f64)>,
}

/// `Omega` by adaptive quadrature on `[0, Z_SPLIT]` plus an exponential tail fitted at the end.
pub fn omega_airy_detailed() -> Result<OmegaAiry> {
    let r = quad::integrate(|z| tail_probability(z).map(|v| C::new(v, 0.0)), 0.0, Z_SPLIT, 1e-11, 1e-11, 200)?;
    let integrand: Vec<(f64, f64)> = r.samples.iter().map(|(z, v)| (*z, v.re)).collect();
    let end = tail_probability(Z_SPLIT)?;
    let before = tail_probability(Z_SPLIT - 0.5)?;
    // decay rate from the last half unit; the tail is integrated in closed form
    let tail = if end > 0.0 && before > end {
        let rate = (before / end).ln() / 0.5;
        end / rate
    } else {
        0.0
    };
    Ok(OmegaAiry { value: r.value.re + tail, quadrature_error: r.error, tail, panels: r.intervals, integrand })
}

pub fn omega_airy() -> Result<OmegaEstimate> {
    let d = omega_airy_detailed()?;
    Ok(OmegaEstimate {
        value: d.value,
        ci95: d.quadrature_error + d.tail,
        method: "airy".into(),
        settings: OmegaSettings::Airy { z_split: Z_SPLIT, tail: d.tail, panels: d.panels },
    })
}
