//! Airy functions of complex argument.
//!
//! `Ai` is evaluated by its Maclaurin series near the origin, by the
//! asymptotic expansion for `|z| >= ASYMPTOTIC_RADIUS`, and in between by
//! Taylor-series continuation of `w'' = z w` along the ray through `z`. The
//! continuation always runs in the direction in which `Ai` is not recessive:
//! inward from the asymptotic circle when `|arg z| < pi/3`, outward from the
//! series disc otherwise. `Bi` follows from two rotated `Ai` values.

use num_complex::Complex64 as C;
use std::f64::consts::{FRAC_PI_3, PI};

use crate::error::{Error, Result};

/// `Ai(0) = 3^{-2/3} / Gamma(2/3)`.
pub const AI0: f64 = 0.355_028_053_887_817_2;
/// `-Ai'(0) = 3^{-1/3} / Gamma(1/3)`.
pub const AIP0: f64 = 0.258_819_403_792_806_8;

/// Largest modulus accepted.
pub const MAX_MODULUS: f64 = 60.0;
const ASYMPTOTIC_RADIUS: f64 = 10.0;
/// Series radius where `Ai` is recessive.
const SERIES_RADIUS_RECESSIVE: f64 = 2.0;
/// Series radius elsewhere.
const SERIES_RADIUS: f64 = 6.0;
const MAX_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airy {
    pub ai: C,
    pub aip: C,
    pub bi: C,
    pub bip: C,
}

fn omega() -> C {
    C::from_polar(1.0, 2.0 * FRAC_PI_3)
}

/// `(Ai(z), Bi(z))` with derivatives.
pub fn airy(z: C) -> Result<Airy> {
    let (ai, aip) = airy_ai(z)?;
    let w = omega();
    let wc = w.conj();
    let (a1, a1p) = airy_ai(w * z)?;
    let (a2, a2p) = airy_ai(wc * z)?;
    let e = C::from_polar(1.0, PI / 6.0);
    let bi = e * a1 + e.conj() * a2;
    let bip = e * w * a1p + e.conj() * wc * a2p;
    Ok(Airy { ai, aip, bi, bip })
}

/// `(Ai(z), Ai'(z))`.
pub fn airy_ai(z: C) -> Result<(C, C)> {
    let r = z.norm();
    if !r.is_finite() || r > MAX_MODULUS {
        return Err(Error::Domain(format!("Airy argument |z| = {r} exceeds {MAX_MODULUS}")));
    }
    let recessive = z.arg().abs() < FRAC_PI_3;
    if r >= ASYMPTOTIC_RADIUS {
        return Ok(asymptotic_any(z));
    }
    if recessive {
        if r <= SERIES_RADIUS_RECESSIVE {
            return Ok(maclaurin(z).0);
        }
        let start = z * (ASYMPTOTIC_RADIUS / r);
        let (w, wp) = asymptotic(start);
        return Ok(continue_along(start, w, wp, z));
    }
    if r <= SERIES_RADIUS {
        return Ok(maclaurin(z).0);
    }
    let start = z * (SERIES_RADIUS / r);
    let (w, wp) = maclaurin(start).0;
    Ok(continue_along(start, w, wp, z))
}

/// Maclaurin series; also returns `Bi` and `Bi'` since they come for free.
pub(crate) fn maclaurin(z: C) -> ((C, C), (C, C)) {
    let z3 = z * z * z;
    let one = C::new(1.0, 0.0);
    let (mut f, mut fp, mut g, mut gp) = (one, C::new(0.0, 0.0), z, one);
    let (mut tf, mut tg, mut tgp) = (one, z, one);
    let mut tfp = z * z * 0.5;
    fp += tfp;
    for k in 1..200 {
        let kf = k as f64;
        tf = tf * z3 / ((3.0 * kf - 1.0) * 3.0 * kf);
        tg = tg * z3 / (3.0 * kf * (3.0 * kf + 1.0));
        tgp = tgp * z3 / (3.0 * kf * (3.0 * kf - 2.0));
        f += tf;
        g += tg;
        gp += tgp;
        if k >= 2 {
            tfp = tfp * z3 / ((3.0 * kf - 1.0) * 3.0 * (kf - 1.0));
            fp += tfp;
        }
        let scale = f.norm() + g.norm() + fp.norm() + gp.norm();
        if tf.norm() + tg.norm() + tfp.norm() + tgp.norm() <= 1e-17 * scale {
            break;
        }
    }
    let ai = f * AI0 - g * AIP0;
    let aip = fp * AI0 - gp * AIP0;
    let s3 = 3f64.sqrt();
    let bi = (f * AI0 + g * AIP0) * s3;
    let bip = (fp * AI0 + gp * AIP0) * s3;
    ((ai, aip), (bi, bip))
}

/// Asymptotic expansion, valid for `|arg z| <= 2 pi / 3` and large `|z|`.
fn asymptotic(z: C) -> (C, C) {
    let zeta = z.powf(1.5) * (2.0 / 3.0);
    let inv = 1.0 / zeta;
    let (mut su, mut sv) = (C::new(1.0, 0.0), C::new(1.0, 0.0));
    let mut u = 1.0;
    let mut pow = C::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..100 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / (216.0 * kf * (2.0 * kf - 1.0));
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        pow = -pow * inv;
        let tu = pow * u;
        let size = tu.norm();
        // stop at the smallest term of the divergent series
        if size > last {
            break;
        }
        su += tu;
        sv += pow * v;
        last = size;
        if size < 1e-17 {
            break;
        }
    }
    let pre = (-zeta).exp() / (2.0 * PI.sqrt());
    let q = z.powf(0.25);
    (pre / q * su, -pre * q * sv)
}

/// Asymptotic expansion in every sector, through the connection formula
/// `Ai(z) = -w Ai(w z) - w^2 Ai(w^2 z)` when `|arg z| > 2 pi / 3`.
fn asymptotic_any(z: C) -> (C, C) {
    if z.arg().abs() <= 2.0 * FRAC_PI_3 {
        return asymptotic(z);
    }
    let w = omega();
    let wc = w.conj();
    let (a1, a1p) = asymptotic(w * z);
    let (a2, a2p) = asymptotic(wc * z);
    (-w * a1 - wc * a2, -w * w * a1p - wc * wc * a2p)
}

/// Taylor step of `w'' = z w` from `z0` by `h`.
fn taylor_step(z0: C, w: C, wp: C, h: C) -> (C, C) {
    let (mut a0, mut a1) = (w, wp);
    let mut a_prev = C::new(0.0, 0.0); // a_{k-1} for k = 0
    let mut hp = C::new(1.0, 0.0); // h^k
    let mut sum = w;
    let mut dsum = wp;
    // coefficients a_k, a_{k+1}; a_{k+2} = (z0 a_k + a_{k-1}) / ((k+1)(k+2))
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let a2 = (z0 * a0 + a_prev) / ((kf + 1.0) * (kf + 2.0));
        let hk1 = hp * h; // h^{k+1}
        let hk2 = hk1 * h; // h^{k+2}
        if k == 0 {
            sum += a1 * hk1;
        }
        sum += a2 * hk2;
        dsum += a2 * hk1 * (kf + 2.0);
        let size = (a2 * hk2).norm();
        a_prev = a0;
        a0 = a1;
        a1 = a2;
        hp = hk1;
        k += 1;
        if (k > 6 && size <= 1e-18 * sum.norm().max(1e-300)) || k > 200 {
            break;
        }
    }
    (sum, dsum)
}

fn continue_along(from: C, w: C, wp: C, to: C) -> (C, C) {
    let dist = (to - from).norm();
    let steps = (dist / MAX_STEP).ceil().max(1.0) as usize;
    let h = (to - from) / steps as f64;
    let (mut z0, mut a, mut ap) = (from, w, wp);
    for _ in 0..steps {
        let (na, nap) = taylor_step(z0, a, ap, h);
        z0 += h;
        a = na;
        ap = nap;
    }
    (a, ap)
}
