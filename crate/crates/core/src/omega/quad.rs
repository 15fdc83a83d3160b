//! Adaptive 7/15-point Gauss-Kronrod quadrature.

use num_complex::Complex64 as C;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: C,
    pub error: f64,
    pub intervals: usize,
    /// Every abscissa and integrand value, sorted by abscissa.
    pub samples: Vec<(f64, C)>,
}

struct Panel {
    a: f64,
    b: f64,
    value: C,
    error: f64,
}

fn panel(f: &mut impl FnMut(f64) -> Result<C>, a: f64, b: f64, samples: &mut Vec<(f64, C)>) -> Result<Panel> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    samples.push((c, fc));
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x)?, f(c + x)?);
        samples.push((c - x, f1));
        samples.push((c + x, f2));
        kron += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    Ok(Panel { a, b, value: kron * h, error: ((kron - gauss) * h).norm() })
}

/// Integrates `f` over `[a, b]`, bisecting the panel with the largest error
/// estimate until the total is within `max(abs_tol, rel_tol |I|)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> Result<C>,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let mut samples = Vec::new();
    let mut panels = vec![panel(&mut f, a, b, &mut samples)?];
    loop {
        let value: C = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= abs_tol.max(rel_tol * value.norm()) {
            samples.sort_by(|x, y| x.0.total_cmp(&y.0));
            return Ok(QuadResult { value, error, intervals: panels.len(), samples });
        }
        if panels.len() >= max_panels {
            return Err(Error::Convergence(format!(
                "quadrature on [{a}, {b}] has error {error} after {max_panels} panels"
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(panel(&mut f, p.a, mid, &mut samples)?);
        panels.push(panel(&mut f, mid, p.b, &mut samples)?);
    }
}

/// Real-valued convenience wrapper.
pub fn integrate_real(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<(f64, f64, Vec<(f64, f64)>)> {
    let r = integrate(|x| f(x).map(|v| C::new(v, 0.0)), a, b, abs_tol, rel_tol, max_panels)?;
    Ok((r.value.re, r.error, r.samples.into_iter().map(|(x, v)| (x, v.re)).collect()))
}
