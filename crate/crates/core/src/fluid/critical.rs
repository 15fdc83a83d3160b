//! Critical times: tangential touches of the trajectory with a face.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{second_derivative, ChainModel, FluidGrids};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalTime {
    pub theta_c: f64,
    pub face_index: usize,
    pub y_at: Vec<f64>,
    /// `y''(theta_c) = A(y) F(y)`.
    pub ypp_at: Vec<f64>,
    /// `m . y(theta_c) - g`.
    pub touch: f64,
    /// `m . y'(theta_c)`.
    pub velocity: f64,
    /// `m . y''(theta_c)`.
    pub curvature: f64,
    /// Smallest slack of the other faces at `theta_c`.
    pub slack: f64,
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Scans every face for local minima of its slack that come within
/// `tol_touch` of zero, refines them and checks the tangency conditions.
pub fn find_critical_times(model: &dyn ChainModel, grids: &FluidGrids, tol_touch: f64) -> Result<Vec<CriticalTime>> {
    let faces = model.faces();
    let last = grids.theta.len() - 1;
    let mut found: Vec<CriticalTime> = Vec::new();
    for (j, face) in faces.iter().enumerate() {
        let slack: Vec<f64> = grids.y.iter().map(|y| face.slack(y)).collect();
        for k in 1..last {
            if !(slack[k] <= slack[k - 1] && slack[k] <= slack[k + 1]) {
                continue;
            }
            if slack[k] > 10.0 * tol_touch + grids.step * grids.step {
                continue;
            }
            let (a, b) = (grids.theta[k - 1], grids.theta[k + 1]);
            let s = |t: f64| face.slack(&grids.y_at(t));
            let v = |t: f64| face.normal.dot(&model.drift(&grids.y_at(t)).unwrap_or_else(|_| DVector::zeros(model.dim())));
            let mut t = golden_min(s, a, b, 1e-12);
            // polish on the sign change of the normal velocity
            if v(a) < 0.0 && v(b) > 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if v(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                t = 0.5 * (lo + hi);
            }
            let touch = s(t);
            if touch.abs() > tol_touch {
                if touch < -tol_touch {
                    return Err(Error::ExitedDomain { theta: t, face: j, slack: touch });
                }
                continue;
            }
            // neighbouring grid minima of the same touch are merged
            if found.iter().any(|c| c.face_index == j && (c.theta_c - t).abs() < 2.0 * grids.step) {
                continue;
            }
            let y = grids.y_at(t);
            let velocity = v(t);
            let ypp = second_derivative(model, t, grids)?;
            let curvature = face.normal.dot(&ypp);
            let other = faces
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, f)| f.slack(&y))
                .fold(f64::INFINITY, f64::min);
            found.push(CriticalTime {
                theta_c: t,
                face_index: j,
                y_at: y.iter().copied().collect(),
                ypp_at: ypp.iter().copied().collect(),
                touch,
                velocity,
                curvature,
                slack: other,
            });
        }
    }
    found.sort_by(|a, b| a.theta_c.total_cmp(&b.theta_c));
    for (i, c) in found.iter().enumerate() {
        if !(c.curvature > 0.0) {
            return Err(Error::TangencyViolation(format!(
                "critical time {i} at theta = {} has m . y'' = {}",
                c.theta_c, c.curvature
            )));
        }
        if c.velocity.abs() > 1e-6 {
            return Err(Error::TangencyViolation(format!(
                "critical time {i} at theta = {} has normal velocity {}",
                c.theta_c, c.velocity
            )));
        }
        if !(c.slack > tol_touch) {
            return Err(Error::TangencyViolation(format!(
                "critical time {i} at theta = {} touches a second face (slack {})",
                c.theta_c, c.slack
            )));
        }
    }
    for w in found.windows(2) {
        if (w[1].theta_c - w[0].theta_c).abs() < 2.0 * grids.step {
            return Err(Error::TangencyViolation(format!(
                "faces {} and {} touch at the same time {}",
                w[0].face_index, w[1].face_index, w[0].theta_c
            )));
        }
    }
    Ok(found)
}
