//! The 2-core peeling chain as a [`ChainModel`], and its closed-form fluid limit.
//!
//! Coordinates are `(x_1, x_2, v_j for each active degree j)`; degrees with
//! zero weight stay at zero along the whole trajectory and are dropped.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ChainModel, Face};
use crate::ensemble::{initial_mean_derivative, initial_moments, CriticalData, DegreeSpec};
use crate::error::{Error, Result};
use crate::kernel::{trunc_exp, KernelParams, StateDensity};

/// Index of the exit face `x_1 >= 0` in [`HypergraphModel::faces`].
pub const EXIT_FACE: usize = 0;

pub struct HypergraphModel {
    spec: DegreeSpec,
    rho_c: f64,
    epsilon: f64,
    active: Vec<usize>,
    faces: Vec<Face>,
}

impl HypergraphModel {
    /// Model at the threshold `rho_c`, with domain margin `epsilon`.
    pub fn new(spec: &DegreeSpec, rho_c: f64, epsilon: f64) -> Self {
        let active = spec.active_degrees();
        let dim = 2 + active.len();
        let mut faces = Vec::new();
        let mut e1 = DVector::zeros(dim);
        e1[0] = 1.0;
        faces.push(Face::new(e1, 0.0));
        let mut e2 = DVector::zeros(dim);
        e2[1] = 1.0;
        faces.push(Face::new(e2, epsilon));
        // d(v) - x_1 - 2 x_2 >= epsilon
        let mut socket = DVector::zeros(dim);
        socket[0] = -1.0;
        socket[1] = -2.0;
        for (i, &j) in active.iter().enumerate() {
            socket[2 + i] = j as f64;
        }
        faces.push(Face::new(socket, epsilon));
        HypergraphModel { spec: spec.clone(), rho_c, epsilon, active, faces }
    }

    pub fn rho_c(&self) -> f64 {
        self.rho_c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn active_degrees(&self) -> &[usize] {
        &self.active
    }

    /// Full kernel state for reduced coordinates.
    pub fn state(&self, x: &DVector<f64>) -> StateDensity {
        let mut v = vec![0.0; self.spec.max_degree() - 2];
        for (i, &j) in self.active.iter().enumerate() {
            v[j - 3] = x[2 + i];
        }
        StateDensity::new(vec![x[0], x[1]], v)
    }

    fn reduce_vector(&self, full: &DVector<f64>) -> DVector<f64> {
        let idx = self.indices();
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| full[i]))
    }

    fn indices(&self) -> Vec<usize> {
        let mut idx = vec![0, 1];
        idx.extend(self.active.iter().map(|&j| j - 1));
        idx
    }

    /// Closed-form trajectory in reduced coordinates at offset `rho` from `rho_c`.
    pub fn closed_form(&self, rho: f64, theta: f64) -> Result<DVector<f64>> {
        let c = closed_form_solution(&self.spec, self.rho_c + rho, theta, self.epsilon)?;
        let mut out = vec![c.u[0], c.u[1]];
        out.extend(self.active.iter().map(|&j| c.v[j - 3]));
        Ok(DVector::from_vec(out))
    }
}

impl ChainModel for HypergraphModel {
    fn dim(&self) -> usize {
        2 + self.active.len()
    }

    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.reduce_vector(&KernelParams::new(&self.state(x))?.drift()))
    }

    fn covariance(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let full = KernelParams::new(&self.state(x))?.covariance();
        let idx = self.indices();
        Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])]))
    }

    fn initial_state(&self, rho: f64) -> Result<DVector<f64>> {
        let m = initial_moments(self.spec.mean_degree(), self.rho_c + rho, self.epsilon)?;
        let mut y = vec![m.u[0], m.u[1]];
        y.extend(self.active.iter().map(|&j| self.spec.weight(j)));
        Ok(DVector::from_vec(y))
    }

    fn initial_state_derivative(&self) -> DVector<f64> {
        let d = initial_mean_derivative(self.spec.mean_degree(), self.rho_c);
        let mut y = DVector::zeros(self.dim());
        y[0] = d[0];
        y[1] = d[1];
        y
    }

    fn initial_covariance(&self, rho: f64) -> Result<DMatrix<f64>> {
        let m = initial_moments(self.spec.mean_degree(), self.rho_c + rho, self.epsilon)?;
        let mut q = DMatrix::zeros(self.dim(), self.dim());
        for r in 0..2 {
            for c in 0..2 {
                q[(r, c)] = m.qhat[r][c];
            }
        }
        Ok(q)
    }

    fn faces(&self) -> &[Face] {
        &self.faces
    }
}

/// Closed-form fluid limit at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub zeta: f64,
    pub u: [f64; 2],
    /// Indexed by `j - 3`.
    pub v: Vec<f64>,
}

/// Inverts `theta(zeta) = int_zeta^1 V` by safeguarded Newton.
pub fn zeta_of_theta(spec: &DegreeSpec, theta: f64) -> Result<f64> {
    let total = spec.theta_of_zeta(0.0);
    if !(0.0..=total).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, {total}]")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut z = 1.0 - theta / total;
    for _ in 0..200 {
        let resid = spec.theta_of_zeta(z) - theta;
        // theta(zeta) is decreasing
        if resid > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        if resid.abs() <= 1e-16 * theta.max(1e-300) || hi - lo < 1e-16 {
            return Ok(z);
        }
        let slope = -spec.gen_v_unchecked(z).value;
        let step = if slope != 0.0 { z - resid / slope } else { f64::NAN };
        z = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Ok(z)
}

/// `u_1 = h (zeta - 1 + e^{-h/rho})`, `u_2 = rho e^{-h/rho} e_2(h/rho)`,
/// `v_j = v0(j) zeta^j` with `h = V(zeta)`.
pub fn closed_form_solution(spec: &DegreeSpec, rho: f64, theta: f64, epsilon: f64) -> Result<ClosedForm> {
    if !(rho >= epsilon && rho <= 1.0 / epsilon) {
        return Err(Error::Domain(format!("rho = {rho} outside [{epsilon}, {}]", 1.0 / epsilon)));
    }
    let zeta = zeta_of_theta(spec, theta)?;
    let h = spec.gen_v_unchecked(zeta).value;
    let e = (-h / rho).exp();
    let u1 = h * (zeta - 1.0 + e);
    let u2 = rho * e * trunc_exp(2, h / rho)?;
    let v = (3..=spec.max_degree()).map(|j| spec.weight(j) * zeta.powi(j as i32)).collect();
    Ok(ClosedForm { zeta, u: [u1, u2], v })
}

/// End of the integration window: midway between the last critical time and
/// `theta(1e-6)`, where `d(v)` is about to degenerate.
pub fn theta_bar(spec: &DegreeSpec, critical: &CriticalData) -> f64 {
    let last = critical.zetas.first().map(|&z| spec.theta_of_zeta(z)).unwrap_or(0.0);
    0.5 * (last + spec.theta_of_zeta(1e-6))
}

/// Critical times predicted by the tangency set: `theta(zeta_{N+1-i})`, ascending.
pub fn predicted_critical_times(spec: &DegreeSpec, critical: &CriticalData) -> Vec<f64> {
    critical.zetas.iter().rev().map(|&z| spec.theta_of_zeta(z)).collect()
}
