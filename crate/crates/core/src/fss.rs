//! Finite-size scaling objects `Sigma`, `Gamma`, `Lambda` and the two-term prediction
//! `Phi(r a) - b . grad Phi(r a) Omega n^{-1/6}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{find_rho_c, CriticalData, DegreeSpec};
use crate::error::{Error, Result};
use crate::fluid::hypergraph::{predicted_critical_times, theta_bar, HypergraphModel};
use crate::fluid::{find_critical_times, integrate_checked, second_derivative, ChainModel, CriticalTime, FluidGrids};
use crate::normal;

/// Relative eigenvalue floor below which `Sigma` counts as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

fn normal_of(model: &dyn ChainModel, c: &CriticalTime) -> DVector<f64> {
    model.faces()[c.face_index].normal.clone()
}

/// `Sigma_ij = m_i' Q(theta_i) B_{theta_i}(theta_j)' m_j` for `i <= j`, mirrored below.
pub fn build_sigma(model: &dyn ChainModel, grids: &FluidGrids, crits: &[CriticalTime]) -> Result<DMatrix<f64>> {
    let n = crits.len();
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        let mi = normal_of(model, &crits[i]);
        let q = grids.q_at(crits[i].theta_c);
        for j in i..n {
            let mj = normal_of(model, &crits[j]);
            let b = grids.b_between(crits[i].theta_c, crits[j].theta_c)?;
            let v = (mi.transpose() * &q * b.transpose() * mj)[(0, 0)];
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    check_nonsingular(&sigma)?;
    Ok(sigma)
}

fn check_nonsingular(sigma: &DMatrix<f64>) -> Result<()> {
    let trace = sigma.trace();
    let min = sigma.clone().symmetric_eigen().eigenvalues.min();
    if !(min > SINGULAR_TOL * trace) {
        return Err(Error::SingularSigma { min_eigenvalue: min, trace });
    }
    Ok(())
}

/// `Gamma_i = m_i' B_0(theta_i) dy_rho/drho`.
pub fn build_gamma(model: &dyn ChainModel, grids: &FluidGrids, crits: &[CriticalTime]) -> DVector<f64> {
    let dy = model.initial_state_derivative();
    DVector::from_iterator(
        crits.len(),
        crits.iter().map(|c| normal_of(model, c).dot(&(grids.b0_at(c.theta_c) * &dy))),
    )
}

/// `Lambda_i = (m . y'')^{-1/3} (m' G m)^{2/3}` at each critical time.
pub fn build_lambda(model: &dyn ChainModel, grids: &FluidGrids, crits: &[CriticalTime]) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(crits.len());
    for (i, c) in crits.iter().enumerate() {
        let m = normal_of(model, c);
        let curvature = m.dot(&second_derivative(model, c.theta_c, grids)?);
        if !(curvature > 0.0) {
            return Err(Error::NonpositiveCurvature { index: i, value: curvature });
        }
        let y = DVector::from_column_slice(&c.y_at);
        let variance = (m.transpose() * model.covariance(&y)? * &m)[(0, 0)].max(0.0);
        out[i] = lambda_entry(curvature, variance);
    }
    Ok(out)
}

pub fn lambda_entry(curvature: f64, variance: f64) -> f64 {
    curvature.powf(-1.0 / 3.0) * variance.powf(2.0 / 3.0)
}

/// Symmetric positive-definite inverse square root by eigendecomposition.
pub fn inv_sqrt_sym(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_nonsingular(sigma)?;
    let eig = sigma.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let root = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    Ok((&root + root.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FssObjects {
    /// Number of critical times.
    pub count: usize,
    /// Row-major.
    pub sigma: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub omega: f64,
}

impl FssObjects {
    pub fn from_parts(sigma: &DMatrix<f64>, gamma: &DVector<f64>, lambda: &DVector<f64>, omega: f64) -> Result<Self> {
        let n = gamma.len();
        if sigma.nrows() != n || sigma.ncols() != n || lambda.len() != n || n == 0 {
            return Err(Error::Domain(format!("inconsistent sizes for {n} critical times")));
        }
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("Omega = {omega} must be positive")));
        }
        let root = inv_sqrt_sym(sigma)?;
        let a = &root * gamma;
        let b = &root * lambda;
        Ok(FssObjects {
            count: n,
            sigma: (0..n).map(|i| sigma.row(i).iter().copied().collect()).collect(),
            gamma: gamma.iter().copied().collect(),
            lambda: lambda.iter().copied().collect(),
            a: a.iter().copied().collect(),
            b: b.iter().copied().collect(),
            omega,
        })
    }

    pub fn assemble(model: &dyn ChainModel, grids: &FluidGrids, crits: &[CriticalTime], omega: f64) -> Result<Self> {
        if crits.is_empty() {
            return Err(Error::TangencyViolation("no critical time on the trajectory".into()));
        }
        let sigma = build_sigma(model, grids, crits)?;
        let gamma = build_gamma(model, grids, crits);
        let lambda = build_lambda(model, grids, crits)?;
        Self::from_parts(&sigma, &gamma, &lambda, omega)
    }

    /// Both terms of the expansion at size `n` and scaled offset `r`.
    pub fn predict(&self, n: u64, r: f64) -> PredictionTerm {
        let x: Vec<f64> = self.a.iter().map(|a| r * a).collect();
        let leading = normal::cdf_n(&x);
        let grad = normal::grad_cdf_n(&x);
        let dot: f64 = self.b.iter().zip(&grad).map(|(b, g)| b * g).sum();
        let correction = dot * self.omega * (n as f64).powf(-1.0 / 6.0);
        let raw = leading - correction;
        let p = raw.clamp(0.0, 1.0);
        PredictionTerm { r, leading, correction, p, clipped: p != raw }
    }

    pub fn predict_grid(&self, n: u64, r_grid: &[f64]) -> Prediction {
        let terms: Vec<PredictionTerm> = r_grid.iter().map(|&r| self.predict(n, r)).collect();
        Prediction { n, r_grid: r_grid.to_vec(), p_nex: terms.iter().map(|t| t.p).collect(), terms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionTerm {
    pub r: f64,
    /// `Phi(r a)`.
    pub leading: f64,
    /// `b . grad Phi(r a) Omega n^{-1/6}`, subtracted from the leading term.
    pub correction: f64,
    /// `leading - correction`, clipped to `[0, 1]`.
    pub p: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub n: u64,
    pub r_grid: Vec<f64>,
    pub p_nex: Vec<f64>,
    pub terms: Vec<PredictionTerm>,
}

/// Numerical settings for [`analyse_hypergraph`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub step: f64,
    pub epsilon: f64,
    /// Floor for the touch tolerance; the step-halving error is added on top.
    pub touch_floor: f64,
    /// Allowed gap between detected critical times and `theta(zeta)`.
    pub time_tolerance: f64,
    /// Fixed end of the integration window; [`theta_bar`] when absent.
    pub theta_bar: Option<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings { step: 1e-4, epsilon: 0.01, touch_floor: 1e-7, time_tolerance: 1e-6, theta_bar: None }
    }
}

/// Everything computed for a hypergraph ensemble at its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypergraphAnalysis {
    pub critical: CriticalData,
    pub theta_bar: f64,
    pub step: f64,
    pub integration_error: f64,
    pub touch_tolerance: f64,
    pub critical_times: Vec<CriticalTime>,
    /// `theta(zeta_{N+1-i})`.
    pub predicted_times: Vec<f64>,
    pub objects: FssObjects,
}

/// Threshold, fluid limit, critical times and expansion objects in one pass.
pub fn analyse_hypergraph(spec: &DegreeSpec, omega: f64, settings: &AnalysisSettings) -> Result<HypergraphAnalysis> {
    let critical = find_rho_c(spec)?;
    let model = HypergraphModel::new(spec, critical.rho_c, settings.epsilon);
    let tb = settings.theta_bar.unwrap_or_else(|| theta_bar(spec, &critical));
    let total = spec.theta_of_zeta(0.0);
    if !(tb > 0.0 && tb < total) {
        return Err(Error::Domain(format!("theta_bar = {tb} outside (0, {total})")));
    }
    let grids = integrate_checked(&model, 0.0, tb, settings.step)?;
    let err = grids.error_estimate.unwrap_or(0.0);
    let tol = settings.touch_floor.max(10.0 * err);
    let times = find_critical_times(&model, &grids, tol)?;
    let predicted = predicted_critical_times(spec, &critical);
    if times.len() != predicted.len() {
        return Err(Error::TangencyViolation(format!(
            "{} critical times on the trajectory but {} tangency points",
            times.len(),
            predicted.len()
        )));
    }
    for (c, p) in times.iter().zip(&predicted) {
        if (c.theta_c - p).abs() > settings.time_tolerance {
            return Err(Error::TangencyViolation(format!(
                "critical time {} differs from theta(zeta) = {p}",
                c.theta_c
            )));
        }
    }
    let objects = FssObjects::assemble(&model, &grids, &times, omega)?;
    Ok(HypergraphAnalysis {
        critical,
        theta_bar: tb,
        step: grids.step,
        integration_error: err,
        touch_tolerance: tol,
        critical_times: times,
        predicted_times: predicted,
        objects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_root_of_diagonal() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = inv_sqrt_sym(&s).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-15 && (r[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!(r[(0, 1)].abs() < 1e-15);
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((inv_sqrt_sym(&i).unwrap() - &i).amax() < 1e-15);
    }

    #[test]
    fn zero_sigma_is_singular() {
        assert!(matches!(inv_sqrt_sym(&DMatrix::zeros(2, 2)), Err(Error::SingularSigma { .. })));
    }

    #[test]
    fn plug_in_at_zero() {
        let o = FssObjects::from_parts(
            &DMatrix::from_element(1, 1, 2.0),
            &DVector::from_element(1, 1.0),
            &DVector::from_element(1, 0.7),
            0.9,
        )
        .unwrap();
        let t = o.predict(1000, 0.0);
        let b = 0.7 / 2f64.sqrt();
        assert!((t.p - (0.5 - b * normal::pdf(0.0) * 0.9 * 1000f64.powf(-1.0 / 6.0))).abs() < 1e-15);
        assert!(o.predict(1000, 60.0).p > 1.0 - 1e-12);
    }
}
