//! Fluid limit: the trajectory `y`, the variational flow `B` and the covariance `Q`.

pub mod critical;
pub mod hypergraph;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{default_fd_scale, numeric_jacobian};

pub use critical::{find_critical_times, CriticalTime};

/// How far a stage point may sit outside the polytope before it is an exit.
pub const CLAMP_TOL: f64 = 1e-9;

/// Half-space `normal . x >= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Face {
    /// Normalises `normal . x >= offset`.
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        let norm = normal.norm();
        Face { normal: normal / norm, offset: offset / norm }
    }

    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// Density-dependent chain: drift, covariance and Jacobian as functions of the
/// rescaled state, the initial curve indexed by the offset `rho` from the
/// critical parameter, and the polytope the chain must not leave.
pub trait ChainModel: Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn covariance(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let jac = numeric_jacobian(|y| self.drift(&DVector::from_column_slice(y)), x.as_slice(), default_fd_scale())?;
        Ok(jac.matrix)
    }

    fn initial_state(&self, rho: f64) -> Result<DVector<f64>>;
    /// `d y_rho / d rho` at `rho = 0`.
    fn initial_state_derivative(&self) -> DVector<f64>;
    fn initial_covariance(&self, rho: f64) -> Result<DMatrix<f64>>;
    fn faces(&self) -> &[Face];
}

/// A model assembled from closures, for synthetic chains.
pub struct ClosureModel {
    pub dim: usize,
    #[allow(clippy::type_complexity)]
    pub drift: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Sync>,
    #[allow(clippy::type_complexity)]
    pub covariance: Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Sync>,
    pub y0: DVector<f64>,
    pub dy0: DVector<f64>,
    pub q0: DMatrix<f64>,
    pub faces: Vec<Face>,
}

impl ChainModel for ClosureModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.drift)(x))
    }
    fn covariance(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok((self.covariance)(x))
    }
    fn initial_state(&self, rho: f64) -> Result<DVector<f64>> {
        Ok(&self.y0 + &self.dy0 * rho)
    }
    fn initial_state_derivative(&self) -> DVector<f64> {
        self.dy0.clone()
    }
    fn initial_covariance(&self, _rho: f64) -> Result<DMatrix<f64>> {
        Ok(self.q0.clone())
    }
    fn faces(&self) -> &[Face] {
        &self.faces
    }
}

/// Sampled solution of the joint system on a uniform grid over `[0, theta_max]`.
#[derive(Debug, Clone)]
pub struct FluidGrids {
    pub theta_max: f64,
    pub step: f64,
    pub theta: Vec<f64>,
    pub y: Vec<DVector<f64>>,
    pub dy: Vec<DVector<f64>>,
    pub b0: Vec<DMatrix<f64>>,
    pub db0: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub dq: Vec<DMatrix<f64>>,
    /// Max-norm difference in `y` against a half-step run, when computed.
    pub error_estimate: Option<f64>,
}

fn hermite<T>(t: f64, h: f64, a: &T, da: &T, b: &T, db: &T) -> T
where
    for<'x> &'x T: std::ops::Mul<f64, Output = T>,
    T: std::ops::Add<Output = T>,
{
    let t2 = t * t;
    let t3 = t2 * t;
    a * (2.0 * t3 - 3.0 * t2 + 1.0) + da * (h * (t3 - 2.0 * t2 + t)) + b * (-2.0 * t3 + 3.0 * t2) + db * (h * (t3 - t2))
}

impl FluidGrids {
    fn locate(&self, theta: f64) -> (usize, f64) {
        let last = self.theta.len() - 1;
        let pos = (theta / self.step).clamp(0.0, last as f64);
        let k = (pos.floor() as usize).min(last - 1);
        (k, (theta - self.theta[k]) / self.step)
    }

    pub fn y_at(&self, theta: f64) -> DVector<f64> {
        let (k, t) = self.locate(theta);
        hermite(t, self.step, &self.y[k], &self.dy[k], &self.y[k + 1], &self.dy[k + 1])
    }

    pub fn b0_at(&self, theta: f64) -> DMatrix<f64> {
        let (k, t) = self.locate(theta);
        hermite(t, self.step, &self.b0[k], &self.db0[k], &self.b0[k + 1], &self.db0[k + 1])
    }

    pub fn q_at(&self, theta: f64) -> DMatrix<f64> {
        let (k, t) = self.locate(theta);
        hermite(t, self.step, &self.q[k], &self.dq[k], &self.q[k + 1], &self.dq[k + 1])
    }

    /// `B_zeta(theta) = B_0(theta) B_0(zeta)^-1`.
    pub fn b_between(&self, zeta: f64, theta: f64) -> Result<DMatrix<f64>> {
        let inv = self
            .b0_at(zeta)
            .try_inverse()
            .ok_or_else(|| Error::Convergence(format!("B_0({zeta}) is singular")))?;
        Ok(self.b0_at(theta) * inv)
    }
}

/// Projects `x` onto faces it violates by at most [`CLAMP_TOL`].
pub fn clamp_to_domain(faces: &[Face], x: &DVector<f64>, theta: f64) -> Result<DVector<f64>> {
    clamp_with(faces, x, theta, CLAMP_TOL)
}

fn clamp_with(faces: &[Face], x: &DVector<f64>, theta: f64, tol: f64) -> Result<DVector<f64>> {
    let mut y = x.clone();
    for (i, face) in faces.iter().enumerate() {
        let s = face.slack(&y);
        if s < 0.0 {
            if s < -tol {
                return Err(Error::ExitedDomain { theta, face: i, slack: s });
            }
            y -= &face.normal * s;
        }
    }
    Ok(y)
}

struct Joint {
    y: DVector<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
}

struct JointRate {
    dy: DVector<f64>,
    db: DMatrix<f64>,
    dq: DMatrix<f64>,
}

fn rate(model: &dyn ChainModel, s: &Joint, theta: f64, tol: f64) -> Result<JointRate> {
    let x = clamp_with(model.faces(), &s.y, theta, tol)?;
    let f = model.drift(&x)?;
    let a = model.jacobian(&x)?;
    let g = model.covariance(&x)?;
    let db = &a * &s.b;
    let aq = &a * &s.q;
    let dq = g + &aq + aq.transpose();
    Ok(JointRate { dy: f, db, dq })
}

fn advance(s: &Joint, r: &JointRate, h: f64) -> Joint {
    Joint { y: &s.y + &r.dy * h, b: &s.b + &r.db * h, q: &s.q + &r.dq * h }
}

/// Classical RK4 on `(y, B_0, Q)` from `theta = 0` to `theta_max`.
pub fn integrate(model: &dyn ChainModel, rho: f64, theta_max: f64, step: f64) -> Result<FluidGrids> {
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::Domain(format!("step {step} must lie in (0, 1e-3]")));
    }
    if !(theta_max > 0.0) {
        return Err(Error::Domain(format!("theta_max {theta_max} must be positive")));
    }
    let steps = (theta_max / step).ceil() as usize;
    let h = theta_max / steps as f64;
    let d = model.dim();
    let y0 = model.initial_state(rho)?;
    for (i, face) in model.faces().iter().enumerate() {
        let s = face.slack(&y0);
        if s <= 0.0 {
            return Err(Error::ExitedDomain { theta: 0.0, face: i, slack: s });
        }
    }
    let mut state = Joint { y: y0, b: DMatrix::identity(d, d), q: model.initial_covariance(rho)? };
    let mut grids = FluidGrids {
        theta_max,
        step: h,
        theta: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        dy: Vec::with_capacity(steps + 1),
        b0: Vec::with_capacity(steps + 1),
        db0: Vec::with_capacity(steps + 1),
        q: Vec::with_capacity(steps + 1),
        dq: Vec::with_capacity(steps + 1),
        error_estimate: None,
    };
    // Intermediate stages are extrapolations, not trajectory points: near a
    // tangential touch they overshoot the face by O(h^2) even when every grid
    // state is inside.
    let stage_tol = CLAMP_TOL.max(h * h);
    for k in 0..=steps {
        let theta = k as f64 * h;
        let k1 = rate(model, &state, theta, CLAMP_TOL)?;
        grids.theta.push(theta);
        grids.y.push(state.y.clone());
        grids.b0.push(state.b.clone());
        grids.q.push(state.q.clone());
        grids.dy.push(k1.dy.clone());
        grids.db0.push(k1.db.clone());
        grids.dq.push(k1.dq.clone());
        if k == steps {
            break;
        }
        let k2 = rate(model, &advance(&state, &k1, 0.5 * h), theta + 0.5 * h, stage_tol)?;
        let k3 = rate(model, &advance(&state, &k2, 0.5 * h), theta + 0.5 * h, stage_tol)?;
        let k4 = rate(model, &advance(&state, &k3, h), theta + h, stage_tol)?;
        let w = h / 6.0;
        state = Joint {
            y: &state.y + (&k1.dy + &k2.dy * 2.0 + &k3.dy * 2.0 + &k4.dy) * w,
            b: &state.b + (&k1.db + &k2.db * 2.0 + &k3.db * 2.0 + &k4.db) * w,
            q: &state.q + (&k1.dq + &k2.dq * 2.0 + &k3.dq * 2.0 + &k4.dq) * w,
        };
    }
    Ok(grids)
}

/// [`integrate`] plus a half-step rerun whose disagreement is recorded.
pub fn integrate_checked(model: &dyn ChainModel, rho: f64, theta_max: f64, step: f64) -> Result<FluidGrids> {
    let mut coarse = integrate(model, rho, theta_max, step)?;
    let fine = integrate(model, rho, theta_max, 0.5 * coarse.step)?;
    let err = coarse
        .y
        .iter()
        .enumerate()
        .map(|(k, y)| (y - &fine.y[2 * k]).amax())
        .fold(0.0, f64::max);
    coarse.error_estimate = Some(err);
    Ok(coarse)
}

/// `y''(theta) = A(y) F(y)`.
pub fn second_derivative(model: &dyn ChainModel, theta: f64, grids: &FluidGrids) -> Result<DVector<f64>> {
    let y = clamp_to_domain(model.faces(), &grids.y_at(theta), theta)?;
    Ok(model.jacobian(&y)? * model.drift(&y)?)
}

/// `Q(theta)` from its integral representation
/// `B_0 Q_0 B_0^T + int_0^theta B_zeta(theta) G(y(zeta)) B_zeta(theta)^T dzeta`
/// by composite Simpson on the interpolated trajectory.
pub fn q_by_quadrature(model: &dyn ChainModel, grids: &FluidGrids, theta: f64, rho: f64) -> Result<DMatrix<f64>> {
    let b_theta = grids.b0_at(theta);
    let q0 = model.initial_covariance(rho)?;
    let mut acc = &b_theta * q0 * b_theta.transpose();
    let intervals = {
        let m = (theta / grids.step).ceil() as usize;
        (m + m % 2).max(2)
    };
    let h = theta / intervals as f64;
    let mut integral = DMatrix::zeros(model.dim(), model.dim());
    for i in 0..=intervals {
        let zeta = i as f64 * h;
        let y = clamp_to_domain(model.faces(), &grids.y_at(zeta), zeta)?;
        let b = grids.b_between(zeta, theta)?;
        let term = &b * model.covariance(&y)? * b.transpose();
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += term * w;
    }
    acc += integral * (h / 3.0);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_faces(d: usize) -> Vec<Face> {
        let mut n = DVector::zeros(d);
        n[0] = 1.0;
        vec![Face::new(n, -1e6)]
    }

    #[test]
    fn constant_drift_is_exact() {
        let f = DVector::from_vec(vec![0.5, -0.25]);
        let fc = f.clone();
        let model = ClosureModel {
            dim: 2,
            drift: Box::new(move |_| fc.clone()),
            covariance: Box::new(|_| DMatrix::identity(2, 2)),
            y0: DVector::from_vec(vec![1.0, 2.0]),
            dy0: DVector::zeros(2),
            q0: DMatrix::identity(2, 2) * 0.3,
            faces: open_faces(2),
        };
        let g = integrate(&model, 0.0, 1.0, 1e-3).unwrap();
        let y = g.y.last().unwrap();
        assert!((y - (DVector::from_vec(vec![1.0, 2.0]) + &f)).amax() < 1e-12);
        assert!((g.b0.last().unwrap() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        assert!((g.q.last().unwrap() - DMatrix::<f64>::identity(2, 2) * 1.3).amax() < 1e-12);
        assert!(second_derivative(&model, 0.4, &g).unwrap().amax() < 1e-9);
    }

    #[test]
    fn exponential_growth() {
        let model = ClosureModel {
            dim: 1,
            drift: Box::new(|x| x.clone()),
            covariance: Box::new(|_| DMatrix::zeros(1, 1)),
            y0: DVector::from_vec(vec![1.0]),
            dy0: DVector::zeros(1),
            q0: DMatrix::zeros(1, 1),
            faces: open_faces(1),
        };
        let g = integrate(&model, 0.0, 1.0, 1e-3).unwrap();
        let e = std::f64::consts::E;
        assert!((g.y.last().unwrap()[0] - e).abs() < 1e-9);
        assert!((g.b0.last().unwrap()[(0, 0)] - e).abs() < 1e-9);
        assert!((second_derivative(&model, 0.0, &g).unwrap()[0] - 1.0).abs() < 1e-9);
        // interpolation between nodes
        assert!((g.y_at(0.50037)[0] - 0.50037f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn exit_is_reported() {
        let model = ClosureModel {
            dim: 1,
            drift: Box::new(|_| DVector::from_vec(vec![-1.0])),
            covariance: Box::new(|_| DMatrix::zeros(1, 1)),
            y0: DVector::from_vec(vec![0.5]),
            dy0: DVector::zeros(1),
            q0: DMatrix::zeros(1, 1),
            faces: vec![Face::new(DVector::from_vec(vec![2.0]), 0.0)],
        };
        assert!(matches!(integrate(&model, 0.0, 1.0, 1e-3), Err(Error::ExitedDomain { face: 0, .. })));
    }
}
