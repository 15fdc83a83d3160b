//! Asymptotic one-step kernel of the K-core peeling chain, its moments and Jacobian.

pub mod exact;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Rescaled chain state: `u[i-1]` is the density of c-nodes of degree `i` for
/// `i < K` and of degree `>= K` for `i = K`; `v[j-3]` is the density of live
/// v-nodes of degree `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDensity {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateDensity {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Self {
        StateDensity { u, v }
    }

    /// Splits a flat `(u, v)` vector.
    pub fn from_slice(k: usize, x: &[f64]) -> Self {
        StateDensity { u: x[..k].to_vec(), v: x[k..].to_vec() }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.u.iter().chain(self.v.iter()).copied().collect()
    }

    pub fn k(&self) -> usize {
        self.u.len()
    }

    pub fn max_degree(&self) -> usize {
        self.v.len() + 2
    }

    pub fn dim(&self) -> usize {
        self.u.len() + self.v.len()
    }

    /// `d(v) = sum j v_j`.
    pub fn d(&self) -> f64 {
        self.v.iter().enumerate().map(|(i, &v)| (i + 3) as f64 * v).sum()
    }

    /// Slack `d(v) - sum i x_i` of the socket constraint.
    pub fn socket_slack(&self) -> f64 {
        self.d() - self.u.iter().enumerate().map(|(i, &x)| (i + 1) as f64 * x).sum::<f64>()
    }

    /// Membership in `H(eps)`.
    pub fn in_domain(&self, eps: f64) -> bool {
        self.u.iter().all(|&x| x >= 0.0)
            && self.v.iter().all(|&v| v >= 0.0)
            && self.u[self.k() - 1] >= eps
            && self.v.iter().sum::<f64>() <= 1.0
            && self.socket_slack() >= eps
    }
}

/// Random point of `H(eps)` with every v-density positive, for property checks.
pub fn random_state<R: Rng + ?Sized>(k: usize, max_degree: usize, eps: f64, rng: &mut R) -> StateDensity {
    loop {
        let mut v: Vec<f64> = (3..=max_degree).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = v.iter().sum();
        let mass = 0.3 + 0.7 * rng.random::<f64>();
        v.iter_mut().for_each(|x| *x *= mass / total);
        let d: f64 = v.iter().enumerate().map(|(i, &x)| (i + 3) as f64 * x).sum();
        let budget = d - eps;
        let w: Vec<f64> = (0..=k).map(|_| rng.random::<f64>()).collect();
        let wsum: f64 = w.iter().sum();
        let u: Vec<f64> = (1..=k).map(|i| w[i] / wsum * budget / i as f64).collect();
        let x = StateDensity::new(u, v);
        if x.in_domain(eps) {
            return x;
        }
    }
}

/// `e_k(x) = sum_{i >= k} x^i / i!`.
pub fn trunc_exp(k: usize, x: f64) -> Result<f64> {
    if x > 700.0 {
        return Err(Error::Overflow(format!("e_{k}({x})")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("e_{k} at negative argument {x}")));
    }
    if x < k as f64 {
        let mut term = 1.0;
        for i in 1..=k {
            term *= x / i as f64;
        }
        let mut sum = 0.0;
        let mut i = k;
        while term > 1e-17 * sum || sum == 0.0 {
            sum += term;
            i += 1;
            term *= x / i as f64;
            if term == 0.0 {
                break;
            }
        }
        Ok(sum)
    } else {
        let mut term = 1.0;
        let mut partial = 0.0;
        for i in 0..k {
            partial += term;
            term *= x / (i + 1) as f64;
        }
        Ok(x.exp() - partial)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `r(lambda) = lambda^K / ((K-1)! e_K(lambda))` and its derivative.
///
/// `f(lambda) = lambda e_{K-1}/e_K = lambda + r(lambda)` with `r(0) = K`.
fn tail_ratio(k: usize, lambda: f64) -> (f64, f64) {
    let kf = k as f64;
    if lambda < 1.0 {
        // r = K / S, S = sum_i K! lambda^i / (K+i)!
        let mut s = 0.0;
        let mut ds = 0.0;
        let mut term = 1.0;
        let mut i = 0usize;
        while term > 1e-18 || i < 2 {
            s += term;
            if i > 0 {
                ds += i as f64 * term / lambda.max(f64::MIN_POSITIVE);
            }
            i += 1;
            term *= lambda / (kf + i as f64);
            if i > 200 {
                break;
            }
        }
        if lambda == 0.0 {
            ds = 1.0 / (kf + 1.0);
        }
        let r = kf / s;
        (r, -kf * ds / (s * s))
    } else {
        let log_ek = if lambda > 50.0 {
            let mut term = 1.0;
            let mut partial = 0.0;
            for i in 0..k {
                partial += term;
                term *= lambda / (i + 1) as f64;
            }
            lambda + (-(-lambda).exp() * partial).ln_1p()
        } else {
            trunc_exp(k, lambda).expect("argument checked").ln()
        };
        let r = (kf * lambda.ln() - factorial(k - 1).ln() - log_ek).exp();
        (r, r * ((kf - r) / lambda - 1.0))
    }
}

/// `f(lambda) = lambda e_{K-1}(lambda) / e_K(lambda)`, extended by `f(0) = K`.
pub fn lambda_equation(k: usize, lambda: f64) -> f64 {
    lambda + tail_ratio(k, lambda).0
}

/// Solves `f(lambda) = rhs` for `rhs >= K`.
pub fn solve_lambda_rhs(k: usize, rhs: f64) -> Result<f64> {
    let kf = k as f64;
    if !rhs.is_finite() || rhs < kf * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("lambda equation right-hand side {rhs} < K = {k}")));
    }
    if rhs <= kf {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, rhs);
    let mut lam = if rhs < kf + 1.0 { (kf + 1.0) * (rhs - kf) } else { rhs - kf };
    lam = lam.clamp(lo, hi);
    for _ in 0..200 {
        let (r, dr) = tail_ratio(k, lam);
        let resid = lam + r - rhs;
        if resid.abs() <= 1e-14 * rhs {
            return Ok(lam);
        }
        if resid > 0.0 {
            hi = lam;
        } else {
            lo = lam;
        }
        let step = lam - resid / (1.0 + dr);
        lam = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-300 {
            break;
        }
    }
    let resid = lambda_equation(k, lam) - rhs;
    if resid.abs() <= 1e-12 * rhs {
        Ok(lam)
    } else {
        Err(Error::Convergence(format!("lambda equation at rhs {rhs}: residual {resid}")))
    }
}

/// Solves the lambda equation at state `x`.
pub fn solve_lambda(x: &StateDensity) -> Result<f64> {
    let k = x.k();
    let xk = x.u[k - 1];
    if !(xk > 0.0) {
        return Err(Error::Domain(format!("x_K = {xk} must be positive")));
    }
    let rhs = (x.d() - x.u[..k - 1].iter().enumerate().map(|(i, &v)| (i + 1) as f64 * v).sum::<f64>()) / xk;
    solve_lambda_rhs(k, rhs)
}

/// Quantities shared by the kernel, drift and covariance at one state.
#[derive(Debug, Clone)]
pub struct KernelParams {
    pub k: usize,
    pub lambda: f64,
    pub d: f64,
    /// `p_0..p_K`: probability that a socket lands in each c-node class.
    pub p: Vec<f64>,
    /// `s_j = j v_j / d`, indexed by `j - 3`.
    pub s: Vec<f64>,
    /// `R'(1)` and `R''(1)` for `R(xi) = sum s_j xi^(j-1)`.
    pub r1: f64,
    pub r2: f64,
}

impl KernelParams {
    pub fn new(x: &StateDensity) -> Result<Self> {
        let k = x.k();
        let d = x.d();
        if !(d > 0.0) {
            return Err(Error::Domain(format!("d(v) = {d} must be positive")));
        }
        let lambda = solve_lambda(x)?;
        let mut p = vec![0.0; k + 1];
        for i in 0..k.saturating_sub(1) {
            p[i] = (i + 1) as f64 * x.u[i] / d;
        }
        let xk = x.u[k - 1];
        p[k - 1] = xk * tail_ratio(k, lambda).0 / d;
        p[k] = xk * lambda / d;
        let s: Vec<f64> = x.v.iter().enumerate().map(|(i, &v)| (i + 3) as f64 * v / d).collect();
        let r1 = s.iter().enumerate().map(|(i, &s)| (i + 2) as f64 * s).sum();
        let r2 = s.iter().enumerate().map(|(i, &s)| ((i + 2) * (i + 1)) as f64 * s).sum();
        Ok(KernelParams { k, lambda, d, p, s, r1, r2 })
    }

    pub fn dim(&self) -> usize {
        self.k + self.s.len()
    }

    /// `a_i = E[delta omega_i | l] / (l - 1)` apart from the chosen node, `i = 1..K`.
    fn a(&self, i: usize) -> f64 {
        let own = if i == self.k { 0.0 } else { self.p[i] };
        own - self.p[i - 1]
    }

    pub fn prob(&self, inc: &Increment) -> f64 {
        if inc.q.len() != self.k + 1 || inc.ell < 3 || inc.ell - 3 >= self.s.len() {
            return 0.0;
        }
        let s = self.s[inc.ell - 3];
        if s == 0.0 {
            return 0.0;
        }
        let mut w = s * factorial(inc.ell - 1) / factorial(inc.q[0] - 1) * self.p[0].powi(inc.q[0] as i32 - 1);
        for i in 1..=self.k {
            w *= self.p[i].powi(inc.q[i] as i32) / factorial(inc.q[i]);
        }
        w
    }

    pub fn drift(&self) -> DVector<f64> {
        let mut f = DVector::zeros(self.dim());
        for i in 1..=self.k {
            f[i - 1] = self.r1 * self.a(i) - if i == 1 { 1.0 } else { 0.0 };
        }
        for (j, &s) in self.s.iter().enumerate() {
            f[self.k + j] = -s;
        }
        f
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let k = self.k;
        let dim = self.dim();
        let mut g = DMatrix::zeros(dim, dim);
        let var_excess = self.r2 - self.r1 * self.r1;
        for i in 1..=k {
            for j in i..=k {
                let m = if i == j {
                    self.a_self(i)
                } else if j == i + 1 {
                    -self.p[i]
                } else {
                    0.0
                };
                let c = self.r1 * m + var_excess * self.a(i) * self.a(j);
                g[(i - 1, j - 1)] = c;
                g[(j - 1, i - 1)] = c;
            }
            for (l, &s) in self.s.iter().enumerate() {
                let c = -self.a(i) * s * ((l + 2) as f64 - self.r1);
                g[(i - 1, k + l)] = c;
                g[(k + l, i - 1)] = c;
            }
        }
        for (l, &sl) in self.s.iter().enumerate() {
            for (m, &sm) in self.s.iter().enumerate() {
                g[(k + l, k + m)] = -sl * sm + if l == m { sl } else { 0.0 };
            }
        }
        g
    }

    /// `sum_k c_ik^2 p_k` for the class-transfer matrix `c`.
    fn a_self(&self, i: usize) -> f64 {
        let own = if i == self.k { 0.0 } else { self.p[i] };
        own + self.p[i - 1]
    }

    /// Draws one increment: `l` with probability `s_l`, then the other `l - 1`
    /// sockets i.i.d. over the classes with probabilities `p`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let ell = pick(&self.s, rng) + 3;
        let mut q = vec![0usize; self.k + 1];
        q[0] = 1;
        for _ in 0..ell - 1 {
            q[pick(&self.p, rng)] += 1;
        }
        Increment::from_q(self.k, self.s.len() + 2, ell, &q).dz
    }
}

fn pick<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Chain increment `(delta omega_1..K, delta tau_3..L)` with its socket split `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Increment {
    pub dz: Vec<i64>,
    pub ell: usize,
    pub q: Vec<usize>,
}

impl Increment {
    /// Builds the increment of removing a degree-`ell` v-node whose sockets hit
    /// `q[i]` c-nodes of class `i` (`q[0]` includes the chosen node).
    pub fn from_q(k: usize, max_degree: usize, ell: usize, q: &[usize]) -> Self {
        let mut dz = vec![0i64; k + max_degree - 2];
        for i in 1..k {
            dz[i - 1] = q[i] as i64 - q[i - 1] as i64;
        }
        dz[k - 1] = -(q[k - 1] as i64);
        dz[k + ell - 3] = -1;
        Increment { dz, ell, q: q.to_vec() }
    }

    /// Decodes `dz`; `None` if it is not a valid increment.
    pub fn from_dz(k: usize, dz: &[i64]) -> Option<Self> {
        if dz.len() < k + 1 {
            return None;
        }
        let tau = &dz[k..];
        let mut ell = None;
        for (i, &t) in tau.iter().enumerate() {
            match t {
                0 => {}
                -1 if ell.is_none() => ell = Some(i + 3),
                _ => return None,
            }
        }
        let ell = ell?;
        let mut q = vec![0i64; k + 1];
        for i in (0..k).rev() {
            q[i] = -dz[i..k].iter().sum::<i64>();
        }
        q[k] = ell as i64 + dz[..k].iter().enumerate().map(|(i, &d)| (i + 1) as i64 * d).sum::<i64>();
        if q[0] < 1 || q.iter().any(|&v| v < 0) {
            return None;
        }
        let q: Vec<usize> = q.into_iter().map(|v| v as usize).collect();
        Some(Increment { dz: dz.to_vec(), ell, q })
    }
}

/// All increments for `K` classes and degrees up to `max_degree`, ordered by
/// `l` ascending then lexicographically in `q`.
pub fn increments(k: usize, max_degree: usize) -> Vec<Increment> {
    let mut out = Vec::new();
    for ell in 3..=max_degree {
        let mut q = vec![0usize; k + 1];
        compositions(ell, 0, &mut q, &mut |q| out.push(Increment::from_q(k, max_degree, ell, q)));
    }
    out
}

fn compositions(left: usize, idx: usize, q: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    let last = q.len() - 1;
    if idx == last {
        q[idx] = left;
        emit(q);
        return;
    }
    let start = if idx == 0 { 1 } else { 0 };
    for v in start..=left {
        q[idx] = v;
        compositions(left - v, idx + 1, q, emit);
    }
}

pub fn kernel_prob(x: &StateDensity, inc: &Increment) -> Result<f64> {
    Ok(KernelParams::new(x)?.prob(inc))
}

/// The kernel as a list of `(increment, probability)` in enumeration order.
pub fn kernel_distribution(x: &StateDensity) -> Result<Vec<(Increment, f64)>> {
    let params = KernelParams::new(x)?;
    Ok(increments(x.k(), x.max_degree())
        .into_iter()
        .map(|inc| {
            let w = params.prob(&inc);
            (inc, w)
        })
        .collect())
}

pub fn drift_f(x: &StateDensity) -> Result<DVector<f64>> {
    Ok(KernelParams::new(x)?.drift())
}

pub fn covariance_g(x: &StateDensity) -> Result<DMatrix<f64>> {
    Ok(KernelParams::new(x)?.covariance())
}

/// Finite-difference Jacobian with its step flag.
#[derive(Debug, Clone)]
pub struct Jacobian {
    pub matrix: DMatrix<f64>,
    /// Set when a one-sided stencil had to replace the central one.
    pub projected: bool,
}

/// Central-difference Jacobian of an arbitrary vector field with steps
/// `h_i = scale * max(|x_i|, 1)`; falls back to one-sided second-order stencils
/// when a central point is outside the field's domain.
pub fn numeric_jacobian(
    f: impl Fn(&[f64]) -> Result<DVector<f64>>,
    x: &[f64],
    scale: f64,
) -> Result<Jacobian> {
    let n = x.len();
    let mut matrix = DMatrix::zeros(n, n);
    let mut projected = false;
    let base = f(x)?;
    let rows = base.len();
    if rows != n {
        matrix = DMatrix::zeros(rows, n);
    }
    let eval = |i: usize, delta: f64| {
        let mut y = x.to_vec();
        y[i] += delta;
        f(&y)
    };
    for i in 0..n {
        let h = scale * x[i].abs().max(1.0);
        let col = match (eval(i, h), eval(i, -h)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            _ => {
                projected = true;
                match (eval(i, h), eval(i, 2.0 * h)) {
                    (Ok(a), Ok(b)) => (a * 4.0 - b - &base * 3.0) / (2.0 * h),
                    _ => {
                        let a = eval(i, -h)?;
                        let b = eval(i, -2.0 * h)?;
                        (&base * 3.0 - a * 4.0 + b) / (2.0 * h)
                    }
                }
            }
        };
        matrix.set_column(i, &col);
    }
    Ok(Jacobian { matrix, projected })
}

/// Step scale `eps^(1/3)`.
pub fn default_fd_scale() -> f64 {
    f64::EPSILON.cbrt()
}

pub fn jacobian_a(x: &StateDensity) -> Result<Jacobian> {
    let k = x.k();
    numeric_jacobian(|y| drift_f(&StateDensity::from_slice(k, y)), &x.to_vec(), default_fd_scale())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_exponential_values() {
        assert!((trunc_exp(0, 1.3).unwrap() - 1.3f64.exp()).abs() < 1e-15);
        assert!((trunc_exp(2, 1.0).unwrap() - (std::f64::consts::E - 2.0)).abs() < 1e-15);
        let x = 1e-8;
        let oracle = x * x / 2.0 + x * x * x / 6.0;
        assert!(((trunc_exp(2, x).unwrap() - oracle) / oracle).abs() < 1e-10);
        assert!(trunc_exp(2, 701.0).is_err());
    }

    #[test]
    fn lambda_round_trip() {
        let e = std::f64::consts::E;
        let rhs = (e - 1.0) / (e - 2.0);
        assert!((solve_lambda_rhs(2, rhs).unwrap() - 1.0).abs() < 1e-12);
        for k in 2..5 {
            for &lam in &[1e-6, 0.3, 0.99, 1.0, 2.5, 17.0, 49.9, 50.1, 300.0] {
                let rhs = lambda_equation(k, lam);
                let got = solve_lambda_rhs(k, rhs).unwrap();
                assert!((got - lam).abs() <= 1e-9 * lam.max(1e-3), "k={k} lam={lam} got={got}");
            }
        }
        assert!(solve_lambda_rhs(2, 2.0 + 1e-13).unwrap() < 1e-11);
        let big = solve_lambda_rhs(2, 1e6).unwrap();
        assert!((big - 1e6).abs() / 1e6 <= 1e-3);
        assert!(solve_lambda_rhs(2, 1.5).is_err());
    }

    #[test]
    fn tail_ratio_is_continuous_at_switch() {
        for k in 2..5 {
            let (a, da) = tail_ratio(k, 1.0 - 1e-12);
            let (b, db) = tail_ratio(k, 1.0);
            assert!((a - b).abs() < 1e-10);
            assert!((da - db).abs() < 1e-8);
            let (c, _) = tail_ratio(k, 50.0 - 1e-12);
            let (d, _) = tail_ratio(k, 50.0 + 1e-12);
            assert!((c - d).abs() < 1e-12);
        }
    }

    #[test]
    fn increment_round_trip() {
        for k in 2..4 {
            for inc in increments(k, 6) {
                let back = Increment::from_dz(k, &inc.dz).unwrap();
                assert_eq!(back, inc);
            }
        }
        assert!(Increment::from_dz(2, &[0, 0, -1, -1]).is_none());
        assert!(Increment::from_dz(2, &[5, 0, -1]).is_none());
    }
}
