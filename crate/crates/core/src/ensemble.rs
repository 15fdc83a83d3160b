//! Irregular hypergraph ensemble: degree distribution, threshold and initial moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the normalisation of the edge-size distribution.
pub const NORMALISATION_TOL: f64 = 1e-12;

/// Edge-size distribution `v0(j)` for `3 <= j <= L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSpec {
    /// Indexed by degree; entries below 3 are zero.
    weights: Vec<f64>,
}

/// `V(x)` and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenV {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl DegreeSpec {
    /// Builds a distribution with maximum degree `max_degree` from `(j, v0(j))` pairs.
    pub fn new(max_degree: usize, pairs: &[(usize, f64)]) -> Result<Self> {
        if max_degree < 3 {
            return Err(Error::InvalidSpec(format!("L = {max_degree} < 3")));
        }
        let mut weights = vec![0.0; max_degree + 1];
        for &(j, w) in pairs {
            if j < 3 || j > max_degree {
                return Err(Error::InvalidSpec(format!("degree {j} outside 3..={max_degree}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidSpec(format!("weight {w} for degree {j}")));
            }
            weights[j] += w;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALISATION_TOL {
            return Err(Error::InvalidSpec(format!("weights sum to {total}, not 1")));
        }
        Ok(DegreeSpec { weights })
    }

    /// Maximum degree taken from the largest listed degree.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let max_degree = pairs.iter().map(|p| p.0).max().unwrap_or(0);
        Self::new(max_degree, pairs)
    }

    pub fn regular(j: usize) -> Result<Self> {
        Self::new(j, &[(j, 1.0)])
    }

    pub fn max_degree(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(j).copied().unwrap_or(0.0)
    }

    /// Degrees with positive weight, ascending.
    pub fn active_degrees(&self) -> Vec<usize> {
        (3..self.weights.len()).filter(|&j| self.weights[j] > 0.0).collect()
    }

    pub fn min_degree(&self) -> usize {
        self.active_degrees()[0]
    }

    /// `mu = V(1) = sum j v0(j)`.
    pub fn mean_degree(&self) -> f64 {
        self.weights.iter().enumerate().map(|(j, w)| j as f64 * w).sum()
    }

    pub fn gen_v(&self, x: f64) -> Result<GenV> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("V evaluated at x = {x} outside [0, 1]")));
        }
        Ok(self.gen_v_unchecked(x))
    }

    pub(crate) fn gen_v_unchecked(&self, x: f64) -> GenV {
        let mut out = GenV { value: 0.0, d1: 0.0, d2: 0.0 };
        for (j, &w) in self.weights.iter().enumerate().skip(3) {
            if w == 0.0 {
                continue;
            }
            let jf = j as f64;
            let c = jf * w;
            out.value += c * x.powi(j as i32 - 1);
            out.d1 += c * (jf - 1.0) * x.powi(j as i32 - 2);
            out.d2 += c * (jf - 1.0) * (jf - 2.0) * x.powi(j as i32 - 3);
        }
        out
    }

    /// `theta(zeta) = int_zeta^1 V(u) du = sum v0(j) (1 - zeta^j)`.
    pub fn theta_of_zeta(&self, zeta: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .skip(3)
            .map(|(j, &w)| w * (1.0 - zeta.powi(j as i32)))
            .sum()
    }

    /// Largest-remainder apportionment of `n` among active degrees, ties toward smaller degree.
    pub fn counts(&self, n: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.weights.len()];
        let active = self.active_degrees();
        let mut remainders = Vec::with_capacity(active.len());
        let mut assigned = 0u64;
        for &j in &active {
            let exact = n as f64 * self.weights[j];
            let base = exact.floor();
            counts[j] = base as u64;
            assigned += counts[j];
            remainders.push((exact - base, j));
        }
        // stable sort keeps ascending degree among equal remainders
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut left = n.saturating_sub(assigned);
        for &(_, j) in remainders.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[j] += 1;
            left -= 1;
        }
        counts
    }
}

/// Finite-n ensemble `G(n, m, v_n)` with `m = floor(n rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    pub spec: DegreeSpec,
    pub n: u64,
    pub rho: f64,
    pub m: u64,
    /// `v_n(j)`, indexed by degree.
    pub counts: Vec<u64>,
}

impl EnsembleParams {
    pub fn new(spec: DegreeSpec, n: u64, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Domain(format!("rho = {rho} must be positive")));
        }
        let m = (n as f64 * rho).floor() as u64;
        if m == 0 {
            return Err(Error::Domain(format!("floor(n rho) = 0 for n = {n}, rho = {rho}")));
        }
        let counts = spec.counts(n);
        Ok(EnsembleParams { spec, n, rho, m, counts })
    }

    pub fn mu(&self) -> f64 {
        self.spec.mean_degree()
    }

    pub fn gamma(&self) -> f64 {
        self.mu() / self.rho
    }

    /// Total number of sockets `h_n = sum j v_n(j)`.
    pub fn sockets(&self) -> u64 {
        self.counts.iter().enumerate().map(|(j, &c)| j as u64 * c).sum()
    }
}

/// Threshold and tangency set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub rho_c: f64,
    /// Tangency points `zeta_1 < ... < zeta_N`.
    pub zetas: Vec<f64>,
    /// Non-degeneracy `V''(zeta)/rho_c < (1 - zeta)^-2` at each tangency point.
    pub assumption_ok: Vec<bool>,
    /// `V''(zeta)/rho_c` at each tangency point.
    pub curvature: Vec<f64>,
}

const GRID_POINTS: usize = 10_000;

fn neg_log1m(z: f64) -> f64 {
    -(-z).ln_1p()
}

/// Ratio `V(z) / (-log(1 - z))`, whose supremum is the threshold.
fn ratio(spec: &DegreeSpec, z: f64) -> f64 {
    spec.gen_v_unchecked(z).value / neg_log1m(z)
}

/// Numerator of the ratio's derivative; positive before a maximum, negative after.
fn ratio_slope(spec: &DegreeSpec, z: f64) -> f64 {
    let v = spec.gen_v_unchecked(z);
    v.d1 * neg_log1m(z) - v.value / (1.0 - z)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
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

/// Local maximisers of the ratio, refined.
fn ratio_maxima(spec: &DegreeSpec, points: usize) -> Vec<f64> {
    let h = 1.0 / (points as f64 + 1.0);
    let vals: Vec<f64> = (0..=points + 1)
        .map(|k| if k == 0 || k == points + 1 { 0.0 } else { ratio(spec, k as f64 * h) })
        .collect();
    let mut out = Vec::new();
    for k in 1..=points {
        if vals[k] >= vals[k - 1] && vals[k] > vals[k + 1] {
            let (a, b) = ((k - 1) as f64 * h, ((k + 1) as f64 * h).min(1.0 - 1e-15));
            let a = a.max(1e-15);
            let mut z = golden_max(|z| ratio(spec, z), a, b, 1e-12);
            // the ratio is flat at its maximum, so finish on the slope's sign change
            if ratio_slope(spec, a) > 0.0 && ratio_slope(spec, b) < 0.0 {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if ratio_slope(spec, mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                z = 0.5 * (lo + hi);
            }
            out.push(z);
        }
    }
    out
}

/// Threshold data without failing on degenerate tangencies.
pub fn critical_data(spec: &DegreeSpec) -> CriticalData {
    critical_data_with_grid(spec, GRID_POINTS)
}

pub fn critical_data_with_grid(spec: &DegreeSpec, points: usize) -> CriticalData {
    let maxima = ratio_maxima(spec, points);
    let rho_c = maxima.iter().map(|&z| ratio(spec, z)).fold(f64::NEG_INFINITY, f64::max);
    let mut zetas = Vec::new();
    let mut assumption_ok = Vec::new();
    let mut curvature = Vec::new();
    for &z in &maxima {
        let v = spec.gen_v_unchecked(z);
        let g = neg_log1m(z) - v.value / rho_c;
        if g.abs() <= 1e-9 * v.value.max(1.0) {
            let c = v.d2 / rho_c;
            let bound = (1.0 - z).powi(-2);
            zetas.push(z);
            curvature.push(c);
            assumption_ok.push(c < bound * (1.0 - 1e-9));
        }
    }
    CriticalData { rho_c, zetas, assumption_ok, curvature }
}

/// Threshold `rho_c = sup V(z)/(-log(1-z))` and the tangency set `Z`.
///
/// Fails when a tangency point is degenerate.
pub fn find_rho_c(spec: &DegreeSpec) -> Result<CriticalData> {
    let data = critical_data(spec);
    for (i, ok) in data.assumption_ok.iter().enumerate() {
        if !ok {
            let z = data.zetas[i];
            return Err(Error::DegenerateTangency {
                zeta: z,
                curvature: data.curvature[i],
                bound: (1.0 - z).powi(-2),
            });
        }
    }
    Ok(data)
}

/// Local maxima `(zeta, V(zeta)/(-log(1-zeta)))` of the threshold ratio, ascending in `zeta`.
pub fn ratio_local_maxima(spec: &DegreeSpec) -> Vec<(f64, f64)> {
    ratio_maxima(spec, GRID_POINTS).into_iter().map(|z| (z, ratio(spec, z))).collect()
}

/// Two-degree mixture `a v(low) + (1-a) v(high)` whose threshold ratio has two
/// equal local maxima, so the tangency set has two points. The weight `a` is
/// bisected inside `bracket`, which must contain the balance point.
pub fn balance_two_tangencies(low: usize, high: usize, bracket: (f64, f64)) -> Result<DegreeSpec> {
    let make = |a: f64| DegreeSpec::new(high, &[(low, a), (high, 1.0 - a)]);
    let imbalance = |a: f64| -> Result<f64> {
        let maxima = ratio_local_maxima(&make(a)?);
        if maxima.len() != 2 {
            return Err(Error::InvalidSpec(format!("weight {a} gives {} local maxima, not 2", maxima.len())));
        }
        Ok(maxima[0].1 - maxima[1].1)
    };
    let (mut lo, mut hi) = bracket;
    let (flo, fhi) = (imbalance(lo)?, imbalance(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidSpec(format!("bracket {bracket:?} does not contain a balance point")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if imbalance(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    make(0.5 * (lo + hi))
}

/// `g_rho(z) = -log(1 - z) - V(z)/rho`; nonnegative on (0,1) iff `rho >= rho_c`.
pub fn threshold_gap(spec: &DegreeSpec, rho: f64, z: f64) -> f64 {
    neg_log1m(z) - spec.gen_v_unchecked(z).value / rho
}

/// Means and covariance of `(omega_1, omega_2)` per unit `n` at the start of peeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialMoments {
    pub u: [f64; 2],
    pub qhat: [[f64; 2]; 2],
}

fn check_rho(rho: f64, epsilon: f64) -> Result<()> {
    if !(rho >= epsilon && rho <= 1.0 / epsilon) {
        return Err(Error::Domain(format!("rho = {rho} outside [{epsilon}, {}]", 1.0 / epsilon)));
    }
    Ok(())
}

/// Initial moments for mean degree `mu` and rate `rho`.
pub fn initial_moments(mu: f64, rho: f64, epsilon: f64) -> Result<InitialMoments> {
    check_rho(rho, epsilon)?;
    let g = mu / rho;
    let e1 = (-g).exp();
    let e2 = (-2.0 * g).exp();
    let u = [mu * e1, rho * (1.0 - e1) - mu * e1];
    let q11 = mu * (e1 - e2 * (1.0 - g + g * g));
    let q12 = -mu * (e1 - e2 * (1.0 + g * g));
    let q22 = rho * (e1 * (1.0 + g) - e2 * (1.0 + 2.0 * g + g * g + g * g * g));
    Ok(InitialMoments { u, qhat: [[q11, q12], [q12, q22]] })
}

/// Derivative of the initial means with respect to `rho`.
pub fn initial_mean_derivative(mu: f64, rho: f64) -> [f64; 2] {
    let g = mu / rho;
    let e1 = (-g).exp();
    [g * g * e1, 1.0 - e1 * (1.0 + g + g * g)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generating_function_values() {
        let s = DegreeSpec::regular(3).unwrap();
        let v = s.gen_v(1.0).unwrap();
        assert_eq!((v.value, v.d1, v.d2), (3.0, 6.0, 6.0));
        assert_eq!(s.gen_v(0.0).unwrap().value, 0.0);
        let m = DegreeSpec::new(4, &[(3, 0.5), (4, 0.5)]).unwrap();
        assert!((m.gen_v(0.5).unwrap().value - 0.625).abs() < 1e-15);
        assert!(m.gen_v(1.5).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(DegreeSpec::new(3, &[(3, 0.9)]).is_err());
        assert!(DegreeSpec::new(4, &[(2, 1.0)]).is_err());
        assert!(DegreeSpec::new(4, &[(3, 1.5), (4, -0.5)]).is_err());
    }

    #[test]
    fn apportionment() {
        let s = DegreeSpec::regular(3).unwrap();
        assert_eq!(s.counts(100)[3], 100);
        let m = DegreeSpec::new(4, &[(3, 0.5), (4, 0.5)]).unwrap();
        let c = m.counts(101);
        assert_eq!((c[3], c[4]), (51, 50));
        let t = DegreeSpec::new(7, &[(3, 0.2), (5, 0.3), (7, 0.5)]).unwrap();
        assert_eq!(t.counts(7).iter().sum::<u64>(), 7);
        assert_eq!(t.counts(7)[4], 0);
    }

    #[test]
    fn small_gamma_means_vanish() {
        let m = initial_moments(1e-9, 1.0, 0.01).unwrap();
        assert!(m.u[0].abs() < 1e-8 && m.u[1].abs() < 1e-8);
    }

    #[test]
    fn mean_derivative_matches_differences() {
        for &(mu, rho) in &[(3.0, 1.2), (4.5, 0.7), (3.2, 2.0)] {
            let d = initial_mean_derivative(mu, rho);
            let h = 1e-6;
            let a = initial_moments(mu, rho + h, 0.01).unwrap().u;
            let b = initial_moments(mu, rho - h, 0.01).unwrap().u;
            for i in 0..2 {
                assert!(((a[i] - b[i]) / (2.0 * h) - d[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rho_range_enforced() {
        assert!(initial_moments(3.0, 0.001, 0.01).is_err());
        assert!(initial_moments(3.0, 200.0, 0.01).is_err());
    }
}
