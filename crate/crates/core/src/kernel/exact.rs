//! Exact finite-n kernel of the 2-core peeling chain in rational arithmetic.
//!
//! A state is `z = (omega_1, omega_2, tau_3..tau_L)` for an ensemble with `n`
//! v-nodes and `m` c-nodes. Graphs are counted with labelled sockets, so every
//! graph in the state's ensemble is equally likely.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;

use super::Increment;
use crate::error::{Error, Result};
use crate::exact::{factorial, min_occupancy_count, multinomial, trunc_exp_power_coeff};

/// Largest ensemble handled exactly.
pub const MAX_EXACT_N: u64 = 12;

/// Integer chain state for `K = 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntState {
    pub omega: [u64; 2],
    /// Live v-nodes by degree, indexed by `j - 3`.
    pub tau: Vec<u64>,
}

impl IntState {
    pub fn max_degree(&self) -> usize {
        self.tau.len() + 2
    }

    /// Live sockets `sum j tau_j`.
    pub fn sockets(&self) -> u64 {
        self.tau.iter().enumerate().map(|(i, &t)| (i as u64 + 3) * t).sum()
    }

    pub fn live(&self) -> u64 {
        self.tau.iter().sum()
    }

    /// Applies an increment, `None` if a coordinate would go negative.
    pub fn apply(&self, dz: &[i64]) -> Option<IntState> {
        let add = |a: u64, d: i64| u64::try_from(a as i64 + d).ok();
        Some(IntState {
            omega: [add(self.omega[0], dz[0])?, add(self.omega[1], dz[1])?],
            tau: self.tau.iter().zip(&dz[2..]).map(|(&t, &d)| add(t, d)).collect::<Option<Vec<_>>>()?,
        })
    }

    pub fn to_vec(&self) -> Vec<u64> {
        let mut v = vec![self.omega[0], self.omega[1]];
        v.extend_from_slice(&self.tau);
        v
    }
}

fn check_size(n: u64, m: u64, z: &IntState) -> Result<()> {
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge(format!("n = {n} > {MAX_EXACT_N}")));
    }
    if z.omega[0] + z.omega[1] > m || z.live() > n {
        return Err(Error::Infeasible(format!("state {:?} exceeds n = {n}, m = {m}", z.to_vec())));
    }
    Ok(())
}

/// Number of graphs `h(z)` in the state's ensemble.
pub fn graph_count(z: &IntState, n: u64, m: u64) -> Result<BigUint> {
    check_size(n, m, z)?;
    let d = z.sockets();
    let [z1, z2] = z.omega;
    if d < z1 {
        return Ok(BigUint::zero());
    }
    let dbar = (d - z1) as usize;
    let z0 = m - z1 - z2;
    let mut tau_parts = z.tau.clone();
    tau_parts.push(n - z.live());
    let rational = BigRational::from_integer(BigInt::from(
        multinomial(&[z1, z2, z0]) * multinomial(&tau_parts) * factorial(d),
    )) * trunc_exp_power_coeff(2, z2, dbar);
    debug_assert!(rational.is_integer());
    let value = rational.to_integer();
    debug_assert_eq!(
        value,
        BigInt::from(
            multinomial(&[z1, z2, z0]) * multinomial(&tau_parts) * factorial(d) / factorial(dbar as u64)
                * min_occupancy_count(2, dbar, z2 as usize)
        )
    );
    Ok(value.to_biguint().expect("graph counts are nonnegative"))
}

/// Number of `(graph, chosen degree-1 c-node)` pairs of a fixed graph in the
/// target ensemble's preimage, i.e. `N(z' | z)`.
fn preimage_count(z: &IntState, next: &IntState, ell: usize, n: u64, m: u64) -> BigRational {
    let [z1, z2] = z.omega;
    let [y1, y2] = next.omega;
    let z0 = m as i64 - (z1 + z2) as i64;
    let y0 = m as i64 - (y1 + y2) as i64;
    // q01 + q02 = y0 - z0, q12 - q01 = y1 - z1, q02 + q12 = z2 - y2
    let a = y0 - z0;
    let b = y1 as i64 - z1 as i64;
    let removed_after = n - next.live();
    let mut total = BigRational::zero();
    for q01 in 1..=a.max(0) {
        let q02 = a - q01;
        let q12 = b + q01;
        if q02 < 0 || q12 < 0 || q02 + q12 != z2 as i64 - y2 as i64 {
            continue;
        }
        let (q01, q02, q12) = (q01 as u64, q02 as u64, q12 as u64);
        if q01 + q02 > y0 as u64 || q12 > y1 {
            continue;
        }
        if q01 as usize > ell {
            continue;
        }
        for q22 in 0..=y2 {
            let coeff = product_coeff(q02, q12 + q22, ell - q01 as usize);
            if coeff.is_zero() {
                continue;
            }
            let choose = multinomial(&[q01, q02, y0 as u64 - q01 - q02])
                * crate::exact::binomial(y1, q12)
                * crate::exact::binomial(y2, q22)
                * q01;
            total += BigRational::from_integer(BigInt::from(choose)) * coeff;
        }
    }
    total * BigRational::from_integer(BigInt::from(factorial(ell as u64) * removed_after))
}

/// `coeff[e_2^a e_1^b, x^deg]`.
fn product_coeff(a: u64, b: u64, deg: usize) -> BigRational {
    use crate::exact::Series;
    let len = deg + 1;
    Series::trunc_exp(2, len).pow(a).mul(&Series::trunc_exp(1, len).pow(b)).coeff(deg)
}

/// Exact transition probability `W_n(dz | z)`.
pub fn exact_kernel(z: &IntState, inc: &Increment, n: u64, m: u64) -> Result<BigRational> {
    check_size(n, m, z)?;
    let h = graph_count(z, n, m)?;
    if h.is_zero() {
        return Err(Error::Infeasible(format!("no graph realises state {:?}", z.to_vec())));
    }
    if z.omega[0] == 0 {
        return Err(Error::Infeasible("no degree-1 c-node to peel".into()));
    }
    if inc.dz.len() != z.tau.len() + 2 {
        return Ok(BigRational::zero());
    }
    let Some(ell) = inc.dz[2..].iter().position(|&d| d == -1).map(|i| i + 3) else {
        return Ok(BigRational::zero());
    };
    if inc.dz[2..].iter().filter(|&&d| d != 0).count() != 1 {
        return Ok(BigRational::zero());
    }
    let Some(next) = z.apply(&inc.dz) else {
        return Ok(BigRational::zero());
    };
    if next.omega[0] + next.omega[1] > m {
        return Ok(BigRational::zero());
    }
    let h_next = graph_count(&next, n, m)?;
    if h_next.is_zero() {
        return Ok(BigRational::zero());
    }
    let count = preimage_count(z, &next, ell, n, m);
    let denom = BigInt::from(h) * BigInt::from(z.omega[0]);
    Ok(count * BigRational::from_integer(BigInt::from(h_next)) / BigRational::from_integer(denom))
}

/// All increments with nonzero exact probability, in a deterministic order.
pub fn exact_kernel_distribution(z: &IntState, n: u64, m: u64) -> Result<Vec<(Vec<i64>, BigRational)>> {
    let mut out = Vec::new();
    let l = z.max_degree();
    for ell in 3..=l {
        if z.tau[ell - 3] == 0 {
            continue;
        }
        for y2 in 0..=z.omega[1] {
            for y1 in 0..=m {
                let mut dz = vec![y1 as i64 - z.omega[0] as i64, y2 as i64 - z.omega[1] as i64];
                dz.extend((3..=l).map(|j| if j == ell { -1 } else { 0 }));
                let inc = Increment { dz: dz.clone(), ell, q: Vec::new() };
                let w = exact_kernel(z, &inc, n, m)?;
                if !w.is_zero() {
                    out.push((dz, w));
                }
            }
        }
    }
    Ok(out)
}

/// Sum of the exact kernel over all increments.
pub fn exact_total_mass(z: &IntState, n: u64, m: u64) -> Result<BigRational> {
    Ok(exact_kernel_distribution(z, n, m)?
        .into_iter()
        .fold(BigRational::zero(), |acc, (_, w)| acc + w))
}

/// Exact probability as a float.
pub fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}
