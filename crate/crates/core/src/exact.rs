//! Exact combinatorics on big integers and truncated rational power series.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `(sum parts)! / prod(parts!)`.
pub fn multinomial(parts: &[u64]) -> BigUint {
    let mut total = 0u64;
    let mut acc = BigUint::one();
    for &p in parts {
        total += p;
        acc *= binomial(total, p);
    }
    acc
}

/// Truncated power series with rational coefficients, index = power of x.
#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<BigRational>);

impl Series {
    pub fn one(len: usize) -> Self {
        let mut c = vec![BigRational::zero(); len];
        if len > 0 {
            c[0] = BigRational::one();
        }
        Series(c)
    }

    /// `e_k(x) = sum_{i >= k} x^i / i!` truncated to `len` coefficients.
    pub fn trunc_exp(k: usize, len: usize) -> Self {
        let mut c = vec![BigRational::zero(); len];
        let mut fact = BigUint::one();
        for (i, slot) in c.iter_mut().enumerate() {
            if i > 0 {
                fact *= i as u64;
            }
            if i >= k {
                *slot = BigRational::new(1.into(), fact.clone().into());
            }
        }
        Series(c)
    }

    pub fn mul(&self, other: &Series) -> Series {
        let len = self.0.len().min(other.0.len());
        let mut out = vec![BigRational::zero(); len];
        for (i, a) in self.0.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.0.iter().enumerate().take(len - i) {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        Series(out)
    }

    pub fn pow(&self, mut e: u64) -> Series {
        let mut base = self.clone();
        let mut acc = Series::one(self.0.len());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.0.get(i).cloned().unwrap_or_else(BigRational::zero)
    }
}

/// `coeff[e_k(x)^power, x^degree]`.
pub fn trunc_exp_power_coeff(k: usize, power: u64, degree: usize) -> BigRational {
    Series::trunc_exp(k, degree + 1).pow(power).coeff(degree)
}

/// Number of ways to place `items` labelled items into `boxes` labelled boxes
/// with at least `min` items per box, i.e. `items! coeff[e_min^boxes, x^items]`.
pub fn min_occupancy_count(min: usize, items: usize, boxes: usize) -> BigUint {
    if boxes == 0 {
        return if items == 0 { BigUint::one() } else { BigUint::zero() };
    }
    // dp over boxes; dp[s] = ways to fill the boxes so far with s items
    let mut dp = vec![BigUint::zero(); items + 1];
    dp[0] = BigUint::one();
    for _ in 0..boxes {
        let mut next = vec![BigUint::zero(); items + 1];
        for (s, ways) in dp.iter().enumerate() {
            if ways.is_zero() {
                continue;
            }
            for k in min..=(items - s) {
                next[s + k] += ways * binomial((items - s) as u64, k as u64);
            }
        }
        dp = next;
    }
    // the ordered DP above picks items for box 1, then box 2, ... so it already
    // counts labelled placements
    dp[items].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(multinomial(&[2, 1, 1]), BigUint::from(12u32));
    }

    #[test]
    fn occupancy_matches_series() {
        for min in 0..3 {
            for items in 0..9 {
                for boxes in 0..4 {
                    let direct = min_occupancy_count(min, items, boxes);
                    let series = trunc_exp_power_coeff(min, boxes as u64, items)
                        * BigRational::from_integer(BigInt::from(factorial(items as u64)));
                    assert_eq!(BigRational::from_integer(BigInt::from(direct)), series);
                }
            }
        }
        // surjections of 4 items onto 2 boxes: 2^4 - 2
        assert_eq!(min_occupancy_count(1, 4, 2), BigUint::from(14u32));
        // 4 items, 2 boxes, each at least 2: C(4,2)
        assert_eq!(min_occupancy_count(2, 4, 2), BigUint::from(6u32));
    }
}
