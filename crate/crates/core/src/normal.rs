//! Standard normal distribution function in R^N with identity covariance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Product of one-dimensional distribution functions.
pub fn cdf_n(x: &[f64]) -> f64 {
    x.iter().map(|&v| cdf(v)).product()
}

/// Gradient of [`cdf_n`].
pub fn grad_cdf_n(x: &[f64]) -> Vec<f64> {
    let marg: Vec<f64> = x.iter().map(|&v| cdf(v)).collect();
    (0..x.len())
        .map(|i| {
            let others: f64 = marg.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, m)| m).product();
            pdf(x[i]) * others
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(cdf_n(&[0.0, 0.0, 0.0]), 0.125);
        // 0.84134474606854293 from a 50-digit erf evaluation
        assert!((cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((cdf(-8.0) - 6.220_960_574_271_784e-16).abs() < 1e-28);
    }

    #[test]
    fn gradient_matches_differences() {
        let pts = [[0.3, -1.2, 2.1], [-2.5, 0.0, 1.0], [2.9, -2.9, 0.5]];
        for p in pts {
            let g = grad_cdf_n(&p);
            for i in 0..3 {
                let h = 1e-5;
                let mut a = p;
                let mut b = p;
                a[i] += h;
                b[i] -= h;
                let fd = (cdf_n(&a) - cdf_n(&b)) / (2.0 * h);
                assert!(((fd - g[i]) / g[i]).abs() < 1e-8, "{fd} vs {}", g[i]);
            }
        }
    }
}
