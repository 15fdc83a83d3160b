use corescale::kernel::{
    covariance_g, drift_f, jacobian_a, kernel_distribution, numeric_jacobian, random_state, solve_lambda,
    solve_lambda_rhs, lambda_equation, KernelParams, StateDensity,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn enumerated_moments(x: &StateDensity) -> (DVector<f64>, DMatrix<f64>) {
    let dist = kernel_distribution(x).unwrap();
    let dim = x.dim();
    let mut mean = DVector::zeros(dim);
    let mut second = DMatrix::zeros(dim, dim);
    for (inc, w) in &dist {
        let d = DVector::from_iterator(dim, inc.dz.iter().map(|&v| v as f64));
        mean += &d * *w;
        second += &d * d.transpose() * *w;
    }
    let cov = second - &mean * mean.transpose();
    (mean, cov)
}

#[test]
fn normalisation_and_socket_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 2..=3 {
        for l in 3..=6 {
            for _ in 0..50 {
                let x = random_state(k, l, 0.05, &mut rng);
                let params = KernelParams::new(&x).unwrap();
                assert!((params.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let total: f64 = kernel_distribution(&x).unwrap().iter().map(|p| p.1).sum();
                assert!((total - 1.0).abs() < 1e-12, "k={k} l={l} total={total}");
            }
        }
    }
}

#[test]
fn moments_equal_enumerated_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 2..=4 {
        for l in 3..=6 {
            for _ in 0..20 {
                let x = random_state(k, l, 0.05, &mut rng);
                let (mean, cov) = enumerated_moments(&x);
                let f = drift_f(&x).unwrap();
                let g = covariance_g(&x).unwrap();
                assert!((&f - &mean).amax() < 1e-12, "drift k={k} l={l}");
                assert!((&g - &cov).amax() < 1e-11, "covariance k={k} l={l}:\n{g}\n{cov}");
                assert!((f.rows(k, l - 2).sum() + 1.0).abs() < 1e-13);
                let eig = g.symmetric_eigen().eigenvalues.min();
                assert!(eig >= -1e-10);
            }
        }
    }
}

#[test]
fn zero_degree_class_has_zero_probability() {
    let x = StateDensity::new(vec![0.2, 0.5], vec![0.4, 0.0, 0.3]);
    for (inc, w) in kernel_distribution(&x).unwrap() {
        if inc.ell == 4 {
            assert_eq!(w, 0.0);
        }
    }
}

#[test]
fn lambda_gradient_matches_implicit_differentiation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 2..=3 {
        for _ in 0..30 {
            let x = random_state(k, 5, 0.05, &mut rng);
            let lam = solve_lambda(&x).unwrap();
            let xk = x.u[k - 1];
            let rhs = lambda_equation(k, lam);
            let h = 1e-6;
            let fprime = (lambda_equation(k, lam + h) - lambda_equation(k, (lam - h).max(0.0))) / (lam + h - (lam - h).max(0.0));
            let flat = x.to_vec();
            for i in 0..flat.len() {
                // d rhs / d x_i
                let drhs = if i < k - 1 {
                    -((i + 1) as f64) / xk
                } else if i == k - 1 {
                    -rhs / xk
                } else {
                    (i - k + 3) as f64 / xk
                };
                let implicit = drhs / fprime;
                let step = 1e-6 * flat[i].abs().max(1.0);
                let mut a = flat.clone();
                let mut b = flat.clone();
                a[i] += step;
                b[i] -= step;
                let fd = (solve_lambda(&StateDensity::from_slice(k, &a)).unwrap()
                    - solve_lambda(&StateDensity::from_slice(k, &b)).unwrap())
                    / (2.0 * step);
                assert!((fd - implicit).abs() <= 1e-6 * (1.0 + implicit.abs()), "k={k} i={i}: {fd} vs {implicit}");
            }
        }
    }
}

#[test]
fn jacobian_is_stable_under_step_halving() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 2..=3 {
        for _ in 0..20 {
            let x = random_state(k, 5, 0.05, &mut rng);
            let scale = corescale::kernel::default_fd_scale();
            let f = |y: &[f64]| drift_f(&StateDensity::from_slice(k, y));
            let a = numeric_jacobian(f, &x.to_vec(), scale).unwrap();
            let b = numeric_jacobian(f, &x.to_vec(), scale / 2.0).unwrap();
            assert!(!a.projected);
            for (ea, eb) in a.matrix.iter().zip(b.matrix.iter()) {
                assert!((ea - eb).abs() <= 1e-6 * (1.0 + ea.abs()));
            }
        }
    }
}

/// Partial derivatives of the two-core drift in `x_1` and `x_2`, expanded by hand:
/// with `p_0 = x_1/d`, `p_1 = x_2 r(lambda)/d`, `rhs = (d - x_1)/x_2` and
/// `lambda' = rhs'/f'(lambda)`.
#[test]
fn jacobian_matches_hand_expansion_where_classes_balance() {
    let v = vec![0.3, 0.25, 0.2];
    // find x_1 with p_1 = p_0
    let x2 = 0.6;
    let balance = |x1: f64| {
        let p = KernelParams::new(&StateDensity::new(vec![x1, x2], v.clone())).unwrap();
        p.p[1] - p.p[0]
    };
    let (mut lo, mut hi) = (1e-6, 0.9);
    assert!(balance(lo) > 0.0 && balance(hi) < 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = StateDensity::new(vec![0.5 * (lo + hi), x2], v.clone());
    let p = KernelParams::new(&x).unwrap();
    assert!((p.p[1] - p.p[0]).abs() < 1e-12);
    let d = x.d();
    let lam = p.lambda;
    let r = p.p[1] * d / x2;
    let h = 1e-7;
    let r_prime = ((lambda_equation(2, lam + h) - (lam + h)) - (lambda_equation(2, lam - h) - (lam - h))) / (2.0 * h);
    let f_prime = 1.0 + r_prime;
    let rhs = (d - x.u[0]) / x2;
    let dp1_dx1 = -r_prime / (d * f_prime);
    let dp1_dx2 = r / d + x2 * r_prime * (-rhs / x2) / f_prime / d;
    let expected = [
        [p.r1 * (dp1_dx1 - 1.0 / d), p.r1 * dp1_dx2],
        [-p.r1 * dp1_dx1, -p.r1 * dp1_dx2],
    ];
    let jac = jacobian_a(&x).unwrap().matrix;
    for i in 0..2 {
        for j in 0..2 {
            assert!((jac[(i, j)] - expected[i][j]).abs() < 1e-7, "({i},{j}) {} vs {}", jac[(i, j)], expected[i][j]);
        }
    }
}

#[test]
fn socket_probabilities_are_smooth() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-3;
    for k in 2..=3 {
        for _ in 0..500 {
            let x = random_state(k, 5, 0.1, &mut rng);
            let flat = x.to_vec();
            for i in 0..flat.len() {
                let at = |t: f64| {
                    let mut y = flat.clone();
                    y[i] += t * h;
                    KernelParams::new(&StateDensity::from_slice(k, &y)).unwrap().p
                };
                let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
                for c in 0..=k {
                    let third = (p2[c] - 2.0 * p1[c] + 2.0 * m1[c] - m2[c]) / (2.0 * h * h * h);
                    assert!(third.is_finite() && third.abs() <= 1e6, "third derivative {third}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn lambda_solver_inverts_the_equation(k in 2usize..6, lam in 0.0f64..400.0) {
        let rhs = lambda_equation(k, lam);
        let got = solve_lambda_rhs(k, rhs).unwrap();
        prop_assert!((lambda_equation(k, got) - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn kernel_is_normalised(seed in 0u64..10_000, k in 2usize..4, l in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_state(k, l, 0.05, &mut rng);
        let total: f64 = kernel_distribution(&x).unwrap().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
