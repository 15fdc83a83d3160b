use corescale::omega::airy::{airy, airy_ai, AI0};
use corescale::omega::{
    k_integrand, k_integrand_direct, kernel_k, kernel_k_complex, omega_airy_detailed, omega_mc, sample_minima,
    McSettings, IMAG_TOL,
};
use corescale::stats::mean_ci;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(x, y, Ai, Ai', Bi, Bi')` at `z = x + iy`, 40-digit arithmetic rounded to f64.
const REFERENCE: [(f64, f64, C, C, C, C); 17] = [
    (0.5, 0.0, C::new(0.23169360648083348, 0.0), C::new(-0.2249105326646839, 0.0), C::new(0.8542770431031554, 0.0), C::new(0.5445725641405923, 0.0)),
    (6.0, 0.0, C::new(9.947694360252889e-06, 0.0), C::new(-2.4765200397034955e-05, 0.0), C::new(6536.446104809864, 0.0), C::new(15725.602621930477, 0.0)),
    (4.0, 0.0, C::new(0.0009515638512048018, 0.0), C::new(-0.001958640950204179, 0.0), C::new(83.84707140846814, 0.0), C::new(161.9266835046134, 0.0)),
    (-7.5, 0.0, C::new(0.3217757163806479, 0.0), C::new(0.3188095066985546, 0.0), C::new(-0.1124634850764908, 0.0), C::new(0.8778022815457609, 0.0)),
    (3.0, 3.0, C::new(0.015890465185411946, 0.013787696008862739), C::new(-0.02057154421988705, -0.03874897499823877), C::new(1.6211862040816605, -3.2669810660655014), C::new(5.8223737835334965, -4.775793352503679)),
    (2.5, -1.0, C::new(-0.0019120892713783827, 0.018032905765349206), C::new(-0.0018792086096351543, -0.03102762428412435), C::new(0.5125437840170126, -5.334995579271627), C::new(-1.2050484049806622, -8.290971678096389)),
    (0.0, 8.0, C::new(435.62314214160256, 7206.34474890413), C::new(13311.58997252232, -15274.898369529776), C::new(-7206.344754071034, 435.6231363062428), C::new(15274.898371042622, 13311.58995035621)),
    (9.0, 2.0, C::new(3.3450075429290768e-09, 7.389758152523465e-10), C::new(-9.94221053578438e-09, -3.3391646445140026e-09), C::new(14493103.214275949, -4913838.259772359), C::new(45010846.186723374, -9806366.550749728)),
    (12.0, -5.0, C::new(2.1001897847642028e-13, -7.872725471160126e-13), C::new(-1.952027428958897e-13, 2.9442885933880374e-12), C::new(3423551952.959619, 54067696242.63629), C::new(50686401806.06251, 187743866270.53036)),
    (-20.0, 3.0, C::new(-23003.578637620492, 87419.75109444997), C::new(399303.8499579338, 74953.59992367278), C::new(-87419.75109483494, -23003.578637549297), C::new(-74953.59992412566, 399303.8499562313)),
    (5.0, 7.0, C::new(-0.005661300425183489, 0.013339304850133874), C::new(0.03245633061754876, -0.027552452342345716), C::new(-2.890980352222031, -2.4005109249019565), C::new(-4.158210445475392, -10.105356475398969)),
    (1.0, 0.5, C::new(0.11791053318992208, -0.07897644336959969), C::new(-0.15515939167449752, 0.07138312043218834), C::new(1.0642484093060358, 0.42310591658329705), C::new(0.6795104251233365, 0.5426642609278547)),
    (7.0, 0.0, C::new(7.492128863997167e-07, 0.0), C::new(-2.008150894738792e-06, 0.0), C::new(80327.79070943025, 0.0), C::new(209552.6708739713, 0.0)),
    (8.5, 8.5, C::new(2.7161865148522146e-06, -2.4370242384921767e-06), C::new(-1.1939006640562736e-05, 4.277664222251865e-06), C::new(11864.582038273806, 4177.141224286284), C::new(32226.67326891675, 29239.14272080568)),
    (-3.0, -9.0, C::new(19182020.222422224, -54497.178714563364), C::new(-34251187.917529054, 47536546.26653094), C::new(-54497.1787145618, -19182020.222422224), C::new(47536546.266530946, 34251187.917529054)),
    (15.0, 15.0, C::new(-1.5242800743788565e-12, 1.2389854126760858e-12), C::new(8.672380567053099e-12, -2.608439737350857e-12), C::new(-16857882233.977139, -5027056464.473308), C::new(-62690727994.0781, -51203923689.16987)),
    (0.0, -25.0, C::new(-4.585050249001211e+24, 1.7920504625684325e+24), C::new(9.892894185708116e+24, -2.250050766367497e+25), C::new(1.7920504625684325e+24, 4.585050249001211e+24), C::new(-2.250050766367497e+25, -9.892894185708116e+24)),
];

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn airy_values_match_reference() {
    for (x, y, ai, aip, bi, bip) in REFERENCE {
        let a = airy(C::new(x, y)).unwrap();
        assert!(rel(a.ai, ai) < 1e-10, "Ai({x}, {y}) rel {}", rel(a.ai, ai));
        assert!(rel(a.aip, aip) < 1e-10, "Ai'({x}, {y}) rel {}", rel(a.aip, aip));
        assert!(rel(a.bi, bi) < 1e-10, "Bi({x}, {y}) rel {}", rel(a.bi, bi));
        assert!(rel(a.bip, bip) < 1e-10, "Bi'({x}, {y}) rel {}", rel(a.bip, bip));
    }
    // Ai(0) = 3^{-2/3} / Gamma(2/3) to 50 digits: 0.35502805388781723926...
    assert!((airy_ai(C::new(0.0, 0.0)).unwrap().0.re - 0.355_028_053_887_817_24).abs() < 1e-16);
    assert_eq!(AI0, 0.355_028_053_887_817_2);
}

#[test]
fn wronskian_on_imaginary_axis() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let y: f64 = rng.random_range(-8.0..8.0);
        let a = airy(C::new(0.0, y)).unwrap();
        let w = a.ai * a.bip - a.aip * a.bi;
        let scale = (a.ai * a.bip).norm().max(1.0);
        assert!((w - C::new(1.0 / std::f64::consts::PI, 0.0)).norm() < 1e-9 * scale, "y = {y}: {w}");
    }
}

#[test]
fn airy_equation_residual_along_rays() {
    let h = 1e-3;
    for angle in [0.0f64, 0.5, 1.0, 1.6, 2.2, 2.9, -0.8, -2.0] {
        for r in [1.0, 3.0, 5.5, 6.5, 9.0, 11.0, 20.0] {
            let z = C::from_polar(r, angle);
            let d = C::from_polar(h, angle);
            let f = |t: f64| airy_ai(z + d * (t / h)).unwrap().0;
            // sixth-order central second difference
            let fd = (f(-3.0 * h) * 2.0 - f(-2.0 * h) * 27.0 + f(-h) * 270.0 - f(0.0) * 490.0 + f(h) * 270.0
                - f(2.0 * h) * 27.0
                + f(3.0 * h) * 2.0)
                / (180.0 * d * d);
            let w = f(0.0);
            assert!((fd - z * w).norm() <= 1e-6 * (z * w).norm(), "r = {r}, angle = {angle}");
        }
    }
}

#[test]
fn stable_integrand_matches_direct_form() {
    for c in [0.0, 0.7, 2.5, 7.5] {
        for y in [-4.0, -1.5, -0.2, 0.0, 0.3, 2.0, 4.0] {
            let s = k_integrand(c, y).unwrap();
            let d = k_integrand_direct(c, y).unwrap();
            assert!((s - d).norm() <= 1e-9 * d.norm().max(1e-3), "c = {c}, y = {y}: {s} vs {d}");
        }
    }
}

#[test]
fn kernel_is_a_distribution_function() {
    let mut last = -1.0;
    for k in 0..=24 {
        let z = k as f64 * 0.25;
        let kz = kernel_k_complex(z).unwrap();
        assert!(kz.im.abs() <= IMAG_TOL);
        let sq = kz.re * kz.re;
        assert!((0.0..=1.0).contains(&sq), "K({z})^2 = {sq}");
        assert!(kz.re >= last - 1e-12, "K must increase");
        last = kz.re;
    }
    assert!(kernel_k(0.0).unwrap().abs() < 1e-12);
    assert!((kernel_k(6.0).unwrap() - 1.0).abs() < 1e-4);
    assert!(kernel_k(6.5).is_err());
}

#[test]
fn omega_by_quadrature() {
    let o = omega_airy_detailed().unwrap();
    assert!(o.value > 0.0);
    assert!(o.quadrature_error < 1e-9);
    assert!(o.tail < 1e-6);
    assert!((0.0..=1.0).contains(&o.integrand[0].1));
    // K carries about 1e-10 absolute error, so monotonicity holds up to that
    for w in o.integrand.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-9, "1 - K^2 must decrease: {w:?}");
    }
    // regression lock
    assert!((o.value - 0.996_193_02).abs() < 1e-7, "{}", o.value);
}

#[test]
fn pure_brownian_minimum_matches_reflection() {
    let s = McSettings { trials: 20_000, horizon: 1.0, step: 1e-3, seed: 5, drift: false, two_sided: false };
    let v = sample_minima(&s).unwrap();
    let (mean, half) = mean_ci(&v);
    let exact = (2.0 / std::f64::consts::PI).sqrt();
    assert!((-mean - exact).abs() < 2.0 * half, "{} vs {exact} +- {half}", -mean);
    assert!(v.iter().all(|&x| x <= 0.0));
}

#[test]
fn minima_are_nonpositive_and_horizon_stable() {
    let base = McSettings { trials: 20_000, horizon: 4.0, step: 1e-3, seed: 9, drift: true, two_sided: true };
    let short = sample_minima(&base).unwrap();
    let long = sample_minima(&McSettings { horizon: 8.0, ..base }).unwrap();
    assert!(short.iter().chain(&long).all(|&x| x <= 0.0));
    let (m4, h4) = mean_ci(&short);
    let (m8, _) = mean_ci(&long);
    assert!((m4 - m8).abs() < h4, "{m4} vs {m8}");
    let second = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    let (s4, s8) = (second(&short), second(&long));
    assert!(s4.is_finite() && (s4 - s8).abs() < 0.05 * s4);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = McSettings { trials: 300, horizon: 4.0, step: 1e-3, seed: 3, drift: true, two_sided: true };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| sample_minima(&s).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn monte_carlo_preconditions() {
    assert!(omega_mc(&McSettings { horizon: 3.0, ..McSettings::default() }).is_err());
    assert!(omega_mc(&McSettings { step: 2e-3, ..McSettings::default() }).is_err());
    assert!(omega_mc(&McSettings { trials: 100, ..McSettings::default() }).is_err());
}
