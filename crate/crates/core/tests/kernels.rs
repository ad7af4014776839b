use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use voltlift::kernels::*;
use voltlift::laplace_lift::{build_quadrature, QuadratureRule};
use voltlift::special::{mittag_leffler, MlParams, WeightParams};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn default_rule() -> QuadratureRule {
    build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-4, 1e4, 200).unwrap()
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}

#[test]
fn kernel_value_examples() {
    let v = kernel_value(&KernelSpec::fractional(0.5), 1.0).unwrap();
    assert!(rel(v, 1.0 / PI.sqrt()) < 1e-14);
    let v = kernel_value(&KernelSpec::LogKernel, 1.0).unwrap();
    assert!(rel(v, 2f64.ln()) < 1e-15);
    let v = kernel_value(&KernelSpec::resolvent(1.0, 1.0, 3.0), 0.5).unwrap();
    assert!(rel(v, (-1.5f64).exp()) < 1e-14);
    assert!(kernel_value(&KernelSpec::LogKernel, 0.0).is_err());
    assert!(kernel_value(&KernelSpec::fractional(1.5), 1.0).is_err());
}

#[test]
fn density_examples() {
    let v = bernstein_density(&KernelSpec::resolvent(0.5, 0.5, 1.0), 1.0).unwrap();
    assert!(rel(v, 1.0 / (2.0 * PI)) < 1e-14);
    let v = bernstein_density(&KernelSpec::fractional(0.5), 1.0).unwrap();
    assert!(rel(v, 1.0 / PI) < 1e-14);
    let v = bernstein_density(&KernelSpec::LogKernel, 1e-12).unwrap();
    assert!(rel(v, 1.0) < 1e-11);
    let d = KernelSpec::LogKernel.damped(2.0);
    assert_eq!(bernstein_density(&d, 1.5).unwrap(), 0.0);
    assert!(bernstein_density(&KernelSpec::LogKernel, 0.0).is_err());
}

#[test]
fn scaling_property() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let a = rng.gen_range(0.05..0.95);
        let b = rng.gen_range(0.05..a + 0.95);
        let th = (rng.gen_range(-3.0..3.0f64)).exp();
        let x = (rng.gen_range(-6.0..6.0f64)).exp();
        let lhs = resolvent_density(a, b, th, x);
        let rhs = th.powf(-b / a) * resolvent_density(a, b, 1.0, x * th.powf(-1.0 / a));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300), "{a} {b} {th} {x}: {lhs} vs {rhs}");
    }
}

#[test]
fn equal_parameters_drop_cross_term() {
    for &a in &[0.2f64, 0.5, 0.7, 0.9] {
        for &x in &[1e-3f64, 0.1, 1.0, 7.0, 300.0] {
            let th = 1.7;
            let xa = x.powf(a);
            let general = (x.powf(2.0 * a - a) * (a * PI).sin() - th * x.powf(0.0) * 0.0)
                / (PI * (th * th + 2.0 * th * (PI * a).cos() * xa + xa * xa));
            assert!(rel(resolvent_density(a, a, th, x), general) < 1e-13);
        }
    }
}

#[test]
fn density_nonnegative_in_monotone_regime() {
    // Complete monotonicity holds for alpha <= beta <= 1.
    for &(a, b) in &[(0.3, 0.3), (0.5, 0.8), (0.7, 0.7), (0.7, 1.0), (0.9, 0.95)] {
        for x in log_grid(1e-6, 1e6, 400) {
            assert!(resolvent_density(a, b, 1.3, x) >= 0.0, "{a} {b} {x}");
        }
    }
    // beta < alpha changes sign near 0.
    assert!(resolvent_density(0.7, 0.5, 1.0, 1e-3) < 0.0);
}

fn check_reconstruction(spec: &KernelSpec, tol: f64) {
    let q = default_rule();
    let k = spec.compile().unwrap();
    for t in log_grid(0.05, 20.0, 60) {
        let got = reconstruct(&k, &q, t).unwrap();
        let want = k.value(t).unwrap();
        assert!(rel(got.value, want) <= tol, "{spec:?} t={t}: {got:?} vs {want}");
    }
}

#[test]
fn laplace_reconstruction_default_rule() {
    check_reconstruction(&KernelSpec::fractional(0.7), 1e-4);
    check_reconstruction(&KernelSpec::LogKernel, 1e-4);
    check_reconstruction(&KernelSpec::resolvent(0.7, 0.7, 1.0), 1e-4);
    check_reconstruction(&KernelSpec::resolvent(0.7, 0.7, 4.0), 1e-4);
    let q = default_rule();
    let v = reconstruct_kernel(&KernelSpec::LogKernel, &q, 1.0).unwrap();
    assert!((v - 2f64.ln()).abs() < 1e-4);
    let v = reconstruct_kernel(&KernelSpec::resolvent(0.7, 0.7, 1.0), &q, 1.0).unwrap();
    assert!((v - 0.210_393_346_389_023_688_7).abs() < 1e-4);
}

#[test]
fn damped_and_shifted_reconstruction() {
    let q = default_rule();
    for base in [KernelSpec::fractional(0.7), KernelSpec::LogKernel, KernelSpec::resolvent(0.6, 0.8, 2.0)] {
        let b = base.compile().unwrap();
        let d = base.clone().damped(0.5).compile().unwrap();
        let s = base.clone().time_shifted(0.3).compile().unwrap();
        let qd = default_rule().offset(0.5).unwrap();
        for t in log_grid(0.05, 20.0, 25) {
            let want = (-0.5 * t).exp() * b.value(t).unwrap();
            assert!(rel(reconstruct(&d, &qd, t).unwrap().value, want) < 1e-4, "{base:?} damped t={t}");
            let want = b.value(t + 0.3).unwrap();
            assert!(rel(reconstruct(&s, &q, t).unwrap().value, want) < 1e-4, "{base:?} shifted t={t}");
        }
    }
}

#[test]
fn exponential_point_mass() {
    let k = KernelSpec::resolvent(1.0, 1.0, 2.5).compile().unwrap();
    assert_eq!(k.atoms(), vec![(2.5, 1.0)]);
    let q = QuadratureRule::discrete(WeightParams::laplace(0.0, 0.0), vec![2.5], vec![1.0]).unwrap();
    for t in [0.1, 1.0, 3.0] {
        assert!(rel(reconstruct(&k, &q, t).unwrap().value, (-2.5 * t).exp()) < 1e-15);
    }
    let q = default_rule().with_kernel_atoms(std::slice::from_ref(&k)).unwrap();
    assert!(rel(reconstruct(&k, &q, 0.7).unwrap().value, (-1.75f64).exp()) < 1e-14);
    let d = KernelSpec::resolvent(1.0, 1.0, 2.5).damped(0.5).compile().unwrap();
    assert_eq!(d.atoms(), vec![(3.0, 1.0)]);
    assert!(reconstruct(&d, &default_rule(), 1.0).is_err());
}

#[test]
fn corrections_are_reported() {
    let k = KernelSpec::fractional(0.7).compile().unwrap();
    let r = reconstruct(&k, &default_rule(), 1.0).unwrap();
    assert!(r.head > 0.0 && r.tail >= 0.0);
    assert!((r.quadrature + r.head + r.tail - r.value).abs() < 1e-15);
    // Head of the fractional density is exactly sin(a pi)/pi x^{-a}.
    let want = (0.7 * PI).sin() / PI * 1e-4f64.powf(0.3) / 0.3;
    assert!(rel(r.head, want) < 1e-3);
}

#[test]
fn shift_derivative_examples() {
    let v = shift_derivative_density(&KernelSpec::resolvent(1.0, 1.0, 1.0), 1.0).unwrap();
    assert!(rel(v, -(-1f64).exp()) < 1e-13);
    for &(a, b, th, x) in &[(0.7, 0.7, 1.0, 0.5), (1.2, 1.0, 2.0, 1.0)] {
        let k = KernelSpec::resolvent(a, b, th).compile().unwrap();
        let h = 1e-5 * x;
        let fd = (k.value(x + h).unwrap() - k.value(x - h).unwrap()) / (2.0 * h);
        assert!(rel(k.shift_derivative(x).unwrap(), fd) < 1e-5);
    }
    assert!(shift_derivative_density(&KernelSpec::LogKernel, 1.0).is_err());
}

#[test]
fn resolvent_value_matches_mittag_leffler() {
    let p = MlParams::new(0.7, 0.7).unwrap();
    let k = KernelSpec::resolvent(0.7, 0.7, 1.0).compile().unwrap();
    for t in [0.3f64, 1.0, 4.0] {
        let want = t.powf(-0.3) * mittag_leffler(p, -t.powf(0.7)).unwrap();
        assert!(rel(k.value(t).unwrap(), want) < 1e-15);
    }
}

#[test]
fn step_integrals() {
    for spec in [
        KernelSpec::fractional(0.7),
        KernelSpec::LogKernel,
        KernelSpec::resolvent(0.75, 0.75, 1.0),
        KernelSpec::LogKernel.damped(0.4),
    ] {
        let k = spec.compile().unwrap();
        let closed = k.step_integral(0.2, 1.3).unwrap();
        let quad = voltlift::quad::integrate(|s| k.value_unchecked(s), 0.2, 1.3, 1e-13, 0.0).unwrap();
        assert!(rel(closed, quad) < 1e-10, "{spec:?}");
    }
    let k = KernelSpec::resolvent(1.0, 1.0, 1.0).compile().unwrap();
    assert!(rel(k.step_l2(0.0, 1.0).unwrap(), (1.0 - (-2f64).exp()) / 2.0) < 1e-10);
    assert!(rel(k.l2_norm_sq().unwrap(), 0.5) < 1e-9);
}

#[test]
fn weyl_examples() {
    assert_eq!(weyl_eigenvalues(1, 1.0, 3).unwrap().thetas, vec![1.0, 4.0, 9.0]);
    assert_eq!(weyl_eigenvalues(2, 2.0, 2).unwrap().thetas, vec![2.0, 4.0]);
    let t = weyl_eigenvalues(4, 1.0, 4).unwrap().thetas;
    for (a, b) in t.iter().zip([1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0]) {
        assert!(rel(*a, b) < 1e-15);
    }
    assert!(weyl_eigenvalues(0, 1.0, 3).is_err());
}

#[test]
fn spectral_operator_noise_convention() {
    let s = SpectralOperator::with_gamma(vec![1.0, 4.0, 9.0], 0.5).unwrap();
    assert_eq!(s.noise_eigs, vec![1.0, 0.5, 1.0 / 3.0]);
    assert!(SpectralOperator::new(vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
    assert!(SpectralOperator::new(vec![1.0], vec![1.0, 1.0]).is_err());
}

#[test]
fn per_mode_kernels() {
    let k = KernelSpec::resolvent(0.7, 0.7, 1.0).damped(0.1);
    assert_eq!(k.with_theta(5.0), KernelSpec::resolvent(0.7, 0.7, 5.0).damped(0.1));
    assert_eq!(KernelSpec::LogKernel.with_theta(5.0), KernelSpec::LogKernel);
}

#[test]
fn laplace_regime_validation() {
    assert!(KernelSpec::resolvent(0.7, 1.6, 1.0).validate_laplace().is_ok());
    assert!(KernelSpec::resolvent(0.7, 1.8, 1.0).validate_laplace().is_err());
    assert!(KernelSpec::resolvent(1.2, 1.0, 1.0).validate_laplace().is_err());
    assert!(KernelSpec::resolvent(1.2, 1.0, 1.0).validate().is_ok());
    assert!(KernelSpec::resolvent(1.0, 1.0, 1.0).validate_laplace().is_ok());
}

#[test]
fn kernel_spec_serde_roundtrip() {
    let k = KernelSpec::resolvent(0.7, 0.7, 1.0).time_shifted(0.2).damped(0.1);
    let s = serde_json::to_string(&k).unwrap();
    let back: KernelSpec = serde_json::from_str(&s).unwrap();
    assert_eq!(k, back);
}
