use voltlift::kernels::{KernelSpec, SpectralOperator};
use voltlift::laplace_lift::{build_quadrature, LiftStateLaplace, QuadratureRule};
use voltlift::shift_lift::{xi_inf_project, ShiftGrid};
use voltlift::sim::*;
use voltlift::special::WeightParams;
use voltlift::stats::wasserstein_1d;

fn model(alpha: f64, theta: f64, sigma0: f64) -> ModelSpec {
    ModelSpec {
        spectral: SpectralOperator::single(theta).unwrap(),
        kernel_b: KernelSpec::resolvent(alpha, alpha, 1.0),
        kernel_sigma: KernelSpec::resolvent(alpha, alpha, 1.0),
        drift: Drift::Zero,
        diffusion: Diffusion::Additive { sigma0: vec![sigma0] },
        forcing: Forcing::Zero,
    }
}

fn ou_node(theta: f64, atom_mass: f64) -> QuadratureRule {
    QuadratureRule::discrete(WeightParams::laplace(0.0, 0.0).with_atom(atom_mass), vec![theta], vec![1.0]).unwrap()
}

fn sup_diff(a: &Paths, b: &Paths) -> (f64, f64) {
    let d = a.u.iter().flatten().zip(b.u.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let s = a.u.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    (d, s)
}

#[test]
fn increments_are_deterministic_with_correct_moments() {
    let dt = 0.01;
    let lambdas = [1.0, 0.25];
    let n = 100_000;
    let a = gaussian_increments(42, 3, n, dt, &lambdas);
    let b = gaussian_increments(42, 3, n, dt, &lambdas);
    assert_eq!(a, b);
    assert_ne!(a, gaussian_increments(42, 4, n, dt, &lambdas));
    assert_ne!(a, gaussian_increments(43, 3, n, dt, &lambdas));
    for (mode, lam) in lambdas.iter().enumerate() {
        let xs: Vec<f64> = (0..n).map(|k| a[k * 2 + mode]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * (dt * lam / n as f64).sqrt(), "mean {mean}");
        assert!((var / (dt * lam) - 1.0).abs() < 0.05, "var {var}");
    }
}

#[test]
fn config_validation() {
    assert!(SimConfig::new(0.01, 1.0, 1, 0, Scheme::Direct).validate().is_ok());
    assert!(SimConfig::new(0.03, 1.0, 1, 0, Scheme::Direct).validate().is_err());
    assert!(SimConfig::new(0.01, 1.0, 0, 0, Scheme::Direct).validate().is_err());
    assert!(SimConfig::new(-0.01, 1.0, 1, 0, Scheme::Direct).validate().is_err());
    assert!(SimConfig::new(0.01, 1.0, 1, 0, Scheme::Direct).with_burn_in(0.005).validate().is_err());
    let g = ShiftGrid::new(0.01, 5.0, WeightParams::shift(2.0, 0.5)).unwrap();
    let m = model(1.0, 1.0, 0.5);
    assert!(ShiftPlan::new(&m, &g, 0.015).is_err());
    assert!(ShiftPlan::new(&m, &g, 0.02).is_ok());
    let c = SimConfig::new(0.01, 1.0, 1, 0, Scheme::LaplaceLift);
    assert!(simulate(&m, &LiftData::None, &c).is_err());
}

#[test]
fn model_validation_and_constants() {
    let mut m = model(0.75, 1.0, 1.0);
    m.drift = Drift::Affine {
        b: vec![0.0, 2.0, 0.0, 0.0],
        b0: vec![0.0],
    };
    assert!(m.validate().is_err());
    m.spectral = SpectralOperator::new(vec![1.0, 2.0], vec![1.0, 0.25]).unwrap();
    m.drift = Drift::Affine {
        b: vec![0.0, 2.0, 0.0, 0.0],
        b0: vec![0.0, 3.0],
    };
    m.diffusion = Diffusion::Affine {
        s0: vec![1.0, 0.0],
        s1: vec![0.5, 2.0],
    };
    let l = m.lipschitz();
    assert!((l.b_lip - 2.0).abs() < 1e-12);
    assert!((l.b_lin - 3.0).abs() < 1e-12);
    assert!((l.sigma_lip - 1.0).abs() < 1e-12);
    assert!((l.sigma_lin - 1.0).abs() < 1e-12);
    m.drift = Drift::Tanh { c: vec![-0.3, 0.2] };
    let l = m.lipschitz();
    assert_eq!((l.b_lip, l.b_lin), (0.3, 0.3));
    assert!((operator_norm(&[3.0, 0.0, 0.0, -4.0], 2) - 4.0).abs() < 1e-12);
}

#[test]
fn zero_noise_direct_holds_constant_forcing() {
    let mut m = model(0.75, 1.0, 0.0);
    m.forcing = Forcing::Constant { v: vec![1.7] };
    let p = simulate_direct(&m, &SimConfig::new(0.01, 2.0, 2, 1, Scheme::Direct)).unwrap();
    assert!(p.u.iter().flatten().all(|x| *x == 1.7));
}

#[test]
fn zero_noise_laplace_follows_semigroup() {
    let mut m = model(0.75, 1.0, 0.0);
    m.forcing = Forcing::LiftState {
        atom: vec![0.0],
        kernel: KernelSpec::resolvent(0.75, 0.75, 1.0),
        coef: vec![1.0],
    };
    let q = build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-3, 1e4, 120).unwrap();
    let c = SimConfig::new(0.01, 1.0, 1, 5, Scheme::LaplaceLift);
    let run = simulate_laplace_lift(&m, &q, &c).unwrap();
    let s0 = laplace_initial_state(&m, &q).unwrap();
    for k in [0, 1, 10, 100] {
        let g = s0.apply_semigroup(&q, k as f64 * 0.01).unwrap().project(&q).unwrap()[0];
        let u = run.paths.at(0, k, 0);
        assert!((u - g).abs() <= 1e-12 * g.abs().max(1.0), "k {k}: {u} vs {g}");
    }
}

#[test]
fn single_node_laplace_is_exact_ou_update() {
    let (theta, sigma, dt) = (2.0, 0.5, 0.01);
    let m = model(1.0, theta, sigma);
    let c = SimConfig::new(dt, 1.0, 2, 9, Scheme::LaplaceLift);
    let lift = LiftData::Laplace(ou_node(theta, 0.0));
    let p = simulate(&m, &lift, &c).unwrap();
    let e = (-theta * dt).exp();
    let f = (1.0 - e) / (theta * dt);
    for path in 0..2 {
        let dw = gaussian_increments(9, path as u64, 100, dt, &[1.0]);
        let mut u = 0.0;
        for k in 0..100 {
            u = e * u + f * sigma * dw[k];
            assert!((p.at(path, k + 1, 0) - u).abs() < 1e-14);
        }
    }
}

#[test]
fn laplace_lift_matches_direct_on_fractional_benchmark() {
    let m = model(0.75, 1.0, 1.0);
    let c = SimConfig::new(1e-3, 2.0, 2, 7, Scheme::Direct);
    let d = simulate_direct(&m, &c).unwrap();
    let q = build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-4, 1e6, 200).unwrap();
    let l = simulate_laplace_lift(&m, &q, &c).unwrap().paths;
    let (diff, sup) = sup_diff(&d, &l);
    assert!(diff <= 0.05 * sup, "{diff} vs {sup}");
}

#[test]
fn shift_lift_matches_direct_on_ou() {
    let m = model(1.0, 1.0, 1.0);
    let c = SimConfig::new(1e-2, 2.0, 2, 7, Scheme::Direct);
    let d = simulate_direct(&m, &c).unwrap();
    let g = ShiftGrid::new(1e-2, 12.0, WeightParams::shift(2.0, 0.5)).unwrap();
    let s = simulate_shift_lift(&m, &g, &c).unwrap().paths;
    let (diff, sup) = sup_diff(&d, &s);
    assert!(diff <= 0.02 * sup, "{diff} vs {sup}");
}

#[test]
fn shift_lift_constant_state_is_stationary_without_dynamics() {
    let mut m = model(0.8, 1.0, 0.0);
    m.forcing = Forcing::Constant { v: vec![0.6] };
    let g = ShiftGrid::new(0.01, 5.0, WeightParams::shift(2.0, 0.5)).unwrap();
    let p = simulate_shift_lift(&m, &g, &SimConfig::new(0.02, 3.0, 1, 0, Scheme::ShiftLift)).unwrap().paths;
    assert!(p.u.iter().flatten().all(|x| (x - 0.6).abs() < 1e-15));
}

#[test]
fn s_infinity_is_conserved_along_paths() {
    let mut m = model(1.0, 1.0, 0.5);
    m.drift = Drift::Tanh { c: vec![-0.5] };
    m.forcing = Forcing::LiftState {
        atom: vec![0.7],
        kernel: KernelSpec::resolvent(1.0, 1.0, 1.0),
        coef: vec![1.0],
    };
    let c = SimConfig::new(0.01, 2.0, 3, 4, Scheme::ShiftLift);
    let g = ShiftGrid::new(0.01, 8.0, WeightParams::shift(2.0, 0.5)).unwrap();
    let run = simulate_shift_lift(&m, &g, &c).unwrap();
    for s in &run.final_states {
        assert_eq!(xi_inf_project(s), vec![0.7]);
    }
    let q = ou_node(1.0, 0.5);
    let run = simulate_laplace_lift(&m, &q, &c).unwrap();
    for s in &run.final_states {
        assert_eq!(s.s_infinity(&q).project(&q).unwrap(), vec![0.7]);
    }
}

#[test]
fn atom_forcing_needs_an_atom() {
    let mut m = model(1.0, 1.0, 0.5);
    m.forcing = Forcing::LiftState {
        atom: vec![0.7],
        kernel: KernelSpec::resolvent(1.0, 1.0, 1.0),
        coef: vec![0.0],
    };
    assert!(LaplacePlan::new(&m, &ou_node(1.0, 0.0), 0.01).is_err());
}

#[test]
fn markov_restart_matches_in_law() {
    let m = model(1.0, 1.0, 0.5);
    let q = ou_node(1.0, 0.0);
    let plan = LaplacePlan::new(&m, &q, 0.02).unwrap();
    let paths = 400;
    let half = SimConfig::new(0.02, 1.0, paths, 11, Scheme::LaplaceLift);
    let first = simulate_laplace_lift_from(&plan, &half, |_| plan.initial_state().clone()).unwrap();
    let second_cfg = SimConfig::new(0.02, 1.0, paths, 12, Scheme::LaplaceLift);
    let second = simulate_laplace_lift_from(&plan, &second_cfg, |p| first.final_states[p].clone()).unwrap();
    let restarted = second.paths.marginal(second.paths.steps, 0);
    let direct = |seed| {
        let c = SimConfig::new(0.02, 2.0, paths, seed, Scheme::LaplaceLift);
        let p = simulate_laplace_lift(&m, &q, &c).unwrap().paths;
        p.marginal(p.steps, 0)
    };
    let (a, b) = (direct(21), direct(22));
    let floor = wasserstein_1d(&a, &b, 1.0).unwrap();
    let sd = (0.125f64 * (1.0 - (-4.0f64).exp())).sqrt();
    let d = wasserstein_1d(&restarted, &a, 1.0).unwrap();
    assert!(d <= 3.0 * floor.max(sd / (paths as f64).sqrt()), "{d} vs floor {floor}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let m = model(0.75, 1.0, 1.0);
    let q = build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-3, 1e4, 60).unwrap();
    let lift = LiftData::Laplace(q);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let c = SimConfig::new(0.01, 1.0, 6, 3, Scheme::LaplaceLift);
            let l = simulate(&m, &lift, &c).unwrap();
            let d = simulate(&m, &lift, &SimConfig { scheme: Scheme::Direct, ..c }).unwrap();
            (l, d)
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn burn_in_shifts_recording() {
    let m = model(1.0, 1.0, 0.5);
    let lift = LiftData::Laplace(ou_node(1.0, 0.0));
    let long = simulate(&m, &lift, &SimConfig::new(0.01, 2.0, 2, 8, Scheme::LaplaceLift)).unwrap();
    let burned =
        simulate(&m, &lift, &SimConfig::new(0.01, 1.0, 2, 8, Scheme::LaplaceLift).with_burn_in(1.0)).unwrap();
    for p in 0..2 {
        for k in 0..=100 {
            assert_eq!(burned.at(p, k, 0), long.at(p, k + 100, 0));
        }
    }
}

#[test]
fn lift_state_shapes_are_checked() {
    let m = model(1.0, 1.0, 0.5);
    let plan = LaplacePlan::new(&m, &ou_node(1.0, 0.0), 0.01).unwrap();
    assert!(plan.stepper_from(LiftStateLaplace::zeros(3, 1)).is_err());
}

#[test]
fn ou_stationary_variance_small_sample() {
    let (theta, sigma) = (1.0, 0.5);
    let m = model(1.0, theta, sigma);
    let lift = LiftData::Laplace(ou_node(theta, 0.0));
    let c = SimConfig::new(0.01, 40.0, 100, 5, Scheme::LaplaceLift).with_burn_in(10.0);
    let sums = map_paths(&m, &lift, &c, |_| (0.0, 0usize), |a, _, u| {
        a.0 += u[0] * u[0];
        a.1 += 1;
    })
    .unwrap();
    let (s, n) = sums.iter().fold((0.0, 0), |(s, n), a| (s + a.0, n + a.1));
    let var = s / n as f64;
    assert!((var / (sigma * sigma / (2.0 * theta)) - 1.0).abs() < 0.1, "{var}");
}
