//! Long-run behaviour of a lifted OU mode: without an atom two starts forget
//! their difference in W1; with an atom the long-run mean keeps it.

use voltlift::kernels::{KernelSpec, SpectralOperator};
use voltlift::laplace_lift::QuadratureRule;
use voltlift::sim::*;
use voltlift::special::WeightParams;
use voltlift::stats::*;

fn lift(atom_mass: f64) -> LiftData {
    let w = WeightParams::laplace(0.0, 0.0).with_atom(atom_mass);
    LiftData::Laplace(QuadratureRule::discrete(w, vec![1.0], vec![1.0]).unwrap())
}

fn start(m: &ModelSpec, atom: f64, coef: f64) -> ModelSpec {
    let mut m = m.clone();
    m.forcing = Forcing::LiftState {
        atom: vec![atom],
        kernel: KernelSpec::resolvent(1.0, 1.0, 1.0),
        coef: vec![coef],
    };
    m
}

pub fn main() {
    let m = ModelSpec {
        spectral: SpectralOperator::single(1.0).unwrap(),
        kernel_b: KernelSpec::resolvent(1.0, 1.0, 1.0),
        kernel_sigma: KernelSpec::resolvent(1.0, 1.0, 1.0),
        drift: Drift::Zero,
        diffusion: Diffusion::Additive { sigma0: vec![0.5] },
        forcing: Forcing::Zero,
    };
    let run = RunSpec {
        dt: 0.01,
        paths: 400,
        seed: 6,
        scheme: Scheme::LaplaceLift,
        burn_in: 0.0,
    };
    let grid: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64).collect();
    let r = limit_marginal_check(&start(&m, 0.0, 4.0), &lift(0.0), 0, &grid, &run).unwrap();
    println!("t,w1_to_limit");
    for row in &r.result.rows {
        println!("{},{:.4e}", row.x, row.y);
    }
    println!("noise floor {:.4e}, log-linear decay rate {:.3}", r.noise_floor, r.result.fitted_slope);
    println!();
    let mut affine = m.clone();
    affine.drift = Drift::Affine {
        b: vec![-0.5],
        b0: vec![0.0],
    };
    let run = RunSpec {
        dt: 0.02,
        paths: 50,
        burn_in: 20.0,
        ..run
    };
    let mean = |atom: f64| stationary_mean(&start(&affine, atom, 0.0), &lift(0.5), Observable::Identity(0), 100.0, &run).unwrap();
    let (base, _) = mean(0.0);
    println!("atom,long_run_mean,stderr,offset,predicted_offset");
    for atom in [0.0, 0.9, -0.6] {
        let (m, se) = mean(atom);
        println!("{atom},{m:.5},{se:.1e},{:.5},{:.5}", m - base, atom / 1.5);
    }
}
