//! Lifted and direct simulations on shared noise: the fractional benchmark
//! through the Laplace lift and the OU case through the shift lift.

use voltlift::kernels::{KernelSpec, SpectralOperator};
use voltlift::laplace_lift::build_quadrature;
use voltlift::shift_lift::ShiftGrid;
use voltlift::sim::*;
use voltlift::special::WeightParams;

fn model(alpha: f64) -> ModelSpec {
    ModelSpec {
        spectral: SpectralOperator::single(1.0).unwrap(),
        kernel_b: KernelSpec::resolvent(alpha, alpha, 1.0),
        kernel_sigma: KernelSpec::resolvent(alpha, alpha, 1.0),
        drift: Drift::Zero,
        diffusion: Diffusion::Additive { sigma0: vec![1.0] },
        forcing: Forcing::Zero,
    }
}

fn relative_sup_diff(a: &Paths, b: &Paths) -> f64 {
    let d = a.u.iter().flatten().zip(b.u.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    d / a.u.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn main() {
    let frac = model(0.75);
    let q = build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-4, 1e6, 200).unwrap();
    println!("case,dt,sup_diff_over_sup_u");
    for dt in [4e-3, 2e-3, 1e-3] {
        let c = SimConfig::new(dt, 2.0, 2, 7, Scheme::Direct);
        let d = simulate_direct(&frac, &c).unwrap();
        let l = simulate_laplace_lift(&frac, &q, &c).unwrap().paths;
        println!("laplace_fractional,{dt},{:.4e}", relative_sup_diff(&d, &l));
    }
    let ou = model(1.0);
    for dt in [1e-2, 2e-3] {
        let c = SimConfig::new(dt, 2.0, 2, 7, Scheme::Direct);
        let d = simulate_direct(&ou, &c).unwrap();
        let g = ShiftGrid::new(dt, 12.0, WeightParams::shift(2.0, 0.5)).unwrap();
        let s = simulate_shift_lift(&ou, &g, &c).unwrap().paths;
        println!("shift_ou,{dt},{:.4e}", relative_sup_diff(&d, &s));
    }
}
