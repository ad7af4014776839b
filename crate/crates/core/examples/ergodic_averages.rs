//! Mean-square convergence of time averages and the CLT normalization for an
//! Ornstein-Uhlenbeck mode (single-node Laplace lift).

use voltlift::kernels::{KernelSpec, SpectralOperator};
use voltlift::laplace_lift::QuadratureRule;
use voltlift::sim::*;
use voltlift::special::WeightParams;
use voltlift::stats::*;

pub fn main() {
    let (theta, sigma) = (1.0, 0.5);
    let m = ModelSpec {
        spectral: SpectralOperator::single(theta).unwrap(),
        kernel_b: KernelSpec::resolvent(1.0, 1.0, 1.0),
        kernel_sigma: KernelSpec::resolvent(1.0, 1.0, 1.0),
        drift: Drift::Zero,
        diffusion: Diffusion::Additive { sigma0: vec![sigma] },
        forcing: Forcing::Zero,
    };
    let lift = LiftData::Laplace(
        QuadratureRule::discrete(WeightParams::laplace(0.0, 0.0), vec![theta], vec![1.0]).unwrap(),
    );
    let run = RunSpec {
        dt: 0.02,
        paths: 200,
        seed: 1,
        scheme: Scheme::LaplaceLift,
        burn_in: 0.0,
    };
    let r = lln_experiment(&m, &lift, Observable::Identity(0), &[10.0, 20.0, 40.0, 80.0], &run, Reference::Analytic { value: 0.0 })
        .unwrap();
    println!("T,mse,mse_stderr,T_times_mse");
    for row in &r.result.rows {
        println!("{},{:.6e},{:.2e},{:.4}", row.x, row.y, row.y_err, row.x * row.y);
    }
    let (lo, hi) = r.result.fitted_slope_ci;
    println!("fitted slope {:.3} (95% CI {lo:.3}..{hi:.3}); T * mse -> (sigma/theta)^2 = {}", r.result.fitted_slope, (sigma / theta).powi(2));
    println!();
    let run = RunSpec { burn_in: 10.0, ..run };
    let c = clt_experiment(&m, &lift, Observable::Identity(0), 100.0, &run, Some(0.0)).unwrap();
    println!("sigma_hat,sigma_hat_acov,target,skewness,excess_kurtosis,truncation_lag");
    println!(
        "{:.4},{:.4},{},{:.3},{:.3},{:.2}",
        c.sigma_hat,
        c.sigma_hat_acov,
        sigma / theta,
        c.skewness,
        c.excess_kurtosis,
        c.truncation_lag
    );
}
