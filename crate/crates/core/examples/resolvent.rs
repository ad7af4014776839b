//! Resolvent of rho(t) = 0.5 e^{-t}, whose exact resolvent is 0.5 e^{-t/2}.

use voltlift::resolvent::{solve_resolvent, SampledKernel};

pub fn main() {
    let dt = 1e-3;
    let rho = SampledKernel::from_fn(|t| 0.5 * (-t).exp(), dt, 20_000).unwrap();
    let r = solve_resolvent(&rho).unwrap();
    println!("t,r,exact,rel_err");
    for t in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let k = (t / dt).round() as usize;
        let exact = 0.5 * (-0.5 * r.time(k)).exp();
        println!("{t},{:.8},{exact:.8},{:.1e}", r.samples[k], (r.samples[k] / exact - 1.0).abs());
    }
    println!();
    println!("rho_l1,r_l1,identity_residual");
    println!("{:.6},{:.6},{:.1e}", rho.l1, r.l1, (r.l1 - rho.l1 / (1.0 - rho.l1)).abs());
}
