//! Kernel values, Bernstein densities and their reconstruction from the
//! default 200-node Laplace quadrature.

use voltlift::kernels::{bernstein_density, reconstruct, KernelSpec};
use voltlift::laplace_lift::build_quadrature;
use voltlift::special::WeightParams;

pub fn main() {
    let q = build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-4, 1e4, 200).unwrap();
    let specs = [
        ("fractional_rl(0.7)", KernelSpec::fractional(0.7)),
        ("log_kernel", KernelSpec::LogKernel),
        ("resolvent(0.7,0.7,1)", KernelSpec::resolvent(0.7, 0.7, 1.0)),
        ("resolvent(0.7,0.7,4)", KernelSpec::resolvent(0.7, 0.7, 4.0)),
    ];
    println!("kernel,t,value,reconstruction,rel_err");
    for (name, s) in &specs {
        let k = s.compile().unwrap();
        for t in [0.05, 0.5, 1.0, 5.0, 20.0] {
            let v = k.value(t).unwrap();
            let r = reconstruct(&k, &q, t).unwrap().value;
            println!("{name},{t},{v:.10e},{r:.10e},{:.1e}", (r / v - 1.0).abs());
        }
    }
    println!();
    println!("kernel,x,density");
    for (name, s) in &specs {
        for x in [0.01, 1.0, 100.0] {
            println!("{name},{x},{:.10e}", bernstein_density(s, x).unwrap());
        }
    }
}
