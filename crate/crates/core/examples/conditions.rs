//! Contraction and moment hypotheses for the trace-class Laplace lift and the
//! fractional shift lift on their reference parameter sets.

use voltlift::conditions::{frac_hjm_report, trace_class_report, FracHjmParams, TraceClassParams};

pub fn main() {
    let tp = TraceClassParams {
        alpha: 0.75,
        beta: 0.75,
        eps0: 0.1,
        eps1: 0.2,
        theta1: 1.0,
        p_exp: 25.0,
        b_zero: false,
    };
    let fp = FracHjmParams {
        alpha: 1.2,
        beta: 1.2,
        eps0: 0.3,
        eps1: 0.2,
        gamma_exp: 0.0,
        thetas: vec![1.0],
        p_exp: 10.0,
    };
    println!("theorem,C,K0,K1,lhs_contraction,theta_bound,passes");
    for c in [0.1, 0.01] {
        let r = trace_class_report(&tp, c, c, 0.5).unwrap();
        println!("{},{c},{:.12},{:.12},{:.4},{:.4},{}", r.theorem, r.k0, r.k1, r.lhs_contraction, r.theta_bound, r.passes());
    }
    for c in [1.0, 1e-4] {
        let r = frac_hjm_report(&fp, c, c, 1.0).unwrap();
        println!("{},{c},{:.12},{:.12},{:.4},{:.4},{}", r.theorem, r.k0, r.k1, r.lhs_contraction, r.theta_bound, r.passes());
    }
}
