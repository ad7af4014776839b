//! Recalibrates the series/asymptotic crossover of the Mittag-Leffler evaluator
//! and prints the branch disagreement at the stored table values.

use voltlift::special::{z_cross, MittagLeffler};

fn disagreement(alpha: f64, r: f64) -> f64 {
    [0.3, 0.5, 0.7, 1.0, 1.3, 1.7, 2.0]
        .iter()
        .map(|&beta| {
            let e = MittagLeffler::new(alpha, beta).unwrap();
            (e.series(-r) - e.asymptotic(-r)).abs()
        })
        .fold(0.0, f64::max)
}

fn main() {
    println!("alpha,best_r,best_gap,table_r,table_gap");
    for i in 1..=20 {
        let alpha = i as f64 / 10.0;
        let (mut best_r, mut best) = (f64::NAN, f64::INFINITY);
        for j in 0..=60 {
            let r = (16.0 + 0.5 * j as f64).powf(alpha);
            let d = disagreement(alpha, r);
            if d < best {
                best = d;
                best_r = r;
            }
        }
        let zc = z_cross(alpha);
        println!("{alpha:.1},{best_r:.4},{best:.3e},{zc:.4},{:.3e}", disagreement(alpha, zc));
    }
}
