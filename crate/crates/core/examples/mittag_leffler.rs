//! Mittag-Leffler evaluation against its closed forms and the fractional
//! resolvent values used by the kernels.

use voltlift::special::MittagLeffler;

pub fn main() {
    let exp = MittagLeffler::new(1.0, 1.0).unwrap();
    let cos = MittagLeffler::new(2.0, 1.0).unwrap();
    println!("z,E11(z),exp(z),rel_err");
    for z in [-30.0, -10.0, -1.0, 0.0, 1.0, 5.0] {
        let v = exp.eval(z);
        println!("{z},{v:.15e},{:.15e},{:.1e}", z.exp(), (v / z.exp() - 1.0).abs());
    }
    println!();
    println!("z,E21(-z^2),cos(z),abs_err");
    for z in [0.0, 1.0, std::f64::consts::PI, 6.0, 10.0] {
        let v = cos.eval(-z * z);
        println!("{z:.6},{v:.15},{:.15},{:.1e}", z.cos(), (v - z.cos()).abs());
    }
    println!();
    println!("alpha,beta,z,E");
    for (a, b, z) in [(0.5, 1.0, -1.0), (0.75, 0.75, -1.0), (0.75, 0.75, -50.0), (1.2, 1.2, -5.0)] {
        println!("{a},{b},{z},{:.15e}", MittagLeffler::new(a, b).unwrap().eval(z));
    }
}
