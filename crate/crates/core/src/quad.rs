//! Adaptive Gauss-Kronrod quadrature on finite, geometric and semi-infinite ranges.

use crate::error::{invalid, Error, Result};
use crate::special::TOL;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SUBDIVISIONS: usize = 4000;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive GK15 on `[a, b]` with global error control `err <= max(abs, rel |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64, abs: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("bounds", if a.is_finite() { b } else { a }, "must be finite"));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, rel, abs).map(|v| -v);
    }
    let (v0, e0) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v0, e0)];
    let mut total = v0;
    let mut err = e0;
    while err > abs.max(rel * total.abs()) {
        if panels.len() >= MAX_SUBDIVISIONS {
            if err <= 1e3 * abs.max(rel * total.abs()) {
                break;
            }
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not converge: err {err:e}, value {total:e}"
            )));
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (pa, pb, pv, pe) = panels.swap_remove(idx);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            break;
        }
        let (lv, le) = gk15(&f, pa, m);
        let (rv, re) = gk15(&f, m, pb);
        total += lv + rv - pv;
        err += le + re - pe;
        panels.push((pa, m, lv, le));
        panels.push((m, pb, rv, re));
    }
    let sum: f64 = panels.iter().map(|p| p.2).sum();
    if !sum.is_finite() {
        return Err(Error::Numerical(format!("non-finite integral on [{a}, {b}]")));
    }
    Ok(sum)
}

/// Integral over `[a, b]` with `0 < a < b`, split into geometric panels of
/// ratio at most `e`. Suited to integrands with power-law behaviour in `x`.
pub fn integrate_geometric<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> Result<f64> {
    if !(a > 0.0 && b > a) {
        return Err(invalid("a", a, "need 0 < a < b"));
    }
    let n = ((b / a).ln().ceil() as usize).max(1);
    let r = (b / a).powf(1.0 / n as f64);
    let mut total = 0.0;
    let mut lo = a;
    for i in 0..n {
        let hi = if i + 1 == n { b } else { lo * r };
        total += integrate(&f, lo, hi, rel, TOL.quad_abs * (hi - lo).min(1.0))?;
        lo = hi;
    }
    Ok(total)
}

/// Integral over `(0, b]` for integrands with an integrable power singularity at 0:
/// geometric panels down to `b * 1e-300^(1/...)` are summed until they stop contributing.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, b: f64, rel: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(invalid("b", b, "must be positive"));
    }
    let mut total = 0.0;
    let mut hi = b;
    let mut quiet = 0;
    for _ in 0..700 {
        let lo = hi * 0.25;
        let v = integrate(&f, lo, hi, rel, 0.0)?;
        total += v;
        if v.abs() <= rel * 1e-3 * total.abs() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        hi = lo;
    }
    Err(Error::Numerical("integral near 0 does not converge".into()))
}

/// Integral over `[a, inf)`, panels doubling in length until contributions vanish.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, rel: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(invalid("a", a, "must be finite"));
    }
    let mut total = 0.0;
    let mut lo = a;
    let mut width = a.abs().max(1.0);
    let mut quiet = 0;
    for _ in 0..1100 {
        let hi = lo + width;
        let v = integrate(&f, lo, hi, rel, 0.0)?;
        total += v;
        if v.abs() <= rel * 1e-3 * total.abs() || (v == 0.0 && total == 0.0) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::Numerical("integral to infinity does not converge".into()))
}

/// Integral over `(0, inf)` split at 1.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, rel: f64) -> Result<f64> {
    Ok(integrate_from_zero(&f, 1.0, rel)? + integrate_to_inf(&f, 1.0, rel)?)
}
