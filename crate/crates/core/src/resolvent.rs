//! Linear Volterra resolvents `r = rho + rho * r`, the contraction kernels
//! `rho_gen`, `rho_b0`, `rho_add`, rate functions and tail-bound checks.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::special::bdg_constant;

/// Nonnegative kernel sampled on `t_k = (k + offset) dt`; sample `k` stands for
/// the cell `[(k + offset - 1/2) dt, (k + offset + 1/2) dt]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledKernel {
    pub dt: f64,
    pub offset: f64,
    pub samples: Vec<f64>,
    pub l1: f64,
}

impl SampledKernel {
    /// Midpoint samples `f((k + 1/2) dt)`, `k = 0..m`.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, dt: f64, m: usize) -> Result<Self> {
        let samples = (0..m).map(|k| f((k as f64 + 0.5) * dt)).collect();
        Self::new(dt, samples)
    }

    /// Midpoint-sampled kernel.
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        Self::with_offset(dt, 0.5, samples)
    }

    pub fn with_offset(dt: f64, offset: f64, samples: Vec<f64>) -> Result<Self> {
        ensure_finite("dt", dt)?;
        if dt <= 0.0 {
            return Err(invalid("dt", dt, "must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::Insufficient("sampled kernel needs at least one sample".into()));
        }
        for s in &samples {
            ensure_finite("sample", *s)?;
            if *s < 0.0 {
                return Err(invalid("sample", *s, "kernels must be nonnegative"));
            }
        }
        let l1 = dt * samples.iter().sum::<f64>();
        Ok(Self {
            dt,
            offset,
            samples,
            l1,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// End of the sampled range.
    pub fn horizon(&self) -> f64 {
        (self.samples.len() as f64 + self.offset - 0.5) * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 + self.offset) * self.dt
    }

    /// `(dt sum f_k^2)^{1/2}`.
    pub fn l2(&self) -> f64 {
        (self.dt * self.samples.iter().map(|s| s * s).sum::<f64>()).sqrt()
    }

    /// Linear interpolation between samples, constant beyond the ends.
    pub fn value_at(&self, t: f64) -> f64 {
        let u = t / self.dt - self.offset;
        if u <= 0.0 {
            return self.samples[0];
        }
        let i = u.floor() as usize;
        if i + 1 >= self.samples.len() {
            return *self.samples.last().expect("nonempty");
        }
        let f = u - i as f64;
        (1.0 - f) * self.samples[i] + f * self.samples[i + 1]
    }

    /// `int_T^inf` of the piecewise-constant kernel.
    pub fn tail(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for (k, v) in self.samples.iter().enumerate() {
            let lo = ((k as f64 + self.offset - 0.5) * self.dt).max(0.0);
            let hi = (k as f64 + self.offset + 0.5) * self.dt;
            if hi > t {
                s += v * (hi - lo.max(t));
            }
        }
        s
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_offset(self.dt, self.offset, self.samples.iter().map(|s| c * s).collect())
    }
}

/// Default horizon `50 / (1 - ||rho||_1)` time units.
pub fn default_horizon(l1: f64) -> f64 {
    50.0 / (1.0 - l1)
}

/// Forward solve `r_k = rho_k + dt sum_{j<k} rho_{k-1-j} r_j`.
/// The convolution sum approximates `(rho * r)(k dt)`, so the result is
/// attributed to the grid points `t_k = k dt` (offset 0).
pub fn solve_resolvent(rho: &SampledKernel) -> Result<SampledKernel> {
    if rho.l1 >= 1.0 {
        return Err(Error::PaleyWiener { l1: rho.l1 });
    }
    let m = rho.len();
    let dt = rho.dt;
    let mut r = vec![0.0; m];
    for k in 0..m {
        let mut acc = 0.0;
        for j in 0..k {
            acc += rho.samples[k - 1 - j] * r[j];
        }
        r[k] = rho.samples[k] + dt * acc;
    }
    SampledKernel::with_offset(dt, 0.0, r)
}

/// `R(t) = (1 v t)^{-eps} + int_0^t r(t-s) (1 v s)^{-eps} ds` with `eps = lam * p`,
/// the integral discretized at midpoints of cells of width `r.dt`.
pub fn rate_function(r: &SampledKernel, lam: f64, p_exp: f64, t: f64) -> Result<f64> {
    if !(lam > 0.0) {
        return Err(invalid("lambda", lam, "must be positive"));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", t, "must be nonnegative"));
    }
    if t > r.horizon() + 1e-12 * r.horizon() {
        return Err(invalid("t", t, format!("beyond the sampled horizon {}", r.horizon())));
    }
    let eps = lam * p_exp;
    let n = (t / r.dt).floor() as usize;
    let mut acc = 0.0;
    for k in 0..n {
        let s = (k as f64 + 0.5) * r.dt;
        acc += r.value_at(t - s) * s.max(1.0).powf(-eps);
    }
    let rem = t - n as f64 * r.dt;
    if rem > 0.0 {
        let s = n as f64 * r.dt + 0.5 * rem;
        acc += r.value_at(t - s) * s.max(1.0).powf(-eps) * rem / r.dt;
    }
    Ok(t.max(1.0).powf(-eps) + r.dt * acc)
}

/// Which contraction kernel to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKind {
    Gen,
    B0,
    Add,
}

/// Inputs shared by the contraction kernels and the smallness conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoInputs {
    pub p_exp: f64,
    pub c_b_lip: f64,
    pub c_sigma_lip: f64,
    pub c_b_lin: f64,
    pub c_sigma_lin: f64,
    pub xi_norm: f64,
    /// `t -> ||S(t) xi_b||` on the midpoint grid.
    pub s_xi_b: Option<SampledKernel>,
    /// `t -> ||S(t) xi_sigma||` on the midpoint grid.
    pub s_xi_sigma: Option<SampledKernel>,
}

impl RhoInputs {
    fn need_b(&self) -> Result<&SampledKernel> {
        self.s_xi_b
            .as_ref()
            .ok_or_else(|| Error::Insufficient("missing ||S(t) xi_b|| curve".into()))
    }

    fn need_sigma(&self) -> Result<&SampledKernel> {
        self.s_xi_sigma
            .as_ref()
            .ok_or_else(|| Error::Insufficient("missing ||S(t) xi_sigma|| curve".into()))
    }
}

/// `rho_gen`, `rho_b0` or `rho_add` sampled on the grid of the norm curves.
pub fn build_rho(kind: RhoKind, inp: &RhoInputs) -> Result<SampledKernel> {
    let p = inp.p_exp;
    match kind {
        RhoKind::Gen => {
            let sb = inp.need_b()?;
            let ss = inp.need_sigma()?;
            if sb.dt != ss.dt || sb.len() != ss.len() {
                return Err(invalid("grid", ss.dt, "norm curves must share one grid"));
            }
            let cp = bdg_constant(p)?;
            let pre = 3f64.powf(p - 1.0) * inp.xi_norm.powf(p);
            let a = inp.c_b_lip.powf(p) * sb.l1.powf(p - 1.0);
            let b = cp * inp.c_sigma_lip.powf(p) * ss.l2().powf(p - 2.0);
            let samples = sb
                .samples
                .iter()
                .zip(&ss.samples)
                .map(|(x, y)| pre * (a * x + b * y * y))
                .collect();
            SampledKernel::new(sb.dt, samples)
        }
        RhoKind::B0 => {
            let ss = inp.need_sigma()?;
            let cp = bdg_constant(p)?;
            let pre = 2f64.powf(p - 1.0) * inp.xi_norm.powf(p) * cp * inp.c_sigma_lip.powf(p) * ss.l2().powf(p - 2.0);
            SampledKernel::new(ss.dt, ss.samples.iter().map(|y| pre * y * y).collect())
        }
        RhoKind::Add => {
            let sb = inp.need_b()?;
            let c = inp.c_b_lip * inp.xi_norm;
            SampledKernel::new(sb.dt, sb.samples.iter().map(|x| c * x).collect())
        }
    }
}

/// Outcome of a tail inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Discrete convolution `(f * g)` sampled at `t = (m + 2 offset) dt`.
pub fn convolve(f: &SampledKernel, g: &SampledKernel) -> Result<SampledKernel> {
    if f.dt != g.dt {
        return Err(invalid("dt", g.dt, "kernels must share dt"));
    }
    let n = f.len() + g.len() - 1;
    let mut c = vec![0.0; n];
    for (i, a) in f.samples.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in g.samples.iter().enumerate() {
            c[i + j] += a * b;
        }
    }
    SampledKernel::with_offset(f.dt, f.offset + g.offset, c.into_iter().map(|v| v * f.dt).collect())
}

/// `int_T^inf (f*g) <= 2 ||f||_1 int_{lam T}^inf g + ||g||_1 int_{(1-lam) T}^inf f`.
pub fn tail_convolution_check(f: &SampledKernel, g: &SampledKernel, t: f64, lam: f64) -> Result<TailReport> {
    if !(lam > 0.0 && lam < 1.0) {
        return Err(invalid("lambda", lam, "must lie in (0,1)"));
    }
    if !(t > 0.0) {
        return Err(invalid("T", t, "must be positive"));
    }
    if t >= f.horizon().min(g.horizon()) {
        return Err(Error::Insufficient(format!("T = {t} is beyond the sampled horizon")));
    }
    let c = convolve(f, g)?;
    let lhs = c.tail(t);
    let rhs = 2.0 * f.l1 * g.tail(lam * t) + g.l1 * f.tail((1.0 - lam) * t);
    let slack = 5.0 * f.dt * (f.l1 + g.l1);
    Ok(TailReport {
        lhs,
        rhs,
        slack,
        holds: lhs <= rhs + slack,
    })
}

/// Right-hand side of the resolvent tail bound
/// `||r||_1 T^{-log(1/||rho||_1)} + ((1 + 2||r||_1)/(1 - ||rho||_1)) int_{kappa T^{1+log(1-kappa)}}^inf rho`.
pub fn resolvent_tail_bound(rho: &SampledKernel, r_l1: f64, t: f64, kappa: f64) -> f64 {
    let first = if rho.l1 == 0.0 {
        0.0
    } else {
        r_l1 * t.powf(-(1.0 / rho.l1).ln())
    };
    let lower = kappa * t.powf(1.0 + (1.0 - kappa).ln());
    first + (1.0 + 2.0 * r_l1) / (1.0 - rho.l1) * rho.tail(lower)
}

/// Resolvent tail check together with the pointwise bound
/// `R(t) <= (1 v t)^{-eps} + ||r||_1 (1 v t/2)^{-eps} + min(||r||_1, tail bound at t/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventTailReport {
    pub tail: TailReport,
    pub rate_checks: usize,
    pub rate_violations: usize,
    pub worst_rate_ratio: f64,
}

pub fn pointwise_rate_bound(rho: &SampledKernel, r: &SampledKernel, eps: f64, t: f64, kappa: f64) -> f64 {
    let half = 0.5 * t;
    let tail = if half > 0.0 {
        resolvent_tail_bound(rho, r.l1, half, kappa).min(r.l1)
    } else {
        r.l1
    };
    t.max(1.0).powf(-eps) + r.l1 * half.max(1.0).powf(-eps) + tail
}

pub fn resolvent_tail_check(
    rho: &SampledKernel,
    t: f64,
    kappa: f64,
    rate: Option<(f64, f64)>,
) -> Result<ResolventTailReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(invalid("kappa", kappa, "must lie in (0,1)"));
    }
    if !(t > 0.0) {
        return Err(invalid("T", t, "must be positive"));
    }
    let r = solve_resolvent(rho)?;
    let lhs = r.tail(t);
    let rhs = resolvent_tail_bound(rho, r.l1, t, kappa);
    let slack = 5.0 * rho.dt * (rho.l1 + r.l1);
    let mut rep = ResolventTailReport {
        tail: TailReport {
            lhs,
            rhs,
            slack,
            holds: lhs <= rhs + slack,
        },
        rate_checks: 0,
        rate_violations: 0,
        worst_rate_ratio: 0.0,
    };
    if let Some((lam, p)) = rate {
        let h = r.horizon();
        for i in 0..40 {
            let tt = h * (i as f64 + 1.0) / 41.0;
            let val = rate_function(&r, lam, p, tt)?;
            let bound = pointwise_rate_bound(rho, &r, lam * p, tt, kappa) + slack;
            rep.rate_checks += 1;
            rep.worst_rate_ratio = rep.worst_rate_ratio.max(val / bound);
            if val > bound {
                rep.rate_violations += 1;
            }
        }
    }
    Ok(rep)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Insufficient("need two positive points for a slope".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient("abscissae are all equal".into()));
    }
    Ok(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Fitted log-log slope of `R` on `[t0, t1]` and the shape threshold
/// `-min{lam p, log(1/||rho||_1)} + 0.1`.
pub fn rate_shape(rho: &SampledKernel, lam: f64, p_exp: f64, t0: f64, t1: f64) -> Result<(f64, f64)> {
    let r = solve_resolvent(rho)?;
    let ts: Vec<f64> = (0..20).map(|i| t0 * (t1 / t0).powf(i as f64 / 19.0)).collect();
    let vals = ts
        .iter()
        .map(|t| rate_function(&r, lam, p_exp, *t))
        .collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(&ts, &vals)?;
    let lr = if rho.l1 > 0.0 { (1.0 / rho.l1).ln() } else { f64::INFINITY };
    Ok((slope, -(lam * p_exp).min(lr) + 0.1))
}
