//! Theorem hypotheses as checkable inequalities: smallness conditions, the
//! constants K0/K1 of both lifts, rates chi and theta, and CLT admissibility.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::kernels::resolvent_density;
use crate::quad;
use crate::resolvent::RhoKind;
use crate::special::{bdg_constant, rgamma, sinpi, cospi, MittagLeffler, MlKernel, MlParams};

const QUAD_REL: f64 = 1e-11;

/// Which Schatten class the noise coefficient is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseNorm {
    /// `q = 2`, `q' = 2`.
    HilbertSchmidt,
    /// `q = inf`, `q' = 1` (trace-class noise).
    Operator,
}

impl NoiseNorm {
    pub fn exponents(self) -> (f64, f64) {
        match self {
            NoiseNorm::HilbertSchmidt => (2.0, 2.0),
            NoiseNorm::Operator => (f64::INFINITY, 1.0),
        }
    }
}

/// Norm data entering the smallness conditions. `l1_b` is `int ||S(t) xi_b|| dt`,
/// `l2_sigma` is `(int ||S(t) xi_sigma||^2 dt)^{1/2}`; the `*0` variants are
/// measured in the weaker space and default to the plain ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessInputs {
    pub kind: RhoKind,
    pub p_exp: f64,
    pub c_b_lip: f64,
    pub c_b_lin: f64,
    pub c_sigma_lip: f64,
    pub c_sigma_lin: f64,
    pub xi_norm: f64,
    pub xi0_norm: Option<f64>,
    pub l1_b: Option<f64>,
    pub l2_sigma: Option<f64>,
    pub l1_b0: Option<f64>,
    pub l2_sigma0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smallness {
    pub lhs_moment: f64,
    pub lhs_contraction: f64,
    pub pass_moment: bool,
    pub pass_contraction: bool,
    pub margin_moment: f64,
    pub margin_contraction: f64,
}

impl Smallness {
    fn new(lhs_moment: f64, lhs_contraction: f64) -> Self {
        Self {
            lhs_moment,
            lhs_contraction,
            pass_moment: lhs_moment < 1.0,
            pass_contraction: lhs_contraction < 1.0,
            margin_moment: 1.0 - lhs_moment,
            margin_contraction: 1.0 - lhs_contraction,
        }
    }
}

fn need(v: Option<f64>, name: &'static str, kind: RhoKind) -> Result<f64> {
    let v = v.ok_or_else(|| Error::Insufficient(format!("{name} is required for kind {kind:?}")))?;
    ensure_finite(name, v)?;
    if v < 0.0 {
        return Err(invalid(name, v, "must be nonnegative"));
    }
    Ok(v)
}

/// Left-hand sides of the bounded-moment and contraction conditions.
pub fn check_smallness(i: &SmallnessInputs) -> Result<Smallness> {
    let p = i.p_exp;
    ensure_finite("p", p)?;
    if p < 2.0 {
        return Err(invalid("p", p, "must be at least 2"));
    }
    for (name, v) in [
        ("c_b_lip", i.c_b_lip),
        ("c_b_lin", i.c_b_lin),
        ("c_sigma_lip", i.c_sigma_lip),
        ("c_sigma_lin", i.c_sigma_lin),
        ("xi_norm", i.xi_norm),
    ] {
        ensure_finite(name, v)?;
        if v < 0.0 {
            return Err(invalid(name, v, "must be nonnegative"));
        }
    }
    let x = i.xi_norm;
    let x0 = i.xi0_norm.unwrap_or(x);
    let cp = bdg_constant(p)?;
    Ok(match i.kind {
        RhoKind::Gen => {
            let lb = need(i.l1_b, "l1_b", i.kind)?;
            let ls = need(i.l2_sigma, "l2_sigma", i.kind)?;
            let inner_lin = i.c_b_lin.powf(p) * lb.powf(p) + cp * i.c_sigma_lin.powf(p) * ls.powf(p);
            let inner_lip = i.c_b_lip.powf(p) * lb.powf(p) + cp * i.c_sigma_lip.powf(p) * ls.powf(p);
            Smallness::new(
                6f64.powf(p - 1.0) * x.powf(p) * inner_lin,
                3f64.powf(p - 1.0) * x0.powf(p) * inner_lip,
            )
        }
        RhoKind::B0 => {
            let ls = need(i.l2_sigma, "l2_sigma", i.kind)?;
            let ls0 = i.l2_sigma0.unwrap_or(ls);
            let cpp = cp.powf(1.0 / p);
            Smallness::new(
                4f64.powf(1.0 - 1.0 / p) * i.c_sigma_lin * x * ls * cpp,
                2f64.powf(1.0 - 1.0 / p) * i.c_sigma_lip * x0 * ls0 * cpp,
            )
        }
        RhoKind::Add => {
            let lb = need(i.l1_b, "l1_b", i.kind)?;
            let lb0 = i.l1_b0.unwrap_or(lb);
            Smallness::new(i.c_b_lin * x * lb, i.c_b_lip * x0 * lb0)
        }
    })
}

/// Rates derived from `lambda`, `p`, the test-function exponent and `||rho||_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Supremum of admissible contraction rates (the rate itself must be strictly smaller).
    pub chi: f64,
    pub lln_rate: f64,
    pub lln_log_factor: bool,
    pub clt_ok: bool,
    /// `lambda gamma / sqrt(p) - 1`, `2 lambda gamma / sqrt(p) - 1` or `lambda gamma - 1`.
    pub clt_rate_margin: f64,
    /// `exp(-sqrt(p)/gamma) - ||rho||_1` (with `p = 1` in the additive case).
    pub clt_l1_margin: f64,
}

fn log_inv(l1: f64) -> f64 {
    if l1 <= 0.0 {
        f64::INFINITY
    } else {
        -l1.ln()
    }
}

/// `l1_clt` is `||rho^{(sqrt p)}||_1` for the CLT (defaults to `l1`).
pub fn rates(kind: RhoKind, lambda: f64, p_exp: f64, gamma: f64, l1: f64, l1_clt: Option<f64>) -> Result<Rates> {
    ensure_finite("lambda", lambda)?;
    ensure_finite("p", p_exp)?;
    ensure_finite("gamma", gamma)?;
    if l1.is_nan() || l1 < 0.0 {
        return Err(invalid("l1", l1, "must be nonnegative"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid("gamma", gamma, "must lie in (0, 1]"));
    }
    if p_exp < 2.0 {
        return Err(invalid("p", p_exp, "must be at least 2"));
    }
    let li = log_inv(l1);
    let chi = match kind {
        RhoKind::Gen => li.min(lambda) / p_exp,
        RhoKind::B0 => li.min(2.0 * lambda) / p_exp,
        RhoKind::Add => li.min(lambda),
    };
    let cg = chi * gamma;
    let l1c = l1_clt.unwrap_or(l1);
    let sp = p_exp.sqrt();
    let (rate_margin, l1_margin) = match kind {
        RhoKind::Gen => (lambda * gamma / sp - 1.0, (-sp / gamma).exp() - l1c),
        RhoKind::B0 => (2.0 * lambda * gamma / sp - 1.0, (-sp / gamma).exp() - l1c),
        RhoKind::Add => (lambda * gamma - 1.0, (-1.0 / gamma).exp() - l1c),
    };
    Ok(Rates {
        chi,
        lln_rate: cg.min(1.0),
        lln_log_factor: cg == 1.0,
        clt_ok: rate_margin > 0.0 && l1_margin > 0.0,
        clt_rate_margin: rate_margin,
        clt_l1_margin: l1_margin,
    })
}

/// Constants of a theorem with the parameter-range violations found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub k0: f64,
    pub k1: f64,
    pub k0_diverges: bool,
    pub range_violations: Vec<String>,
}

/// Trace-class (Laplace lift) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceClassParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub theta1: f64,
    pub p_exp: f64,
    pub b_zero: bool,
}

fn ind(c: bool) -> f64 {
    if c {
        1.0
    } else {
        0.0
    }
}

impl TraceClassParams {
    fn ab(&self) -> f64 {
        self.alpha - self.beta * ind(self.alpha != self.beta)
    }

    fn range_violations(&self) -> Vec<String> {
        let (a, b, e0, e1, p) = (self.alpha, self.beta, self.eps0, self.eps1, self.p_exp);
        let mut v = Vec::new();
        if !(a > 0.5 && a < 1.0) {
            v.push(format!("alpha = {a} outside (1/2, 1)"));
        }
        if !(b > 0.5 && b < 0.5 + a) {
            v.push(format!("beta = {b} outside (1/2, 1/2 + alpha)"));
        }
        if !(p > 2.0) {
            v.push(format!("p = {p} must exceed 2"));
        }
        if !(2.0 / p < e0) {
            v.push(format!("eps0 = {e0} must exceed 2/p = {}", 2.0 / p));
        }
        if !(e0 < (2.0 * b - 1.0) / 3.0) {
            v.push(format!("eps0 = {e0} must be below (2 beta - 1)/3 = {}", (2.0 * b - 1.0) / 3.0));
        }
        let hi = 2.0 / 3.0 * (self.ab() + 0.5 * ind(self.b_zero));
        if !(e1 > 0.0 && e1 < hi) {
            v.push(format!("eps1 = {e1} outside (0, {hi})"));
        }
        v
    }
}

/// `K0 = (1/(2a - 2b1 - 2e1) + 1/(2b - 1 - 2e0))^{1/2}`,
/// `K1 = 2/(pi sin(a pi)) (theta1^{-2} e1^{-1/2} + e0^{-1/2}) (1 + 2/e1) ((2 + e1)/(2e))^{2 + e1}`.
pub fn laplace_constants(tp: &TraceClassParams) -> Result<Constants> {
    for (n, v) in [
        ("alpha", tp.alpha),
        ("beta", tp.beta),
        ("eps0", tp.eps0),
        ("eps1", tp.eps1),
        ("theta1", tp.theta1),
    ] {
        ensure_finite(n, v)?;
    }
    let s = sinpi(tp.alpha);
    if s == 0.0 {
        return Err(invalid("alpha", tp.alpha, "sin(alpha pi) vanishes"));
    }
    let (e0, e1) = (tp.eps0, tp.eps1);
    let d1 = 2.0 * tp.ab() - 2.0 * e1;
    let d2 = 2.0 * tp.beta - 1.0 - 2.0 * e0;
    let k0_diverges = !(d1 > 0.0 && d2 > 0.0);
    let k0 = if k0_diverges {
        f64::INFINITY
    } else {
        (1.0 / d1 + 1.0 / d2).sqrt()
    };
    let k1 = 2.0 / (std::f64::consts::PI * s)
        * (tp.theta1.powi(-2) / e1.sqrt() + 1.0 / e0.sqrt())
        * (1.0 + 2.0 / e1)
        * ((2.0 + e1) / (2.0 * std::f64::consts::E)).powf(2.0 + e1);
    Ok(Constants {
        k0,
        k1,
        k0_diverges,
        range_violations: tp.range_violations(),
    })
}

/// Fractional-HJM (shift lift) parameters; `gamma_exp` is the noise smoothness `H^gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracHjmParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub gamma_exp: f64,
    pub thetas: Vec<f64>,
    pub p_exp: f64,
}

impl FracHjmParams {
    fn range_violations(&self) -> Vec<String> {
        let (a, b, e0, e1, p) = (self.alpha, self.beta, self.eps0, self.eps1, self.p_exp);
        let mut v = Vec::new();
        if !(a > 0.0 && a < 2.0) {
            v.push(format!("alpha = {a} outside (0, 2)"));
        }
        if !(b > 0.5 && b < 0.5 + a) {
            v.push(format!("beta = {b} outside (1/2, 1/2 + alpha)"));
        }
        if !(p > 2.0) {
            v.push(format!("p = {p} must exceed 2"));
        }
        if !(2.0 / p < e0 && e0 < 1.0) {
            v.push(format!("eps0 = {e0} outside (2/p, 1) = ({}, 1)", 2.0 / p));
        }
        let hi = (1.0 - 2.0 * (b - a)) / 2.0;
        if !(e1 > 0.0 && e1 < hi) {
            v.push(format!("eps1 = {e1} outside (0, {hi})"));
        }
        v
    }
}

/// Partial sum `sum_n theta_n^e`, rejected when the terms decay no faster than `1/n`.
pub fn mode_sum(thetas: &[f64], exponent: f64) -> Result<f64> {
    let terms: Vec<f64> = thetas.iter().map(|t| t.powf(exponent)).collect();
    if terms.len() >= 8 {
        let half = terms.len() / 2;
        let ns: Vec<f64> = (half + 1..=terms.len()).map(|n| n as f64).collect();
        let slope = crate::resolvent::loglog_slope(&ns, &terms[half..])?;
        if slope >= -1.0 {
            let s1: f64 = terms[..half].iter().sum();
            let s2: f64 = terms.iter().sum();
            return Err(Error::Numerical(format!(
                "mode sum diverges: terms decay like n^{slope:.3}; partial sums {s1:.6e} (n = {half}) -> {s2:.6e} (n = {})",
                terms.len()
            )));
        }
    }
    Ok(terms.iter().sum())
}

/// `int_0^b f` for `f(x) ~ x^a` near 0 (`a > -1`), via `x = s^m`, `m = 1/(1 + min(a, 0))`.
fn integrate_power_singular(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if a >= 0.0 {
        return quad::integrate(&f, 0.0, b, QUAD_REL, 0.0);
    }
    let m = 1.0 / (1.0 + a);
    let sb = b.powf(1.0 / m);
    quad::integrate(
        |s: f64| {
            let x = s.powf(m);
            if x == 0.0 {
                0.0
            } else {
                f(x) * m * s.powf(m - 1.0)
            }
        },
        0.0,
        sb,
        QUAD_REL,
        0.0,
    )
}

/// `int_0^inf |x^{b-2} E_{a,b-1}(-x^a)|^2 w(x) dx` with `w = x^{1-e0}` on `(0,1]`,
/// `x^{3-2(b-a)-e1}` beyond; `None` when it diverges at 0.
pub fn shift_derivative_integral(alpha: f64, beta: f64, eps0: f64, eps1: f64) -> Result<Option<f64>> {
    let k = MlKernel::new(MlParams::new(alpha, beta)?, 1.0)?;
    let eta_w = 1.0 - eps0;
    let delta_w = 3.0 - 2.0 * (beta - alpha) - eps1;
    // Leading term of the derivative at 0 is c0 x^{b-2}; when c0 = 1/Gamma(b-1) vanishes the next
    // series term x^{b-2+a} leads.
    let c0 = rgamma(beta - 1.0);
    let head = if c0 != 0.0 {
        let a = 2.0 * (beta - 2.0) + eta_w;
        if a <= -1.0 {
            return Ok(None);
        }
        // Subtract c0^2 x^a exactly; the remainder is O(x^{a + alpha}).
        let rem = integrate_power_singular(
            |x| k.derivative(x).powi(2) * x.powf(eta_w) - c0 * c0 * x.powf(a),
            a + alpha,
            1.0,
        )?;
        rem + c0 * c0 / (a + 1.0)
    } else {
        let a = 2.0 * (beta - 2.0 + alpha) + eta_w;
        if a <= -1.0 {
            return Ok(None);
        }
        integrate_power_singular(|x| k.derivative(x).powi(2) * x.powf(eta_w), a, 1.0)?
    };
    let tail = quad::integrate_to_inf(|x| k.derivative(x).powi(2) * x.powf(delta_w), 1.0, QUAD_REL)?;
    Ok(Some(head + tail))
}

/// `K0 = (E_{a,b}(-1)^2 + int |x^{b-2}E_{a,b-1}(-x^a)|^2 w dx)^{1/2} (sum theta_n^{-2g + 2(e0-b)/a})^{1/2}`,
/// `K1 = (3 + 1/(2 - 2(b-a) - e1))^{1/2}`.
pub fn shift_constants(fp: &FracHjmParams) -> Result<Constants> {
    for (n, v) in [
        ("alpha", fp.alpha),
        ("beta", fp.beta),
        ("eps0", fp.eps0),
        ("eps1", fp.eps1),
        ("gamma", fp.gamma_exp),
    ] {
        ensure_finite(n, v)?;
    }
    if fp.thetas.is_empty() {
        return Err(Error::Insufficient("at least one mode is required".into()));
    }
    let (a, b) = (fp.alpha, fp.beta);
    let k1d = 2.0 - 2.0 * (b - a) - fp.eps1;
    let k1 = (3.0 + 1.0 / k1d).sqrt();
    let modes = mode_sum(&fp.thetas, -2.0 * fp.gamma_exp + 2.0 * (fp.eps0 - b) / a)?;
    let e1 = MittagLeffler::new(a, b)?.eval(-1.0);
    let (k0, k0_diverges) = match shift_derivative_integral(a, b, fp.eps0, fp.eps1)? {
        Some(i) => (((e1 * e1 + i) * modes).sqrt(), false),
        None => (f64::INFINITY, true),
    };
    Ok(Constants {
        k0,
        k1,
        k0_diverges,
        range_violations: fp.range_violations(),
    })
}

/// Every checked hypothesis of one theorem, with margins `1 - lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub theorem: String,
    pub p_exp: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub delta: f64,
    pub delta_star_lo: f64,
    pub delta_star_hi: f64,
    pub eta: f64,
    pub eta_star: f64,
    pub rho_exp: f64,
    pub lambda: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    pub k0_diverges: bool,
    pub lhs_moment: f64,
    pub lhs_contraction: f64,
    pub pass_moment: bool,
    pub pass_contraction: bool,
    pub margin_moment: f64,
    pub margin_contraction: f64,
    pub l1_rho: f64,
    pub chi: f64,
    pub lln_rate: f64,
    pub lln_log_factor: bool,
    /// Upper limit for the mean-square LLN rate stated by the theorem.
    pub theta_bound: f64,
    pub clt_ok: bool,
    pub gamma_holder: f64,
    pub q_exp: f64,
    pub q_prime: f64,
    pub range_violations: Vec<String>,
    pub feasible: bool,
}

impl ConditionReport {
    /// All hypotheses hold and the parameters are in range.
    pub fn passes(&self) -> bool {
        self.feasible && self.pass_moment && self.pass_contraction && self.theta_bound > 0.0
    }
}

/// Hypotheses of the trace-class Laplace-lift theorem for additive noise.
pub fn trace_class_report(tp: &TraceClassParams, c_b_lip: f64, c_b_lin: f64, gamma_holder: f64) -> Result<ConditionReport> {
    let c = laplace_constants(tp)?;
    let ab = tp.ab();
    let bz = ind(tp.b_zero);
    let e1 = tp.eps1;
    let lambda = ab + 0.5 * bz - 1.5 * e1;
    let kk = c.k0 * c.k1;
    let lhs = if tp.b_zero { 0.0 } else { c_b_lip.max(c_b_lin) * kk };
    let l1_rho = if tp.b_zero { 0.0 } else { c_b_lip * kk };
    let r = rates(RhoKind::Add, lambda, tp.p_exp.max(2.0), gamma_holder, l1_rho, None)?;
    let theta_bound = if tp.b_zero {
        0.5 * (1.0f64).min(0.5 + ab)
    } else {
        0.5 * (1.0f64).min(ab).min(log_inv(c_b_lip * kk))
    };
    let (q, qp) = NoiseNorm::Operator.exponents();
    let s = Smallness::new(lhs, lhs);
    Ok(ConditionReport {
        theorem: "trace_class".into(),
        p_exp: tp.p_exp,
        eps0: tp.eps0,
        eps1: e1,
        delta: 2.0 * ab - 1.0 + bz - 2.0 * e1,
        delta_star_lo: -1.0 + e1,
        delta_star_hi: 1.0 + 2.0 * ab - e1,
        eta: 2.0 * tp.beta - 2.0 * tp.eps0,
        eta_star: 2.0 * tp.beta - 1.0 - tp.eps0,
        rho_exp: (1.0 - tp.eps0).max(0.0) / 2.0,
        lambda,
        k0: c.k0,
        k1: c.k1,
        k0_diverges: c.k0_diverges,
        lhs_moment: s.lhs_moment,
        lhs_contraction: s.lhs_contraction,
        pass_moment: s.pass_moment,
        pass_contraction: s.pass_contraction,
        margin_moment: s.margin_moment,
        margin_contraction: s.margin_contraction,
        l1_rho,
        chi: r.chi,
        lln_rate: r.lln_rate,
        lln_log_factor: r.lln_log_factor,
        theta_bound,
        clt_ok: r.clt_ok,
        gamma_holder,
        q_exp: q,
        q_prime: qp,
        feasible: c.range_violations.is_empty() && !c.k0_diverges,
        range_violations: c.range_violations,
    })
}

/// Hypotheses of the fractional HJM (shift lift) theorem with multiplicative noise and `b = 0`.
pub fn frac_hjm_report(fp: &FracHjmParams, c_sigma_lip: f64, c_sigma_lin: f64, gamma_holder: f64) -> Result<ConditionReport> {
    let c = shift_constants(fp)?;
    let (a, b, e0, e1, p) = (fp.alpha, fp.beta, fp.eps0, fp.eps1, fp.p_exp);
    let delta = 2.0 - 2.0 * (b - a) - 2.0 * e1;
    let cpp = bdg_constant(p.max(2.0))?.powf(1.0 / p.max(2.0));
    let xi = 1.0 + (1.0 / e0).sqrt();
    let kk = c.k0 * c.k1;
    let lhs_moment = 4f64.powf(1.0 - 1.0 / p)
        * c_sigma_lin
        * xi
        * (1.0f64).max(1.0 / (delta - 1.0)).sqrt()
        * kk
        * (2.0 / (2.0 - e0) + 2.0 / e1).sqrt()
        * cpp;
    let lhs_contraction = 2f64.powf(1.0 - 1.0 / p)
        * c_sigma_lip
        * xi
        * (1.0f64).max(2.0 / (1.0 - 2.0 * (b - a) - 2.0 * e1)).sqrt()
        * kk
        * (2.0 / (2.0 - e0) + 4.0 / (1.0 - 2.0 * (b - a))).sqrt()
        * cpp;
    let lambda = 0.25 - (b - a) / 2.0 - e1 / 2.0;
    // ||rho_{b=0}||_1 is bounded by the p-th power of the contraction left-hand side.
    let l1_rho = lhs_contraction.powf(p);
    let r = rates(RhoKind::B0, lambda, p.max(2.0), gamma_holder, l1_rho, None)?;
    let theta_bound = 0.5 * (1.0f64).min(log_inv(l1_rho) / p).min((0.5 - (b - a) - e1) / p);
    let (q, qp) = NoiseNorm::HilbertSchmidt.exponents();
    let s = Smallness::new(lhs_moment, lhs_contraction);
    Ok(ConditionReport {
        theorem: "frac_hjm".into(),
        p_exp: p,
        eps0: e0,
        eps1: e1,
        delta,
        delta_star_lo: 1.0 + (1.0 - 2.0 * (b - a) - 2.0 * e1) / 2.0,
        delta_star_hi: 3.0 - 2.0 * (b - a) - e1,
        eta: 1.0 - e0,
        eta_star: 2.0 - 2.0 * e0,
        rho_exp: 0.5 - e0 / 2.0,
        lambda,
        k0: c.k0,
        k1: c.k1,
        k0_diverges: c.k0_diverges,
        lhs_moment: s.lhs_moment,
        lhs_contraction: s.lhs_contraction,
        pass_moment: s.pass_moment,
        pass_contraction: s.pass_contraction,
        margin_moment: s.margin_moment,
        margin_contraction: s.margin_contraction,
        l1_rho,
        chi: r.chi,
        lln_rate: r.lln_rate,
        lln_log_factor: r.lln_log_factor,
        theta_bound,
        clt_ok: r.clt_ok,
        gamma_holder,
        q_exp: q,
        q_prime: qp,
        feasible: c.range_violations.is_empty() && !c.k0_diverges,
        range_violations: c.range_violations,
    })
}

fn frac_coeffs(alpha: f64, beta: f64) -> (f64, f64, f64) {
    let s2 = sinpi(alpha).powi(2);
    let pi = std::f64::consts::PI;
    let sb = sinpi(beta).abs();
    let sab = sinpi(alpha - beta).abs();
    (sb / (pi * s2), sab / (pi * s2), sab / (2.0 * pi * (1.0 + cospi(alpha))))
}

fn check_frac_space(alpha: f64, beta: f64, delta_star: f64, eta_star: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(invalid("alpha", alpha, "must lie in (1/2, 1)"));
    }
    if !(beta > 0.5 && beta < 0.5 + alpha) {
        return Err(invalid("beta", beta, "must lie in (1/2, 1/2 + alpha)"));
    }
    let ab = alpha - beta * ind(alpha != beta);
    if !(delta_star < 1.0 + 2.0 * ab) {
        return Err(invalid("delta*", delta_star, "must be below 1 + 2 alpha - 2 beta 1{alpha != beta}"));
    }
    if !(eta_star < 2.0 * beta - 1.0) {
        return Err(invalid("eta*", eta_star, "must be below 2 beta - 1"));
    }
    Ok(ab)
}

/// Bound on `int sup_n |xi(x; theta_n)|^2 w_{d*,e*}(x) dx` (operator norm).
pub fn frac_operator_bound(alpha: f64, beta: f64, theta1: f64, delta_star: f64, eta_star: f64) -> Result<f64> {
    let ab = check_frac_space(alpha, beta, delta_star, eta_star)?;
    let (cb, cab, cab2) = frac_coeffs(alpha, beta);
    Ok((cb * theta1.powi(-2) + cab / theta1).powi(2) / (1.0 + 2.0 * ab - delta_star)
        + (cb + cab2).powi(2) / (2.0 * beta - 1.0 - eta_star))
}

/// Bound on `int sum_n theta_n^{2(g-k)} |xi(x; theta_n)|^2 w_{d*,e*}(x) dx` (Hilbert-Schmidt norm).
pub fn frac_hs_bound(
    alpha: f64,
    beta: f64,
    thetas: &[f64],
    gamma: f64,
    kappa: f64,
    delta_star: f64,
    eta_star: f64,
) -> Result<f64> {
    let ab = check_frac_space(alpha, beta, delta_star, eta_star)?;
    let t1 = *thetas.first().ok_or_else(|| Error::Insufficient("no modes".into()))?;
    let (cb, cab, cab2) = frac_coeffs(alpha, beta);
    let g = 2.0 * (gamma - kappa);
    let e = (1.0 - 2.0 * beta + eta_star) / alpha;
    let s_m2: f64 = thetas.iter().map(|t| t.powf(g - 2.0)).sum();
    let s_e: f64 = thetas.iter().map(|t| t.powf(g + e)).sum();
    Ok((cb / t1 + cab).powi(2) * s_m2 / (1.0 + 2.0 * ab - delta_star)
        + (cb * t1.powi(-2) + cab).powi(2) * (s_e + s_m2) / (1.0 + 2.0 * ab + eta_star)
        + (cb + cab2).powi(2) / (2.0 * beta - 1.0 - eta_star) * s_e)
}

/// `int_0^inf F(x) w_{d*,e*}(x) dx` with `w = x^{-d*}` on `(0,1]` and `x^{e*}` beyond,
/// where `F(x) = max_n xi(x; theta_n)^2` (operator) or `sum_n theta_n^{2(g-k)} xi(x; theta_n)^2`.
pub fn frac_weighted_integral(
    alpha: f64,
    beta: f64,
    thetas: &[f64],
    hs_scale: Option<f64>,
    delta_star: f64,
    eta_star: f64,
) -> Result<f64> {
    let ab = check_frac_space(alpha, beta, delta_star, eta_star)?;
    let f = |x: f64| {
        let mut acc = 0.0f64;
        for t in thetas {
            let v = resolvent_density(alpha, beta, *t, x).powi(2);
            acc = match hs_scale {
                Some(g) => acc + t.powf(g) * v,
                None => acc.max(v),
            };
        }
        acc
    };
    let lead = if alpha == beta { alpha } else { ab };
    let head = integrate_power_singular(|x| f(x) * x.powf(-delta_star), 2.0 * lead - delta_star, 1.0)?;
    let tail = quad::integrate_to_inf(|x| f(x) * x.powf(eta_star), 1.0, QUAD_REL)?;
    Ok(head + tail)
}
