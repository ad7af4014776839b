//! Volterra kernels, their Bernstein densities and spectral operators.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::laplace_lift::QuadratureRule;
use crate::quad;
use crate::special::{gamma, lower_gamma, sinpi, upper_gamma, MlKernel, MlParams, TOL};

/// Identity of a Volterra kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `t^{alpha-1} / Gamma(alpha)`.
    FractionalRl { alpha: f64 },
    /// `log(1 + 1/t)`.
    LogKernel,
    /// `t^{beta-1} E_{alpha,beta}(-theta t^alpha)`.
    ResolventFractional { alpha: f64, beta: f64, theta: f64 },
    /// `e^{-lambda t} k(t)`.
    Damped { inner: Box<KernelSpec>, lambda: f64 },
    /// `k(t + epsilon)`.
    TimeShifted { inner: Box<KernelSpec>, epsilon: f64 },
}

/// Leading power law `coef * x^exp` of a density at one end of `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coef: f64,
    pub exp: f64,
}

impl KernelSpec {
    pub fn fractional(alpha: f64) -> Self {
        KernelSpec::FractionalRl { alpha }
    }

    pub fn resolvent(alpha: f64, beta: f64, theta: f64) -> Self {
        KernelSpec::ResolventFractional { alpha, beta, theta }
    }

    pub fn damped(self, lambda: f64) -> Self {
        KernelSpec::Damped {
            inner: Box::new(self),
            lambda,
        }
    }

    pub fn time_shifted(self, epsilon: f64) -> Self {
        KernelSpec::TimeShifted {
            inner: Box::new(self),
            epsilon,
        }
    }

    /// Innermost kernel.
    pub fn base(&self) -> &KernelSpec {
        match self {
            KernelSpec::Damped { inner, .. } | KernelSpec::TimeShifted { inner, .. } => inner.base(),
            k => k,
        }
    }

    /// Same kernel with the mode parameter replaced (resolvent kinds only).
    pub fn with_theta(&self, theta: f64) -> Self {
        match self {
            KernelSpec::ResolventFractional { alpha, beta, .. } => KernelSpec::ResolventFractional {
                alpha: *alpha,
                beta: *beta,
                theta,
            },
            KernelSpec::Damped { inner, lambda } => KernelSpec::Damped {
                inner: Box::new(inner.with_theta(theta)),
                lambda: *lambda,
            },
            KernelSpec::TimeShifted { inner, epsilon } => KernelSpec::TimeShifted {
                inner: Box::new(inner.with_theta(theta)),
                epsilon: *epsilon,
            },
            k => k.clone(),
        }
    }

    /// Parameter checks for evaluation in the time domain; resolvent kinds
    /// accept `alpha in (0, 2)` with `beta - alpha` not a negative integer.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::FractionalRl { alpha } => {
                ensure_finite("alpha", *alpha)?;
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(invalid("alpha", *alpha, "fractional kernel needs alpha in (0,1)"));
                }
            }
            KernelSpec::LogKernel => {}
            KernelSpec::ResolventFractional { alpha, beta, theta } => {
                ensure_finite("alpha", *alpha)?;
                ensure_finite("beta", *beta)?;
                ensure_finite("theta", *theta)?;
                if !(*alpha > 0.0 && *alpha <= 2.0) {
                    return Err(invalid("alpha", *alpha, "resolvent kernel needs alpha in (0,2)"));
                }
                if *beta <= 0.0 {
                    return Err(invalid("beta", *beta, "must be positive"));
                }
                if *theta <= 0.0 {
                    return Err(invalid("theta", *theta, "must be positive"));
                }
                let d = beta - alpha;
                if d < 0.0 && d == d.round() {
                    return Err(invalid("beta", *beta, "beta - alpha must not be a negative integer"));
                }
            }
            KernelSpec::Damped { inner, lambda } => {
                ensure_finite("lambda", *lambda)?;
                if *lambda <= 0.0 {
                    return Err(invalid("lambda", *lambda, "must be positive"));
                }
                inner.validate()?;
            }
            KernelSpec::TimeShifted { inner, epsilon } => {
                ensure_finite("epsilon", *epsilon)?;
                if *epsilon <= 0.0 {
                    return Err(invalid("epsilon", *epsilon, "must be positive"));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }

    /// Checks that the kernel has a Bernstein representation against `dx`
    /// (plus point masses): resolvent kinds need `alpha in (0,1)`,
    /// `beta in (0, alpha+1)`, or `alpha = beta = 1`.
    pub fn validate_laplace(&self) -> Result<()> {
        self.validate()?;
        if let KernelSpec::ResolventFractional { alpha, beta, .. } = self.base() {
            let exp = *alpha == 1.0 && *beta == 1.0;
            if !exp && !(*alpha < 1.0 && *beta < alpha + 1.0) {
                return Err(invalid(
                    "alpha",
                    *alpha,
                    "Laplace representation needs alpha in (0,1) and beta in (0, alpha+1), or alpha = beta = 1",
                ));
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<Kernel> {
        Kernel::new(self)
    }
}

#[derive(Debug, Clone)]
enum Base {
    Fractional { alpha: f64, inv_gamma: f64, dens: f64 },
    Log,
    Resolvent { alpha: f64, beta: f64, theta: f64, ml: MlKernel },
}

/// Compiled kernel `c e^{-lam t} k0(t + eps)` with density
/// `c 1_{x>lam} e^{-eps (x-lam)} xi0(x - lam)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    spec: KernelSpec,
    base: Base,
    scale: f64,
    lam: f64,
    eps: f64,
}

impl Kernel {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        let (base, scale, lam, eps) = Self::fold(spec)?;
        Ok(Self {
            spec: spec.clone(),
            base,
            scale,
            lam,
            eps,
        })
    }

    fn fold(spec: &KernelSpec) -> Result<(Base, f64, f64, f64)> {
        Ok(match spec {
            KernelSpec::FractionalRl { alpha } => (
                Base::Fractional {
                    alpha: *alpha,
                    inv_gamma: 1.0 / gamma(*alpha),
                    dens: sinpi(*alpha) / PI,
                },
                1.0,
                0.0,
                0.0,
            ),
            KernelSpec::LogKernel => (Base::Log, 1.0, 0.0, 0.0),
            KernelSpec::ResolventFractional { alpha, beta, theta } => (
                Base::Resolvent {
                    alpha: *alpha,
                    beta: *beta,
                    theta: *theta,
                    ml: MlKernel::new(MlParams::new(*alpha, *beta)?, *theta)?,
                },
                1.0,
                0.0,
                0.0,
            ),
            KernelSpec::Damped { inner, lambda } => {
                let (b, c, l, e) = Self::fold(inner)?;
                (b, c, l + lambda, e)
            }
            KernelSpec::TimeShifted { inner, epsilon } => {
                let (b, c, l, e) = Self::fold(inner)?;
                (b, c * (-l * epsilon).exp(), l, e + epsilon)
            }
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn base_value(&self, s: f64) -> f64 {
        match &self.base {
            Base::Fractional { alpha, inv_gamma, .. } => s.powf(alpha - 1.0) * inv_gamma,
            Base::Log => (1.0 / s).ln_1p(),
            Base::Resolvent { ml, .. } => ml.value_unchecked(s),
        }
    }

    /// Kernel value at `t > 0`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid("t", t, "must be positive and finite"));
        }
        Ok(self.value_unchecked(t))
    }

    #[inline]
    pub fn value_unchecked(&self, t: f64) -> f64 {
        self.scale * (-self.lam * t).exp() * self.base_value(t + self.eps)
    }

    fn base_density(&self, y: f64) -> f64 {
        match &self.base {
            Base::Fractional { alpha, dens, .. } => dens * y.powf(-alpha),
            Base::Log => {
                if y < 1e-8 {
                    1.0 - 0.5 * y
                } else {
                    -(-y).exp_m1() / y
                }
            }
            Base::Resolvent { alpha, beta, theta, .. } => resolvent_density(*alpha, *beta, *theta, y),
        }
    }

    /// Bernstein density against `dx` at `x > 0` (zero below the damping shift).
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(invalid("x", x, "must be positive and finite"));
        }
        Ok(self.density_unchecked(x))
    }

    #[inline]
    pub fn density_unchecked(&self, x: f64) -> f64 {
        if x <= self.lam {
            return 0.0;
        }
        let y = x - self.lam;
        self.scale * (-self.eps * y).exp() * self.base_density(y)
    }

    /// Point masses `(position, mass)` of the Bernstein measure.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match &self.base {
            Base::Resolvent { alpha, beta, theta, .. } if *alpha == 1.0 && *beta == 1.0 => {
                vec![(self.lam + theta, self.scale * (-self.eps * theta).exp())]
            }
            _ => Vec::new(),
        }
    }

    /// Leading behaviour of the base density as `y -> 0`.
    pub fn head_law(&self) -> Option<PowerLaw> {
        match &self.base {
            Base::Fractional { alpha, dens, .. } => Some(PowerLaw { coef: *dens, exp: -alpha }),
            Base::Log => Some(PowerLaw { coef: 1.0, exp: 0.0 }),
            Base::Resolvent { alpha, beta, theta, .. } => {
                if *alpha == 1.0 && *beta == 1.0 {
                    None
                } else if alpha == beta {
                    Some(PowerLaw {
                        coef: sinpi(*alpha) / (PI * theta * theta),
                        exp: *alpha,
                    })
                } else {
                    Some(PowerLaw {
                        coef: -sinpi(alpha - beta) / (PI * theta),
                        exp: alpha - beta,
                    })
                }
            }
        }
    }

    /// Leading behaviour of the base density as `y -> inf`.
    pub fn tail_law(&self) -> Option<PowerLaw> {
        match &self.base {
            Base::Fractional { alpha, dens, .. } => Some(PowerLaw { coef: *dens, exp: -alpha }),
            Base::Log => Some(PowerLaw { coef: 1.0, exp: -1.0 }),
            Base::Resolvent { alpha, beta, theta, .. } => {
                if *alpha == 1.0 && *beta == 1.0 {
                    None
                } else if sinpi(*beta) != 0.0 {
                    Some(PowerLaw {
                        coef: sinpi(*beta) / PI,
                        exp: -beta,
                    })
                } else {
                    Some(PowerLaw {
                        coef: -theta * sinpi(alpha - beta) / PI,
                        exp: -alpha - beta,
                    })
                }
            }
        }
    }

    /// `int_0^{x_min} xi(x) dx` from the leading power law at the origin.
    pub fn head_mass(&self, x_min: f64) -> f64 {
        match self.head_law() {
            Some(h) if x_min > self.lam && h.exp > -1.0 => {
                let a = h.exp + 1.0;
                self.scale * h.coef * (x_min - self.lam).powf(a) / a
            }
            _ => 0.0,
        }
    }

    /// Analytic estimates of `int_0^{x_min}` and `int_{x_max}^inf` of
    /// `e^{-xt} xi(x) dx` from the leading power laws.
    pub fn laplace_corrections(&self, x_min: f64, x_max: f64, t: f64) -> (f64, f64) {
        let rate = t + self.eps;
        let pre = self.scale * (-self.lam * t).exp();
        let head = match self.head_law() {
            Some(h) if x_min > self.lam => {
                let a = h.exp + 1.0;
                pre * h.coef * rate.powf(-a) * lower_gamma(a, (x_min - self.lam) * rate)
            }
            _ => 0.0,
        };
        let tail = match self.tail_law() {
            Some(l) => {
                let a = l.exp + 1.0;
                let z = (x_max - self.lam).max(0.0) * rate;
                pre * l.coef * rate.powf(-a) * upper_gamma(a, z)
            }
            None => 0.0,
        };
        (head, tail)
    }

    /// `d/dx` of the kernel, resolvent kinds only: `x^{beta-2} E_{alpha,beta-1}(-theta x^alpha)`.
    pub fn shift_derivative(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(invalid("x", x, "must be positive"));
        }
        match (&self.base, &self.spec) {
            (Base::Resolvent { ml, .. }, KernelSpec::ResolventFractional { .. }) => Ok(ml.derivative(x)),
            _ => Err(Error::Numerical(
                "shift derivative is defined for undecorated resolvent kernels".into(),
            )),
        }
    }

    /// `int_a^b k(s) ds` for `0 <= a <= b`; closed form where available.
    pub fn step_integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= a) {
            return Err(invalid("a", a, "need 0 <= a <= b"));
        }
        if a == b {
            return Ok(0.0);
        }
        if self.lam == 0.0 && self.eps == 0.0 {
            match &self.base {
                Base::Fractional { alpha, inv_gamma, .. } => {
                    return Ok((b.powf(*alpha) - a.powf(*alpha)) * inv_gamma / alpha);
                }
                Base::Log => {
                    let p = |s: f64| if s == 0.0 { 0.0 } else { (s + 1.0) * s.ln_1p() - s * s.ln() };
                    return Ok(p(b) - p(a));
                }
                Base::Resolvent { ml, .. } => {
                    return Ok(ml.primitive(b) - ml.primitive(a));
                }
            }
        }
        self.integrate_power(a, b, 1)
    }

    /// `int_a^b k(s)^2 ds` for `0 <= a <= b`.
    pub fn step_l2(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= a) {
            return Err(invalid("a", a, "need 0 <= a <= b"));
        }
        if a == b {
            return Ok(0.0);
        }
        self.integrate_power(a, b, 2)
    }

    fn integrate_power(&self, a: f64, b: f64, pow: i32) -> Result<f64> {
        let f = |s: f64| self.value_unchecked(s).powi(pow);
        if a == 0.0 && self.eps == 0.0 {
            let m = 0.5 * b;
            Ok(quad::integrate_from_zero(f, m, TOL.quad_rel)?
                + quad::integrate(f, m, b, TOL.quad_rel, TOL.quad_abs)?)
        } else {
            quad::integrate(f, a, b, TOL.quad_rel, TOL.quad_abs)
        }
    }

    /// `int_0^inf k(s)^2 ds`.
    pub fn l2_norm_sq(&self) -> Result<f64> {
        let f = |s: f64| self.value_unchecked(s).powi(2);
        if self.eps == 0.0 {
            quad::integrate_half_line(f, TOL.quad_rel)
        } else {
            quad::integrate_to_inf(f, 0.0, TOL.quad_rel)
        }
    }
}

/// `(1/pi)(x^{2a-b} sin(b pi) - theta x^{a-b} sin((a-b) pi)) / (theta^2 + 2 theta cos(a pi) x^a + x^{2a})`.
pub fn resolvent_density(alpha: f64, beta: f64, theta: f64, x: f64) -> f64 {
    let xa = x.powf(alpha);
    let den = theta * theta + 2.0 * theta * crate::special::cospi(alpha) * xa + xa * xa;
    if alpha == beta {
        return sinpi(alpha) * xa / (PI * den);
    }
    let num = x.powf(2.0 * alpha - beta) * sinpi(beta) - theta * x.powf(alpha - beta) * sinpi(alpha - beta);
    num / (PI * den)
}

/// Kernel value at `t > 0`.
pub fn kernel_value(k: &KernelSpec, t: f64) -> Result<f64> {
    k.compile()?.value(t)
}

/// Bernstein density at `x > 0`.
pub fn bernstein_density(k: &KernelSpec, x: f64) -> Result<f64> {
    k.compile()?.density(x)
}

/// `x^{beta-2} E_{alpha,beta-1}(-theta x^alpha)` for resolvent kernels.
pub fn shift_derivative_density(k: &KernelSpec, x: f64) -> Result<f64> {
    k.compile()?.shift_derivative(x)
}

/// Laplace reconstruction of a kernel from a quadrature rule, with analytic
/// head and tail corrections reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reconstruction {
    pub value: f64,
    pub quadrature: f64,
    pub head: f64,
    pub tail: f64,
}

/// `sum_i w_i e^{-x_i t} xi(x_i)` plus point masses and, for continuum rules,
/// the analytic corrections beyond `[x_min, x_max]`.
pub fn reconstruct(k: &Kernel, q: &QuadratureRule, t: f64) -> Result<Reconstruction> {
    if q.nodes.is_empty() {
        return Err(Error::Insufficient("empty quadrature".into()));
    }
    if !(t > 0.0) {
        return Err(invalid("t", t, "must be positive"));
    }
    let emb = q.embed_density(k)?;
    let sum: f64 = q
        .nodes
        .iter()
        .zip(&q.weights)
        .zip(&emb)
        .map(|((x, w), e)| w * (-x * t).exp() * e)
        .sum();
    let (head, tail) = match q.range {
        Some((lo, hi)) => k.laplace_corrections(lo, hi, t),
        None => (0.0, 0.0),
    };
    Ok(Reconstruction {
        value: sum + head + tail,
        quadrature: sum,
        head,
        tail,
    })
}

/// Convenience wrapper returning only the corrected value.
pub fn reconstruct_kernel(k: &KernelSpec, q: &QuadratureRule, t: f64) -> Result<f64> {
    Ok(reconstruct(&k.compile()?, q, t)?.value)
}

/// Diagonal spectral data: `A e_n = -theta_n e_n`, `Q e_n = lambda_n e_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    pub thetas: Vec<f64>,
    pub noise_eigs: Vec<f64>,
    pub gamma_exp: Option<f64>,
}

impl SpectralOperator {
    pub fn new(thetas: Vec<f64>, noise_eigs: Vec<f64>) -> Result<Self> {
        let s = Self {
            thetas,
            noise_eigs,
            gamma_exp: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// `lambda_n = theta_n^{-gamma}` for `Q = (-A)^{-gamma}`.
    pub fn with_gamma(thetas: Vec<f64>, gamma_exp: f64) -> Result<Self> {
        ensure_finite("gamma", gamma_exp)?;
        let noise_eigs = thetas.iter().map(|t| t.powf(-gamma_exp)).collect();
        let s = Self {
            thetas,
            noise_eigs,
            gamma_exp: Some(gamma_exp),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn single(theta: f64) -> Result<Self> {
        Self::new(vec![theta], vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return Err(Error::Insufficient("spectral operator needs at least one mode".into()));
        }
        if self.thetas.len() != self.noise_eigs.len() {
            return Err(invalid(
                "noise_eigs",
                self.noise_eigs.len() as f64,
                format!("length must equal the number of modes {}", self.thetas.len()),
            ));
        }
        for (i, t) in self.thetas.iter().enumerate() {
            ensure_finite("theta", *t)?;
            if *t <= 0.0 {
                return Err(invalid("theta", *t, "must be positive"));
            }
            if i > 0 && *t <= self.thetas[i - 1] {
                return Err(invalid("theta", *t, "must be strictly increasing"));
            }
        }
        for l in &self.noise_eigs {
            ensure_finite("noise_eig", *l)?;
            if *l < 0.0 {
                return Err(invalid("noise_eig", *l, "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.thetas.len()
    }
}

/// Weyl-law eigenvalues `theta_n = c n^{2/d}` with unit noise eigenvalues.
pub fn weyl_eigenvalues(d: u32, c: f64, n: usize) -> Result<SpectralOperator> {
    if d == 0 {
        return Err(invalid("d", 0.0, "must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("N", 0.0, "must be at least 1"));
    }
    ensure_finite("c", c)?;
    if c <= 0.0 {
        return Err(invalid("c", c, "must be positive"));
    }
    let thetas = (1..=n).map(|k| c * (k as f64).powf(2.0 / d as f64)).collect();
    SpectralOperator::new(thetas, vec![1.0; n])
}
