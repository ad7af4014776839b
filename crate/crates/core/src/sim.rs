//! Path generation: a direct discrete-convolution scheme for the mild Volterra
//! equation and exponential-Euler / shift-Euler schemes for its two lifts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::kernels::{Kernel, KernelSpec, SpectralOperator};
use crate::laplace_lift::{LiftStateLaplace, QuadratureRule};
use crate::shift_lift::{LiftStateShift, ShiftGrid};

/// Drift `b: R^N -> R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    /// `b(u) = B u + b0` with `B` row-major `N x N`.
    Affine { b: Vec<f64>, b0: Vec<f64> },
    /// `b_n(u) = c_n tanh(u_n)`.
    Tanh { c: Vec<f64> },
}

/// Diagonal diffusion `sigma: R^N -> R^N`, acting on the `n`-th noise mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    /// `sigma_n(u) = sigma0_n`.
    Additive { sigma0: Vec<f64> },
    /// `sigma_n(u) = s0_n + s1_n u_n`.
    Affine { s0: Vec<f64>, s1: Vec<f64> },
}

/// Free term `G(t) = atom + coef E(t)`, realized in each scheme as an initial lift state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    Zero,
    Constant { v: Vec<f64> },
    /// `atom` is the projected `S_inf` part; `coef_n E_n(t)` decays, with `E_n` the
    /// kernel at mode parameter `theta_n`.
    LiftState { atom: Vec<f64>, kernel: KernelSpec, coef: Vec<f64> },
}

/// Lipschitz and linear-growth constants of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub b_lip: f64,
    pub b_lin: f64,
    pub sigma_lip: f64,
    pub sigma_lin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub spectral: SpectralOperator,
    pub kernel_b: KernelSpec,
    pub kernel_sigma: KernelSpec,
    pub drift: Drift,
    pub diffusion: Diffusion,
    pub forcing: Forcing,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest singular value of a row-major square matrix by power iteration on `B^T B`.
pub fn operator_norm(b: &[f64], n: usize) -> f64 {
    if b.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut norm = 0.0;
    for _ in 0..500 {
        let bv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b[i * n + j] * v[j]).sum()).collect();
        let btbv: Vec<f64> = (0..n).map(|j| (0..n).map(|i| b[i * n + j] * bv[i]).sum()).collect();
        let s = euclid(&btbv);
        if s == 0.0 {
            return 0.0;
        }
        let next = s.sqrt();
        v = btbv.iter().map(|x| x / s).collect();
        if (next - norm).abs() <= 1e-15 * next {
            return next;
        }
        norm = next;
    }
    norm
}

impl Drift {
    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.fill(0.0),
            Drift::Affine { b, b0 } => {
                let n = u.len();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b0[i] + b[i * n..(i + 1) * n].iter().zip(u).map(|(a, x)| a * x).sum::<f64>();
                }
            }
            Drift::Tanh { c } => {
                for ((o, ci), x) in out.iter_mut().zip(c).zip(u) {
                    *o = ci * x.tanh();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Drift::Zero => true,
            Drift::Affine { b, b0 } => b.iter().chain(b0).all(|x| *x == 0.0),
            Drift::Tanh { c } => c.iter().all(|x| *x == 0.0),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check = |v: &[f64], len: usize, name: &'static str| -> Result<()> {
            if v.len() != len {
                return Err(invalid(name, v.len() as f64, format!("length must be {len}")));
            }
            v.iter().try_for_each(|x| ensure_finite(name, *x).map(|_| ()))
        };
        match self {
            Drift::Zero => Ok(()),
            Drift::Affine { b, b0 } => {
                check(b, n * n, "drift.B")?;
                check(b0, n, "drift.b0")
            }
            Drift::Tanh { c } => check(c, n, "drift.c"),
        }
    }

    /// `(C_lip, C_lin)`: operator norm of `B` and `max(|B|, |b0|)`; `max |c_n|` for tanh.
    pub fn constants(&self) -> (f64, f64) {
        match self {
            Drift::Zero => (0.0, 0.0),
            Drift::Affine { b, b0 } => {
                let l = operator_norm(b, b0.len());
                (l, l.max(euclid(b0)))
            }
            Drift::Tanh { c } => (max_abs(c), max_abs(c)),
        }
    }
}

impl Diffusion {
    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Diffusion::Additive { sigma0 } => out.copy_from_slice(sigma0),
            Diffusion::Affine { s0, s1 } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = s0[i] + s1[i] * u[i];
                }
            }
        }
    }

    pub fn is_additive(&self) -> bool {
        match self {
            Diffusion::Additive { .. } => true,
            Diffusion::Affine { s1, .. } => s1.iter().all(|x| *x == 0.0),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let vs: Vec<(&Vec<f64>, &'static str)> = match self {
            Diffusion::Additive { sigma0 } => vec![(sigma0, "diffusion.sigma0")],
            Diffusion::Affine { s0, s1 } => vec![(s0, "diffusion.s0"), (s1, "diffusion.s1")],
        };
        for (v, name) in vs {
            if v.len() != n {
                return Err(invalid(name, v.len() as f64, format!("length must be {n}")));
            }
            for x in v {
                ensure_finite(name, *x)?;
            }
        }
        Ok(())
    }

    /// `(C_lip, C_lin)` on the noise-weighted space: `max |s1_n| sqrt(lambda_n)` and
    /// the Hilbert-Schmidt size of the constant part.
    pub fn constants(&self, lambdas: &[f64]) -> (f64, f64) {
        let hs = |v: &[f64]| v.iter().zip(lambdas).map(|(x, l)| x * x * l).sum::<f64>().sqrt();
        match self {
            Diffusion::Additive { sigma0 } => (0.0, hs(sigma0)),
            Diffusion::Affine { s0, s1 } => {
                let lip = s1.iter().zip(lambdas).fold(0.0f64, |m, (s, l)| m.max(s.abs() * l.sqrt()));
                (lip, lip.max(hs(s0)))
            }
        }
    }
}

impl ModelSpec {
    pub fn modes(&self) -> usize {
        self.spectral.modes()
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        self.kernel_b.validate()?;
        self.kernel_sigma.validate()?;
        let n = self.modes();
        self.drift.validate(n)?;
        self.diffusion.validate(n)?;
        match &self.forcing {
            Forcing::Zero => {}
            Forcing::Constant { v } => {
                if v.len() != n {
                    return Err(invalid("forcing.v", v.len() as f64, format!("length must be {n}")));
                }
            }
            Forcing::LiftState { atom, kernel, coef } => {
                kernel.validate()?;
                if atom.len() != n || coef.len() != n {
                    return Err(invalid("forcing.atom", atom.len() as f64, format!("lengths must be {n}")));
                }
            }
        }
        Ok(())
    }

    pub fn lipschitz(&self) -> Lipschitz {
        let (b_lip, b_lin) = self.drift.constants();
        let (sigma_lip, sigma_lin) = self.diffusion.constants(&self.spectral.noise_eigs);
        Lipschitz {
            b_lip,
            b_lin,
            sigma_lip,
            sigma_lin,
        }
    }

    fn mode_kernels(&self, spec: &KernelSpec) -> Result<Vec<Kernel>> {
        self.spectral.thetas.iter().map(|t| spec.with_theta(*t).compile()).collect()
    }

    /// Drift kernels `E_b` per mode.
    pub fn kernels_b(&self) -> Result<Vec<Kernel>> {
        self.mode_kernels(&self.kernel_b)
    }

    /// Noise kernels `E_sigma` per mode.
    pub fn kernels_sigma(&self) -> Result<Vec<Kernel>> {
        self.mode_kernels(&self.kernel_sigma)
    }

    fn forcing_parts(&self) -> Result<(Vec<f64>, Option<(Vec<Kernel>, Vec<f64>)>)> {
        let n = self.modes();
        Ok(match &self.forcing {
            Forcing::Zero => (vec![0.0; n], None),
            Forcing::Constant { v } => (v.clone(), None),
            Forcing::LiftState { atom, kernel, coef } => (atom.clone(), Some((self.mode_kernels(kernel)?, coef.clone()))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Direct,
    LaplaceLift,
    ShiftLift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Time simulated before recording starts.
    pub burn_in: f64,
}

fn whole_steps(name: &'static str, t: f64, dt: f64) -> Result<usize> {
    let r = t / dt;
    let k = r.round();
    if (r - k).abs() > 1e-9 * r.max(1.0) {
        return Err(invalid(name, t, format!("must be an integer multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64, paths: usize, seed: u64, scheme: Scheme) -> Self {
        Self {
            dt,
            t_end,
            paths,
            seed,
            scheme,
            burn_in: 0.0,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("dt", self.dt)?;
        ensure_finite("T", self.t_end)?;
        ensure_finite("burn_in", self.burn_in)?;
        if !(self.dt > 0.0) {
            return Err(invalid("dt", self.dt, "must be positive"));
        }
        if !(self.t_end > 0.0) {
            return Err(invalid("T", self.t_end, "must be positive"));
        }
        if self.burn_in < 0.0 {
            return Err(invalid("burn_in", self.burn_in, "must be nonnegative"));
        }
        if self.paths == 0 {
            return Err(invalid("paths", 0.0, "must be positive"));
        }
        self.steps()?;
        self.burn_steps()?;
        Ok(())
    }

    /// Recorded steps after burn-in.
    pub fn steps(&self) -> Result<usize> {
        whole_steps("T", self.t_end, self.dt)
    }

    pub fn burn_steps(&self) -> Result<usize> {
        whole_steps("burn_in", self.burn_in, self.dt)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-path stream keyed by `seed XOR hash(path)`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(path))
}

/// Source of `N(0, dt lambda_n)` increments, drawn step-major so every scheme
/// sees the same increments for the same `(seed, path)`.
pub struct Increments {
    rng: ChaCha8Rng,
    scale: Vec<f64>,
}

impl Increments {
    pub fn new(seed: u64, path: u64, dt: f64, lambdas: &[f64]) -> Self {
        Self {
            rng: path_rng(seed, path),
            scale: lambdas.iter().map(|l| (dt * l).sqrt()).collect(),
        }
    }

    pub fn next_into(&mut self, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.scale) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *o = s * z;
        }
    }
}

/// `steps x modes` row-major array of increments for one path.
pub fn gaussian_increments(seed: u64, path: u64, steps: usize, dt: f64, lambdas: &[f64]) -> Vec<f64> {
    let m = lambdas.len();
    let mut inc = Increments::new(seed, path, dt, lambdas);
    let mut out = vec![0.0; steps * m];
    for row in out.chunks_mut(m.max(1)) {
        inc.next_into(row);
    }
    out
}

/// One-step advance of a scheme with the current projection `u`.
pub trait Stepper {
    fn u(&self) -> &[f64];
    fn step(&mut self, dw: &[f64]);
}

/// Precomputed per-model data of a scheme, shared read-only across paths.
pub trait Plan: Sync {
    type Stepper: Stepper;
    fn modes(&self) -> usize;
    fn dt(&self) -> f64;
    fn lambdas(&self) -> &[f64];
    fn start(&self) -> Self::Stepper;
}

/// `u` values of recorded steps `k = 0..=steps`, `(steps + 1) x modes` per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub dt: f64,
    pub steps: usize,
    pub modes: usize,
    pub u: Vec<Vec<f64>>,
}

impl Paths {
    #[inline]
    pub fn at(&self, path: usize, k: usize, n: usize) -> f64 {
        self.u[path][k * self.modes + n]
    }

    /// Values of mode `n` at step `k` across paths.
    pub fn marginal(&self, k: usize, n: usize) -> Vec<f64> {
        (0..self.u.len()).map(|p| self.at(p, k, n)).collect()
    }
}

/// Runs one path: `burn` unrecorded steps, then `steps` steps with `observe(k, u)` for `k = 0..=steps`.
pub fn run_path<P: Plan>(
    plan: &P,
    mut st: P::Stepper,
    seed: u64,
    path: u64,
    burn: usize,
    steps: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> P::Stepper {
    let mut inc = Increments::new(seed, path, plan.dt(), plan.lambdas());
    let mut dw = vec![0.0; plan.modes()];
    for _ in 0..burn {
        inc.next_into(&mut dw);
        st.step(&dw);
    }
    observe(0, st.u());
    for k in 1..=steps {
        inc.next_into(&mut dw);
        st.step(&dw);
        observe(k, st.u());
    }
    st
}

/// All paths of a configuration, in parallel over paths; returns final steppers too.
pub fn run_paths<P: Plan>(plan: &P, c: &SimConfig, init: impl Fn(usize) -> P::Stepper + Sync) -> Result<(Paths, Vec<P::Stepper>)>
where
    P::Stepper: Send,
{
    c.validate()?;
    if (plan.dt() - c.dt).abs() > 1e-12 * c.dt {
        return Err(invalid("dt", c.dt, format!("plan was built for dt = {}", plan.dt())));
    }
    let steps = c.steps()?;
    let burn = c.burn_steps()?;
    let m = plan.modes();
    let out: Vec<(Vec<f64>, P::Stepper)> = (0..c.paths)
        .into_par_iter()
        .map(|p| {
            let mut u = vec![0.0; (steps + 1) * m];
            let st = run_path(plan, init(p), c.seed, p as u64, burn, steps, |k, v| {
                u[k * m..(k + 1) * m].copy_from_slice(v)
            });
            (u, st)
        })
        .collect();
    let (u, finals) = out.into_iter().unzip();
    Ok((
        Paths {
            dt: c.dt,
            steps,
            modes: m,
            u,
        },
        finals,
    ))
}

/// Cell weights of the direct scheme, mode-major.
#[derive(Debug, Clone)]
pub struct DirectPlan {
    dt: f64,
    modes: usize,
    lambdas: Vec<f64>,
    drift: Drift,
    diffusion: Diffusion,
    /// `w_b[n][m-1] = int_{(m-1)dt}^{m dt} E_b`.
    w_b: Vec<Vec<f64>>,
    /// `w_s[n][m-1] = ((1/dt) int_{(m-1)dt}^{m dt} E_sigma^2)^{1/2}`.
    w_s: Vec<Vec<f64>>,
    g_atom: Vec<f64>,
    g_decay: Option<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl DirectPlan {
    /// Weights for up to `horizon` steps.
    pub fn new(m: &ModelSpec, dt: f64, horizon: usize) -> Result<Self> {
        m.validate()?;
        let kb = m.kernels_b()?;
        let ks = m.kernels_sigma()?;
        let skip_b = m.drift.is_zero();
        let cell = |k: &Kernel, j: usize, l2: bool| -> Result<f64> {
            let (a, b) = (j as f64 * dt, (j + 1) as f64 * dt);
            if l2 {
                Ok((k.step_l2(a, b)? / dt).sqrt())
            } else {
                k.step_integral(a, b)
            }
        };
        let table = |ks: &[Kernel], l2: bool| -> Result<Vec<Vec<f64>>> {
            ks.iter()
                .map(|k| (0..horizon).into_par_iter().map(|j| cell(k, j, l2)).collect::<Result<Vec<f64>>>())
                .collect()
        };
        let w_b = if skip_b { vec![Vec::new(); kb.len()] } else { table(&kb, false)? };
        let w_s = table(&ks, true)?;
        let (g_atom, dec) = m.forcing_parts()?;
        let g_decay = match dec {
            None => None,
            Some((kernels, coef)) => {
                let vals = kernels
                    .iter()
                    .map(|k| {
                        (0..=horizon)
                            .map(|j| {
                                if j == 0 {
                                    Ok(k.step_integral(0.0, dt)? / dt)
                                } else {
                                    k.value(j as f64 * dt)
                                }
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some((vals, coef))
            }
        };
        Ok(Self {
            dt,
            modes: m.modes(),
            lambdas: m.spectral.noise_eigs.clone(),
            drift: m.drift.clone(),
            diffusion: m.diffusion.clone(),
            w_b,
            w_s,
            g_atom,
            g_decay,
        })
    }

    pub fn horizon(&self) -> usize {
        self.w_s.first().map_or(0, |w| w.len())
    }

    fn g(&self, k: usize, n: usize) -> f64 {
        let mut g = self.g_atom[n];
        if let Some((vals, coef)) = &self.g_decay {
            g += coef[n] * vals[n][k];
        }
        g
    }
}

/// Path state of the direct scheme: the history of `b(u_j)` and `sigma(u_j) dW_j`.
pub struct DirectStepper<'a> {
    plan: &'a DirectPlan,
    k: usize,
    u: Vec<f64>,
    hb: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
    buf: Vec<f64>,
}

impl Stepper for DirectStepper<'_> {
    fn u(&self) -> &[f64] {
        &self.u
    }

    fn step(&mut self, dw: &[f64]) {
        let p = self.plan;
        assert!(self.k < p.horizon(), "direct scheme horizon exceeded");
        if !p.w_b[0].is_empty() {
            p.drift.eval(&self.u, &mut self.buf);
            for (h, b) in self.hb.iter_mut().zip(&self.buf) {
                h.push(*b);
            }
        }
        p.diffusion.eval(&self.u, &mut self.buf);
        for ((h, s), w) in self.hs.iter_mut().zip(&self.buf).zip(dw) {
            h.push(s * w);
        }
        self.k += 1;
        let k = self.k;
        for n in 0..p.modes {
            let mut acc = p.g(k, n);
            if !p.w_b[n].is_empty() {
                acc += conv(&p.w_b[n], &self.hb[n], k);
            }
            acc += conv(&p.w_s[n], &self.hs[n], k);
            self.u[n] = acc;
        }
    }
}

/// `sum_{j<k} w[k-1-j] h[j]`.
#[inline]
fn conv(w: &[f64], h: &[f64], k: usize) -> f64 {
    w[..k].iter().rev().zip(&h[..k]).map(|(a, b)| a * b).sum()
}

impl<'a> Plan for &'a DirectPlan {
    type Stepper = DirectStepper<'a>;

    fn modes(&self) -> usize {
        self.modes
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    fn start(&self) -> DirectStepper<'a> {
        let plan: &'a DirectPlan = self;
        let n = plan.modes;
        let cap = plan.horizon();
        DirectStepper {
            plan,
            k: 0,
            u: (0..n).map(|i| plan.g(0, i)).collect(),
            hb: vec![Vec::with_capacity(if plan.w_b[0].is_empty() { 0 } else { cap }); n],
            hs: vec![Vec::with_capacity(cap); n],
            buf: vec![0.0; n],
        }
    }
}

/// `u` paths of the direct scheme.
pub fn simulate_direct(m: &ModelSpec, c: &SimConfig) -> Result<Paths> {
    c.validate()?;
    let plan = DirectPlan::new(m, c.dt, c.steps()? + c.burn_steps()?)?;
    let p = &plan;
    Ok(run_paths(&p, c, |_| p.start())?.0)
}

/// Per-node factors of the exponential-Euler lift scheme.
#[derive(Debug, Clone)]
pub struct LaplacePlan {
    dt: f64,
    modes: usize,
    lambdas: Vec<f64>,
    drift: Drift,
    diffusion: Diffusion,
    rule: QuadratureRule,
    decay: Vec<f64>,
    /// `phi1(x_i) xi_b(x_i)`, node-major.
    fb: Vec<f64>,
    /// `(phi1(x_i)/dt) xi_sigma(x_i)`, node-major.
    fs: Vec<f64>,
    init: LiftStateLaplace,
}

fn phi1(x: f64, dt: f64) -> f64 {
    if x * dt < 1e-8 {
        dt * (1.0 - 0.5 * x * dt)
    } else {
        -(-x * dt).exp_m1() / x
    }
}

impl LaplacePlan {
    pub fn new(m: &ModelSpec, q: &QuadratureRule, dt: f64) -> Result<Self> {
        m.validate()?;
        ensure_finite("dt", dt)?;
        let n = m.modes();
        let kb = m.kernels_b()?;
        let ks = m.kernels_sigma()?;
        let k = q.len();
        let mut fb = vec![0.0; k * n];
        let mut fs = vec![0.0; k * n];
        for mode in 0..n {
            let eb = q.embed(&kb[mode])?;
            let es = q.embed(&ks[mode])?;
            for (i, x) in q.nodes.iter().enumerate() {
                let p = phi1(*x, dt);
                fb[i * n + mode] = p * eb[i];
                fs[i * n + mode] = p / dt * es[i];
            }
        }
        let init = laplace_initial_state(m, q)?;
        Ok(Self {
            dt,
            modes: n,
            lambdas: m.spectral.noise_eigs.clone(),
            drift: m.drift.clone(),
            diffusion: m.diffusion.clone(),
            rule: q.clone(),
            decay: q.nodes.iter().map(|x| (-x * dt).exp()).collect(),
            fb,
            fs,
            init,
        })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn initial_state(&self) -> &LiftStateLaplace {
        &self.init
    }

    pub fn stepper_from(&self, s: LiftStateLaplace) -> Result<LaplaceStepper<'_>> {
        let u = s.project(&self.rule)?;
        Ok(LaplaceStepper {
            plan: self,
            state: s,
            u,
            b: vec![0.0; self.modes],
            s: vec![0.0; self.modes],
        })
    }
}

/// Lift state realizing the model's forcing: `atom / atom_mass` at the atom and `coef_n` times the embedded kernel.
pub fn laplace_initial_state(m: &ModelSpec, q: &QuadratureRule) -> Result<LiftStateLaplace> {
    let n = m.modes();
    let (atom, dec) = m.forcing_parts()?;
    let mut s = LiftStateLaplace::zeros(q.len(), n);
    if atom.iter().any(|a| *a != 0.0) {
        if q.atom_mass <= 0.0 {
            return Err(invalid(
                "atom_mass",
                q.atom_mass,
                "a nonzero long-run forcing needs an atom at 0 in the lift",
            ));
        }
        s.atom_value = atom.iter().map(|a| a / q.atom_mass).collect();
    }
    if let Some((kernels, coef)) = dec {
        for (mode, (k, c)) in kernels.iter().zip(&coef).enumerate() {
            for (i, v) in q.embed(k)?.into_iter().enumerate() {
                s.node_values[i * n + mode] = c * v;
            }
        }
    }
    Ok(s)
}

pub struct LaplaceStepper<'a> {
    plan: &'a LaplacePlan,
    pub state: LiftStateLaplace,
    u: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
}

impl Stepper for LaplaceStepper<'_> {
    fn u(&self) -> &[f64] {
        &self.u
    }

    fn step(&mut self, dw: &[f64]) {
        let p = self.plan;
        let n = p.modes;
        p.drift.eval(&self.u, &mut self.b);
        p.diffusion.eval(&self.u, &mut self.s);
        for (sv, w) in self.s.iter_mut().zip(dw) {
            *sv *= w;
        }
        let q = &p.rule;
        self.u.iter_mut().zip(&self.state.atom_value).for_each(|(u, a)| *u = q.atom_mass * a);
        for (i, e) in p.decay.iter().enumerate() {
            let row = &mut self.state.node_values[i * n..(i + 1) * n];
            let fb = &p.fb[i * n..(i + 1) * n];
            let fs = &p.fs[i * n..(i + 1) * n];
            let w = q.weights[i];
            for mode in 0..n {
                let v = e * row[mode] + fb[mode] * self.b[mode] + fs[mode] * self.s[mode];
                row[mode] = v;
                self.u[mode] += w * v;
            }
        }
    }
}

impl<'a> Plan for &'a LaplacePlan {
    type Stepper = LaplaceStepper<'a>;

    fn modes(&self) -> usize {
        self.modes
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    fn start(&self) -> LaplaceStepper<'a> {
        let plan: &'a LaplacePlan = self;
        plan.stepper_from(plan.init.clone()).expect("initial state matches the rule")
    }
}

/// Lift paths: `u` paths plus the final lift state of every path.
#[derive(Debug, Clone)]
pub struct LiftRun<S> {
    pub paths: Paths,
    pub final_states: Vec<S>,
}

/// Laplace-lift paths started from the model's forcing state.
pub fn simulate_laplace_lift(m: &ModelSpec, q: &QuadratureRule, c: &SimConfig) -> Result<LiftRun<LiftStateLaplace>> {
    let plan = LaplacePlan::new(m, q, c.dt)?;
    simulate_laplace_lift_from(&plan, c, |_| plan.initial_state().clone())
}

/// Laplace-lift paths from per-path initial states.
pub fn simulate_laplace_lift_from(
    plan: &LaplacePlan,
    c: &SimConfig,
    init: impl Fn(usize) -> LiftStateLaplace + Sync,
) -> Result<LiftRun<LiftStateLaplace>> {
    for p in 0..c.paths.min(1) {
        plan.stepper_from(init(p))?;
    }
    let (paths, finals) = run_paths(&plan, c, |p| plan.stepper_from(init(p)).expect("state shape checked"))?;
    Ok(LiftRun {
        paths,
        final_states: finals.into_iter().map(|s| s.state).collect(),
    })
}

/// Shift-Euler increments on the grid.
#[derive(Debug, Clone)]
pub struct ShiftPlan {
    dt: f64,
    modes: usize,
    shift_steps: usize,
    lambdas: Vec<f64>,
    drift: Drift,
    diffusion: Diffusion,
    grid: ShiftGrid,
    /// `int_{x_j}^{x_j + dt} E_b`, point-major.
    yb: Vec<f64>,
    /// `((1/dt) int_{x_j}^{x_j + dt} E_sigma^2)^{1/2}`, point-major.
    ys: Vec<f64>,
    init: LiftStateShift,
}

impl ShiftPlan {
    pub fn new(m: &ModelSpec, g: &ShiftGrid, dt: f64) -> Result<Self> {
        m.validate()?;
        let shift_steps = g.steps_for(dt)?;
        if shift_steps == 0 {
            return Err(invalid("dt", dt, "must be at least one grid step"));
        }
        let n = m.modes();
        let pts = g.points();
        let kb = m.kernels_b()?;
        let ks = m.kernels_sigma()?;
        let skip_b = m.drift.is_zero();
        let table = |ks: &[Kernel], l2: bool| -> Result<Vec<f64>> {
            let cols: Vec<Vec<f64>> = ks
                .iter()
                .map(|k| {
                    (0..pts)
                        .into_par_iter()
                        .map(|j| {
                            let a = g.x(j);
                            if l2 {
                                Ok((k.step_l2(a, a + dt)? / dt).sqrt())
                            } else {
                                k.step_integral(a, a + dt)
                            }
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let mut out = vec![0.0; pts * n];
            for (mode, col) in cols.iter().enumerate() {
                for (j, v) in col.iter().enumerate() {
                    out[j * n + mode] = *v;
                }
            }
            Ok(out)
        };
        let yb = if skip_b { vec![0.0; pts * n] } else { table(&kb, false)? };
        let ys = table(&ks, true)?;
        let init = shift_initial_state(m, g)?;
        Ok(Self {
            dt,
            modes: n,
            shift_steps,
            lambdas: m.spectral.noise_eigs.clone(),
            drift: m.drift.clone(),
            diffusion: m.diffusion.clone(),
            grid: g.clone(),
            yb,
            ys,
            init,
        })
    }

    pub fn grid(&self) -> &ShiftGrid {
        &self.grid
    }

    pub fn initial_state(&self) -> &LiftStateShift {
        &self.init
    }

    pub fn stepper_from(&self, s: LiftStateShift) -> Result<ShiftStepper<'_>> {
        if s.modes != self.modes || s.points() != self.grid.points() {
            return Err(invalid("state", s.values.len() as f64, "shape does not match the grid"));
        }
        let u = s.xi0();
        Ok(ShiftStepper {
            plan: self,
            state: s,
            u,
            b: vec![0.0; self.modes],
            s: vec![0.0; self.modes],
        })
    }
}

/// Grid state `y(x) = atom + coef_n E_n(x)` (cell average at `x = 0`, value `atom` at infinity).
pub fn shift_initial_state(m: &ModelSpec, g: &ShiftGrid) -> Result<LiftStateShift> {
    let n = m.modes();
    let (atom, dec) = m.forcing_parts()?;
    let mut s = LiftStateShift::constant(g, &atom);
    if let Some((kernels, coef)) = dec {
        let e = LiftStateShift::from_kernels(g, &kernels)?;
        for (v, j) in s.values.iter_mut().zip(0..) {
            *v += coef[j % n] * e.values[j];
        }
    }
    Ok(s)
}

pub struct ShiftStepper<'a> {
    plan: &'a ShiftPlan,
    pub state: LiftStateShift,
    u: Vec<f64>,
    b: Vec<f64>,
    s: Vec<f64>,
}

impl Stepper for ShiftStepper<'_> {
    fn u(&self) -> &[f64] {
        &self.u
    }

    fn step(&mut self, dw: &[f64]) {
        let p = self.plan;
        let n = p.modes;
        p.drift.eval(&self.u, &mut self.b);
        p.diffusion.eval(&self.u, &mut self.s);
        for (sv, w) in self.s.iter_mut().zip(dw) {
            *sv *= w;
        }
        self.state.shift_in_place(p.shift_steps);
        for (j, row) in self.state.values.chunks_mut(n).enumerate() {
            let yb = &p.yb[j * n..(j + 1) * n];
            let ys = &p.ys[j * n..(j + 1) * n];
            for mode in 0..n {
                row[mode] += yb[mode] * self.b[mode] + ys[mode] * self.s[mode];
            }
        }
        self.u.copy_from_slice(&self.state.values[..n]);
    }
}

impl<'a> Plan for &'a ShiftPlan {
    type Stepper = ShiftStepper<'a>;

    fn modes(&self) -> usize {
        self.modes
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    fn start(&self) -> ShiftStepper<'a> {
        let plan: &'a ShiftPlan = self;
        plan.stepper_from(plan.init.clone()).expect("initial state matches the grid")
    }
}

/// Shift-lift paths started from the model's forcing state.
pub fn simulate_shift_lift(m: &ModelSpec, g: &ShiftGrid, c: &SimConfig) -> Result<LiftRun<LiftStateShift>> {
    let plan = ShiftPlan::new(m, g, c.dt)?;
    simulate_shift_lift_from(&plan, c, |_| plan.initial_state().clone())
}

/// Shift-lift paths from per-path initial states.
pub fn simulate_shift_lift_from(
    plan: &ShiftPlan,
    c: &SimConfig,
    init: impl Fn(usize) -> LiftStateShift + Sync,
) -> Result<LiftRun<LiftStateShift>> {
    for p in 0..c.paths.min(1) {
        plan.stepper_from(init(p))?;
    }
    let (paths, finals) = run_paths(&plan, c, |p| plan.stepper_from(init(p)).expect("state shape checked"))?;
    Ok(LiftRun {
        paths,
        final_states: finals.into_iter().map(|s| s.state).collect(),
    })
}

/// Lift discretization used by a lifted scheme.
#[derive(Debug, Clone)]
pub enum LiftData {
    None,
    Laplace(QuadratureRule),
    Shift(ShiftGrid),
}

/// Any scheme, dispatched on `c.scheme`.
pub fn simulate(m: &ModelSpec, lift: &LiftData, c: &SimConfig) -> Result<Paths> {
    match (c.scheme, lift) {
        (Scheme::Direct, _) => simulate_direct(m, c),
        (Scheme::LaplaceLift, LiftData::Laplace(q)) => Ok(simulate_laplace_lift(m, q, c)?.paths),
        (Scheme::ShiftLift, LiftData::Shift(g)) => Ok(simulate_shift_lift(m, g, c)?.paths),
        (s, _) => Err(Error::Insufficient(format!("scheme {s:?} needs its lift discretization"))),
    }
}

fn map_plan<P: Plan, A: Send>(
    plan: &P,
    c: &SimConfig,
    init: &(dyn Fn(usize) -> A + Sync),
    obs: &(dyn Fn(&mut A, usize, &[f64]) + Sync),
) -> Result<Vec<A>> {
    let steps = c.steps()?;
    let burn = c.burn_steps()?;
    Ok((0..c.paths)
        .into_par_iter()
        .map(|p| {
            let mut acc = init(p);
            run_path(plan, plan.start(), c.seed, p as u64, burn, steps, |k, u| obs(&mut acc, k, u));
            acc
        })
        .collect())
}

/// Streams every path through a per-path accumulator without storing the path;
/// `obs(acc, k, u)` sees recorded steps `k = 0..=steps`. Results are in path order.
pub fn map_paths<A: Send>(
    m: &ModelSpec,
    lift: &LiftData,
    c: &SimConfig,
    init: impl Fn(usize) -> A + Sync,
    obs: impl Fn(&mut A, usize, &[f64]) + Sync,
) -> Result<Vec<A>> {
    c.validate()?;
    match (c.scheme, lift) {
        (Scheme::Direct, _) => {
            let plan = DirectPlan::new(m, c.dt, c.steps()? + c.burn_steps()?)?;
            map_plan(&&plan, c, &init, &obs)
        }
        (Scheme::LaplaceLift, LiftData::Laplace(q)) => map_plan(&&LaplacePlan::new(m, q, c.dt)?, c, &init, &obs),
        (Scheme::ShiftLift, LiftData::Shift(g)) => map_plan(&&ShiftPlan::new(m, g, c.dt)?, c, &init, &obs),
        (s, _) => Err(Error::Insufficient(format!("scheme {s:?} needs its lift discretization"))),
    }
}
