//! Discretized lift on weighted spaces of Laplace densities: quadrature rules,
//! node-vector states, the multiplication semigroup, `Xi`, `S_inf` and norm bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::kernels::Kernel;
use crate::special::{elementary_bound_constant, WeightFamily, WeightParams};

/// How continuum node weights are formed on the geometric grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NodeWeights {
    /// `x_i ln r`, halved at both ends: trapezoid rule in `ln x`.
    #[default]
    LogTrapezoid,
    /// Length of the geometric cell `[x_i r^{-1/2}, x_i r^{1/2}]`.
    GeometricCell,
}

/// Discretization of `mu = m0 delta_0 + dx` (or of an explicit discrete measure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub atom_mass: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `true` for nodes discretizing `dx`; `false` for point masses of `mu`.
    pub continuum: Vec<bool>,
    /// `[x_min, x_max]` of the continuum grid, when there is one.
    pub range: Option<(f64, f64)>,
    pub wparams: WeightParams,
}

/// Geometric grid `x_i = x_min r^{i-1}` with trapezoid-in-log weights.
pub fn build_quadrature(wparams: WeightParams, x_min: f64, x_max: f64, k: usize) -> Result<QuadratureRule> {
    build_quadrature_with(wparams, x_min, x_max, k, NodeWeights::LogTrapezoid)
}

pub fn build_quadrature_with(
    wparams: WeightParams,
    x_min: f64,
    x_max: f64,
    k: usize,
    rule: NodeWeights,
) -> Result<QuadratureRule> {
    wparams.validate()?;
    if wparams.family != WeightFamily::Laplace {
        return Err(invalid("family", 0.0, "quadrature rules use the Laplace weight family"));
    }
    ensure_finite("x_min", x_min)?;
    ensure_finite("x_max", x_max)?;
    if !(x_min > 0.0 && x_max > x_min) {
        return Err(invalid("x_min", x_min, "need 0 < x_min < x_max"));
    }
    if k < 2 {
        return Err(invalid("nodes", k as f64, "need at least 2 nodes"));
    }
    let lr = (x_max / x_min).ln() / (k - 1) as f64;
    let nodes: Vec<f64> = (0..k)
        .map(|i| {
            if i == k - 1 {
                x_max
            } else {
                x_min * (lr * i as f64).exp()
            }
        })
        .collect();
    let weights = nodes
        .iter()
        .enumerate()
        .map(|(i, x)| match rule {
            NodeWeights::LogTrapezoid => {
                let end = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
                end * x * lr
            }
            NodeWeights::GeometricCell => {
                let h = (0.5 * lr).exp();
                (x * h).min(x_max) - (x / h).max(x_min)
            }
        })
        .collect();
    Ok(QuadratureRule {
        atom_mass: wparams.atom_mass,
        continuum: vec![true; k],
        nodes,
        weights,
        range: Some((x_min, x_max)),
        wparams,
    })
}

impl QuadratureRule {
    /// Purely discrete measure `sum_i w_i delta_{x_i}`.
    pub fn discrete(wparams: WeightParams, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        wparams.validate()?;
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Insufficient("discrete rule needs matching nonempty nodes and weights".into()));
        }
        for (i, (x, w)) in nodes.iter().zip(&weights).enumerate() {
            if !(*x > 0.0 && x.is_finite()) {
                return Err(invalid("node", *x, "must be positive and finite"));
            }
            if !(*w > 0.0 && w.is_finite()) {
                return Err(invalid("weight", *w, "must be positive and finite"));
            }
            if i > 0 && *x <= nodes[i - 1] {
                return Err(invalid("node", *x, "must be strictly increasing"));
            }
        }
        Ok(Self {
            atom_mass: wparams.atom_mass,
            continuum: vec![false; nodes.len()],
            nodes,
            weights,
            range: None,
            wparams,
        })
    }

    /// Continuum grid translated by `shift >= 0`, for densities supported on `(shift, inf)`.
    pub fn offset(mut self, shift: f64) -> Result<Self> {
        ensure_finite("shift", shift)?;
        if shift < 0.0 {
            return Err(invalid("shift", shift, "must be nonnegative"));
        }
        for (x, c) in self.nodes.iter_mut().zip(&self.continuum) {
            if *c {
                *x += shift;
            }
        }
        self.range = self.range.map(|(a, b)| (a + shift, b + shift));
        Ok(self)
    }

    /// Adds unit-weight point-mass nodes at the given positions.
    pub fn with_atoms(mut self, positions: &[f64]) -> Result<Self> {
        for &p in positions {
            if !(p > 0.0 && p.is_finite()) {
                return Err(invalid("atom", p, "must be positive and finite"));
            }
            if self.nodes.iter().zip(&self.continuum).any(|(x, c)| !c && same_point(*x, p)) {
                continue;
            }
            let at = self.nodes.partition_point(|x| *x <= p);
            self.nodes.insert(at, p);
            self.weights.insert(at, 1.0);
            self.continuum.insert(at, false);
        }
        Ok(self)
    }

    /// Rule with the point masses of every kernel added as nodes.
    pub fn with_kernel_atoms(self, kernels: &[Kernel]) -> Result<Self> {
        let pos: Vec<f64> = kernels.iter().flat_map(|k| k.atoms()).map(|a| a.0).collect();
        self.with_atoms(&pos)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Embedding used by lift states: `embed_density` with the mass of the
    /// density below `x_min` lumped into the first continuum node.
    pub fn embed(&self, k: &Kernel) -> Result<Vec<f64>> {
        let mut out = self.embed_density(k)?;
        if let Some((lo, _)) = self.range {
            if let Some(i) = self.continuum.iter().position(|c| *c) {
                out[i] += k.head_mass(lo) / self.weights[i];
            }
        }
        Ok(out)
    }

    /// Density of the kernel's Bernstein measure with respect to this rule:
    /// the Lebesgue density at continuum nodes and `mass / w` at point-mass nodes.
    pub fn embed_density(&self, k: &Kernel) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.continuum)
            .map(|(x, c)| if *c { k.density_unchecked(*x) } else { 0.0 })
            .collect();
        for (pos, mass) in k.atoms() {
            let slot = self
                .nodes
                .iter()
                .zip(&self.continuum)
                .position(|(x, c)| !c && same_point(*x, pos))
                .ok_or_else(|| {
                    Error::Insufficient(format!("kernel has a point mass at {pos} not carried by the rule"))
                })?;
            out[slot] += mass / self.weights[slot];
        }
        Ok(out)
    }

    /// `(atom_mass + sum_i w_i / w(x_i))^{1/2}`, the Cauchy-Schwarz bound on `||Xi||`.
    pub fn xi_margin(&self, w: &WeightParams) -> f64 {
        let s: f64 = self.nodes.iter().zip(&self.weights).map(|(x, wi)| wi / w.eval(*x)).sum();
        (self.atom_mass + s).sqrt()
    }
}

fn same_point(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Lift state: value at the atom `x = 0` and node values, `K x N` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftStateLaplace {
    pub modes: usize,
    pub atom_value: Vec<f64>,
    pub node_values: Vec<f64>,
}

impl LiftStateLaplace {
    pub fn zeros(nodes: usize, modes: usize) -> Self {
        Self {
            modes,
            atom_value: vec![0.0; modes],
            node_values: vec![0.0; nodes * modes],
        }
    }

    /// State whose mode `n` column is the embedding of `kernels[n]`.
    pub fn from_kernels(q: &QuadratureRule, kernels: &[Kernel]) -> Result<Self> {
        let modes = kernels.len();
        let mut s = Self::zeros(q.len(), modes);
        for (n, k) in kernels.iter().enumerate() {
            for (i, v) in q.embed(k)?.into_iter().enumerate() {
                s.node_values[i * modes + n] = v;
            }
        }
        Ok(s)
    }

    /// Atom-only state carrying `v`.
    pub fn atom_only(nodes: usize, v: Vec<f64>) -> Self {
        let modes = v.len();
        Self {
            modes,
            atom_value: v,
            node_values: vec![0.0; nodes * modes],
        }
    }

    pub fn nodes(&self) -> usize {
        if self.modes == 0 {
            0
        } else {
            self.node_values.len() / self.modes
        }
    }

    #[inline]
    pub fn at(&self, i: usize, n: usize) -> f64 {
        self.node_values[i * self.modes + n]
    }

    fn check(&self, q: &QuadratureRule) -> Result<()> {
        if self.atom_value.len() != self.modes || self.node_values.len() != q.len() * self.modes {
            return Err(invalid("state", self.node_values.len() as f64, "shape does not match the rule"));
        }
        Ok(())
    }

    /// `S(t) y (x) = e^{-x t} y(x)`; the atom value is unchanged.
    pub fn apply_semigroup(&self, q: &QuadratureRule, t: f64) -> Result<Self> {
        self.check(q)?;
        if !(t >= 0.0) {
            return Err(invalid("t", t, "must be nonnegative"));
        }
        let mut out = self.clone();
        for (i, x) in q.nodes.iter().enumerate() {
            let f = (-x * t).exp();
            for v in &mut out.node_values[i * self.modes..(i + 1) * self.modes] {
                *v *= f;
            }
        }
        Ok(out)
    }

    /// `Xi y = atom_mass y(0) + sum_i w_i y(x_i)` per mode.
    pub fn project(&self, q: &QuadratureRule) -> Result<Vec<f64>> {
        self.check(q)?;
        let mut out: Vec<f64> = self.atom_value.iter().map(|a| q.atom_mass * a).collect();
        for (i, w) in q.weights.iter().enumerate() {
            for (n, o) in out.iter_mut().enumerate() {
                *o += w * self.node_values[i * self.modes + n];
            }
        }
        Ok(out)
    }

    /// `S_inf y = y(0) 1_{0}` if `mu({0}) > 0`, else 0.
    pub fn s_infinity(&self, q: &QuadratureRule) -> Self {
        let mut out = Self::zeros(self.nodes(), self.modes);
        if q.atom_mass > 0.0 {
            out.atom_value.clone_from(&self.atom_value);
        }
        out
    }

    /// `(atom_mass |y(0)|^2 + sum_i w_i |y(x_i)|^2 w(x_i))^{1/2}`.
    pub fn lift_norm(&self, q: &QuadratureRule, w: &WeightParams) -> Result<f64> {
        self.check(q)?;
        let mut s = q.atom_mass * self.atom_value.iter().map(|a| a * a).sum::<f64>();
        for (i, (x, wi)) in q.nodes.iter().zip(&q.weights).enumerate() {
            let row: f64 = self.node_values[i * self.modes..(i + 1) * self.modes]
                .iter()
                .map(|v| v * v)
                .sum();
            s += wi * row * w.eval(*x);
        }
        Ok(s.sqrt())
    }

    /// `G(t) = Xi S(t) y`.
    pub fn g_at(&self, q: &QuadratureRule, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(invalid("t", t, "must be positive"));
        }
        self.apply_semigroup(q, t)?.project(q)
    }

    /// Explicit bound `|G(t)| <= ||S(t) y||_w xi_margin(w)`.
    pub fn g_bound(&self, q: &QuadratureRule, t: f64, w: &WeightParams) -> Result<f64> {
        Ok(self.apply_semigroup(q, t)?.lift_norm(q, w)? * q.xi_margin(w))
    }

    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        for (a, b) in self.atom_value.iter_mut().zip(&other.atom_value) {
            *a += c * b;
        }
        for (a, b) in self.node_values.iter_mut().zip(&other.node_values) {
            *a += c * b;
        }
    }
}

pub fn apply_semigroup(s: &LiftStateLaplace, q: &QuadratureRule, t: f64) -> Result<LiftStateLaplace> {
    s.apply_semigroup(q, t)
}

pub fn project(s: &LiftStateLaplace, q: &QuadratureRule) -> Result<Vec<f64>> {
    s.project(q)
}

pub fn s_infinity(s: &LiftStateLaplace, q: &QuadratureRule) -> LiftStateLaplace {
    s.s_infinity(q)
}

pub fn lift_norm(s: &LiftStateLaplace, q: &QuadratureRule, w: &WeightParams) -> Result<f64> {
    s.lift_norm(q, w)
}

pub fn g_from_state(s: &LiftStateLaplace, q: &QuadratureRule, t: f64) -> Result<Vec<f64>> {
    s.g_at(q, t)
}

/// Which norm bound is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `||S(t)||_{L(H_{d,eta'}, H_{d,eta})} <= max{m0, 1, C(eta-eta')}^{1/2} (1 + t^{-(eta-eta')/2})`.
    Regularization,
    /// `||S(t) - S_inf||_{L(H_{d,eta}, H_{d',eta})} <= max{1, C(d-d')}^{1/2} (1 v t)^{-(d-d')/2}`.
    Ergodicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub t: f64,
    pub bound: f64,
    pub max_ratio: f64,
    /// Exact operator norm of the discretized (diagonal) operator.
    pub operator_norm: f64,
    pub trials: usize,
    pub violations: usize,
}

fn bound_setup(kind: BoundKind, w_from: &WeightParams, w_to: &WeightParams, atom_mass: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", t, "must be positive"));
    }
    match kind {
        BoundKind::Regularization => {
            let r = w_to.eta - w_from.eta;
            if !(r > 0.0) || w_to.delta != w_from.delta {
                return Err(invalid("eta", w_to.eta, "need eta_to > eta_from and equal delta"));
            }
            let c = atom_mass.max(1.0).max(elementary_bound_constant(r)?);
            Ok(c.sqrt() * (1.0 + t.powf(-r / 2.0)))
        }
        BoundKind::Ergodicity => {
            let r = w_from.delta - w_to.delta;
            if !(r > 0.0) || w_to.eta != w_from.eta {
                return Err(invalid("delta", w_to.delta, "need delta' < delta and equal eta"));
            }
            let c = elementary_bound_constant(r)?.max(1.0);
            Ok(c.sqrt() * t.max(1.0).powf(-r / 2.0))
        }
    }
}

/// Exact norm of the diagonal operator `S(t)` (or `S(t) - S_inf`) between the two weighted spaces.
pub fn semigroup_operator_norm(
    q: &QuadratureRule,
    kind: BoundKind,
    w_from: &WeightParams,
    w_to: &WeightParams,
    t: f64,
) -> f64 {
    let mut m: f64 = match kind {
        BoundKind::Regularization if q.atom_mass > 0.0 => 1.0,
        _ => 0.0,
    };
    for x in &q.nodes {
        let r = (-x * t).exp() * (w_to.eval(*x) / w_from.eval(*x)).sqrt();
        m = m.max(r);
    }
    m
}

/// Random-state check of the semigroup norm bounds.
pub fn semigroup_bound_check(
    q: &QuadratureRule,
    kind: BoundKind,
    w_from: &WeightParams,
    w_to: &WeightParams,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundReport> {
    let bound = bound_setup(kind, w_from, w_to, q.atom_mass, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for trial in 0..trials {
        let mut s = LiftStateLaplace::zeros(q.len(), 1);
        s.atom_value[0] = rng.gen_range(-1.0..1.0);
        // Alternate between diffuse states and states concentrated on a few nodes.
        let sparse = trial % 2 == 1;
        for v in s.node_values.iter_mut() {
            if !sparse || rng.gen_bool(0.05) {
                *v = rng.gen_range(-1.0..1.0) * (rng.gen_range(-6.0..6.0f64)).exp();
            }
        }
        let num = match kind {
            BoundKind::Regularization => s.apply_semigroup(q, t)?.lift_norm(q, w_to)?,
            BoundKind::Ergodicity => {
                let mut d = s.apply_semigroup(q, t)?;
                d.add_scaled(&s.s_infinity(q), -1.0);
                d.lift_norm(q, w_to)?
            }
        };
        let den = s.lift_norm(q, w_from)?;
        if den > 0.0 {
            let r = num / den;
            max_ratio = max_ratio.max(r);
            if r > bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    Ok(BoundReport {
        kind,
        t,
        bound,
        max_ratio,
        operator_norm: semigroup_operator_norm(q, kind, w_from, w_to, t),
        trials,
        violations,
    })
}
