//! INI-style run configuration: sections `[model]`, `[lift]`, `[sim]`,
//! `[experiment]`, `[output]` of `key = value` lines. Unknown and duplicate keys
//! are rejected with line numbers; values are validated against the owning
//! module's preconditions at load time.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conditions::{frac_hjm_report, trace_class_report, ConditionReport, FracHjmParams, TraceClassParams};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SpectralOperator};
use crate::laplace_lift::{build_quadrature, QuadratureRule};
use crate::shift_lift::ShiftGrid;
use crate::sim::{Diffusion, Drift, Forcing, LiftData, ModelSpec, Scheme, SimConfig};
use crate::special::WeightParams;
use crate::stats::{Observable, Reference, RunSpec};

/// Allowed keys per section.
pub const KEYS: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "thetas",
            "noise_eigs",
            "gamma",
            "kernel",
            "alpha",
            "beta",
            "damping",
            "time_shift",
            "sigma_alpha",
            "sigma_beta",
            "drift",
            "drift_b",
            "drift_b0",
            "drift_c",
            "diffusion",
            "sigma0",
            "s0",
            "s1",
            "forcing",
            "forcing_v",
            "forcing_atom",
            "forcing_coef",
        ],
    ),
    (
        "lift",
        &[
            "kind",
            "nodes",
            "x_min",
            "x_max",
            "atom_mass",
            "delta",
            "eta",
            "node_points",
            "node_weights",
            "h",
        ],
    ),
    ("sim", &["scheme", "dt", "t_end", "paths", "seed", "burn_in"]),
    (
        "experiment",
        &[
            "observable",
            "mode",
            "t_grid",
            "pi",
            "reference_t_factor",
            "reference_path_factor",
            "reference_seed",
            "theorem",
            "p",
            "eps0",
            "eps1",
            "gamma_holder",
            "c_b_lip",
            "c_b_lin",
            "c_sigma_lip",
            "c_sigma_lin",
            "override",
            "table_t",
            "rho_scale",
            "resolvent_dt",
            "horizon",
        ],
    ),
    ("output", &["format", "out_dir"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped sections.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut errors = Vec::new();
        let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if KEYS.iter().any(|(s, _)| *s == name) {
                    section = Some(name.to_string());
                } else {
                    errors.push(format!("line {line}: unknown section [{name}]"));
                    section = None;
                }
                continue;
            }
            let Some((k, v)) = l.split_once('=') else {
                errors.push(format!("line {line}: expected `key = value`"));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            let Some(sec) = &section else {
                errors.push(format!("line {line}: key `{k}` outside a known section"));
                continue;
            };
            let allowed = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&k) {
                errors.push(format!("line {line}: unknown key `{k}` in [{sec}]"));
                continue;
            }
            let key = (sec.clone(), k.to_string());
            if let Some(prev) = entries.get(&key) {
                errors.push(format!("line {line}: duplicate key `{k}` in [{sec}] (first set on line {})", prev.line));
                continue;
            }
            entries.insert(
                key,
                Entry {
                    value: v.to_string(),
                    line,
                },
            );
        }
        if errors.is_empty() {
            Ok(Self { entries })
        } else {
            Err(Error::ConfigErrors(errors))
        }
    }

    /// Sets or replaces a value, as from a command-line override.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.entries.insert(
            (section.into(), key.into()),
            Entry {
                value: value.into(),
                line: 0,
            },
        );
    }

    /// Canonical `section.key = value` listing, stable across formatting;
    /// the output directory is left out since it does not affect results.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .filter(|((s, k), _)| !(s == "output" && k == "out_dir"))
            .map(|((s, k), e)| format!("{s}.{k} = {}\n", e.value))
            .collect()
    }

    /// SHA-256 of the canonical listing.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Typed reads that collect errors instead of stopping at the first.
struct Reader<'a> {
    raw: &'a RawConfig,
    errors: Vec<String>,
}

fn where_(e: &Entry, sec: &str, key: &str) -> String {
    if e.line > 0 {
        format!("line {}: {sec}.{key}", e.line)
    } else {
        format!("{sec}.{key} (command line)")
    }
}

impl<'a> Reader<'a> {
    fn entry(&self, sec: &str, key: &str) -> Option<&'a Entry> {
        self.raw.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn has(&self, sec: &str, key: &str) -> bool {
        self.entry(sec, key).is_some()
    }

    fn get<T: FromStr>(&mut self, sec: &str, key: &str) -> Option<T> {
        let e = self.entry(sec, key)?;
        match e.value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{}: cannot parse `{}` as {}", where_(e, sec, key), e.value, std::any::type_name::<T>()));
                None
            }
        }
    }

    fn or<T: FromStr>(&mut self, sec: &str, key: &str, default: T) -> T {
        self.get(sec, key).unwrap_or(default)
    }

    fn list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let e = self.entry(sec, key)?;
        let parsed: std::result::Result<Vec<f64>, _> = e.value.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                self.errors.push(format!("{}: expected a comma-separated list of numbers, got `{}`", where_(e, sec, key), e.value));
                None
            }
        }
    }

    fn choice<'c>(&mut self, sec: &str, key: &str, options: &[&'c str], default: &'c str) -> &'c str {
        match self.entry(sec, key) {
            None => default,
            Some(e) => match options.iter().find(|o| **o == e.value) {
                Some(o) => o,
                None => {
                    self.errors.push(format!("{}: `{}` is not one of {}", where_(e, sec, key), e.value, options.join(", ")));
                    default
                }
            },
        }
    }

    fn fail(&mut self, sec: &str, key: &str, msg: impl std::fmt::Display) {
        let at = match self.entry(sec, key) {
            Some(e) => where_(e, sec, key),
            None => format!("{sec}.{key}"),
        };
        self.errors.push(format!("{at}: {msg}"));
    }

    fn require(&mut self, sec: &str, key: &str, what: &str) {
        if !self.has(sec, key) {
            self.errors.push(format!("{sec}.{key}: required {what}"));
        }
    }
}

/// Discretization of the lift used by the lifted schemes and the kernel tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LiftConfig {
    None,
    Laplace {
        nodes: usize,
        x_min: f64,
        x_max: f64,
        atom_mass: f64,
        delta: f64,
        eta: f64,
        /// Explicit discrete measure instead of the geometric grid.
        discrete: Option<(Vec<f64>, Vec<f64>)>,
    },
    Shift {
        h: f64,
        x_max: f64,
        delta: f64,
        eta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    TraceClass,
    FracHjm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionConfig {
    pub theorem: Theorem,
    pub p_exp: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub gamma_holder: f64,
    pub c_b_lip: f64,
    pub c_b_lin: f64,
    pub c_sigma_lip: f64,
    pub c_sigma_lin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub observable: Observable,
    pub t_grid: Vec<f64>,
    pub reference: Reference,
    pub conditions: Option<ConditionConfig>,
    /// Run experiments even when the conditions fail.
    pub override_conditions: bool,
    pub table_t: Vec<f64>,
    pub rho_scale: f64,
    pub resolvent_dt: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub format: Format,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub lift: LiftConfig,
    pub sim: SimConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
    pub raw: RawConfig,
}

fn kernel_of(r: &mut Reader, alpha_key: &str, beta_key: &str, alpha0: Option<f64>, beta0: Option<f64>) -> KernelSpec {
    let kind = r.choice("model", "kernel", &["resolvent_fractional", "fractional_rl", "log_kernel"], "resolvent_fractional");
    let alpha = r.get::<f64>("model", alpha_key).or(alpha0).unwrap_or(1.0);
    let beta = r.get::<f64>("model", beta_key).or(beta0).unwrap_or(alpha);
    let mut k = match kind {
        "fractional_rl" => KernelSpec::fractional(alpha),
        "log_kernel" => KernelSpec::LogKernel,
        _ => KernelSpec::resolvent(alpha, beta, 1.0),
    };
    if let Some(l) = r.get::<f64>("model", "damping") {
        k = k.damped(l);
    }
    if let Some(e) = r.get::<f64>("model", "time_shift") {
        k = k.time_shifted(e);
    }
    k
}

fn model(r: &mut Reader) -> ModelSpec {
    let thetas = r.list("model", "thetas").unwrap_or_else(|| vec![1.0]);
    let n = thetas.len();
    let spectral = if let Some(g) = r.get::<f64>("model", "gamma") {
        if r.has("model", "noise_eigs") {
            r.fail("model", "noise_eigs", "set either noise_eigs or gamma, not both");
        }
        SpectralOperator::with_gamma(thetas.clone(), g)
    } else {
        let eigs = r.list("model", "noise_eigs").unwrap_or_else(|| vec![1.0; n]);
        SpectralOperator::new(thetas.clone(), eigs)
    };
    let spectral = match spectral {
        Ok(s) => s,
        Err(e) => {
            r.fail("model", "thetas", e);
            SpectralOperator {
                thetas: vec![1.0; n],
                noise_eigs: vec![1.0; n],
                gamma_exp: None,
            }
        }
    };
    let kernel_b = kernel_of(r, "alpha", "beta", None, None);
    let (a0, b0) = match kernel_b.base() {
        KernelSpec::ResolventFractional { alpha, beta, .. } => (Some(*alpha), Some(*beta)),
        _ => (None, None),
    };
    let kernel_sigma = kernel_of(r, "sigma_alpha", "sigma_beta", a0, b0);
    let zeros = vec![0.0; n];
    let drift = match r.choice("model", "drift", &["zero", "affine", "tanh"], "zero") {
        "affine" => Drift::Affine {
            b: r.list("model", "drift_b").unwrap_or_else(|| vec![0.0; n * n]),
            b0: r.list("model", "drift_b0").unwrap_or_else(|| zeros.clone()),
        },
        "tanh" => {
            r.require("model", "drift_c", "for drift = tanh");
            Drift::Tanh {
                c: r.list("model", "drift_c").unwrap_or_else(|| zeros.clone()),
            }
        }
        _ => Drift::Zero,
    };
    let diffusion = match r.choice("model", "diffusion", &["additive", "affine"], "additive") {
        "affine" => Diffusion::Affine {
            s0: r.list("model", "s0").unwrap_or_else(|| zeros.clone()),
            s1: r.list("model", "s1").unwrap_or_else(|| zeros.clone()),
        },
        _ => Diffusion::Additive {
            sigma0: r.list("model", "sigma0").unwrap_or_else(|| vec![1.0; n]),
        },
    };
    let forcing = match r.choice("model", "forcing", &["zero", "constant", "lift_state"], "zero") {
        "constant" => {
            r.require("model", "forcing_v", "for forcing = constant");
            Forcing::Constant {
                v: r.list("model", "forcing_v").unwrap_or_else(|| zeros.clone()),
            }
        }
        "lift_state" => Forcing::LiftState {
            atom: r.list("model", "forcing_atom").unwrap_or_else(|| zeros.clone()),
            kernel: kernel_b.clone(),
            coef: r.list("model", "forcing_coef").unwrap_or_else(|| zeros.clone()),
        },
        _ => Forcing::Zero,
    };
    let m = ModelSpec {
        spectral,
        kernel_b,
        kernel_sigma,
        drift,
        diffusion,
        forcing,
    };
    if let Err(e) = m.validate() {
        r.fail("model", "alpha", e);
    }
    m
}

fn lift(r: &mut Reader, m: &ModelSpec) -> LiftConfig {
    match r.choice("lift", "kind", &["none", "laplace", "shift"], "none") {
        "laplace" => {
            for (k, key) in [(&m.kernel_b, "alpha"), (&m.kernel_sigma, "sigma_alpha")] {
                if let Err(e) = k.validate_laplace() {
                    r.fail("model", key, format!("{e} (required by lift.kind = laplace)"));
                }
            }
            let discrete = match (r.list("lift", "node_points"), r.list("lift", "node_weights")) {
                (Some(x), Some(w)) => Some((x, w)),
                (None, None) => None,
                _ => {
                    r.fail("lift", "node_points", "node_points and node_weights go together");
                    None
                }
            };
            LiftConfig::Laplace {
                nodes: r.or("lift", "nodes", 200usize),
                x_min: r.or("lift", "x_min", 1e-4),
                x_max: r.or("lift", "x_max", 1e6),
                atom_mass: r.or("lift", "atom_mass", 0.0),
                delta: r.or("lift", "delta", 0.0),
                eta: r.or("lift", "eta", 0.0),
                discrete,
            }
        }
        "shift" => LiftConfig::Shift {
            h: r.or("lift", "h", 1e-3),
            x_max: r.or("lift", "x_max", 12.0),
            delta: r.or("lift", "delta", 2.0),
            eta: r.or("lift", "eta", 0.5),
        },
        _ => LiftConfig::None,
    }
}

impl LiftConfig {
    /// Builds the discretization; Laplace rules carry the point masses of every mode kernel.
    pub fn build(&self, m: &ModelSpec) -> Result<LiftData> {
        Ok(match self {
            LiftConfig::None => LiftData::None,
            LiftConfig::Laplace {
                nodes,
                x_min,
                x_max,
                atom_mass,
                delta,
                eta,
                discrete,
            } => {
                let w = WeightParams::laplace(*delta, *eta).with_atom(*atom_mass);
                let q = match discrete {
                    Some((x, wt)) => QuadratureRule::discrete(w, x.clone(), wt.clone())?,
                    None => {
                        let mut ks = m.kernels_b()?;
                        ks.extend(m.kernels_sigma()?);
                        build_quadrature(w, *x_min, *x_max, *nodes)?.with_kernel_atoms(&ks)?
                    }
                };
                LiftData::Laplace(q)
            }
            LiftConfig::Shift { h, x_max, delta, eta } => LiftData::Shift(ShiftGrid::new(*h, *x_max, WeightParams::shift(*delta, *eta))?),
        })
    }
}

fn sim(r: &mut Reader) -> SimConfig {
    let scheme = match r.choice("sim", "scheme", &["direct", "laplace_lift", "shift_lift"], "direct") {
        "laplace_lift" => Scheme::LaplaceLift,
        "shift_lift" => Scheme::ShiftLift,
        _ => Scheme::Direct,
    };
    let c = SimConfig::new(
        r.or("sim", "dt", 0.01),
        r.or("sim", "t_end", 10.0),
        r.or("sim", "paths", 100usize),
        r.or("sim", "seed", 0u64),
        scheme,
    )
    .with_burn_in(r.or("sim", "burn_in", 0.0));
    if let Err(e) = c.validate() {
        r.fail("sim", "dt", e);
    }
    c
}

fn experiment(r: &mut Reader, m: &ModelSpec) -> ExperimentConfig {
    let mode = r.or("experiment", "mode", 0usize);
    if mode >= m.modes() {
        r.fail("experiment", "mode", format!("mode {mode} out of range for {} modes", m.modes()));
    }
    let observable = match r.choice("experiment", "observable", &["identity", "square", "tanh"], "identity") {
        "square" => Observable::Square(mode),
        "tanh" => Observable::Tanh(mode),
        _ => Observable::Identity(mode),
    };
    let reference = match r.get::<f64>("experiment", "pi") {
        Some(value) => Reference::Analytic { value },
        None => Reference::Simulated {
            t_factor: r.or("experiment", "reference_t_factor", 10.0),
            path_factor: r.or("experiment", "reference_path_factor", 10usize),
            seed: r.or("experiment", "reference_seed", 0x5EED_u64),
        },
    };
    let lip = m.lipschitz();
    let conditions = match r.choice("experiment", "theorem", &["none", "trace_class", "frac_hjm"], "none") {
        "none" => None,
        t => {
            for k in ["p", "eps0", "eps1"] {
                r.require("experiment", k, "for the condition check");
            }
            Some(ConditionConfig {
                theorem: if t == "trace_class" { Theorem::TraceClass } else { Theorem::FracHjm },
                p_exp: r.or("experiment", "p", f64::NAN),
                eps0: r.or("experiment", "eps0", f64::NAN),
                eps1: r.or("experiment", "eps1", f64::NAN),
                gamma_holder: r.or("experiment", "gamma_holder", 1.0),
                c_b_lip: r.or("experiment", "c_b_lip", lip.b_lip),
                c_b_lin: r.or("experiment", "c_b_lin", lip.b_lin),
                c_sigma_lip: r.or("experiment", "c_sigma_lip", lip.sigma_lip),
                c_sigma_lin: r.or("experiment", "c_sigma_lin", lip.sigma_lin),
            })
        }
    };
    let t_grid = r.list("experiment", "t_grid").unwrap_or_else(|| vec![25.0, 50.0, 100.0, 200.0, 400.0]);
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        r.fail("experiment", "t_grid", "times must be positive");
    }
    ExperimentConfig {
        observable,
        t_grid,
        reference,
        conditions,
        override_conditions: r.or("experiment", "override", false),
        table_t: r.list("experiment", "table_t").unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0]),
        rho_scale: r.or("experiment", "rho_scale", 0.5),
        resolvent_dt: r.or("experiment", "resolvent_dt", 1e-2),
        horizon: r.or("experiment", "horizon", 50.0),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let mut r = Reader {
            raw: &raw,
            errors: Vec::new(),
        };
        let model = model(&mut r);
        let lift = lift(&mut r, &model);
        let sim = sim(&mut r);
        let experiment = experiment(&mut r, &model);
        let format = match r.choice("output", "format", &["csv", "json"], "csv") {
            "json" => Format::Json,
            _ => Format::Csv,
        };
        let output = OutputConfig {
            format,
            out_dir: PathBuf::from(r.or("output", "out_dir", "out".to_string())),
        };
        match (sim.scheme, &lift) {
            (Scheme::LaplaceLift, LiftConfig::Laplace { .. }) | (Scheme::ShiftLift, LiftConfig::Shift { .. }) | (Scheme::Direct, _) => {}
            (s, _) => r.fail("lift", "kind", format!("scheme {s:?} needs the matching lift kind")),
        }
        let mut errors: Vec<String> = Vec::new();
        for e in r.errors {
            if !errors.contains(&e) {
                errors.push(e);
            }
        }
        if errors.is_empty() {
            match lift.build(&model) {
                Ok(LiftData::Shift(g)) if sim.scheme == Scheme::ShiftLift => {
                    if let Err(e) = g.steps_for(sim.dt) {
                        errors.push(format!("sim.dt: {e}"));
                    }
                }
                Ok(_) => {}
                Err(e) => errors.push(format!("lift: {e}")),
            }
        }
        if !errors.is_empty() {
            return Err(Error::ConfigErrors(errors));
        }
        Ok(Self {
            model,
            lift,
            sim,
            experiment,
            output,
            raw,
        })
    }

    pub fn lift_data(&self) -> Result<LiftData> {
        self.lift.build(&self.model)
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            dt: self.sim.dt,
            paths: self.sim.paths,
            seed: self.sim.seed,
            scheme: self.sim.scheme,
            burn_in: self.sim.burn_in,
        }
    }

    /// Condition report of the configured theorem, if any.
    pub fn condition_report(&self) -> Result<Option<ConditionReport>> {
        let Some(c) = &self.experiment.conditions else {
            return Ok(None);
        };
        let (alpha, beta) = match self.model.kernel_b.base() {
            KernelSpec::ResolventFractional { alpha, beta, .. } => (*alpha, *beta),
            _ => {
                return Err(Error::Insufficient(
                    "condition checks need a resolvent_fractional kernel".into(),
                ))
            }
        };
        let thetas = self.model.spectral.thetas.clone();
        Ok(Some(match c.theorem {
            Theorem::TraceClass => trace_class_report(
                &TraceClassParams {
                    alpha,
                    beta,
                    eps0: c.eps0,
                    eps1: c.eps1,
                    theta1: thetas.iter().cloned().fold(f64::INFINITY, f64::min),
                    p_exp: c.p_exp,
                    b_zero: self.model.drift.is_zero(),
                },
                c.c_b_lip,
                c.c_b_lin,
                c.gamma_holder,
            )?,
            Theorem::FracHjm => {
                let gamma_exp = self.model.spectral.gamma_exp.ok_or_else(|| {
                    Error::Insufficient("frac_hjm checks need model.gamma (noise smoothness)".into())
                })?;
                frac_hjm_report(
                    &FracHjmParams {
                        alpha,
                        beta,
                        eps0: c.eps0,
                        eps1: c.eps1,
                        gamma_exp,
                        thetas,
                        p_exp: c.p_exp,
                    },
                    c.c_sigma_lip,
                    c.c_sigma_lin,
                    c.gamma_holder,
                )?
            }
        }))
    }
}
