//! Command-line front end: subcommand dispatch, CSV/JSON outputs written
//! atomically, and a reproducibility manifest per run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RawConfig, RunConfig};
use crate::error::{Error, Result};
use crate::kernels::{kernel_value, reconstruct_kernel, resolvent_density, KernelSpec};
use crate::laplace_lift::build_quadrature;
use crate::resolvent::{solve_resolvent, SampledKernel};
use crate::sim::{simulate, LiftData};
use crate::special::WeightParams;
use crate::stats::{clt_experiment, lln_experiment};

/// Exit status when a condition check fails.
pub const EXIT_CONDITIONS: i32 = 2;
/// Exit status on any error.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "voltlift", version, about = "Markovian lifts of stochastic Volterra equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// INI run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.out_dir`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed (overrides `sim.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to `VOLTLIFT_THREADS`, then to the number of logical cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Table format (overrides `output.format`).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tabulate kernel values, Bernstein densities and quadrature reconstructions.
    Kernels,
    /// Evaluate the contraction and moment conditions of the configured theorem.
    Check,
    /// Solve the resolvent of `rho_scale * E_b`.
    Resolvent,
    /// Simulate paths with the configured scheme.
    Simulate,
    /// Mean-square error of time averages with a rate fit.
    Lln,
    /// Normalized fluctuations of time averages.
    Clt,
    /// Bundle the JSON summaries of the output directory.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernels => "kernels",
            Command::Check => "check",
            Command::Resolvent => "resolvent",
            Command::Simulate => "simulate",
            Command::Lln => "lln",
            Command::Clt => "clt",
            Command::Report => "report",
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Comma-separated table with a header row and `\n` line endings.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct Outputs {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Outputs {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.put(name, s.as_bytes())
    }
}

/// Number of worker threads from the flag, then `VOLTLIFT_THREADS`, else the default pool.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("VOLTLIFT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Parse(format!("VOLTLIFT_THREADS = `{v}` is not a thread count"))),
        Err(_) => Ok(None),
    }
}

/// Loads the configuration with command-line overrides applied.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Parse(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut raw = RawConfig::parse(&text)?;
    if let Some(s) = cli.seed {
        raw.set("sim", "seed", s.to_string());
    }
    if let Some(d) = &cli.out_dir {
        raw.set("output", "out_dir", d.to_string_lossy());
    }
    if let Some(f) = cli.format {
        raw.set("output", "format", if f == Format::Json { "json" } else { "csv" });
    }
    RunConfig::from_raw(raw)
}

/// Runs the command line and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let start = Instant::now();
    let cfg = load_config(cli)?;
    let mut out = Outputs {
        dir: cfg.output.out_dir.clone(),
        written: Vec::new(),
    };
    let code = match cli.command {
        Command::Kernels => kernels(&cfg, &mut out)?,
        Command::Check => check(&cfg, &mut out)?,
        Command::Resolvent => resolvent(&cfg, &mut out)?,
        Command::Simulate => simulate_cmd(&cfg, &mut out)?,
        Command::Lln => lln(&cfg, &mut out)?,
        Command::Clt => clt(&cfg, &mut out)?,
        Command::Report => report(&mut out)?,
    };
    let outputs: Vec<Value> = out.written.iter().map(|(f, h)| json!({"file": f, "sha256": h})).collect();
    let manifest = json!({
        "tool": "voltlift",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config_hash": cfg.raw.hash(),
        "seed": cfg.sim.seed,
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "exit_status": code,
        "outputs": outputs,
    });
    out.json(&format!("{}_manifest.json", cli.command.name()), &manifest)?;
    Ok(code)
}

/// Condition gate for experiments: `Some(exit)` when they must not run.
fn gate(cfg: &RunConfig, out: &mut Outputs) -> Result<(Option<Value>, Option<i32>)> {
    let Some(rep) = cfg.condition_report()? else {
        return Ok((None, None));
    };
    let v = serde_json::to_value(&rep)?;
    if rep.passes() {
        return Ok((Some(v), None));
    }
    if cfg.experiment.override_conditions {
        eprintln!("warning: {} conditions fail; running anyway (experiment.override = true)", rep.theorem);
        return Ok((Some(v), None));
    }
    eprintln!("{} conditions fail; set experiment.override = true to run anyway", rep.theorem);
    out.json("check.json", &rep)?;
    Ok((Some(v), Some(EXIT_CONDITIONS)))
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn kernels(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let mode = cfg.experiment.observable.mode();
    let theta = cfg.model.spectral.thetas[mode];
    let spec = cfg.model.kernel_b.with_theta(theta);
    let quad = match (&cfg.lift_data()?, spec.validate_laplace()) {
        (LiftData::Laplace(q), Ok(())) => Some(q.clone()),
        (_, Ok(())) => Some(build_quadrature(WeightParams::laplace(0.0, 0.0), 1e-4, 1e6, 200)?.with_kernel_atoms(&[spec.compile()?])?),
        _ => None,
    };
    let mut rows = Vec::new();
    for t in &cfg.experiment.table_t {
        let k = kernel_value(&spec, *t)?;
        let mut row = vec![f(*t), f(k)];
        if let Some(q) = &quad {
            let rec = reconstruct_kernel(&spec, q, *t)?;
            row.push(f(rec));
            row.push(f(((rec - k) / k).abs()));
        }
        rows.push(row);
    }
    let header: &[&str] = if quad.is_some() {
        &["t", "kernel", "reconstruction", "rel_err"]
    } else {
        &["t", "kernel"]
    };
    let mut dens = Vec::new();
    if let (Some(_), KernelSpec::ResolventFractional { alpha, beta, .. }) = (&quad, spec.base()) {
        if *alpha < 1.0 && spec == *spec.base() {
            for i in 0..=40 {
                let x = 10f64.powf(-4.0 + 0.25 * i as f64);
                dens.push(vec![f(x), f(resolvent_density(*alpha, *beta, theta, x))]);
            }
        }
    }
    match cfg.output.format {
        Format::Csv => {
            out.put("kernels.csv", csv_table(header, rows).as_bytes())?;
            if !dens.is_empty() {
                out.put("density.csv", csv_table(&["x", "density"], dens).as_bytes())?;
            }
        }
        Format::Json => {
            let to_obj = |h: &[&str], rows: &[Vec<String>]| -> Vec<Value> {
                rows.iter()
                    .map(|r| Value::Object(h.iter().zip(r).map(|(k, v)| (k.to_string(), json!(v.parse::<f64>().ok()))).collect()))
                    .collect()
            };
            out.json(
                "kernels.json",
                &json!({"kernel": spec, "table": to_obj(header, &rows), "density": to_obj(&["x", "density"], &dens)}),
            )?;
        }
    }
    Ok(0)
}

fn check(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let rep = cfg
        .condition_report()?
        .ok_or_else(|| Error::Insufficient("check needs experiment.theorem".into()))?;
    out.json("check.json", &json!({"report": rep, "passes": rep.passes()}))?;
    Ok(if rep.passes() { 0 } else { EXIT_CONDITIONS })
}

fn resolvent(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let e = &cfg.experiment;
    let spec = cfg.model.kernel_b.with_theta(cfg.model.spectral.thetas[e.observable.mode()]);
    let k = spec.compile()?;
    let steps = (e.horizon / e.resolvent_dt).round() as usize;
    let rho = SampledKernel::from_fn(|t| e.rho_scale * k.value_unchecked(t), e.resolvent_dt, steps)?;
    let r = solve_resolvent(&rho)?;
    let predicted = rho.l1 / (1.0 - rho.l1);
    let summary = json!({
        "l1_rho": rho.l1,
        "l1_r": r.l1,
        "l1_identity_residual": (r.l1 - predicted).abs(),
        "dt": e.resolvent_dt,
        "horizon": e.horizon,
    });
    match cfg.output.format {
        Format::Csv => {
            let rows = (0..steps).map(|i| vec![f(r.time(i)), f(rho.value_at(r.time(i))), f(r.samples[i])]);
            out.put("resolvent.csv", csv_table(&["t", "rho", "r"], rows).as_bytes())?;
        }
        Format::Json => out.json("resolvent.json", &json!({"rho": rho, "r": r}))?,
    }
    out.json("resolvent_summary.json", &summary)?;
    Ok(0)
}

fn simulate_cmd(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let lift = cfg.lift_data()?;
    let p = simulate(&cfg.model, &lift, &cfg.sim)?;
    match cfg.output.format {
        Format::Csv => {
            let mut s = String::from("path,t,mode,u\n");
            for (i, u) in p.u.iter().enumerate() {
                for k in 0..=p.steps {
                    let t = k as f64 * p.dt;
                    for n in 0..p.modes {
                        let _ = writeln!(s, "{i},{t},{n},{}", u[k * p.modes + n]);
                    }
                }
            }
            out.put("simulate.csv", s.as_bytes())?;
        }
        Format::Json => out.json("simulate.json", &p)?,
    }
    out.json(
        "simulate_summary.json",
        &json!({"dt": cfg.sim.dt, "t_end": cfg.sim.t_end, "paths": cfg.sim.paths, "seed": cfg.sim.seed, "scheme": cfg.sim.scheme, "burn_in": cfg.sim.burn_in, "modes": p.modes}),
    )?;
    Ok(0)
}

fn lln(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let (conditions, stop) = gate(cfg, out)?;
    if let Some(code) = stop {
        return Ok(code);
    }
    let lift = cfg.lift_data()?;
    let e = &cfg.experiment;
    let r = lln_experiment(&cfg.model, &lift, e.observable, &e.t_grid, &cfg.run_spec(), e.reference)?;
    match cfg.output.format {
        Format::Csv => {
            let rows = r.result.rows.iter().map(|row| vec![f(row.x), f(row.y), f(row.y_err)]);
            out.put("lln.csv", csv_table(&["T", "mse", "mse_stderr"], rows).as_bytes())?;
        }
        Format::Json => out.json("lln.json", &r.result.rows)?,
    }
    let rate = conditions.as_ref().and_then(|c| c.get("lln_rate")).and_then(Value::as_f64);
    let consistent = rate.map(|q| -r.result.fitted_slope >= q - 0.25);
    out.json(
        "lln_summary.json",
        &json!({
            "label": r.result.label,
            "fitted_slope": r.result.fitted_slope,
            "fitted_slope_ci": r.result.fitted_slope_ci,
            "pi_ref": r.pi_ref,
            "strictly_decreasing": r.strictly_decreasing,
            "nonincreasing_within_2se": r.nonincreasing_within_2se,
            "lln_rate": rate,
            "rate_consistent": consistent,
            "conditions": conditions,
        }),
    )?;
    Ok(0)
}

fn clt(cfg: &RunConfig, out: &mut Outputs) -> Result<i32> {
    let (conditions, stop) = gate(cfg, out)?;
    if let Some(code) = stop {
        return Ok(code);
    }
    if let Some(false) = conditions.as_ref().and_then(|c| c.get("clt_ok")).and_then(Value::as_bool) {
        eprintln!("warning: the CLT rate condition does not hold for this configuration");
    }
    let lift = cfg.lift_data()?;
    let e = &cfg.experiment;
    let pi = match e.reference {
        crate::stats::Reference::Analytic { value } => Some(value),
        _ => None,
    };
    let r = clt_experiment(&cfg.model, &lift, e.observable, cfg.sim.t_end, &cfg.run_spec(), pi)?;
    match cfg.output.format {
        Format::Csv => {
            let rows = r.normalized.iter().enumerate().map(|(i, v)| vec![i.to_string(), f(*v)]);
            out.put("clt.csv", csv_table(&["sample_id", "normalized_deviation"], rows).as_bytes())?;
        }
        Format::Json => out.json("clt.json", &r.normalized)?,
    }
    out.json(
        "clt_summary.json",
        &json!({
            "pi_ref": r.pi_ref,
            "sigma_hat": r.sigma_hat,
            "sigma_hat_acov": r.sigma_hat_acov,
            "truncation_lag": r.truncation_lag,
            "mean": r.mean,
            "skewness": r.skewness,
            "excess_kurtosis": r.excess_kurtosis,
            "degenerate": r.degenerate,
            "conditions": conditions,
        }),
    )?;
    Ok(0)
}

fn report(out: &mut Outputs) -> Result<i32> {
    let mut bundle = serde_json::Map::new();
    if out.dir.is_dir() {
        let mut names: Vec<String> = fs::read_dir(&out.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".json") && !n.starts_with("report") && !n.starts_with('.'))
            .collect();
        names.sort();
        for n in names {
            let text = fs::read_to_string(out.dir.join(&n))?;
            bundle.insert(n.trim_end_matches(".json").to_string(), serde_json::from_str(&text)?);
        }
    }
    out.json("report.json", &Value::Object(bundle))?;
    Ok(0)
}
