use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use voltlift::cli::{csv_table, run, thread_count, Cli};
use voltlift::config::{Format, LiftConfig, RawConfig, RunConfig};
use voltlift::sim::Scheme;
use voltlift::Error;

const OU: &str = "\
[model]
thetas = 1.0
alpha = 1.0
sigma0 = 0.5

[sim]
dt = 0.05
t_end = 5
paths = 3
seed = 11
";

const OU_LIFT: &str = "\
[model]
alpha = 1.0
sigma0 = 0.5

[lift]
kind = laplace
node_points = 1.0
node_weights = 1.0

[sim]
scheme = laplace_lift
dt = 0.05
t_end = 10
paths = 120

[experiment]
t_grid = 5, 10, 20
pi = 0
";

const TRACE_CLASS: &str = "\
[model]
alpha = 0.75
beta = 0.75
drift = tanh
drift_c = -0.1

[experiment]
theorem = trace_class
p = 25
eps0 = 0.1
eps1 = 0.2
gamma_holder = 0.5
";

fn cli(dir: &Path, config: &str, args: &[&str]) -> i32 {
    let path = dir.join("run.ini");
    fs::write(&path, config).unwrap();
    let mut argv = vec!["voltlift", "--config", path.to_str().unwrap(), "--out-dir", dir.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(&Cli::parse_from(argv))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn minimal_config_parses_with_direct_scheme() {
    let c = RunConfig::parse(OU).unwrap();
    assert_eq!(c.sim.scheme, Scheme::Direct);
    assert_eq!(c.lift, LiftConfig::None);
    assert_eq!(c.output.format, Format::Csv);
    assert!(RunConfig::parse("").is_ok());
}

#[test]
fn laplace_lift_rejects_alpha_outside_unit_interval() {
    let err = RunConfig::parse("[model]\nalpha = 1.5\n[lift]\nkind = laplace\n").unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("alpha in (0,1)"), "{err}");
}

#[test]
fn duplicate_unknown_and_malformed_keys_name_their_lines() {
    let err = RawConfig::parse("[sim]\ndt = 0.1\ndt = 0.2\n").unwrap_err().to_string();
    assert!(err.contains("line 3") && err.contains("duplicate") && err.contains("line 2"), "{err}");
    let err = RawConfig::parse("[sim]\nfoo = 1\n[extra]\nbar = 2\nnonsense\n").unwrap_err();
    match err {
        Error::ConfigErrors(v) => {
            assert_eq!(v.len(), 4, "{v:?}");
            assert!(v[0].contains("line 2") && v[0].contains("foo"));
            assert!(v[1].contains("line 3") && v[1].contains("extra"));
        }
        e => panic!("{e}"),
    }
    let err = RunConfig::parse("[sim]\npaths = many\ndt = 0.03\n").unwrap_err().to_string();
    assert!(err.contains("line 2") && err.contains("many"), "{err}");
    assert!(err.contains("integer multiple"), "{err}");
}

#[test]
fn scheme_and_lift_must_match() {
    let err = RunConfig::parse("[sim]\nscheme = shift_lift\n").unwrap_err().to_string();
    assert!(err.contains("lift"), "{err}");
    let err = RunConfig::parse("[model]\nalpha=1\n[lift]\nkind = shift\nh = 0.02\n[sim]\nscheme = shift_lift\ndt = 0.01\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("sim.dt"), "{err}");
}

#[test]
fn config_hash_ignores_formatting() {
    let a = RawConfig::parse("[sim]\ndt = 0.1\nseed=3\n").unwrap();
    let b = RawConfig::parse("# comment\n[sim]\n  seed = 3\n\ndt=0.1\n").unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = RawConfig::parse("[sim]\ndt = 0.1\nseed=4\n").unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn check_reports_margins_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), TRACE_CLASS, &["check"]), 2);
    let v = json(&dir.path().join("check.json"));
    assert_eq!(v["passes"], false);
    let r = &v["report"];
    assert!((r["K0"].as_f64().unwrap() - 2.059_714_602_177_749).abs() < 1e-12);
    assert!((r["K1"].as_f64().unwrap() - 7.305_745_523_461_202).abs() < 1e-12);
    assert!(r["margin_contraction"].as_f64().unwrap() < 0.0);
    let passing = TRACE_CLASS.replace("-0.1", "-0.01");
    assert_eq!(cli(dir.path(), &passing, &["check"]), 0);
    let m = json(&dir.path().join("check_manifest.json"));
    assert_eq!(m["subcommand"], "check");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), OU, &["simulate"]), 0);
    let first = fs::read(dir.path().join("simulate.csv")).unwrap();
    let m1 = json(&dir.path().join("simulate_manifest.json"));
    assert_eq!(cli(dir.path(), OU, &["--threads", "2", "simulate"]), 0);
    assert_eq!(first, fs::read(dir.path().join("simulate.csv")).unwrap());
    let m2 = json(&dir.path().join("simulate_manifest.json"));
    assert_eq!(m1["config_hash"], m2["config_hash"]);
    assert_eq!(m1["outputs"], m2["outputs"]);

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,t,mode,u"));
    let rows: Vec<(usize, f64, usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 3 * 101);
    let c = RunConfig::parse(OU).unwrap();
    let p = voltlift::sim::simulate_direct(&c.model, &c.sim).unwrap();
    for (path, t, mode, u) in rows {
        let k = (t / 0.05).round() as usize;
        assert_eq!(p.at(path, k, mode), u);
    }
    assert!(!text.contains('\r'));

    assert_eq!(cli(dir.path(), OU, &["--seed", "12", "simulate"]), 0);
    assert_ne!(fs::read(dir.path().join("simulate.csv")).unwrap(), text.as_bytes());
    let dir2 = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir2.path(), OU, &["--format", "json", "simulate"]), 0);
    let p2: voltlift::sim::Paths = serde_json::from_str(&fs::read_to_string(dir2.path().join("simulate.json")).unwrap()).unwrap();
    assert_eq!(p2, p);
}

#[test]
fn lln_and_clt_write_tables_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(dir.path(), OU_LIFT, &["lln"]), 0);
    let text = fs::read_to_string(dir.path().join("lln.csv")).unwrap();
    assert!(text.starts_with("T,mse,mse_stderr\n"));
    assert_eq!(text.lines().count(), 4);
    let s = json(&dir.path().join("lln_summary.json"));
    assert!(s["fitted_slope"].as_f64().unwrap() < 0.0);

    assert_eq!(cli(dir.path(), OU_LIFT, &["clt"]), 0);
    let text = fs::read_to_string(dir.path().join("clt.csv")).unwrap();
    assert!(text.starts_with("sample_id,normalized_deviation\n"));
    let vals: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(vals.len(), 120);
    let s = json(&dir.path().join("clt_summary.json"));
    assert!(s["sigma_hat"].as_f64().unwrap() > 0.0);

    let small = OU_LIFT.replace("paths = 120", "paths = 20");
    assert_eq!(cli(dir.path(), &small, &["clt"]), 1);

    assert_eq!(cli(dir.path(), OU_LIFT, &["report"]), 0);
    let r = json(&dir.path().join("report.json"));
    assert!(r.get("lln_summary").is_some() && r.get("clt_summary").is_some() && r.get("lln_manifest").is_some());
}

#[test]
fn failing_conditions_gate_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let gated = "\
[model]
alpha = 0.75
drift = tanh
drift_c = -0.1

[lift]
kind = laplace
nodes = 40

[sim]
scheme = laplace_lift
dt = 0.05
paths = 20

[experiment]
t_grid = 1, 2
pi = 0
theorem = trace_class
p = 25
eps0 = 0.1
eps1 = 0.2
";
    assert_eq!(cli(dir.path(), gated, &["lln"]), 2);
    assert!(!dir.path().join("lln.csv").exists());
    assert_eq!(json(&dir.path().join("check.json"))["feasible"], true);
    let forced = format!("{gated}override = true\n");
    assert_eq!(cli(dir.path(), &forced, &["lln"]), 0);
    assert!(dir.path().join("lln.csv").exists());
}

#[test]
fn kernels_and_resolvent_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[model]\nalpha = 0.7\n[experiment]\ntable_t = 0.1, 1, 10\nrho_scale = 0.5\n";
    assert_eq!(cli(dir.path(), cfg, &["kernels"]), 0);
    let text = fs::read_to_string(dir.path().join("kernels.csv")).unwrap();
    assert!(text.starts_with("t,kernel,reconstruction,rel_err\n"));
    for l in text.lines().skip(1) {
        let rel: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!(rel < 1e-4, "{l}");
    }
    assert!(dir.path().join("density.csv").exists());
    let exp = "[model]\nalpha = 1\n[experiment]\nrho_scale = 0.5\n";
    assert_eq!(cli(dir.path(), exp, &["resolvent"]), 0);
    let s = json(&dir.path().join("resolvent_summary.json"));
    assert!(s["l1_identity_residual"].as_f64().unwrap() < 1e-2);
    let text = fs::read_to_string(dir.path().join("resolvent.csv")).unwrap();
    assert!(text.starts_with("t,rho,r\n"));
}

#[test]
fn thread_count_sources() {
    assert_eq!(thread_count(Some(3)).unwrap(), Some(3));
    assert_eq!(csv_table(&["a", "b"], vec![vec!["1".into(), "2".into()]]), "a,b\n1,2\n");
}

#[test]
fn binary_exit_codes_and_env_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tc.ini");
    fs::write(&cfg, TRACE_CLASS).unwrap();
    let bin = env!("CARGO_BIN_EXE_voltlift");
    let status = Process::new(bin)
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "check"])
        .env("VOLTLIFT_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let m = json(&dir.path().join("check_manifest.json"));
    assert_eq!(m["threads"], 1);
    let status = Process::new(bin)
        .args(["--config", "/nonexistent.ini", "check"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Process::new(bin)
        .args(["check"])
        .env("VOLTLIFT_THREADS", "lots")
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
