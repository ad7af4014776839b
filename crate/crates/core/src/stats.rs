//! Ergodic statistics on simulated paths: 1-D Wasserstein distances, LLN error
//! curves with rate fits, CLT normality and asymptotic variance, and convergence
//! of marginals to the limit distribution.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::sim::{map_paths, LiftData, ModelSpec, Scheme, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub x: f64,
    pub y: f64,
    pub y_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub label: String,
    pub rows: Vec<Row>,
    pub fitted_slope: f64,
    /// 95% confidence interval of the slope.
    pub fitted_slope_ci: (f64, f64),
}

/// Empirical quantiles of a sorted sample at the midpoints `(i + 1/2)/n`.
fn resample(sorted: &[f64], n: usize) -> Vec<f64> {
    let m = sorted.len();
    (0..n)
        .map(|i| {
            let pos = (i as f64 + 0.5) / n as f64 * m as f64 - 0.5;
            let lo = pos.floor().clamp(0.0, (m - 1) as f64) as usize;
            let hi = (lo + 1).min(m - 1);
            let f = (pos - lo as f64).clamp(0.0, 1.0);
            sorted[lo] * (1.0 - f) + sorted[hi] * f
        })
        .collect()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `(mean_i |a_(i) - b_(i)|^p)^{1/p}` over sorted pairs; unequal sizes are
/// resampled to the larger size by quantile interpolation.
pub fn wasserstein_1d(a: &[f64], b: &[f64], p_exp: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Insufficient("Wasserstein distance of an empty sample".into()));
    }
    if !(p_exp >= 1.0) || !p_exp.is_finite() {
        return Err(invalid("p", p_exp, "must be finite and at least 1"));
    }
    let (mut sa, mut sb) = (sorted(a), sorted(b));
    if sa.len() != sb.len() {
        let n = sa.len().max(sb.len());
        sa = resample(&sa, n);
        sb = resample(&sb, n);
    }
    let s: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs().powf(p_exp)).sum();
    Ok((s / sa.len() as f64).powf(1.0 / p_exp))
}

/// Least-squares line `y = a + s x` with a 95% interval for `s`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, (f64, f64))> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return Err(Error::Insufficient("need at least two points for a fit".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient("abscissae are all equal".into()));
    }
    let s = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    if n == 2 {
        return Ok((s, (s, s)));
    }
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - s * (a - mx)).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((s, (s - t * se, s + t * se)))
}

/// Slope of `log y` against `log x` over rows with positive coordinates.
pub fn fit_loglog(rows: &[Row]) -> Result<(f64, (f64, f64))> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.x > 0.0 && r.y > 0.0).map(|r| (r.x.ln(), r.y.ln())).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_line(&x, &y)
}

/// Slope of `log y` against `x` over rows with positive `y`.
pub fn fit_loglinear(rows: &[Row]) -> Result<(f64, (f64, f64))> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.y > 0.0).map(|r| (r.x, r.y.ln())).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_line(&x, &y)
}

/// Mean, standard deviation, skewness and excess kurtosis.
pub fn moments(v: &[f64]) -> (f64, f64, f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let c2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let c3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let c4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let sd = (c2 * n / (n - 1.0).max(1.0)).sqrt();
    if c2 == 0.0 {
        return (m, 0.0, 0.0, 0.0);
    }
    (m, sd, c3 / c2.powf(1.5), c4 / (c2 * c2) - 3.0)
}

/// Pool-adjacent-violators fit of a nonincreasing sequence.
pub fn isotonic_decreasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for v in y {
        blocks.push((*v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks");
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat(v).take(n)).collect()
}

/// Scalar observable of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "mode", rename_all = "snake_case")]
pub enum Observable {
    Identity(usize),
    Square(usize),
    Tanh(usize),
}

impl Observable {
    pub fn mode(&self) -> usize {
        match self {
            Observable::Identity(n) | Observable::Square(n) | Observable::Tanh(n) => *n,
        }
    }

    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            Observable::Identity(n) => u[*n],
            Observable::Square(n) => u[*n] * u[*n],
            Observable::Tanh(n) => u[*n].tanh(),
        }
    }
}

/// Source of the long-run mean `pi(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    Analytic { value: f64 },
    /// Separate run `t_factor` times longer with `path_factor` times more paths.
    Simulated { t_factor: f64, path_factor: usize, seed: u64 },
}

/// Time grid, Monte Carlo size and scheme of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub burn_in: f64,
}

impl RunSpec {
    fn config(&self, t_end: f64) -> SimConfig {
        SimConfig::new(self.dt, t_end, self.paths, self.seed, self.scheme).with_burn_in(self.burn_in)
    }
}

/// Per-path time averages `(1/T) int_0^T f(u_t) dt` (left Riemann sums) at each `T` in `t_grid`.
pub fn time_averages(m: &ModelSpec, lift: &LiftData, f: Observable, run: &RunSpec, t_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    if t_grid.is_empty() {
        return Err(Error::Insufficient("empty T grid".into()));
    }
    if f.mode() >= m.modes() {
        return Err(invalid("mode", f.mode() as f64, "observable mode out of range"));
    }
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let c = run.config(t_max);
    c.validate()?;
    let marks: Vec<usize> = t_grid
        .iter()
        .map(|t| {
            let k = (t / run.dt).round();
            if (t / run.dt - k).abs() > 1e-9 * k.max(1.0) || k < 1.0 {
                Err(invalid("T", *t, "must be a positive multiple of dt"))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<_>>()?;
    let dt = run.dt;
    map_paths(
        m,
        lift,
        &c,
        |_| (0.0f64, vec![0.0; marks.len()]),
        |acc, k, u| {
            for (slot, mk) in acc.1.iter_mut().zip(&marks) {
                if k == *mk {
                    *slot = acc.0 * dt / (*mk as f64 * dt);
                }
            }
            acc.0 += f.eval(u);
        },
    )
    .map(|v| v.into_iter().map(|a| a.1).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnResult {
    pub result: ExperimentResult,
    pub pi_ref: f64,
    /// MSE strictly decreasing along the grid.
    pub strictly_decreasing: bool,
    /// MSE nonincreasing up to twice the Monte Carlo standard error.
    pub nonincreasing_within_2se: bool,
}

/// Long-run mean of `f` from a reference run.
pub fn reference_mean(m: &ModelSpec, lift: &LiftData, f: Observable, run: &RunSpec, t_end: f64, reference: Reference) -> Result<f64> {
    match reference {
        Reference::Analytic { value } => Ok(value),
        Reference::Simulated {
            t_factor,
            path_factor,
            seed,
        } => {
            let long = t_factor * t_end;
            let t = (long / run.dt).round() * run.dt;
            let spec = RunSpec {
                paths: run.paths * path_factor.max(1),
                seed,
                ..run.clone()
            };
            let avgs = time_averages(m, lift, f, &spec, &[t])?;
            Ok(avgs.iter().map(|a| a[0]).sum::<f64>() / avgs.len() as f64)
        }
    }
}

/// Mean-square deviation of time averages from `pi(f)` for each `T`, with a log-log slope.
pub fn lln_experiment(
    m: &ModelSpec,
    lift: &LiftData,
    f: Observable,
    t_grid: &[f64],
    run: &RunSpec,
    reference: Reference,
) -> Result<LlnResult> {
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let pi = reference_mean(m, lift, f, run, t_max, reference)?;
    let avgs = time_averages(m, lift, f, run, t_grid)?;
    let mp = avgs.len() as f64;
    let rows: Vec<Row> = t_grid
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let sq: Vec<f64> = avgs.iter().map(|a| (a[i] - pi).powi(2)).collect();
            let (mean, sd, _, _) = moments(&sq);
            Row {
                x: *t,
                y: mean,
                y_err: sd / mp.sqrt(),
            }
        })
        .collect();
    let (slope, ci) = fit_loglog(&rows).unwrap_or((f64::NAN, (f64::NAN, f64::NAN)));
    let strictly = rows.windows(2).all(|w| w[1].y < w[0].y);
    let within = rows.windows(2).all(|w| w[1].y <= w[0].y + 2.0 * (w[0].y_err + w[1].y_err));
    Ok(LlnResult {
        result: ExperimentResult {
            label: format!("lln {f:?}"),
            rows,
            fitted_slope: slope,
            fitted_slope_ci: ci,
        },
        pi_ref: pi,
        strictly_decreasing: strictly,
        nonincreasing_within_2se: within,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltResult {
    pub pi_ref: f64,
    /// Sample standard deviation of `sqrt(T)(time average - pi(f))`.
    pub sigma_hat: f64,
    /// `(2 int_0^L Cov(f(X_t), f(X_0)) dt)^{1/2}` from the pooled autocovariance.
    pub sigma_hat_acov: f64,
    /// Truncation lag `L` in time units.
    pub truncation_lag: f64,
    pub mean: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// All normalized deviations are zero.
    pub degenerate: bool,
    pub normalized: Vec<f64>,
}

/// `c(l) = (1/(n-l)) sum_k x_k x_{k+l}` for `l <= max_lag`, by FFT.
pub fn autocovariance(x: &[f64], max_lag: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(len).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    (0..=max_lag.min(n - 1)).map(|l| buf[l].re / len as f64 / (n - l) as f64).collect()
}

/// Normalized fluctuations of time averages over `[0, T]` after burn-in.
/// Without `pi`, deviations are taken from the mean of all time averages and the
/// autocovariance is centered per path.
pub fn clt_experiment(m: &ModelSpec, lift: &LiftData, f: Observable, t_end: f64, run: &RunSpec, pi: Option<f64>) -> Result<CltResult> {
    if run.paths < 100 {
        return Err(Error::Insufficient(format!("CLT needs at least 100 paths, got {}", run.paths)));
    }
    if f.mode() >= m.modes() {
        return Err(invalid("mode", f.mode() as f64, "observable mode out of range"));
    }
    let c = run.config(t_end);
    c.validate()?;
    let n = c.steps()?;
    let cap = ((t_end / 5.0) / run.dt).floor() as usize;
    let samples = map_paths(m, lift, &c, |_| Vec::with_capacity(n), |acc: &mut Vec<f64>, k, u| {
        if k < n {
            acc.push(f.eval(u))
        }
    })?;
    let per_path: Vec<(f64, Vec<f64>)> = samples
        .into_par_iter()
        .map_init(FftPlanner::new, |planner, xs| {
            let avg = xs.iter().sum::<f64>() / xs.len() as f64;
            let center = pi.unwrap_or(avg);
            let centered: Vec<f64> = xs.iter().map(|v| v - center).collect();
            (avg, autocovariance(&centered, cap, planner))
        })
        .collect();
    let mp = per_path.len() as f64;
    let pi_ref = pi.unwrap_or_else(|| per_path.iter().map(|p| p.0).sum::<f64>() / mp);
    let normalized: Vec<f64> = per_path.iter().map(|p| t_end.sqrt() * (p.0 - pi_ref)).collect();
    let (mean, sd, skew, kurt) = moments(&normalized);

    let lags = per_path[0].1.len();
    let mut lag = lags - 1;
    let mut pooled = Vec::with_capacity(lags);
    for l in 0..lags {
        let col: Vec<f64> = per_path.iter().map(|p| p.1[l]).collect();
        let (cm, csd, _, _) = moments(&col);
        pooled.push(cm);
        if l > 0 && cm.abs() < 2.0 * csd / mp.sqrt() {
            lag = l;
            break;
        }
    }
    let l = pooled.len() - 1;
    let integral = if l == 0 {
        0.0
    } else {
        run.dt * (0.5 * pooled[0] + pooled[1..l].iter().sum::<f64>() + 0.5 * pooled[l])
    };
    Ok(CltResult {
        pi_ref,
        sigma_hat: sd,
        sigma_hat_acov: (2.0 * integral).max(0.0).sqrt(),
        truncation_lag: lag as f64 * run.dt,
        mean,
        skewness: skew,
        excess_kurtosis: kurt,
        degenerate: normalized.iter().all(|v| *v == 0.0),
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalResult {
    /// Rows `(t, W1(law(u_t), proxy of pi), floor)`.
    pub result: ExperimentResult,
    /// W1 between two independent proxy samples of `pi`.
    pub noise_floor: f64,
    /// `max |W1 - isotonic fit| / max W1`.
    pub isotonic_residual: f64,
    /// Rows with `W1 > 3 floor` used for the fit.
    pub fitted_rows: usize,
}

fn marginals(m: &ModelSpec, lift: &LiftData, mode: usize, run: &RunSpec, t_end: f64, marks: &[usize]) -> Result<Vec<Vec<f64>>> {
    let c = run.config(t_end);
    let rows = map_paths(m, lift, &c, |_| vec![0.0; marks.len()], |acc, k, u| {
        for (slot, mk) in acc.iter_mut().zip(marks) {
            if k == *mk {
                *slot = u[mode];
            }
        }
    })?;
    Ok((0..marks.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect())
}

/// W1 between the marginal of `u_t` (mode `mode`) and the marginal at `2 max(t_grid)` from an
/// independent run, with a log-linear decay fit over rows above three times the noise floor.
pub fn limit_marginal_check(m: &ModelSpec, lift: &LiftData, mode: usize, t_grid: &[f64], run: &RunSpec) -> Result<MarginalResult> {
    if mode >= m.modes() {
        return Err(invalid("mode", mode as f64, "mode out of range"));
    }
    let t_max = t_grid.iter().cloned().fold(0.0, f64::max);
    let t_ref = (2.0 * t_max / run.dt).round() * run.dt;
    let k_ref = (t_ref / run.dt).round() as usize;
    let mut marks: Vec<usize> = t_grid.iter().map(|t| (t / run.dt).round() as usize).collect();
    marks.push(k_ref);
    let main = marginals(m, lift, mode, run, t_ref, &marks)?;
    let r1 = RunSpec {
        seed: run.seed ^ 0x5EED_0001,
        ..run.clone()
    };
    let r2 = RunSpec {
        seed: run.seed ^ 0x5EED_0002,
        ..run.clone()
    };
    let proxy = marginals(m, lift, mode, &r1, t_ref, &[k_ref])?.remove(0);
    let proxy2 = marginals(m, lift, mode, &r2, t_ref, &[k_ref])?.remove(0);
    let floor = wasserstein_1d(&proxy, &proxy2, 1.0)?;
    let rows: Vec<Row> = t_grid
        .iter()
        .zip(&main)
        .map(|(t, sample)| {
            Ok(Row {
                x: *t,
                y: wasserstein_1d(sample, &proxy, 1.0)?,
                y_err: floor,
            })
        })
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = rows.iter().map(|r| r.y).collect();
    let iso = isotonic_decreasing(&ys);
    let ymax = ys.iter().cloned().fold(0.0, f64::max);
    let resid = if ymax > 0.0 {
        ys.iter().zip(&iso).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / ymax
    } else {
        0.0
    };
    let strong: Vec<Row> = rows.iter().filter(|r| r.y > 3.0 * floor).cloned().collect();
    let (slope, ci) = fit_loglinear(&strong).unwrap_or((f64::NAN, (f64::NAN, f64::NAN)));
    Ok(MarginalResult {
        result: ExperimentResult {
            label: format!("W1 to limit, mode {mode}"),
            rows,
            fitted_slope: slope,
            fitted_slope_ci: ci,
        },
        noise_floor: floor,
        isotonic_residual: resid,
        fitted_rows: strong.len(),
    })
}

/// Mean over paths and recorded steps of `f(u_k)`, with its standard error across paths.
pub fn stationary_mean(m: &ModelSpec, lift: &LiftData, f: Observable, t_end: f64, run: &RunSpec) -> Result<(f64, f64)> {
    let avgs = time_averages(m, lift, f, run, &[t_end])?;
    let v: Vec<f64> = avgs.iter().map(|a| a[0]).collect();
    let (mean, sd, _, _) = moments(&v);
    Ok((mean, sd / (v.len() as f64).sqrt()))
}
