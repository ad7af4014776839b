//! Discretized shift lift on a uniform grid of the weighted space of absolutely
//! continuous curves: shift semigroup, `Xi_0`, `Xi_inf`, the norm and its bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::kernels::Kernel;
use crate::special::{Dd, WeightFamily, WeightParams};

/// Uniform grid `x_j = j h`, `j = 0..=J`, `J h = x_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftGrid {
    pub h: f64,
    pub x_max: f64,
    pub wparams: WeightParams,
    cells: usize,
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    if n >= 1.0 && (r - n).abs() <= 1e-9 * n {
        Some(n as usize)
    } else {
        None
    }
}

impl ShiftGrid {
    pub fn new(h: f64, x_max: f64, wparams: WeightParams) -> Result<Self> {
        ensure_finite("h", h)?;
        ensure_finite("x_max", x_max)?;
        wparams.validate()?;
        if wparams.family != WeightFamily::Shift {
            return Err(invalid("family", 0.0, "shift grids use the shift weight family"));
        }
        if !(h > 0.0 && x_max > 0.0) {
            return Err(invalid("h", h, "h and x_max must be positive"));
        }
        let cells = integer_ratio(x_max, h)
            .filter(|c| *c >= 2)
            .ok_or_else(|| invalid("x_max", x_max, format!("x_max / h must be an integer >= 2 (h = {h})")))?;
        Ok(Self {
            h,
            x_max,
            wparams,
            cells,
        })
    }

    /// Number of grid points `J + 1`.
    pub fn points(&self) -> usize {
        self.cells + 1
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// Grid index of `x = 1`, if it is a grid point.
    pub fn unit_index(&self) -> Option<usize> {
        integer_ratio(1.0, self.h).filter(|j| *j <= self.cells)
    }

    /// Number of grid steps in a time step `dt`.
    pub fn steps_for(&self, dt: f64) -> Result<usize> {
        integer_ratio(dt, self.h)
            .ok_or_else(|| invalid("dt", dt, format!("must be an integer multiple of h = {}", self.h)))
    }

    pub fn with_weights(&self, wparams: WeightParams) -> Result<Self> {
        Self::new(self.h, self.x_max, wparams)
    }
}

/// Samples `y(x_j)` per mode, stored row-major by grid point, and the value at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftStateShift {
    pub modes: usize,
    pub values: Vec<f64>,
    pub tail_value: Vec<f64>,
}

impl LiftStateShift {
    pub fn zeros(g: &ShiftGrid, modes: usize) -> Self {
        Self {
            modes,
            values: vec![0.0; g.points() * modes],
            tail_value: vec![0.0; modes],
        }
    }

    /// The constant curve `y = v`.
    pub fn constant(g: &ShiftGrid, v: &[f64]) -> Self {
        let mut values = Vec::with_capacity(g.points() * v.len());
        for _ in 0..g.points() {
            values.extend_from_slice(v);
        }
        Self {
            modes: v.len(),
            values,
            tail_value: v.to_vec(),
        }
    }

    /// Samples `f(x, n)`; the tail value is `f(x_max, n)`.
    pub fn from_fn(g: &ShiftGrid, modes: usize, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(g.points() * modes);
        for j in 0..g.points() {
            for n in 0..modes {
                let v = f(g.x(j), n);
                ensure_finite("y", v)?;
                values.push(v);
            }
        }
        let tail_value = values[g.cells() * modes..].to_vec();
        Ok(Self {
            modes,
            values,
            tail_value,
        })
    }

    /// Replaces the value at infinity.
    pub fn with_tail(mut self, tail: &[f64]) -> Result<Self> {
        if tail.len() != self.modes {
            return Err(invalid("tail", tail.len() as f64, "length must equal the number of modes"));
        }
        self.tail_value = tail.to_vec();
        Ok(self)
    }

    /// Embedding of decaying kernels `x -> E_n(x)`: grid values, the cell
    /// average `(1/h) int_0^h E_n` at `x = 0`, and value 0 at infinity.
    pub fn from_kernels(g: &ShiftGrid, kernels: &[Kernel]) -> Result<Self> {
        let modes = kernels.len();
        let mut s = Self::zeros(g, modes);
        for (n, k) in kernels.iter().enumerate() {
            s.values[n] = k.step_integral(0.0, g.h)? / g.h;
            for j in 1..g.points() {
                s.values[j * modes + n] = k.value(g.x(j))?;
            }
        }
        Ok(s)
    }

    pub fn points(&self) -> usize {
        self.values.len() / self.modes.max(1)
    }

    #[inline]
    pub fn at(&self, j: usize, n: usize) -> f64 {
        self.values[j * self.modes + n]
    }

    /// `S(steps h) y (x) = y(x + steps h)`, frozen at the tail value beyond `x_max`.
    pub fn shift(&self, steps: usize) -> Self {
        let mut out = self.clone();
        out.shift_in_place(steps);
        out
    }

    pub fn shift_in_place(&mut self, steps: usize) {
        let m = self.modes;
        let p = self.points();
        let keep = p.saturating_sub(steps);
        self.values.copy_within(steps.min(p) * m.., 0);
        for j in keep..p {
            self.values[j * m..(j + 1) * m].copy_from_slice(&self.tail_value);
        }
    }

    /// `Xi_0 y = y(0)`.
    pub fn xi0(&self) -> Vec<f64> {
        self.values[..self.modes].to_vec()
    }

    /// `Xi_0 y` in its integral form `y(1) - int_0^1 y'`, with each difference
    /// and the running sum carried in double-double.
    pub fn xi0_telescoped(&self, g: &ShiftGrid) -> Result<Vec<f64>> {
        let j1 = g
            .unit_index()
            .ok_or_else(|| invalid("h", g.h, "grid must contain x = 1"))?;
        Ok((0..self.modes)
            .map(|n| {
                let mut acc = Dd::new(0.0);
                for j in 0..j1 {
                    acc = acc.add(Dd::new(self.at(j + 1, n)).sub(Dd::new(self.at(j, n))));
                }
                Dd::new(self.at(j1, n)).sub(acc).value()
            })
            .collect())
    }

    /// `Xi_inf y = y(inf)`.
    pub fn xi_inf(&self) -> Vec<f64> {
        self.tail_value.clone()
    }

    /// `S_inf y`: the constant curve at `y(inf)`.
    pub fn s_infinity(&self, g: &ShiftGrid) -> Self {
        Self::constant(g, &self.tail_value)
    }

    /// `(|y(1)|^2 + sum_j h |dy_j / h|^2 w(x_{j+1/2}))^{1/2}`.
    pub fn filipovic_norm(&self, g: &ShiftGrid) -> Result<f64> {
        self.filipovic_norm_with(g, &g.wparams)
    }

    pub fn filipovic_norm_with(&self, g: &ShiftGrid, w: &WeightParams) -> Result<f64> {
        let j1 = g
            .unit_index()
            .ok_or_else(|| invalid("h", g.h, "grid must contain x = 1"))?;
        let m = self.modes;
        let mut sq: f64 = (0..m).map(|n| self.at(j1, n).powi(2)).sum();
        for j in 0..g.cells() {
            let wj = w.eval((j as f64 + 0.5) * g.h) / g.h;
            for n in 0..m {
                sq += (self.at(j + 1, n) - self.at(j, n)).powi(2) * wj;
            }
        }
        Ok(sq.sqrt())
    }

    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        for (a, b) in self.tail_value.iter_mut().zip(&other.tail_value) {
            *a += c * b;
        }
    }
}

pub fn filipovic_norm(s: &LiftStateShift, g: &ShiftGrid) -> Result<f64> {
    s.filipovic_norm(g)
}

pub fn shift_state(s: &LiftStateShift, steps: usize) -> LiftStateShift {
    s.shift(steps)
}

pub fn xi0_project(s: &LiftStateShift) -> Vec<f64> {
    s.xi0()
}

pub fn xi_inf_project(s: &LiftStateShift) -> Vec<f64> {
    s.xi_inf()
}

/// Outcome of the `S(t) - S_inf` bound check between `H_{d,eta}` and `H_{d',eta}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftBoundReport {
    pub t: f64,
    /// `max{1, (d'-1)^{-1/2}} (1 v t)^{-(d-d')/2}`.
    pub bound_cited: f64,
    /// `(1 + 1/(d-1))^{1/2} (1 v t)^{-(d-d')/2}`.
    pub bound: f64,
    pub max_ratio: f64,
    pub trials: usize,
    pub violations: usize,
    pub cited_violations: usize,
}

/// `(1 + 1/(d-1))^{1/2} (1 v t)^{-(d-d')/2}`, the constant obtained by adding
/// the Cauchy-Schwarz bound on `|y(1+t) - y(inf)|` to the derivative term.
pub fn shift_ergodicity_bound(delta: f64, delta_prime: f64, t: f64) -> f64 {
    (1.0 + 1.0 / (delta - 1.0)).sqrt() * t.max(1.0).powf(-(delta - delta_prime) / 2.0)
}

pub fn shift_ergodicity_bound_cited(delta: f64, delta_prime: f64, t: f64) -> f64 {
    (1.0f64).max((delta_prime - 1.0).powf(-0.5)) * t.max(1.0).powf(-(delta - delta_prime) / 2.0)
}

/// Random-state check of `||S(t) - S_inf||` with `t` rounded to whole grid steps.
/// Every fourth trial is the extremal profile `y' = x^{-d}` on `[1+t, inf)`.
pub fn shift_ergodicity_check(
    g: &ShiftGrid,
    delta_prime: f64,
    t: f64,
    trials: usize,
    seed: u64,
) -> Result<ShiftBoundReport> {
    let delta = g.wparams.delta;
    if !(delta_prime > 1.0 && delta_prime < delta) {
        return Err(invalid("delta'", delta_prime, format!("need 1 < delta' < delta = {delta}")));
    }
    if !(t >= 0.0) {
        return Err(invalid("t", t, "must be nonnegative"));
    }
    let j1 = g
        .unit_index()
        .ok_or_else(|| invalid("h", g.h, "grid must contain x = 1"))?;
    let steps = (t / g.h).round() as usize;
    let t = steps as f64 * g.h;
    let w_to = WeightParams::shift(delta_prime, g.wparams.eta);
    let bound = shift_ergodicity_bound(delta, delta_prime, t);
    let bound_cited = shift_ergodicity_bound_cited(delta, delta_prime, t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_ratio, mut violations, mut cited_violations) = (0.0f64, 0, 0);
    let cells = g.cells();
    for trial in 0..trials {
        let mut d = vec![0.0; cells];
        match trial % 4 {
            0 => {
                for (j, v) in d.iter_mut().enumerate() {
                    let x = (j as f64 + 0.5) * g.h;
                    if j >= j1 + steps {
                        *v = g.h * x.powf(-delta);
                    }
                }
            }
            1 => {
                for (j, v) in d.iter_mut().enumerate() {
                    let x = (j as f64 + 0.5) * g.h;
                    *v = rng.gen_range(-1.0..1.0) * g.h / g.wparams.eval(x).sqrt();
                }
            }
            2 => {
                for _ in 0..rng.gen_range(1..6) {
                    let j = rng.gen_range(0..cells);
                    d[j] = rng.gen_range(-1.0..1.0);
                }
            }
            _ => {
                let p = rng.gen_range(0.5..3.0) * delta;
                let from = rng.gen_range(0.0..g.x_max * 0.5);
                for (j, v) in d.iter_mut().enumerate() {
                    let x = (j as f64 + 0.5) * g.h;
                    if x > from {
                        *v = g.h * (1.0 + x).powf(-p) * rng.gen_range(0.5..1.0);
                    }
                }
            }
        }
        let y1 = if trial % 4 == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
        let mut y = LiftStateShift::zeros(g, 1);
        let mut acc = 0.0;
        for j in 0..=cells {
            y.values[j] = acc;
            if j < cells {
                acc += d[j];
            }
        }
        let off = y1 - y.values[j1];
        for v in y.values.iter_mut() {
            *v += off;
        }
        y.tail_value[0] = y.values[cells];
        let mut z = y.shift(steps);
        z.add_scaled(&y.s_infinity(g), -1.0);
        let den = y.filipovic_norm(g)?;
        if den > 0.0 {
            let r = z.filipovic_norm_with(g, &w_to)? / den;
            max_ratio = max_ratio.max(r);
            if r > bound * (1.0 + 1e-12) {
                violations += 1;
            }
            if r > bound_cited * (1.0 + 1e-12) {
                cited_violations += 1;
            }
        }
    }
    if !max_ratio.is_finite() {
        return Err(Error::Numerical("non-finite norm ratio".into()));
    }
    Ok(ShiftBoundReport {
        t,
        bound_cited,
        bound,
        max_ratio,
        trials,
        violations,
        cited_violations,
    })
}
