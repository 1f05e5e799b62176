//! Mollification on the circle `[0,1)` under rotation.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::TestReport;

/// Slack added to analytic bounds to absorb rounding.
pub const QUADRATURE_SLACK: f64 = 1e-8;

/// Real samples `f(i/n)`, `i = 0..n`, of a function on the circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<GridFunction> {
        let n = values.len();
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid size {n} must be a power of two ≥ 8")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(GridFunction { values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<GridFunction> {
        GridFunction::new((0..n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<GridFunction> {
        GridFunction::new(vec![c; n])
    }

    /// Indicator of the arc `[a, b)` (taken mod 1) sampled on the grid.
    pub fn arc_indicator(n: usize, a: f64, b: f64) -> Result<GridFunction> {
        let len = (b - a).rem_euclid(1.0);
        GridFunction::from_fn(n, |x| if (x - a).rem_euclid(1.0) < len { 1.0 } else { 0.0 })
    }

    /// Random ±1 step function with `pieces` constant pieces of random
    /// grid-aligned breakpoints.
    pub fn random_step<R: RngCore + ?Sized>(n: usize, pieces: usize, rng: &mut R) -> Result<GridFunction> {
        let mut breaks: Vec<usize> = (0..pieces.max(1)).map(|_| rng.random_range(0..n)).collect();
        breaks.sort_unstable();
        let signs: Vec<f64> = breaks.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let values = (0..n)
            .map(|i| {
                let idx = breaks.partition_point(|&b| b <= i);
                signs[(idx + breaks.len() - 1) % breaks.len()]
            })
            .collect();
        GridFunction::new(values)
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.grid_size() as f64
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        GridFunction::new(self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect())
    }

    /// `x ↦ f(x − k/n)`.
    pub fn shift(&self, k: i64) -> GridFunction {
        let n = self.grid_size() as i64;
        GridFunction {
            values: (0..n).map(|i| self.values[(i - k).rem_euclid(n) as usize]).collect(),
        }
    }

    /// Grid index of the rotation `h`, which must be a multiple of `1/n`.
    pub fn grid_shift(&self, h: f64) -> Result<i64> {
        let k = h * self.grid_size() as f64;
        if !k.is_finite() || (k - k.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("rotation {h} is not on the grid of size {}", self.grid_size())));
        }
        Ok(k.round() as i64)
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid_size() != other.grid_size() {
            return Err(Error::InvalidArgument(format!(
                "grid sizes {} and {} differ",
                self.grid_size(),
                other.grid_size()
            )));
        }
        Ok(())
    }

    /// `index,value` rows with a header.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["index", "value"]).map_err(io)?;
        for (i, v) in self.values.iter().enumerate() {
            w.serialize((i, v)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<GridFunction> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut values = Vec::new();
        for (expected, row) in r.deserialize::<(usize, f64)>().enumerate() {
            let (i, v) = row.map_err(|e| Error::Parse(e.to_string()))?;
            if i != expected {
                return Err(Error::Parse(format!("expected index {expected}, found {i}")));
            }
            values.push(v);
        }
        GridFunction::new(values)
    }
}

impl TryFrom<Vec<f64>> for GridFunction {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(v)
    }
}

impl From<GridFunction> for Vec<f64> {
    fn from(f: GridFunction) -> Vec<f64> {
        f.values
    }
}

/// The triangle kernel `δ_ε(t) = max(0, ε − |t|)/ε²`, `t` the circle
/// distance to 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    epsilon: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64) -> Result<Mollifier> {
        if !(epsilon > 0.0 && epsilon <= 0.25) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1/4]")));
        }
        Ok(Mollifier { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        let d = t.min(1.0 - t);
        (self.epsilon - d).max(0.0) / (self.epsilon * self.epsilon)
    }

    /// `sup_g |δ(g) − δ(g − h)|` in closed form.
    pub fn shift_sup_difference(&self, h: f64) -> f64 {
        let h = h.rem_euclid(1.0);
        let d = h.min(1.0 - h);
        (d / (self.epsilon * self.epsilon)).min(1.0 / self.epsilon)
    }

    /// Lebesgue measure of the support `[−ε, ε]`.
    pub fn support_mass(&self) -> f64 {
        2.0 * self.epsilon
    }

    /// Quadrature weights `w_j`, `j = −K..=K`, for grid size `n`, normalized
    /// to sum to 1 (they already do when `εn` is an integer).
    pub fn weights(&self, n: usize) -> Result<Vec<(i64, f64)>> {
        if self.epsilon * (n as f64) < 4.0 {
            return Err(Error::InvalidArgument(format!(
                "kernel of width {} is under-resolved on a grid of size {n}",
                self.epsilon
            )));
        }
        let k = (self.epsilon * n as f64).floor() as i64;
        let raw: Vec<(i64, f64)> = (-k..=k)
            .map(|j| (j, self.kernel(j as f64 / n as f64) / n as f64))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let total: f64 = raw.iter().map(|p| p.1).sum();
        Ok(raw.into_iter().map(|(j, w)| (j, w / total)).collect())
    }
}

/// `(δ∗f)(x) = ∫ δ(g) f(x − g) dg`, by the periodic trapezoid rule.
pub fn convolve(delta: &Mollifier, f: &GridFunction) -> Result<GridFunction> {
    let n = f.grid_size() as i64;
    let weights = delta.weights(f.grid_size())?;
    let values = (0..n)
        .map(|i| {
            weights
                .iter()
                .map(|&(j, w)| w * f.values[(i - j).rem_euclid(n) as usize])
                .sum()
        })
        .collect();
    GridFunction::new(values)
}

/// `max_x |f(x) − f(x − h)|` over the grid.
pub fn modulus_of_continuity(f: &GridFunction, h: f64) -> Result<f64> {
    Ok(shift_sup(f, f.grid_shift(h)?))
}

fn shift_sup(f: &GridFunction, k: i64) -> f64 {
    let g = f.shift(k);
    f.values.iter().zip(&g.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn shift_l1(f: &GridFunction, k: i64) -> f64 {
    let g = f.shift(k);
    f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).sum::<f64>() / f.grid_size() as f64
}

/// The continuity bound `2 · sup|δ − δ(·−h)| · m(supp δ) · ‖f‖∞` for `δ∗f`.
pub fn gcont_bound(delta: &Mollifier, f: &GridFunction, h: f64) -> f64 {
    2.0 * delta.shift_sup_difference(h) * delta.support_mass() * f.sup_norm()
}

/// Checks `ω(δ∗f, h) ≤ gcont_bound + slack` for every `h` in `hs`. The
/// statistic is the smallest margin `bound − ω`.
pub fn gcont_bound_check(delta: &Mollifier, f: &GridFunction, hs: &[f64]) -> Result<TestReport> {
    let smooth = convolve(delta, f)?;
    let mut worst = f64::INFINITY;
    let mut worst_lhs: f64 = 0.0;
    for &h in hs {
        let lhs = modulus_of_continuity(&smooth, h)?;
        worst = worst.min(gcont_bound(delta, f, h) - lhs);
        worst_lhs = worst_lhs.max(lhs);
    }
    if hs.is_empty() {
        worst = 0.0;
    }
    Ok(TestReport::check("gcont_bound_check", worst, worst >= -QUADRATURE_SLACK, hs.len())
        .with_detail("epsilon", delta.epsilon())
        .with_detail("max_modulus", worst_lhs))
}

/// `‖f − δ∗f‖₁` and `max_{|g| ≤ ε} ‖f − f(· − g)‖₁` over on-grid `g`.
pub fn l1_approx(delta: &Mollifier, f: &GridFunction) -> Result<(f64, f64)> {
    let smooth = convolve(delta, f)?;
    let lhs = f.combine(1.0, &smooth, -1.0)?.l1_norm();
    let k = (delta.epsilon() * f.grid_size() as f64).floor() as i64;
    let rhs = (-k..=k).map(|j| shift_l1(f, j)).fold(0.0, f64::max);
    Ok((lhs, rhs))
}

/// Checks `‖f − δ∗f‖₁ ≤ max_{|g| ≤ ε} ‖f − f(· − g)‖₁ + slack`.
pub fn l1_approx_check(delta: &Mollifier, f: &GridFunction) -> Result<TestReport> {
    let (lhs, rhs) = l1_approx(delta, f)?;
    Ok(TestReport::check("l1_approx_check", rhs - lhs, lhs <= rhs + QUADRATURE_SLACK, f.grid_size())
        .with_detail("epsilon", delta.epsilon())
        .with_detail("l1_error", lhs)
        .with_detail("shift_sup", rhs))
}
