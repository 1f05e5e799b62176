//! Statistical tests that turn distributional claims into pass/fail
//! reports with explicit error rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::actions::MeasurePreservingMap;
use crate::error::{Error, Result};
use crate::measure::IntensityMeasure;
use crate::ppp::{sample_finite, PoissonLaw};
use crate::rng::par_replicates;
use crate::special::{chi_square_sf, ln_factorial, normal_two_sided};
use crate::window::Window;

/// Default significance level for acceptance runs.
pub const DEFAULT_ALPHA: f64 = 0.001;

/// Minimum expected count per cell after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

/// Binomial tests sum the exact pmf up to this many trials.
pub const EXACT_BINOMIAL_LIMIT: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
    pub sample_size: usize,
    pub seed: Option<u64>,
    /// Test-specific estimates (e.g. `p1`, `p2` of the Lévy test).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl TestReport {
    /// A significance test: passes iff `p_value ≥ alpha`.
    pub fn from_p_value(name: &str, statistic: f64, p_value: f64, alpha: f64, sample_size: usize) -> TestReport {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            test_name: name.to_string(),
            statistic,
            p_value,
            alpha,
            pass: p_value >= alpha,
            sample_size,
            seed: None,
            details: BTreeMap::new(),
        }
    }

    /// A deterministic check, encoded as p-value 1 (holds) or 0 with α = 1
    /// so that `pass ⇔ p_value ≥ alpha` still holds.
    pub fn check(name: &str, statistic: f64, holds: bool, sample_size: usize) -> TestReport {
        TestReport::from_p_value(name, statistic, if holds { 1.0 } else { 0.0 }, 1.0, sample_size)
    }

    pub fn with_seed(mut self, seed: u64) -> TestReport {
        self.seed = Some(seed);
        self
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> TestReport {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Fails the report without touching the p-value (for extra conditions
    /// such as a required strict inequality).
    pub fn require(mut self, condition: bool) -> TestReport {
        self.pass &= condition;
        self
    }

    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.get(key).copied()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha {alpha} outside (0,1)")))
    }
}

/// One cell of a pooled Poisson table: counts in `lo..=hi`, `hi = None`
/// meaning an open upper tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledCell {
    pub lo: u64,
    pub hi: Option<u64>,
    pub observed: u64,
    pub expected: f64,
}

impl PooledCell {
    fn holds(&self, k: u64) -> bool {
        k >= self.lo && self.hi.is_none_or(|h| k <= h)
    }
}

/// Poisson(`lambda`) cells for `counts`, pooled left to right so that every
/// expected count is at least [`MIN_EXPECTED`]; the last cell is open.
pub fn pool_poisson(counts: &[u64], lambda: f64) -> Result<Vec<PooledCell>> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("no counts".into()));
    }
    let law = PoissonLaw::new(lambda)?;
    let n = counts.len() as f64;
    let max_obs = counts.iter().copied().max().unwrap();
    let top = max_obs.max(law.truncation(1e-15));
    let mut probs: Vec<f64> = (0..=top).map(|k| law.pmf(k)).collect();
    let residual = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    *probs.last_mut().unwrap() += residual;

    let mut cells: Vec<PooledCell> = Vec::new();
    let mut lo = 0u64;
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        let k = k as u64;
        acc += n * p;
        if acc >= MIN_EXPECTED && k < top {
            cells.push(PooledCell { lo, hi: Some(k), observed: 0, expected: acc });
            lo = k + 1;
            acc = 0.0;
        }
    }
    match cells.last_mut() {
        Some(last) if acc < MIN_EXPECTED => {
            last.hi = None;
            last.expected += acc;
        }
        _ => cells.push(PooledCell { lo, hi: None, observed: 0, expected: acc }),
    }
    for &c in counts {
        let cell = cells.iter_mut().find(|cell| cell.holds(c)).expect("cells cover all counts");
        cell.observed += 1;
    }
    Ok(cells)
}

/// Chi-square goodness of fit of `counts` against Poisson(`lambda`).
pub fn poisson_gof(counts: &[u64], lambda: f64, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let cells = pool_poisson(counts, lambda)?;
    if cells.len() < 2 || cells.iter().any(|c| c.expected < MIN_EXPECTED) {
        return Err(Error::Degenerate(format!("{} usable cells after pooling", cells.len())));
    }
    let stat: f64 = cells
        .iter()
        .map(|c| (c.observed as f64 - c.expected).powi(2) / c.expected)
        .sum();
    let df = (cells.len() - 1) as f64;
    Ok(TestReport::from_p_value("poisson_gof", stat, chi_square_sf(stat, df), alpha, counts.len())
        .with_detail("lambda", lambda)
        .with_detail("df", df)
        .with_detail("mean", counts.iter().sum::<u64>() as f64 / counts.len() as f64))
}

/// Chi-square goodness of fit against explicit cell probabilities.
pub fn chi_square_gof(name: &str, observed: &[u64], probs: &[f64], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::InvalidArgument("observed and probabilities must match, with ≥ 2 cells".into()));
    }
    let n: u64 = observed.iter().sum();
    let total_p: f64 = probs.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n as f64 * p / total_p;
        if e < MIN_EXPECTED {
            return Err(Error::Degenerate(format!("expected count {e} below {MIN_EXPECTED}")));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    let df = (observed.len() - 1) as f64;
    Ok(TestReport::from_p_value(name, stat, chi_square_sf(stat, df), alpha, n as usize).with_detail("df", df))
}

/// Two-sided binomial p-value of `k` successes in `n` trials under `p`.
///
/// Exact for `n ≤` [`EXACT_BINOMIAL_LIMIT`]: sums the pmf over outcomes no
/// more likely than the observed one. Normal approximation beyond.
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> f64 {
    assert!(k <= n && n > 0);
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    if n > EXACT_BINOMIAL_LIMIT {
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        return normal_two_sided((k as f64 - n as f64 * p) / sd);
    }
    let log_norm = ln_factorial(n);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let log_pmf = |i: u64| log_norm - ln_factorial(i) - ln_factorial(n - i) + i as f64 * lp + (n - i) as f64 * lq;
    let threshold = log_pmf(k) + 1e-7f64.ln_1p();
    let total: f64 = (0..=n)
        .map(log_pmf)
        .filter(|&l| l <= threshold)
        .map(f64::exp)
        .sum();
    total.min(1.0)
}

/// Exact binomial test of an observed success count against `p`.
pub fn binomial_test(name: &str, successes: u64, total: u64, p: f64, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    if total == 0 || successes > total {
        return Err(Error::InvalidArgument(format!("{successes} successes out of {total}")));
    }
    let p_hat = successes as f64 / total as f64;
    Ok(
        TestReport::from_p_value(name, p_hat, binomial_two_sided(successes, total, p), alpha, total as usize)
            .with_detail("expected", p)
            .with_detail("sigma", (p * (1.0 - p) / total as f64).sqrt()),
    )
}

/// Void-probability test: `empty_count` void windows out of `total`
/// against `e^{-lambda}`.
pub fn void_prob_test(empty_count: u64, total: u64, lambda: f64, alpha: f64) -> Result<TestReport> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda}")));
    }
    let mut r = binomial_test("void_prob_test", empty_count, total, (-lambda).exp(), alpha)?;
    r.details.insert("lambda".into(), lambda);
    Ok(r)
}

/// Merges rows (when allowed) and columns of a contingency table into
/// adjacent neighbors until every expected cell count is at least
/// [`MIN_EXPECTED`]. All-zero rows and columns are dropped first.
pub fn pool_contingency(table: &[Vec<u64>], merge_rows: bool) -> Result<Vec<Vec<u64>>> {
    let ncols = table.iter().map(Vec::len).max().unwrap_or(0);
    let mut t: Vec<Vec<u64>> = table
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.resize(ncols, 0);
            r
        })
        .filter(|r| r.iter().any(|&x| x > 0))
        .collect();
    let keep: Vec<usize> = (0..ncols).filter(|&j| t.iter().any(|r| r[j] > 0)).collect();
    for r in &mut t {
        *r = keep.iter().map(|&j| r[j]).collect();
    }
    let degenerate = |t: &Vec<Vec<u64>>| {
        Err(Error::Degenerate(format!(
            "table collapsed to {}x{}",
            t.len(),
            t.first().map_or(0, Vec::len)
        )))
    };
    loop {
        let rows = t.len();
        let cols = t.first().map_or(0, Vec::len);
        if rows < 2 || cols < 2 {
            return degenerate(&t);
        }
        let n: u64 = t.iter().flatten().sum();
        let row_sums: Vec<u64> = t.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..cols).map(|j| t.iter().map(|r| r[j]).sum()).collect();
        let (ri, rmin) = argmin(&row_sums);
        let (ci, cmin) = argmin(&col_sums);
        if (rmin as f64) * (cmin as f64) / n as f64 >= MIN_EXPECTED {
            return Ok(t);
        }
        if merge_rows && rmin <= cmin {
            let target = neighbor(&row_sums, ri);
            let row = t.remove(ri);
            let target = if target > ri { target - 1 } else { target };
            for (x, y) in t[target].iter_mut().zip(row) {
                *x += y;
            }
        } else {
            let target = neighbor(&col_sums, ci);
            for r in &mut t {
                let v = r.remove(ci);
                let target = if target > ci { target - 1 } else { target };
                r[target] += v;
            }
            if !merge_rows && t.first().is_some_and(|r| r.len() < 2) {
                return degenerate(&t);
            }
        }
    }
}

fn argmin(v: &[u64]) -> (usize, u64) {
    v.iter()
        .copied()
        .enumerate()
        .min_by_key(|&(i, x)| (x, std::cmp::Reverse(i)))
        .unwrap()
}

/// The adjacent index with the smaller total.
fn neighbor(sums: &[u64], i: usize) -> usize {
    match (i.checked_sub(1), (i + 1 < sums.len()).then_some(i + 1)) {
        (Some(l), Some(r)) => {
            if sums[l] <= sums[r] {
                l
            } else {
                r
            }
        }
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => i,
    }
}

fn contingency_statistic(t: &[Vec<u64>]) -> (f64, f64) {
    let n: u64 = t.iter().flatten().sum();
    let cols = t[0].len();
    let row_sums: Vec<u64> = t.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    for (i, r) in t.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = row_sums[i] as f64 * col_sums[j] as f64 / n as f64;
            stat += (o as f64 - e).powi(2) / e;
        }
    }
    (stat, ((t.len() - 1) * (cols - 1)) as f64)
}

/// Joint count table `table[k1][k2]` from paired counts.
pub fn joint_table(pairs: &[(u64, u64)]) -> Vec<Vec<u64>> {
    let r = pairs.iter().map(|p| p.0).max().map_or(0, |m| m as usize + 1);
    let c = pairs.iter().map(|p| p.1).max().map_or(0, |m| m as usize + 1);
    let mut t = vec![vec![0u64; c]; r];
    for &(a, b) in pairs {
        t[a as usize][b as usize] += 1;
    }
    t
}

/// Chi-square test of independence on a pooled contingency table.
pub fn independence_test(joint: &[Vec<u64>], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let pooled = pool_contingency(joint, true)?;
    let (stat, df) = contingency_statistic(&pooled);
    let n: u64 = pooled.iter().flatten().sum();
    Ok(TestReport::from_p_value("independence_test", stat, chi_square_sf(stat, df), alpha, n as usize)
        .with_detail("df", df))
}

/// Chi-square homogeneity test between two count samples.
pub fn two_sample_count_test(a: &[u64], b: &[u64], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("both samples must be nonempty".into()));
    }
    let width = a.iter().chain(b).copied().max().unwrap() as usize + 1;
    let hist = |s: &[u64]| {
        let mut h = vec![0u64; width];
        for &x in s {
            h[x as usize] += 1;
        }
        h
    };
    let pooled = pool_contingency(&[hist(a), hist(b)], false)?;
    if pooled.len() != 2 {
        return Err(Error::Degenerate("a sample vanished while pooling".into()));
    }
    let (stat, df) = contingency_statistic(&pooled);
    Ok(
        TestReport::from_p_value("two_sample_count_test", stat, chi_square_sf(stat, df), alpha, a.len() + b.len())
            .with_detail("df", df),
    )
}

/// Estimates `p1 = P(F ∩ w = ∅)` and `p2 = P(F ∩ (w ∪ g⁻¹w) = ∅)` from `n`
/// Poisson samples and tests `p2 = p1²` with a delta-method z-test. Passing
/// also requires the strict witness `p2 < p1`.
pub fn levy_square_test(
    m: &IntensityMeasure,
    w: &Window,
    g: &MeasurePreservingMap,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidArgument("no replicates".into()));
    }
    let pre = g.preimage_window(w)?;
    if !w.is_disjoint(&pre)? {
        return Err(Error::OverlappingWindows);
    }
    let mass_w = m.finite_positive_mass(w)?;
    let mass_pre = m.finite_positive_mass(&pre)?;
    let both = Window::union(vec![w.clone(), pre.clone()])?;
    let outcomes = par_replicates(seed, n, |_, rng| -> Result<(bool, bool)> {
        let cfg = sample_finite(m, &both, rng)?;
        let void_w = cfg.count_in(w)? == 0;
        Ok((void_w, void_w && cfg.count_in(&pre)? == 0))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let p1 = outcomes.iter().filter(|o| o.0).count() as f64 / nf;
    let p2 = outcomes.iter().filter(|o| o.1).count() as f64 / nf;
    let diff = p2 - p1 * p1;
    // Var(p2 - p1²) with Cov(A, B) = p2 (1 - p1) since {B} ⊆ {A}
    let var = (4.0 * p1 * p1 * p1 * (1.0 - p1) - 4.0 * p1 * p2 * (1.0 - p1) + p2 * (1.0 - p2)) / nf;
    let sd = var.max(0.0).sqrt();
    let (z, p) = if sd > 0.0 {
        let z = diff / sd;
        (z, normal_two_sided(z))
    } else {
        (0.0, if diff == 0.0 { 1.0 } else { 0.0 })
    };
    Ok(TestReport::from_p_value("levy_square_test", z, p, alpha, n)
        .with_seed(seed)
        .with_detail("p1", p1)
        .with_detail("p2", p2)
        .with_detail("diff_sd", sd)
        .with_detail("p2_sd", (p2 * (1.0 - p2) / nf).sqrt())
        .with_detail("p2_expected", (-(mass_w + mass_pre)).exp())
        .with_detail("witness", if p2 < p1 { 1.0 } else { 0.0 })
        .require(p2 < p1))
}
