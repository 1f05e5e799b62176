//! Parameter blocks and runners for each experiment.

use std::collections::BTreeMap;

use ergopoint::actions::{equivariance_experiment, MeasurePreservingMap};
use ergopoint::bits::BitString;
use ergopoint::convolution::{convolve, gcont_bound_check, l1_approx_check, GridFunction, Mollifier, QUADRATURE_SLACK};
use ergopoint::counterexample::{classify_to_index, WeightSequence};
use ergopoint::measure::{ExtendedMass, IntensityMeasure};
use ergopoint::orders::{back_and_forth, sample_uniform_order, OracleKind, OrderOracle};
use ergopoint::ppp::{sample_finite, sample_sigma_finite, PoissonLaw};
use ergopoint::rng::{open_unit, par_replicates, stream};
use ergopoint::stats::{
    binomial_test, chi_square_gof, independence_test, joint_table, levy_square_test, poisson_gof,
    two_sample_count_test, void_prob_test, TestReport,
};
use ergopoint::whirly::{swap_witness, weak_distance, CellAlgebra, CellSet};
use ergopoint::window::Window;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::{ExperimentConfig, RunError, Series, SeriesKind};

/// Reports and plot series produced by one experiment.
#[derive(Default)]
pub struct Outcome {
    pub reports: Vec<TestReport>,
    pub series: BTreeMap<SeriesKind, Series>,
}

/// Root seed of the sub-experiment `label` of a run. Replicate `i` of that
/// sub-experiment uses `stream(sub_seed(cfg, label), i)`. The seed is the
/// first word of stream `2^64 − 1 − (kind·2^32 + label)` of the config
/// seed: top of the stream-id range, away from replicate ids, and distinct
/// per experiment kind.
pub fn sub_seed(cfg: &ExperimentConfig, label: u32) -> u64 {
    let id = (cfg.experiment as u64) << 32 | label as u64;
    stream(cfg.seed, u64::MAX - id).next_u64()
}

type Outcomes = std::result::Result<Outcome, ergopoint::Error>;

fn invalid(field: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Config(format!("parameters.{field}: {e}"))
}

fn interval(a: f64, b: f64) -> Window {
    Window::interval(a, b).expect("static window")
}

fn unit_line() -> IntensityMeasure {
    IntensityMeasure::uniform_line(1.0).expect("static measure")
}

fn finite_mass(m: &IntensityMeasure, w: &Window, field: &str) -> Result<f64, RunError> {
    m.finite_positive_mass(w).map_err(|e| invalid(field, e))
}

fn check_map(m: &IntensityMeasure, g: &MeasurePreservingMap, field: &str) -> Result<(), RunError> {
    g.validate().map_err(|e| invalid(field, e))?;
    if g.space().is_some_and(|s| s != m.space()) {
        return Err(invalid(field, format!("map acts on {:?} but the measure lives on {:?}", g.space(), m.space())));
    }
    Ok(())
}

fn collect<T>(v: Vec<ergopoint::Result<T>>) -> ergopoint::Result<Vec<T>> {
    v.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PppVerify {
    pub measure: IntensityMeasure,
    pub window: Window,
    /// Disjoint window for the independence test.
    pub second_window: Option<Window>,
    /// Depth of the incremental sampler compared against direct sampling
    /// on the first exhaustion window.
    pub consistency_depth: Option<usize>,
    /// Null runs of the count-law test used to check its rejection rate.
    pub calibration_runs: usize,
}

impl Default for PppVerify {
    fn default() -> Self {
        PppVerify {
            measure: unit_line(),
            window: interval(0.0, 1.0),
            second_window: None,
            consistency_depth: None,
            calibration_runs: 0,
        }
    }
}

impl PppVerify {
    pub fn validate(&self) -> Result<(), RunError> {
        self.measure.validate().map_err(|e| invalid("measure", e))?;
        finite_mass(&self.measure, &self.window, "window")?;
        if let Some(w2) = &self.second_window {
            finite_mass(&self.measure, w2, "second_window")?;
            if !self.window.is_disjoint(w2).map_err(|e| invalid("second_window", e))? {
                return Err(invalid("second_window", "must be disjoint from window"));
            }
        }
        if self.consistency_depth.is_some() {
            let v1 = self.measure.exhaustion(1).map_err(|e| invalid("consistency_depth", e))?;
            finite_mass(&self.measure, &v1, "consistency_depth")?;
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let (m, n, alpha) = (&self.measure, cfg.replicates, cfg.alpha);
        let mass = m.finite_positive_mass(&self.window)?;
        let sampled = match &self.second_window {
            Some(w2) => self.window.union_with(w2)?,
            None => self.window.clone(),
        };
        let seed = sub_seed(cfg, 0);
        let pairs = collect(par_replicates(seed, n, |_, rng| {
            let f = sample_finite(m, &sampled, rng)?;
            let second = match &self.second_window {
                Some(w2) => f.count_in(w2)?,
                None => 0,
            };
            Ok((f.count_in(&self.window)? as u64, second as u64))
        }))?;
        let counts: Vec<u64> = pairs.iter().map(|p| p.0).collect();
        let empty = counts.iter().filter(|&&k| k == 0).count() as u64;

        let mut out = Outcome::default();
        out.reports.push(void_prob_test(empty, n as u64, mass, alpha)?.with_seed(seed));
        out.reports.push(poisson_gof(&counts, mass, alpha)?.with_seed(seed));
        if self.second_window.is_some() {
            out.reports.push(independence_test(&joint_table(&pairs), alpha)?.with_seed(seed));
        }
        if let Some(depth) = self.consistency_depth {
            out.reports.push(self.consistency(depth, cfg)?);
        }
        if self.calibration_runs > 0 {
            out.reports.push(calibration(mass, n, self.calibration_runs, sub_seed(cfg, 2), alpha)?);
        }
        out.series.insert(SeriesKind::CountHistogram, histogram(&counts, mass)?);
        Ok(out)
    }

    fn consistency(&self, depth: usize, cfg: &ExperimentConfig) -> ergopoint::Result<TestReport> {
        let m = &self.measure;
        let v1 = m.exhaustion(1)?;
        let seed = sub_seed(cfg, 1);
        let pairs = collect(par_replicates(seed, cfg.replicates, |_, rng| {
            let incremental = sample_sigma_finite(m, depth, rng)?.count_in(&v1)?;
            let direct = sample_finite(m, &v1, rng)?.count_in(&v1)?;
            Ok((incremental as u64, direct as u64))
        }))?;
        let (a, b): (Vec<u64>, Vec<u64>) = pairs.into_iter().unzip();
        let mut r = two_sample_count_test(&a, &b, cfg.alpha)?.with_seed(seed);
        r.details.insert("depth".into(), depth as f64);
        Ok(r)
    }
}

/// Runs the count-law test on `runs` samples drawn from the null itself and
/// checks that the rejection rate is within three binomial σ of `alpha`.
fn calibration(lambda: f64, n: usize, runs: usize, seed: u64, alpha: f64) -> ergopoint::Result<TestReport> {
    let law = PoissonLaw::new(lambda)?;
    let rejected = collect(par_replicates(seed, runs, |_, rng| {
        let counts: Vec<u64> = (0..n).map(|_| law.sample(rng)).collect();
        Ok(!poisson_gof(&counts, lambda, alpha)?.pass)
    }))?;
    let k = rejected.iter().filter(|&&r| r).count();
    let rate = k as f64 / runs as f64;
    let sigma = (alpha * (1.0 - alpha) / runs as f64).sqrt();
    Ok(TestReport::check("calibration", rate, (rate - alpha).abs() <= 3.0 * sigma, runs)
        .with_seed(seed)
        .with_detail("rejections", k as f64)
        .with_detail("sigma", sigma)
        .with_detail("alpha", alpha))
}

fn histogram(counts: &[u64], lambda: f64) -> ergopoint::Result<Series> {
    let law = PoissonLaw::new(lambda)?;
    let top = counts.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0u64; top as usize + 1];
    for &k in counts {
        observed[k as usize] += 1;
    }
    let n = counts.len() as f64;
    let rows = (0..=top).map(|k| vec![k as f64, observed[k as usize] as f64, n * law.pmf(k)]).collect();
    Ok(Series::new(&["k", "observed", "expected"], rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Equivariance {
    pub measure: IntensityMeasure,
    pub window: Window,
    pub maps: Vec<MeasurePreservingMap>,
}

impl Default for Equivariance {
    fn default() -> Self {
        Equivariance {
            measure: unit_line(),
            window: interval(0.0, 1.0),
            maps: vec![
                MeasurePreservingMap::translation(5.0).expect("static map"),
                MeasurePreservingMap::interval_swap(0.0, 1.0).expect("static map"),
            ],
        }
    }
}

impl Equivariance {
    pub fn validate(&self) -> Result<(), RunError> {
        self.measure.validate().map_err(|e| invalid("measure", e))?;
        finite_mass(&self.measure, &self.window, "window")?;
        if self.maps.is_empty() {
            return Err(invalid("maps", "at least one map is required"));
        }
        for (i, g) in self.maps.iter().enumerate() {
            let field = format!("maps[{i}]");
            check_map(&self.measure, g, &field)?;
            let pre = g.preimage_window(&self.window).map_err(|e| invalid(&field, e))?;
            finite_mass(&self.measure, &pre, &field)?;
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let mut out = Outcome::default();
        for (i, g) in self.maps.iter().enumerate() {
            let seed = sub_seed(cfg, i as u32);
            let mut r = equivariance_experiment(&self.measure, g, &self.window, cfg.replicates, seed, cfg.alpha)?;
            r.test_name = format!("equivariance_experiment[{i}]");
            out.reports.push(r);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevySquare {
    pub measure: IntensityMeasure,
    pub window: Window,
    pub map: MeasurePreservingMap,
    /// Also require `p2` within three σ of `exp(-2 m(window))`.
    pub check_closed_form: bool,
}

impl Default for LevySquare {
    fn default() -> Self {
        LevySquare {
            measure: unit_line(),
            window: interval(0.0, 1.0),
            map: MeasurePreservingMap::translation(5.0).expect("static map"),
            check_closed_form: true,
        }
    }
}

impl LevySquare {
    pub fn validate(&self) -> Result<(), RunError> {
        self.measure.validate().map_err(|e| invalid("measure", e))?;
        finite_mass(&self.measure, &self.window, "window")?;
        check_map(&self.measure, &self.map, "map")?;
        let pre = self.map.preimage_window(&self.window).map_err(|e| invalid("map", e))?;
        if !self.window.is_disjoint(&pre).map_err(|e| invalid("map", e))? {
            return Err(invalid("map", "the window and its preimage must be disjoint"));
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let seed = sub_seed(cfg, 0);
        let r = levy_square_test(&self.measure, &self.window, &self.map, cfg.replicates, seed, cfg.alpha)?;
        let mut out = Outcome::default();
        if self.check_closed_form {
            let (p2, sd, expected) = (r.detail("p2"), r.detail("p2_sd"), r.detail("p2_expected"));
            if let (Some(p2), Some(sd), Some(expected)) = (p2, sd, expected) {
                let z = (p2 - expected) / sd;
                out.reports.push(
                    TestReport::check("levy_closed_form", z, z.abs() <= 3.0, cfg.replicates)
                        .with_seed(seed)
                        .with_detail("p2", p2)
                        .with_detail("expected", expected),
                );
            }
        }
        out.reports.insert(0, r);
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mollify {
    pub grid_size: usize,
    /// Kernel widths for the arc approximation.
    pub epsilons: Vec<f64>,
    /// The arc `[a, b)` whose indicator is mollified.
    pub arc: [f64; 2],
    /// Pieces of the random step functions.
    pub pieces: usize,
}

impl Default for Mollify {
    fn default() -> Self {
        Mollify { grid_size: 1024, epsilons: vec![0.125, 0.0625, 0.03125], arc: [0.25, 0.75], pieces: 8 }
    }
}

impl Mollify {
    fn min_epsilon(&self) -> f64 {
        4.0 / self.grid_size as f64
    }

    pub fn validate(&self) -> Result<(), RunError> {
        GridFunction::constant(self.grid_size, 0.0).map_err(|e| invalid("grid_size", e))?;
        GridFunction::arc_indicator(self.grid_size, self.arc[0], self.arc[1]).map_err(|e| invalid("arc", e))?;
        if self.pieces == 0 {
            return Err(invalid("pieces", "must be positive"));
        }
        if self.min_epsilon() > 0.25 {
            return Err(invalid("grid_size", "too coarse for any kernel"));
        }
        for &eps in &self.epsilons {
            Mollifier::new(eps).and_then(|d| d.weights(self.grid_size)).map_err(|e| invalid("epsilons", e))?;
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let n = self.grid_size;
        let seed = sub_seed(cfg, 0);
        let lo = self.min_epsilon();
        let instances = collect(par_replicates(seed, cfg.replicates, |_, rng| {
            let delta = Mollifier::new(lo + (0.25 - lo) * rng.random::<f64>())?;
            let h = rng.random_range(1..n / 2) as f64 / n as f64;
            let f = GridFunction::random_step(n, self.pieces, rng)?;
            let smooth = convolve(&delta, &f)?;
            let c = GridFunction::constant(n, 2.0 * rng.random::<f64>() - 1.0)?;
            let c_dev = convolve(&delta, &c)?.combine(1.0, &c, -1.0)?.sup_norm();
            let bound = gcont_bound_check(&delta, &f, &[h])?;
            Ok((smooth.l1_norm() - f.l1_norm(), bound.statistic, c_dev))
        }))?;
        let k = instances.len();
        let excess = instances.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let margin = instances.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let const_dev = instances.iter().map(|t| t.2).fold(0.0, f64::max);

        let mut out = Outcome::default();
        out.reports.push(TestReport::check("l1_contraction", excess, excess <= QUADRATURE_SLACK, k).with_seed(seed));
        out.reports.push(TestReport::check("gcont_bound_check", margin, margin >= -QUADRATURE_SLACK, k).with_seed(seed));
        out.reports.push(TestReport::check("constant_invariance", const_dev, const_dev <= 1e-10, k).with_seed(seed));

        let arc = GridFunction::arc_indicator(n, self.arc[0], self.arc[1])?;
        let mut errors = Vec::new();
        for &eps in &self.epsilons {
            let r = l1_approx_check(&Mollifier::new(eps)?, &arc)?;
            let err = r.detail("l1_error").unwrap_or(f64::NAN);
            out.reports.push(r);
            out.reports.push(
                TestReport::check("arc_l1_bound", eps - err, err <= eps + QUADRATURE_SLACK, n)
                    .with_detail("epsilon", eps)
                    .with_detail("l1_error", err),
            );
            errors.push((eps, err));
        }
        errors.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = errors.windows(2).all(|w| w[0].1 < w[1].1);
        out.reports.push(TestReport::check("arc_l1_monotone", errors.len() as f64, monotone, errors.len()));

        if let Some(&eps) = self.epsilons.first() {
            let smooth = convolve(&Mollifier::new(eps)?, &arc)?;
            let rows = (0..n)
                .map(|i| vec![i as f64 / n as f64, arc.values()[i], smooth.values()[i]])
                .collect();
            out.series.insert(SeriesKind::MollificationProfile, Series::new(&["x", "f", "delta_conv_f"], rows));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrdersUniform {
    /// Size of the orders whose law is tested against `1/n!`.
    pub n: usize,
    /// Size of the orders used for the betweenness frequency.
    pub betweenness_size: usize,
    /// `[i, k, j]`: estimates `P(i < k < j | i < j)`.
    pub betweenness: [usize; 3],
    /// Sample size of the betweenness estimate; defaults to `replicates`.
    pub betweenness_replicates: Option<usize>,
}

impl Default for OrdersUniform {
    fn default() -> Self {
        OrdersUniform { n: 3, betweenness_size: 4, betweenness: [0, 2, 1], betweenness_replicates: None }
    }
}

/// Largest `n` whose `n!` cells are tabulated.
const MAX_ORDER_SIZE: usize = 8;

impl OrdersUniform {
    pub fn validate(&self) -> Result<(), RunError> {
        if !(1..=MAX_ORDER_SIZE).contains(&self.n) {
            return Err(invalid("n", format!("must lie in 1..={MAX_ORDER_SIZE}")));
        }
        let [i, k, j] = self.betweenness;
        if i == k || k == j || i == j || [i, k, j].iter().any(|&x| x >= self.betweenness_size) {
            return Err(invalid("betweenness", "indices must be distinct and below betweenness_size"));
        }
        if self.betweenness_replicates == Some(0) {
            return Err(invalid("betweenness_replicates", "must be positive"));
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let seed = sub_seed(cfg, 0);
        let cells: usize = (1..=self.n).product();
        let indices = par_replicates(seed, cfg.replicates, |_, rng| sample_uniform_order(self.n, rng).lex_index());
        let mut observed = vec![0u64; cells];
        for i in indices {
            observed[i] += 1;
        }
        let mut out = Outcome::default();
        let probs = vec![1.0 / cells as f64; cells];
        out.reports.push(chi_square_gof("uniform_order", &observed, &probs, cfg.alpha)?.with_seed(seed));

        let seed = sub_seed(cfg, 1);
        let [i, k, j] = self.betweenness;
        let flags = par_replicates(seed, self.betweenness_replicates.unwrap_or(cfg.replicates), |_, rng| {
            let ord = sample_uniform_order(self.betweenness_size, rng);
            ord.less(i, j).then(|| ord.less(i, k) && ord.less(k, j))
        });
        let conditioned = flags.iter().flatten().count() as u64;
        let between = flags.iter().flatten().filter(|&&b| b).count() as u64;
        let r = binomial_test("betweenness", between, conditioned, 1.0 / 3.0, cfg.alpha)?;
        let within = match (r.detail("expected"), r.detail("sigma")) {
            (Some(e), Some(s)) => (r.statistic - e).abs() <= 3.0 * s,
            _ => false,
        };
        out.reports.push(r.require(within).with_seed(seed));
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    Rationals,
    Dyadics,
    RandomDense,
}

impl OracleChoice {
    fn oracle(self, seed: u64) -> OrderOracle {
        OrderOracle::new(match self {
            OracleChoice::Rationals => OracleKind::Rationals,
            OracleChoice::Dyadics => OracleKind::Dyadics,
            OracleChoice::RandomDense => OracleKind::RandomDense { seed },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackAndForth {
    pub a: OracleChoice,
    pub b: OracleChoice,
    pub steps: usize,
    /// Every run must match the first `cover` elements of both sides.
    pub cover: usize,
}

impl Default for BackAndForth {
    fn default() -> Self {
        BackAndForth { a: OracleChoice::RandomDense, b: OracleChoice::Rationals, steps: 200, cover: 100 }
    }
}

impl BackAndForth {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.steps < 2 * self.cover {
            return Err(invalid("steps", format!("{} steps cannot cover {} elements per side", self.steps, self.cover)));
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let seed = sub_seed(cfg, 0);
        let runs = collect(par_replicates(seed, cfg.replicates, |_, rng| {
            let (mut a, mut b) = (self.a.oracle(rng.next_u64()), self.b.oracle(rng.next_u64()));
            let iso = back_and_forth(&mut a, &mut b, self.steps)?;
            Ok((iso.is_valid() && iso.covers_first(self.cover), a.enumerated().max(b.enumerated())))
        }))?;
        let failures = runs.iter().filter(|r| !r.0).count();
        let deepest = runs.iter().map(|r| r.1).max().unwrap_or(0);
        let r = TestReport::check("back_and_forth", failures as f64, failures == 0, runs.len())
            .with_seed(seed)
            .with_detail("steps", self.steps as f64)
            .with_detail("cover", self.cover as f64)
            .with_detail("max_enumerated", deepest as f64);
        Ok(Outcome { reports: vec![r], ..Outcome::default() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Whirly {
    pub depth: u32,
}

impl Default for Whirly {
    fn default() -> Self {
        Whirly { depth: 8 }
    }
}

fn random_set(alg: CellAlgebra, within: Option<&CellSet>, rng: &mut impl Rng) -> CellSet {
    let density: f64 = rng.random();
    let allowed: Vec<usize> = match within {
        Some(w) => w.iter().collect(),
        None => (0..alg.cells()).collect(),
    };
    let mut s = alg.empty();
    for &i in &allowed {
        if rng.random::<f64>() < density {
            s.insert(i);
        }
    }
    if s.is_empty() {
        s.insert(allowed[rng.random_range(0..allowed.len())]);
    }
    s
}

impl Whirly {
    pub fn validate(&self) -> Result<(), RunError> {
        let alg = CellAlgebra::new(self.depth).map_err(|e| invalid("depth", e))?;
        if 2.0 * alg.cell_mass() >= 1.0 {
            return Err(invalid("depth", "needs at least two cells per swap"));
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let alg = CellAlgebra::new(self.depth)?;
        let family = alg.dyadic_family();
        let grid_bound = 2.0 * alg.cell_mass();
        let seed = sub_seed(cfg, 0);
        let runs = collect(par_replicates(seed, cfg.replicates, |_, rng| {
            let a = random_set(alg, None, rng);
            let complement = alg.full().difference(&a)?;
            // half of the pairs start disjoint so that a real swap is needed
            let b = if rng.random::<bool>() && !complement.is_empty() {
                random_set(alg, Some(&complement), rng)
            } else {
                random_set(alg, None, rng)
            };
            let eps = grid_bound + (1.0 - grid_bound) * open_unit(rng);
            let s = swap_witness(&a, &b, eps)?;
            let overlap = a.intersection(&s.apply(&b)?)?.mass();
            let distance = weak_distance(&s, &family)?;
            Ok((overlap > 0.0 && distance < eps, distance / eps, !s.is_identity()))
        }))?;
        let failures = runs.iter().filter(|r| !r.0).count();
        let worst = runs.iter().map(|r| r.1).fold(0.0, f64::max);
        let swaps = runs.iter().filter(|r| r.2).count();
        let r = TestReport::check("whirly_witness", worst, failures == 0, runs.len())
            .with_seed(seed)
            .with_detail("failures", failures as f64)
            .with_detail("nontrivial_swaps", swaps as f64)
            .with_detail("depth", self.depth as f64);
        Ok(Outcome { reports: vec![r], ..Outcome::default() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Counterexample {
    pub weights: WeightSequence,
    /// Every prefix of length up to this is checked.
    pub max_prefix_len: usize,
    /// Bounds the cylinder partial sums must exceed.
    pub bounds: Vec<f64>,
    /// Allowed distance of the terms from `2^-len` past the threshold.
    pub tolerance: f64,
    /// Terms checked past the threshold.
    pub tail_checked: usize,
    pub trace_prefix: BitString,
    pub trace_terms: usize,
    /// Bits per sample in the classification check.
    pub sample_bits: usize,
    pub candidates: Vec<usize>,
    pub min_accuracy: f64,
}

impl Default for Counterexample {
    fn default() -> Self {
        Counterexample {
            weights: WeightSequence::shipped(),
            max_prefix_len: 4,
            bounds: vec![1.0, 10.0, 100.0, 1000.0],
            tolerance: 1e-3,
            tail_checked: 10_000,
            trace_prefix: "0".parse().expect("static prefix"),
            trace_terms: 1000,
            sample_bits: 20_000,
            candidates: vec![0, 1, 2, 3],
            min_accuracy: 0.99,
        }
    }
}

fn prefixes(max_len: usize) -> Vec<BitString> {
    (0..=max_len)
        .flat_map(|len| (0..1u32 << len).map(move |v| BitString::new((0..len).rev().map(|b| v >> b & 1 == 1).collect())))
        .collect()
}

impl Counterexample {
    pub fn validate(&self) -> Result<(), RunError> {
        self.weights.validate().map_err(|e| invalid("weights", e))?;
        if self.bounds.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(invalid("bounds", "must be finite and positive"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(invalid("tolerance", "must be positive"));
        }
        if self.sample_bits == 0 || self.candidates.is_empty() {
            return Err(invalid("candidates", "classification needs bits and candidates"));
        }
        if !(0.0..=1.0).contains(&self.min_accuracy) {
            return Err(invalid("min_accuracy", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn run(&self, cfg: &ExperimentConfig) -> Outcomes {
        let w = &self.weights;
        let all = prefixes(self.max_prefix_len);
        let mut out = Outcome::default();

        let mut margin = f64::INFINITY;
        let mut max_terms = 0usize;
        for p in &all {
            for &bound in &self.bounds {
                let witness = w.divergence_witness(p, bound)?;
                margin = margin.min(witness.partial_sum - bound);
                max_terms = max_terms.max(witness.n_terms);
            }
        }
        let checks = all.len() * self.bounds.len();
        out.reports.push(
            TestReport::check("divergence_witness", margin, margin > 0.0, checks)
                .with_detail("max_terms", max_terms as f64),
        );

        let mut deviation: f64 = 0.0;
        let mut max_threshold = 0usize;
        for p in &all {
            let limit = 0.5f64.powi(p.len() as i32);
            let from = w.convergence_threshold(p.len(), self.tolerance);
            max_threshold = max_threshold.max(from);
            for n in from..from + self.tail_checked {
                deviation = deviation.max((w.mu_n_cylinder(n, p) - limit).abs());
            }
        }
        out.reports.push(
            TestReport::check("term_convergence", deviation, deviation <= self.tolerance, all.len() * self.tail_checked)
                .with_detail("tolerance", self.tolerance)
                .with_detail("max_threshold", max_threshold as f64),
        );

        let seed = sub_seed(cfg, 0);
        let hits = collect(par_replicates(seed, cfg.replicates, |_, rng| {
            let n = self.candidates[rng.random_range(0..self.candidates.len())];
            let p = w.p(n);
            let bits = BitString::new((0..self.sample_bits).map(|_| rng.random::<f64>() < p).collect());
            Ok(classify_to_index(w, &bits, &self.candidates)? == n)
        }))?;
        let accuracy = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
        out.reports.push(
            TestReport::check("classify_frequency", accuracy, accuracy >= self.min_accuracy, hits.len())
                .with_seed(seed)
                .with_detail("sample_bits", self.sample_bits as f64),
        );

        if let ExtendedMass::Infinite = w.cylinder_mass(&self.trace_prefix) {
            let rows = w
                .partial_sums(&self.trace_prefix, self.trace_terms)
                .into_iter()
                .map(|(n, s)| vec![n as f64, s])
                .collect();
            out.series.insert(SeriesKind::DivergenceTrace, Series::new(&["n_terms", "partial_sum"], rows));
        }
        Ok(out)
    }
}
