//! Poisson point processes on finite-mass windows and, through an
//! exhaustion, on σ-finite spaces.

use std::fmt::Write as _;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ExtendedMass, IntensityMeasure};
use crate::point::Point;
use crate::rng::{RandomStream, SeedRecord};
use crate::special::ln_factorial;
use crate::window::{Window, WindowKind};

/// Poisson law of a given intensity; intensity 0 is the Dirac mass at 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonLaw {
    intensity: f64,
}

/// Intensities above this use log-space pmf evaluation and the PTRS sampler.
pub const LARGE_INTENSITY: f64 = 30.0;

impl PoissonLaw {
    pub fn new(intensity: f64) -> Result<PoissonLaw> {
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::InvalidArgument(format!("Poisson intensity {intensity}")));
        }
        Ok(PoissonLaw { intensity })
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn pmf(&self, k: u64) -> f64 {
        let lam = self.intensity;
        if lam == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if lam > LARGE_INTENSITY || k > 170 {
            return (-lam + k as f64 * lam.ln() - ln_factorial(k)).exp();
        }
        let mut p = (-lam).exp();
        for j in 1..=k {
            p *= lam / j as f64;
        }
        p
    }

    /// Smallest `K ≥ λ` with `P(X > K) ≤ tol`, certified by the geometric
    /// bound `P(X > K) ≤ pmf(K+1) / (1 − λ/(K+2))`.
    pub fn truncation(&self, tol: f64) -> u64 {
        let lam = self.intensity;
        let mut k = lam.ceil() as u64;
        loop {
            let ratio = lam / (k as f64 + 2.0);
            if ratio < 1.0 && self.pmf(k + 1) / (1.0 - ratio) <= tol {
                return k;
            }
            k += 1;
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let lam = self.intensity;
        if lam == 0.0 {
            0
        } else if lam <= LARGE_INTENSITY {
            self.sample_inversion(rng)
        } else {
            self.sample_ptrs(rng)
        }
    }

    fn sample_inversion<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let lam = self.intensity;
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-lam).exp();
        let mut cdf = p;
        while u >= cdf {
            k += 1;
            p *= lam / k as f64;
            if p == 0.0 {
                // cdf stalled below u by rounding; u is within ulps of 1
                break;
            }
            cdf += p;
        }
        k
    }

    /// Hörmann's transformed rejection with squeeze (PTRS).
    fn sample_ptrs<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        let lam = self.intensity;
        let slam = lam.sqrt();
        let loglam = lam.ln();
        let b = 0.931 + 2.53 * slam;
        let a = -0.059 + 0.024_83 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let vr = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + lam + 0.43).floor();
            if us >= 0.07 && v <= vr {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -lam + k * loglam - ln_factorial(k as u64);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

/// A finite set of distinct points inside a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub points: Vec<Point>,
    pub window: Window,
    pub seed: Option<SeedRecord>,
    /// Set when the configuration was pushed through a map whose image
    /// window could not be represented; counts must then be taken on the
    /// original configuration over preimage windows.
    #[serde(default)]
    pub probe_only: bool,
}

impl PointConfiguration {
    pub fn new(points: Vec<Point>, window: Window, seed: Option<SeedRecord>) -> Result<PointConfiguration> {
        if let Some(p) = points.iter().find(|p| !window.contains_point(p)) {
            return Err(Error::InvalidArgument(format!("point {p} lies outside {window}")));
        }
        check_distinct(&points)?;
        Ok(PointConfiguration { points, window, seed, probe_only: false })
    }

    pub fn empty(window: Window) -> PointConfiguration {
        PointConfiguration { points: Vec::new(), window, seed: None, probe_only: false }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points in `w`, which must lie inside the configuration window.
    pub fn count_in(&self, w: &Window) -> Result<usize> {
        if self.probe_only || !self.window.contains_window(w)? {
            return Err(Error::WindowNotContained);
        }
        Ok(self.points.iter().filter(|p| w.contains_point(p)).count())
    }

    /// Line-oriented text encoding.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "ergopoint-configuration 1").unwrap();
        writeln!(out, "window {}", self.window).unwrap();
        match self.seed {
            Some(s) => writeln!(out, "seed {} {} {}", s.root, s.stream, s.word_pos).unwrap(),
            None => writeln!(out, "seed none").unwrap(),
        }
        if self.probe_only {
            writeln!(out, "probe-only").unwrap();
        }
        writeln!(out, "points {}", self.points.len()).unwrap();
        for p in &self.points {
            writeln!(out, "{p}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PointConfiguration> {
        let bad = |m: &str| Error::Parse(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("ergopoint-configuration 1") {
            return Err(bad("missing header"));
        }
        let window: Window = lines
            .next()
            .and_then(|l| l.strip_prefix("window "))
            .ok_or_else(|| bad("missing window line"))?
            .parse()?;
        let seed_line = lines.next().and_then(|l| l.strip_prefix("seed ")).ok_or_else(|| bad("missing seed line"))?;
        let seed = if seed_line.trim() == "none" {
            None
        } else {
            let f: Vec<&str> = seed_line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("seed line needs root, stream and word position"));
            }
            let num = |s: &str| s.parse::<u128>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
            Some(SeedRecord { root: num(f[0])? as u64, stream: num(f[1])? as u64, word_pos: num(f[2])? })
        };
        let mut next = lines.next().ok_or_else(|| bad("missing points line"))?;
        let probe_only = next.trim() == "probe-only";
        if probe_only {
            next = lines.next().ok_or_else(|| bad("missing points line"))?;
        }
        let count: usize = next
            .strip_prefix("points ")
            .ok_or_else(|| bad("missing points line"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad point count"))?;
        let points = lines
            .take(count)
            .map(|l| parse_point(l.trim(), window.kind()))
            .collect::<Result<Vec<_>>>()?;
        if points.len() != count {
            return Err(bad("fewer points than announced"));
        }
        let mut cfg = PointConfiguration::new(points, window, seed)?;
        cfg.probe_only = probe_only;
        Ok(cfg)
    }
}

fn parse_point(s: &str, kind: WindowKind) -> Result<Point> {
    match kind {
        WindowKind::Cylinder => Ok(Point::Seq(s.parse()?)),
        WindowKind::Interval => {
            let x: f64 = s.parse().map_err(|e| Error::Parse(format!("point {s:?}: {e}")))?;
            Point::real(x)
        }
    }
}

pub(crate) fn check_distinct(points: &[Point]) -> Result<()> {
    let mut reals: Vec<i64> = points.iter().filter_map(|p| p.as_real()).map(|x| x.ticks()).collect();
    reals.sort_unstable();
    if let Some(w) = reals.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicatePoint(format!("{}", w[0] as f64 * crate::fixed::TICK)));
    }
    let mut seqs: Vec<Vec<bool>> = points.iter().filter_map(|p| p.as_seq()).map(|s| s.compare_key()).collect();
    seqs.sort();
    if let Some(w) = seqs.windows(2).find(|w| w[0] == w[1]) {
        let s: String = w[0].iter().map(|&b| if b { '1' } else { '0' }).collect();
        return Err(Error::DuplicatePoint(s));
    }
    Ok(())
}

/// Poisson count with mean `m(w)` followed by that many independent points
/// from the normalized restriction; zero mass yields no points.
fn sample_points(m: &IntensityMeasure, w: &Window, rng: &mut RandomStream) -> Result<Vec<Point>> {
    let mass = match m.measure_of(w)? {
        ExtendedMass::Finite(x) => x,
        ExtendedMass::Infinite => return Err(Error::WindowMass("inf".into())),
    };
    if mass == 0.0 {
        return Ok(Vec::new());
    }
    let k = PoissonLaw::new(mass)?.sample(rng);
    (0..k).map(|_| m.sample_point(w, rng)).collect()
}

/// Poisson point process of intensity `m` on the finite-mass window `w`.
pub fn sample_finite(m: &IntensityMeasure, w: &Window, rng: &mut RandomStream) -> Result<PointConfiguration> {
    m.finite_positive_mass(w)?;
    let seed = rng.record();
    let points = sample_points(m, w, rng)?;
    check_distinct(&points)?;
    Ok(PointConfiguration { points, window: w.clone(), seed: Some(seed), probe_only: false })
}

/// One realization of the process on the σ-finite space, observed on the
/// exhaustion window `V_depth`: independent samples on `V_0` and on each
/// increment `V_{k+1} ∖ V_k`, joined.
pub fn sample_sigma_finite(m: &IntensityMeasure, depth: usize, rng: &mut RandomStream) -> Result<PointConfiguration> {
    let seed = rng.record();
    let mut current = m.exhaustion(0)?;
    let mut points = sample_points(m, &current, rng)?;
    for k in 0..depth {
        let next = m.exhaustion(k + 1)?;
        if let Some(increment) = next.difference(&current)? {
            points.extend(sample_points(m, &increment, rng)?);
        }
        current = next;
    }
    check_distinct(&points)?;
    Ok(PointConfiguration { points, window: current, seed: Some(seed), probe_only: false })
}

/// `P(F ∩ w = ∅) = e^{-m(w)}`, which is 0 for infinite mass.
pub fn void_probability(m: &IntensityMeasure, w: &Window) -> Result<f64> {
    Ok(match m.measure_of(w)? {
        ExtendedMass::Finite(x) => (-x).exp(),
        ExtendedMass::Infinite => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterexample::WeightSequence;
    use crate::rng::stream;

    fn iv(a: f64, b: f64) -> Window {
        Window::interval(a, b).unwrap()
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(PoissonLaw::new(0.0).unwrap().pmf(0), 1.0);
        assert_eq!(PoissonLaw::new(0.0).unwrap().pmf(3), 0.0);
        assert!((PoissonLaw::new(1.0).unwrap().pmf(0) - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((PoissonLaw::new(2.0).unwrap().pmf(2) - 0.270_670_566_473_225_4).abs() < 1e-15);
        assert!(PoissonLaw::new(-1.0).is_err());
    }

    #[test]
    fn pmf_log_space_agrees_with_product_form() {
        // at the switch point both routes must agree
        let lam = 30.0;
        let law = PoissonLaw::new(lam).unwrap();
        for k in [0u64, 10, 30, 60] {
            let log_form = (-lam + k as f64 * f64::ln(lam) - ln_factorial(k)).exp();
            assert!((law.pmf(k) - log_form).abs() <= 1e-12 * log_form);
        }
    }

    #[test]
    fn pmf_sums_to_one_up_to_truncation() {
        for &lam in &[0.5, 1.0, 5.0, 29.0, 31.0, 200.0] {
            let law = PoissonLaw::new(lam).unwrap();
            let k = law.truncation(1e-14);
            let s: f64 = (0..=k).map(|j| law.pmf(j)).sum();
            assert!((s - 1.0).abs() < 1e-12, "lam={lam} sum={s}");
        }
    }

    #[test]
    fn sample_count_zero_intensity() {
        let mut rng = stream(1, 0);
        let law = PoissonLaw::new(0.0).unwrap();
        assert!((0..1000).all(|_| law.sample(&mut rng) == 0));
    }

    #[test]
    fn count_in_examples() {
        let w = iv(0.0, 1.0);
        let pts = [0.1, 0.4, 0.9].iter().map(|&x| Point::real(x).unwrap()).collect();
        let cfg = PointConfiguration::new(pts, w.clone(), None).unwrap();
        assert_eq!(cfg.count_in(&iv(0.0, 0.5)).unwrap(), 2);
        assert_eq!(PointConfiguration::empty(w).count_in(&iv(0.2, 0.3)).unwrap(), 0);
        assert_eq!(cfg.count_in(&iv(0.5, 1.5)), Err(Error::WindowNotContained));
    }

    #[test]
    fn configuration_rejects_duplicates_and_strays() {
        let w = iv(0.0, 1.0);
        let dup = vec![Point::real(0.5).unwrap(), Point::real(0.5).unwrap()];
        assert!(matches!(PointConfiguration::new(dup, w.clone(), None), Err(Error::DuplicatePoint(_))));
        let stray = vec![Point::real(1.5).unwrap()];
        assert!(PointConfiguration::new(stray, w, None).is_err());
    }

    #[test]
    fn void_probability_examples() {
        let m = IntensityMeasure::uniform(1.0, 0.0, 1.0).unwrap();
        assert_eq!(void_probability(&m, &iv(2.0, 3.0)).unwrap(), 1.0);
        let ln2 = IntensityMeasure::uniform(std::f64::consts::LN_2, 0.0, 1.0).unwrap();
        assert!((void_probability(&ln2, &iv(0.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        let s = IntensityMeasure::sigma_sum(WeightSequence::shipped()).unwrap();
        assert_eq!(void_probability(&s, &Window::cylinder("1").unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn same_seed_same_configuration() {
        let m = IntensityMeasure::uniform_line(3.0).unwrap();
        let a = sample_sigma_finite(&m, 2, &mut stream(9, 4)).unwrap();
        let b = sample_sigma_finite(&m, 2, &mut stream(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.window, iv(-3.0, 3.0));
    }

    #[test]
    fn text_and_json_roundtrip() {
        let m = IntensityMeasure::uniform(4.0, 0.0, 2.0).unwrap();
        let cfg = sample_finite(&m, &iv(0.0, 2.0), &mut stream(5, 1)).unwrap();
        assert_eq!(PointConfiguration::from_text(&cfg.to_text()).unwrap(), cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PointConfiguration>(&json).unwrap(), cfg);

        let b = IntensityMeasure::bernoulli(0.3).unwrap();
        let seq = sample_finite(&b, &Window::cylinder("").unwrap(), &mut stream(5, 2)).unwrap();
        assert_eq!(PointConfiguration::from_text(&seq.to_text()).unwrap(), seq);
    }

    #[test]
    fn seed_record_replays_a_sample() {
        let m = IntensityMeasure::uniform(2.0, 0.0, 1.0).unwrap();
        let mut rng = stream(21, 3);
        let _ = sample_finite(&m, &iv(0.0, 1.0), &mut rng).unwrap();
        let second = sample_finite(&m, &iv(0.0, 1.0), &mut rng).unwrap();
        let mut replay = RandomStream::from_record(second.seed.unwrap());
        assert_eq!(sample_finite(&m, &iv(0.0, 1.0), &mut replay).unwrap(), second);
    }

    #[test]
    fn near_degenerate_window_stays_empty() {
        let m = IntensityMeasure::uniform(1e-15, 0.0, 1.0).unwrap();
        let w = iv(0.0, 1.0);
        let mut rng = stream(77, 0);
        assert!((0..100_000).all(|_| sample_finite(&m, &w, &mut rng).unwrap().is_empty()));
    }

    #[test]
    fn sigma_finite_requires_exhaustion() {
        let s = IntensityMeasure::sigma_sum(WeightSequence::shipped()).unwrap();
        assert_eq!(sample_sigma_finite(&s, 1, &mut stream(1, 1)), Err(Error::NoExhaustion));
    }
}
