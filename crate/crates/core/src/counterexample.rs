//! The measure `λ = Σ_n μ_n` on `{0,1}^N`, where `μ_n` is the Bernoulli
//! product measure of parameter `p_n`. Every cylinder has infinite mass,
//! so `λ` is σ-finite but admits no locally finite model.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::measure::ExtendedMass;

/// Mass of a cylinder under the Bernoulli(`p`) product measure.
pub fn bernoulli_cylinder(p: f64, prefix: &BitString) -> f64 {
    prefix.bits().iter().map(|&b| if b { p } else { 1.0 - p }).product()
}

/// Weights `p_n = 1/2 + c / (n + d)`.
///
/// With `c ≠ 0`, `d > 0` and `|c| / d < 1/2` every weight lies in `(0,1)`, the
/// weights are pairwise distinct and `p_n → 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub c: f64,
    pub d: f64,
}

impl Default for WeightSequence {
    fn default() -> WeightSequence {
        WeightSequence::shipped()
    }
}

impl WeightSequence {
    /// `p_n = 1/2 + 1/(n+4)`.
    pub const fn shipped() -> WeightSequence {
        WeightSequence { c: 1.0, d: 4.0 }
    }

    pub fn new(c: f64, d: f64) -> Result<WeightSequence> {
        let w = WeightSequence { c, d };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.d.is_finite() && self.c != 0.0 && self.d > 0.0) {
            return Err(Error::InvalidMeasure(format!("bad weight rule c={} d={}", self.c, self.d)));
        }
        if self.c.abs() / self.d >= 0.5 {
            return Err(Error::InvalidMeasure("weights must stay inside (0,1)".into()));
        }
        Ok(())
    }

    pub fn p(&self, n: usize) -> f64 {
        0.5 + self.c / (n as f64 + self.d)
    }

    /// Largest deviation `|p_m − 1/2|` over `m ≥ n`.
    fn deviation(&self, n: usize) -> f64 {
        self.c.abs() / (n as f64 + self.d)
    }

    /// `μ_n` of the cylinder with the given prefix.
    pub fn mu_n_cylinder(&self, n: usize, prefix: &BitString) -> f64 {
        bernoulli_cylinder(self.p(n), prefix)
    }

    /// Smallest index from which every term `μ_n(prefix)` is within `tol`
    /// of its limit `2^-L`.
    ///
    /// Each factor lies in `[1/2 − δ_n, 1/2 + δ_n]`, so the term differs from
    /// `2^-L` by at most `(1/2 + δ_n)^L − 2^-L`; that bound decreases in `n`.
    pub fn convergence_threshold(&self, prefix_len: usize, tol: f64) -> usize {
        let limit = 0.5f64.powi(prefix_len as i32);
        let bound = |n: usize| (0.5 + self.deviation(n)).powi(prefix_len as i32) - limit;
        first_index(|n| bound(n) <= tol)
    }

    /// Smallest index from which every term is at least half its limit:
    /// `(1/2 − δ_n)^L ≥ 2^-L / 2`.
    pub fn half_limit_index(&self, prefix_len: usize) -> usize {
        let limit = 0.5f64.powi(prefix_len as i32);
        first_index(|n| (0.5 - self.deviation(n)).powi(prefix_len as i32) >= 0.5 * limit)
    }

    /// Mass of a cylinder under `Σ_n μ_n`.
    ///
    /// The terms tend to `2^-L > 0`. Once an explicit index certifies that
    /// every later term is at least half that limit, the series dominates a
    /// divergent constant series and the mass is infinite.
    pub fn cylinder_mass(&self, prefix: &BitString) -> ExtendedMass {
        let from = self.half_limit_index(prefix.len());
        let limit = 0.5f64.powi(prefix.len() as i32);
        debug_assert!(self.mu_n_cylinder(from, prefix) >= 0.5 * limit);
        ExtendedMass::Infinite
    }

    /// Number of terms after which the partial sum of `μ_n(prefix)`
    /// first exceeds `bound`.
    ///
    /// Sums exactly (compensated) while the bound is at most
    /// [`EXACT_WITNESS_LIMIT`]; above that, sums exactly up to the
    /// half-limit index and then certifies the rest with the tail lower
    /// bound `2^-L / 2` per term, which yields a valid but not necessarily
    /// minimal witness.
    pub fn divergence_witness(&self, prefix: &BitString, bound: f64) -> Result<DivergenceWitness> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidArgument(format!("divergence bound {bound} must be positive")));
        }
        let mut sum = NeumaierSum::default();
        if bound <= EXACT_WITNESS_LIMIT {
            let mut n = 0;
            while sum.value() <= bound {
                sum.add(self.mu_n_cylinder(n, prefix));
                n += 1;
            }
            return Ok(DivergenceWitness { n_terms: n, partial_sum: sum.value(), exact: true });
        }
        let from = self.half_limit_index(prefix.len());
        for n in 0..from {
            sum.add(self.mu_n_cylinder(n, prefix));
        }
        let per_term = 0.5 * 0.5f64.powi(prefix.len() as i32);
        let missing = ((bound - sum.value()) / per_term).floor().max(0.0) as usize + 1;
        Ok(DivergenceWitness {
            n_terms: from + missing,
            partial_sum: sum.value() + missing as f64 * per_term,
            exact: false,
        })
    }

    /// Partial sums `(n_terms, Σ_{n<n_terms} μ_n(prefix))` for `1..=n_max`.
    pub fn partial_sums(&self, prefix: &BitString, n_max: usize) -> Vec<(usize, f64)> {
        let mut sum = NeumaierSum::default();
        (0..n_max)
            .map(|n| {
                sum.add(self.mu_n_cylinder(n, prefix));
                (n + 1, sum.value())
            })
            .collect()
    }
}

/// Bounds up to which [`WeightSequence::divergence_witness`] sums term by term.
pub const EXACT_WITNESS_LIMIT: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceWitness {
    pub n_terms: usize,
    /// Partial sum over the first `n_terms` terms (a certified lower bound
    /// when `exact` is false).
    pub partial_sum: f64,
    pub exact: bool,
}

fn first_index(pred: impl Fn(usize) -> bool) -> usize {
    // exponential then binary search over a monotone predicate
    let mut hi = 1usize;
    while !pred(hi) {
        hi *= 2;
    }
    let mut lo = 0usize;
    if pred(lo) {
        return lo;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Fraction of ones among the bits.
pub fn classify_frequency(bits: &BitString) -> Result<f64> {
    if bits.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    Ok(bits.ones() as f64 / bits.len() as f64)
}

/// Index among `candidates` whose weight is nearest to the sample's
/// frequency of ones, i.e. the `X_n` the sample most plausibly belongs to.
pub fn classify_to_index(weights: &WeightSequence, bits: &BitString, candidates: &[usize]) -> Result<usize> {
    let freq = classify_frequency(bits)?;
    candidates
        .iter()
        .copied()
        .min_by(|&a, &b| {
            (weights.p(a) - freq).abs().total_cmp(&(weights.p(b) - freq).abs())
        })
        .ok_or_else(|| Error::InvalidArgument("no candidates".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn shipped_weights() {
        let w = WeightSequence::shipped();
        assert_eq!(w.p(0), 0.75);
        assert!((w.p(1) - 0.7).abs() < 1e-15);
        assert!((w.p(16) - 0.55).abs() < 1e-15);
        assert!(WeightSequence::new(0.0, 4.0).is_err());
        assert!(WeightSequence::new(2.0, 4.0).is_err());
    }

    #[test]
    fn mu_n_cylinder_examples() {
        let w = WeightSequence::shipped();
        assert_eq!(w.mu_n_cylinder(7, &BitString::empty()), 1.0);
        assert!((w.mu_n_cylinder(1, &bs("10")) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn terms_approach_limit_beyond_threshold() {
        let w = WeightSequence::shipped();
        let prefix = bs("101");
        let t = w.convergence_threshold(3, 1e-3);
        for n in t..t + 5000 {
            assert!((w.mu_n_cylinder(n, &prefix) - 0.125).abs() <= 1e-3);
        }
        assert!(t > 0);
        assert!((w.mu_n_cylinder(t - 1, &bs("111")) - 0.125).abs() > 1e-3);
    }

    #[test]
    fn divergence_witness_examples() {
        let w = WeightSequence::shipped();
        let whole = w.divergence_witness(&BitString::empty(), 10.0).unwrap();
        assert_eq!(whole.n_terms, 11);
        assert_eq!(w.divergence_witness(&bs("1"), 1.0).unwrap().n_terms, 2);
        let three = w.divergence_witness(&bs("010"), 100.0).unwrap();
        let cap = (100.0f64 / (0.125 * 0.5)).ceil() as usize + w.half_limit_index(3);
        assert!(three.n_terms <= cap);
        assert!(three.partial_sum > 100.0);
        assert!(w.divergence_witness(&bs("1"), 0.0).is_err());
    }

    #[test]
    fn witness_is_minimal_when_exact() {
        let w = WeightSequence::shipped();
        let prefix = bs("0110");
        let wit = w.divergence_witness(&prefix, 50.0).unwrap();
        let sums = w.partial_sums(&prefix, wit.n_terms);
        assert!(sums[wit.n_terms - 1].1 > 50.0);
        assert!(sums[wit.n_terms - 2].1 <= 50.0);
    }

    #[test]
    fn large_bounds_use_certified_tail() {
        let w = WeightSequence::shipped();
        let prefix = bs("11");
        let wit = w.divergence_witness(&prefix, 1e6).unwrap();
        assert!(!wit.exact);
        assert!(wit.partial_sum > 1e6);
        let exact: f64 = (0..wit.n_terms).map(|n| w.mu_n_cylinder(n, &prefix)).sum();
        assert!(exact >= wit.partial_sum);
    }

    #[test]
    fn frequency_classification() {
        assert_eq!(classify_frequency(&bs("0000")).unwrap(), 0.0);
        assert!(classify_frequency(&BitString::empty()).is_err());
        let w = WeightSequence::shipped();
        assert_eq!(classify_to_index(&w, &bs("1110"), &[0, 16]).unwrap(), 0);
        assert_eq!(classify_to_index(&w, &bs("1100"), &[0, 16]).unwrap(), 16);
    }
}
