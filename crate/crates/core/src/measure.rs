//! Intensity measures on the line, the circle and binary-sequence space.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::{LazyTail, SeqPoint};
use crate::counterexample::WeightSequence;
use crate::error::{Error, Result};
use crate::fixed::{Fixed, TICK};
use crate::point::Point;
use crate::window::{Window, WindowKind};

/// A mass in `[0, +∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtendedMass {
    Finite(f64),
    Infinite,
}

impl ExtendedMass {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedMass::Finite(x) => Some(x),
            ExtendedMass::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedMass::Infinite)
    }
}

impl Add for ExtendedMass {
    type Output = ExtendedMass;
    fn add(self, rhs: ExtendedMass) -> ExtendedMass {
        match (self, rhs) {
            (ExtendedMass::Finite(a), ExtendedMass::Finite(b)) => ExtendedMass::Finite(a + b),
            _ => ExtendedMass::Infinite,
        }
    }
}

impl PartialOrd for ExtendedMass {
    fn partial_cmp(&self, other: &ExtendedMass) -> Option<Ordering> {
        match (self, other) {
            (ExtendedMass::Finite(a), ExtendedMass::Finite(b)) => a.partial_cmp(b),
            (ExtendedMass::Finite(_), ExtendedMass::Infinite) => Some(Ordering::Less),
            (ExtendedMass::Infinite, ExtendedMass::Finite(_)) => Some(Ordering::Greater),
            (ExtendedMass::Infinite, ExtendedMass::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedMass::Finite(x) => write!(f, "{x}"),
            ExtendedMass::Infinite => f.write_str("inf"),
        }
    }
}

/// Density of a measure on the line with respect to Lebesgue measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Density {
    /// `values[0]` below `breaks[0]`, `values[i]` on `[breaks[i-1], breaks[i])`,
    /// and the last value from the last break on.
    PiecewiseConstant { breaks: Vec<Fixed>, values: Vec<f64> },
    /// `intercept + slope * x`
    Linear { intercept: f64, slope: f64 },
    /// `scale * exp(rate * x)`
    Exponential { scale: f64, rate: f64 },
}

impl Density {
    pub fn constant(c: f64) -> Density {
        Density::PiecewiseConstant { breaks: Vec::new(), values: vec![c] }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Density::PiecewiseConstant { breaks, values } => {
                let i = breaks.partition_point(|b| b.to_f64() <= x);
                values[i]
            }
            Density::Linear { intercept, slope } => intercept + slope * x,
            Density::Exponential { scale, rate } => scale * (rate * x).exp(),
        }
    }

    /// Constant pieces of a piecewise density clipped to `[a, b)` (ticks).
    fn pieces(breaks: &[Fixed], values: &[f64], a: i64, b: i64) -> Vec<(i64, i64, f64)> {
        let mut out = Vec::new();
        let mut lo = a;
        for (i, &v) in values.iter().enumerate() {
            let hi = breaks.get(i).map_or(b, |x| x.ticks().min(b));
            if hi > lo {
                out.push((lo, hi, v));
                lo = hi;
            }
            if lo >= b {
                break;
            }
        }
        out
    }

    /// Integral over the grid interval `[a, b)` given in ticks.
    fn integral(&self, a: i64, b: i64) -> f64 {
        if a >= b {
            return 0.0;
        }
        let (x0, x1) = (a as f64 * TICK, b as f64 * TICK);
        match self {
            Density::PiecewiseConstant { breaks, values } => Density::pieces(breaks, values, a, b)
                .into_iter()
                .map(|(lo, hi, v)| v * (hi - lo) as f64 * TICK)
                .sum(),
            Density::Linear { intercept, slope } => {
                let w = x1 - x0;
                w * (intercept + slope * 0.5 * (x0 + x1))
            }
            Density::Exponential { scale, rate } => {
                let f0 = scale * (rate * x0).exp();
                if *rate == 0.0 {
                    f0 * (x1 - x0)
                } else {
                    f0 * (rate * (x1 - x0)).exp_m1() / rate
                }
            }
        }
    }

    /// Draws from the normalized density on `[a, b)` (ticks).
    fn sample<R: RngCore + ?Sized>(&self, a: i64, b: i64, rng: &mut R) -> i64 {
        let x0 = a as f64 * TICK;
        let t = match self {
            Density::PiecewiseConstant { breaks, values } => {
                let pieces = Density::pieces(breaks, values, a, b);
                let weights: Vec<f64> = pieces.iter().map(|&(lo, hi, v)| v * (hi - lo) as f64).collect();
                let i = pick_weighted(&weights, rng);
                let (lo, hi, _) = pieces[i];
                return rng.random_range(lo..hi);
            }
            Density::Linear { intercept, slope } => {
                let target = rng.random::<f64>() * self.integral(a, b);
                let fa = intercept + slope * x0;
                let disc = (fa * fa + 2.0 * slope * target).max(0.0);
                if fa + disc.sqrt() > 0.0 {
                    2.0 * target / (fa + disc.sqrt())
                } else {
                    0.0
                }
            }
            Density::Exponential { scale, rate } => {
                let target = rng.random::<f64>() * self.integral(a, b);
                let fa = scale * (rate * x0).exp();
                if *rate == 0.0 {
                    target / fa
                } else {
                    (rate * target / fa).ln_1p() / rate
                }
            }
        };
        let ticks = (x0 + t) / TICK;
        (ticks.floor() as i64).clamp(a, b - 1)
    }

    fn validate(&self, support: &Support) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidMeasure(m.to_string()));
        match self {
            Density::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return bad("piecewise density needs one more value than breaks");
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("breaks must be strictly increasing");
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("density values must be finite and nonnegative");
                }
            }
            Density::Linear { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() {
                    return bad("linear density coefficients must be finite");
                }
                let ok_end = |end: Option<Fixed>, needed: bool| match end {
                    Some(x) => intercept + slope * x.to_f64() >= 0.0,
                    None => !needed,
                };
                if !ok_end(support.lo, *slope > 0.0) || !ok_end(support.hi, *slope < 0.0) {
                    return bad("linear density must be nonnegative on its support");
                }
            }
            Density::Exponential { scale, rate } => {
                if !(scale.is_finite() && *scale > 0.0 && rate.is_finite()) {
                    return bad("exponential density needs a positive scale and finite rate");
                }
            }
        }
        Ok(())
    }
}

/// Support interval of a density; `None` ends are unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: Option<Fixed>,
    pub hi: Option<Fixed>,
}

impl Support {
    pub fn real_line() -> Support {
        Support { lo: None, hi: None }
    }

    pub fn interval(a: f64, b: f64) -> Result<Support> {
        let (lo, hi) = (Fixed::from_f64(a)?, Fixed::from_f64(b)?);
        if lo >= hi {
            return Err(Error::InvalidMeasure(format!("empty support [{a}, {b})")));
        }
        Ok(Support { lo: Some(lo), hi: Some(hi) })
    }

    fn clip(&self, a: i64, b: i64) -> (i64, i64) {
        (
            self.lo.map_or(a, |lo| a.max(lo.ticks())),
            self.hi.map_or(b, |hi| b.min(hi.ticks())),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Line,
    Circle,
    Sequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum IntensityMeasure {
    LebesgueDensity { density: Density, support: Support },
    BernoulliProduct { p: f64 },
    SigmaSum { weights: WeightSequence },
    CircleUniform { total_mass: f64 },
}

impl IntensityMeasure {
    pub fn lebesgue(density: Density, support: Support) -> Result<IntensityMeasure> {
        density.validate(&support)?;
        Ok(IntensityMeasure::LebesgueDensity { density, support })
    }

    /// Constant density `c` on `[a, b)`.
    pub fn uniform(c: f64, a: f64, b: f64) -> Result<IntensityMeasure> {
        IntensityMeasure::lebesgue(Density::constant(c), Support::interval(a, b)?)
    }

    /// Constant density `c` on the whole line.
    pub fn uniform_line(c: f64) -> Result<IntensityMeasure> {
        IntensityMeasure::lebesgue(Density::constant(c), Support::real_line())
    }

    pub fn bernoulli(p: f64) -> Result<IntensityMeasure> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidMeasure(format!("Bernoulli parameter {p} outside (0,1)")));
        }
        Ok(IntensityMeasure::BernoulliProduct { p })
    }

    pub fn sigma_sum(weights: WeightSequence) -> Result<IntensityMeasure> {
        weights.validate()?;
        Ok(IntensityMeasure::SigmaSum { weights })
    }

    pub fn circle(total_mass: f64) -> Result<IntensityMeasure> {
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::InvalidMeasure(format!("circle mass {total_mass} must be positive")));
        }
        Ok(IntensityMeasure::CircleUniform { total_mass })
    }

    /// Re-checks constructor invariants, for values that arrived through
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            IntensityMeasure::LebesgueDensity { density, support } => {
                if let (Some(lo), Some(hi)) = (support.lo, support.hi) {
                    if lo >= hi {
                        return Err(Error::InvalidMeasure("empty support".into()));
                    }
                }
                density.validate(support)
            }
            IntensityMeasure::BernoulliProduct { p } => IntensityMeasure::bernoulli(*p).map(|_| ()),
            IntensityMeasure::SigmaSum { weights } => weights.validate(),
            IntensityMeasure::CircleUniform { total_mass } => IntensityMeasure::circle(*total_mass).map(|_| ()),
        }
    }

    pub fn space(&self) -> Space {
        match self {
            IntensityMeasure::LebesgueDensity { .. } => Space::Line,
            IntensityMeasure::CircleUniform { .. } => Space::Circle,
            IntensityMeasure::BernoulliProduct { .. } | IntensityMeasure::SigmaSum { .. } => Space::Sequence,
        }
    }

    fn check_window(&self, w: &Window) -> Result<()> {
        let ok = match (self.space(), w.kind()) {
            (Space::Line, WindowKind::Interval) => true,
            (Space::Circle, WindowKind::Interval) => w
                .tick_intervals()
                .unwrap()
                .iter()
                .all(|&(a, b)| a >= 0 && b <= Fixed::ONE.ticks()),
            (Space::Sequence, WindowKind::Cylinder) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!("window {w} does not lie in the space of {:?}", self.space())))
        }
    }

    pub fn measure_of(&self, w: &Window) -> Result<ExtendedMass> {
        self.check_window(w)?;
        Ok(match self {
            IntensityMeasure::LebesgueDensity { density, support } => ExtendedMass::Finite(
                w.tick_intervals()
                    .unwrap()
                    .into_iter()
                    .map(|(a, b)| {
                        let (a, b) = support.clip(a, b);
                        density.integral(a, b)
                    })
                    .sum(),
            ),
            IntensityMeasure::CircleUniform { total_mass } => ExtendedMass::Finite(
                w.tick_intervals()
                    .unwrap()
                    .into_iter()
                    .map(|(a, b)| total_mass * (b - a) as f64 * TICK)
                    .sum(),
            ),
            IntensityMeasure::BernoulliProduct { p } => ExtendedMass::Finite(
                w.prefixes()
                    .unwrap()
                    .iter()
                    .map(|prefix| crate::counterexample::bernoulli_cylinder(*p, prefix))
                    .sum(),
            ),
            IntensityMeasure::SigmaSum { weights } => w
                .prefixes()
                .unwrap()
                .iter()
                .map(|prefix| weights.cylinder_mass(prefix))
                .fold(ExtendedMass::Finite(0.0), |acc, m| acc + m),
        })
    }

    /// Mass of `w`, required finite and positive.
    pub fn finite_positive_mass(&self, w: &Window) -> Result<f64> {
        match self.measure_of(w)? {
            ExtendedMass::Finite(m) if m > 0.0 && m.is_finite() => Ok(m),
            other => Err(Error::WindowMass(other.to_string())),
        }
    }

    /// One draw from the normalized restriction of the measure to `w`.
    pub fn sample_point<R: RngCore + ?Sized>(&self, w: &Window, rng: &mut R) -> Result<Point> {
        self.finite_positive_mass(w)?;
        let members = w.members();
        let weights = members
            .iter()
            .map(|m| self.measure_of(m).map(|x| x.finite().unwrap_or(0.0)))
            .collect::<Result<Vec<_>>>()?;
        let member = members[pick_weighted(&weights, rng)];
        self.sample_in_member(member, rng)
    }

    fn sample_in_member<R: RngCore + ?Sized>(&self, member: &Window, rng: &mut R) -> Result<Point> {
        match (self, member) {
            (IntensityMeasure::LebesgueDensity { density, support }, Window::Interval { a, b }) => {
                let (lo, hi) = support.clip(a.ticks(), b.ticks());
                Ok(Point::Real(Fixed::from_ticks(density.sample(lo, hi, rng))?))
            }
            (IntensityMeasure::CircleUniform { .. }, Window::Interval { a, b }) => {
                Ok(Point::Real(Fixed::from_ticks(rng.random_range(a.ticks()..b.ticks()))?))
            }
            (IntensityMeasure::BernoulliProduct { p }, Window::Cylinder(prefix)) => Ok(Point::Seq(SeqPoint::new(
                prefix.clone(),
                Some(LazyTail { key: rng.next_u64(), p: *p }),
            ))),
            _ => Err(Error::SpaceMismatch(format!("cannot sample {:?} on {member}", self.space()))),
        }
    }

    /// The `n`-th window of the shipped exhaustion rule.
    ///
    /// Line: `[-(n+1), n+1)` clipped to the support; a support bounded on one
    /// side only grows from that end (`[lo, lo+n+1)` or `[hi-n-1, hi)`).
    /// Circle and Bernoulli product: the whole space for every `n`.
    pub fn exhaustion(&self, n: usize) -> Result<Window> {
        let w = match self {
            IntensityMeasure::SigmaSum { .. } => return Err(Error::NoExhaustion),
            IntensityMeasure::BernoulliProduct { .. } => Window::whole_sequence_space(),
            IntensityMeasure::CircleUniform { .. } => Window::interval_fixed(Fixed::ZERO, Fixed::ONE)?,
            IntensityMeasure::LebesgueDensity { support, .. } => {
                let r = Fixed::from_int(n as i64 + 1)?;
                let (lo, hi) = match (support.lo, support.hi) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    (Some(lo), None) => (lo, lo.checked_add(r)?),
                    (None, Some(hi)) => (hi.checked_sub(r)?, hi),
                    (None, None) => (-r, r),
                };
                Window::interval_fixed(lo, hi)?
            }
        };
        self.finite_positive_mass(&w)
            .map_err(|_| Error::InvalidMeasure(format!("exhaustion window {w} has degenerate mass")))?;
        Ok(w)
    }
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn pick_weighted<R: RngCore + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    if weights.len() == 1 {
        return 0;
    }
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
