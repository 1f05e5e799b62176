//! Measure-preserving maps and their action on points, windows and
//! configurations.

use serde::{Deserialize, Serialize};

use crate::bits::{BitString, SeqPoint};
use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::measure::{IntensityMeasure, Space};
use crate::perm::Permutation;
use crate::point::Point;
use crate::ppp::{sample_finite, PointConfiguration};
use crate::rng::par_replicates;
use crate::stats::{poisson_gof, TestReport};
use crate::window::Window;

/// Largest number of cylinders a permutation preimage may expand into.
pub const MAX_PREIMAGE_CYLINDERS: usize = 1 << 16;

/// Invertible maps preserving the relevant measure: Lebesgue measure on the
/// line for translations and interval swaps, Haar measure on the circle for
/// rotations, and every product measure for coordinate permutations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeasurePreservingMap {
    Translation { t: Fixed },
    /// `x ↦ x + t mod 1`, with `t ∈ [0,1)`.
    Rotation { t: Fixed },
    /// `(σx)_n = x_{σ⁻¹(n)}`.
    CoordinatePermutation { sigma: Permutation },
    /// `x+r` on `(q−r, q)`, `x−r` on `(q, q+r)`, identity elsewhere.
    IntervalSwap { q: Fixed, r: Fixed },
    /// `[g, h]` acts as `g ∘ h`. The empty composition is the identity.
    Composition { maps: Vec<MeasurePreservingMap> },
}

impl MeasurePreservingMap {
    pub fn identity() -> MeasurePreservingMap {
        MeasurePreservingMap::Composition { maps: Vec::new() }
    }

    pub fn translation(t: f64) -> Result<MeasurePreservingMap> {
        Ok(MeasurePreservingMap::Translation { t: Fixed::from_f64(t)? })
    }

    pub fn rotation(t: f64) -> Result<MeasurePreservingMap> {
        Ok(MeasurePreservingMap::Rotation { t: Fixed::from_f64(t.rem_euclid(1.0))?.wrap_unit() })
    }

    pub fn permutation(sigma: Permutation) -> MeasurePreservingMap {
        MeasurePreservingMap::CoordinatePermutation { sigma }
    }

    pub fn interval_swap(q: f64, r: f64) -> Result<MeasurePreservingMap> {
        let g = MeasurePreservingMap::IntervalSwap { q: Fixed::from_f64(q)?, r: Fixed::from_f64(r)? };
        g.validate()?;
        Ok(g)
    }

    pub fn compose(maps: Vec<MeasurePreservingMap>) -> Result<MeasurePreservingMap> {
        let g = MeasurePreservingMap::Composition { maps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasurePreservingMap::Rotation { t } if *t != t.wrap_unit() => {
                Err(Error::InvalidMap(format!("rotation angle {t} outside [0,1)")))
            }
            MeasurePreservingMap::IntervalSwap { q, r } => {
                if r.ticks() <= 0 {
                    return Err(Error::InvalidMap(format!("swap radius {r} must be positive")));
                }
                q.checked_sub(*r)?;
                q.checked_add(*r)?;
                Ok(())
            }
            MeasurePreservingMap::Composition { maps } => {
                maps.iter().try_for_each(MeasurePreservingMap::validate)?;
                let spaces: Vec<Space> = maps.iter().filter_map(MeasurePreservingMap::space).collect();
                if spaces.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::SpaceMismatch("composition mixes spaces".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The space acted on; `None` for the identity, which acts on all.
    pub fn space(&self) -> Option<Space> {
        match self {
            MeasurePreservingMap::Translation { .. } | MeasurePreservingMap::IntervalSwap { .. } => Some(Space::Line),
            MeasurePreservingMap::Rotation { .. } => Some(Space::Circle),
            MeasurePreservingMap::CoordinatePermutation { .. } => Some(Space::Sequence),
            MeasurePreservingMap::Composition { maps } => maps.iter().find_map(MeasurePreservingMap::space),
        }
    }

    fn mismatch(&self, what: &str) -> Error {
        Error::SpaceMismatch(format!("{what} is not in the space of {:?}", self.space()))
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        match (self, x) {
            (MeasurePreservingMap::Translation { t }, Point::Real(x)) => Ok(Point::Real(x.checked_add(*t)?)),
            (MeasurePreservingMap::Rotation { t }, Point::Real(x)) => {
                if *x != x.wrap_unit() {
                    return Err(self.mismatch(&format!("point {x}")));
                }
                Ok(Point::Real((*x + *t).wrap_unit()))
            }
            (MeasurePreservingMap::IntervalSwap { q, r }, Point::Real(x)) => {
                let y = if *q - *r < *x && x < q {
                    *x + *r
                } else if q < x && *x < *q + *r {
                    *x - *r
                } else {
                    *x
                };
                Ok(Point::Real(y))
            }
            (MeasurePreservingMap::CoordinatePermutation { sigma }, Point::Seq(s)) => {
                Ok(Point::Seq(permute_point(sigma, s)?))
            }
            (MeasurePreservingMap::Composition { maps }, x) => {
                maps.iter().rev().try_fold(x.clone(), |y, g| g.apply(&y))
            }
            (_, x) => Err(self.mismatch(&format!("point {x}"))),
        }
    }

    pub fn inverse(&self) -> MeasurePreservingMap {
        match self {
            MeasurePreservingMap::Translation { t } => MeasurePreservingMap::Translation { t: -*t },
            MeasurePreservingMap::Rotation { t } => MeasurePreservingMap::Rotation { t: (-*t).wrap_unit() },
            MeasurePreservingMap::CoordinatePermutation { sigma } => {
                MeasurePreservingMap::CoordinatePermutation { sigma: sigma.inverse() }
            }
            MeasurePreservingMap::IntervalSwap { .. } => self.clone(),
            MeasurePreservingMap::Composition { maps } => MeasurePreservingMap::Composition {
                maps: maps.iter().rev().map(MeasurePreservingMap::inverse).collect(),
            },
        }
    }

    /// `g⁻¹(w)` as an exact window.
    pub fn preimage_window(&self, w: &Window) -> Result<Window> {
        let intervals = || w.tick_intervals().ok_or_else(|| self.mismatch(&format!("window {w}")));
        let rebuild = |v: Vec<(i64, i64)>| {
            Window::from_tick_intervals(v)?.ok_or_else(|| Error::Unrepresentable("empty preimage".into()))
        };
        match self {
            MeasurePreservingMap::Translation { t } => {
                rebuild(intervals()?.into_iter().map(|(a, b)| (a - t.ticks(), b - t.ticks())).collect())
            }
            MeasurePreservingMap::Rotation { t } => {
                let one = Fixed::ONE.ticks();
                let mut out = Vec::new();
                for (a, b) in intervals()? {
                    if a < 0 || b > one {
                        return Err(self.mismatch(&format!("window {w}")));
                    }
                    let (a, b) = (a - t.ticks(), b - t.ticks());
                    if b <= 0 {
                        out.push((a + one, b + one));
                    } else if a < 0 {
                        out.push((a + one, one));
                        out.push((0, b));
                    } else {
                        out.push((a, b));
                    }
                }
                rebuild(out)
            }
            MeasurePreservingMap::IntervalSwap { q, r } => {
                // An involution: the preimage is the image.
                let (q, r) = (q.ticks(), r.ticks());
                let regions = [
                    (i64::MIN, q - r + 1, 0),
                    (q - r + 1, q, r),
                    (q, q + 1, 0),
                    (q + 1, q + r, -r),
                    (q + r, i64::MAX, 0),
                ];
                let mut out = Vec::new();
                for (a, b) in intervals()? {
                    for &(lo, hi, shift) in &regions {
                        let (lo, hi) = (a.max(lo), b.min(hi));
                        if lo < hi {
                            out.push((lo + shift, hi + shift));
                        }
                    }
                }
                rebuild(out)
            }
            MeasurePreservingMap::CoordinatePermutation { sigma } => {
                let prefixes = w.prefixes().ok_or_else(|| self.mismatch(&format!("window {w}")))?;
                let mut out = Vec::new();
                for p in &prefixes {
                    out.extend(permutation_preimage(sigma, p)?);
                    if out.len() > MAX_PREIMAGE_CYLINDERS {
                        return Err(Error::Unrepresentable(format!(
                            "preimage of {w} needs more than {MAX_PREIMAGE_CYLINDERS} cylinders"
                        )));
                    }
                }
                Window::from_prefixes(out).ok_or_else(|| Error::Unrepresentable("empty preimage".into()))
            }
            MeasurePreservingMap::Composition { maps } => {
                maps.iter().try_fold(w.clone(), |acc, g| g.preimage_window(&acc))
            }
        }
    }

    /// `g(w)`.
    pub fn image_window(&self, w: &Window) -> Result<Window> {
        self.inverse().preimage_window(w)
    }

    /// The pointwise image `g·F`. The window becomes `g(window)`, or the
    /// configuration turns probe-only when that cannot be represented.
    pub fn push_config(&self, cfg: &PointConfiguration) -> Result<PointConfiguration> {
        let points = cfg.points.iter().map(|p| self.apply(p)).collect::<Result<Vec<_>>>()?;
        let (window, probe_only) = match self.image_window(&cfg.window) {
            Ok(w) => (w, cfg.probe_only),
            Err(Error::Unrepresentable(_)) => (cfg.window.clone(), true),
            Err(e) => return Err(e),
        };
        Ok(PointConfiguration { points, window, seed: cfg.seed, probe_only })
    }

    /// `|g·F ∩ w|`, counted as `|F ∩ g⁻¹(w)|`.
    pub fn pushed_count(&self, cfg: &PointConfiguration, w: &Window) -> Result<usize> {
        cfg.count_in(&self.preimage_window(w)?)
    }
}

fn permute_point(sigma: &Permutation, x: &SeqPoint) -> Result<SeqPoint> {
    let x = x.materialize(sigma.support_bound()).map_err(|_| {
        Error::Unrepresentable(format!("point {x} is too short for permutation {sigma}"))
    })?;
    let inv = sigma.inverse();
    let head = (0..x.head.len())
        .map(|n| x.head.get(inv.apply(n)).expect("support lies inside the head"))
        .collect();
    Ok(SeqPoint::new(BitString::new(head), x.tail))
}

/// `σ⁻¹(C_p)` = sequences with `x_m = p_{σ(m)}` whenever `σ(m) < |p|`;
/// unconstrained coordinates below the last constrained one are expanded.
fn permutation_preimage(sigma: &Permutation, p: &BitString) -> Result<Vec<BitString>> {
    let len = (0..p.len()).map(|n| sigma.inverse().apply(n) + 1).max().unwrap_or(0);
    let constraint: Vec<Option<bool>> = (0..len).map(|m| p.get(sigma.apply(m))).collect();
    let free = constraint.iter().filter(|c| c.is_none()).count();
    if free >= 16 || (!p.is_empty() && 1usize << free > MAX_PREIMAGE_CYLINDERS) {
        return Err(Error::Unrepresentable(format!("preimage of cylinder {p} under {sigma}")));
    }
    let mut out = Vec::with_capacity(1 << free);
    for mask in 0..(1usize << free) {
        let mut k = 0;
        let bits = constraint
            .iter()
            .map(|c| {
                c.unwrap_or_else(|| {
                    k += 1;
                    mask >> (k - 1) & 1 == 1
                })
            })
            .collect();
        out.push(BitString::new(bits));
    }
    Ok(out)
}

/// Samples `n` configurations of the process on `g⁻¹(w)`, pushes each
/// through `g`, and tests the counts in `w` against Poisson(`m(w)`).
pub fn equivariance_experiment(
    m: &IntensityMeasure,
    g: &MeasurePreservingMap,
    w: &Window,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<TestReport> {
    let pre = g.preimage_window(w)?;
    let mass = m.finite_positive_mass(w)?;
    m.finite_positive_mass(&pre)?;
    let counts = par_replicates(seed, n, |_, rng| -> Result<u64> {
        let cfg = sample_finite(m, &pre, rng)?;
        let pushed = g.push_config(&cfg)?;
        let k = if pushed.probe_only { g.pushed_count(&cfg, w)? } else { pushed.count_in(w)? };
        Ok(k as u64)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut report = poisson_gof(&counts, mass, alpha)?.with_seed(seed);
    report.test_name = "equivariance_experiment".into();
    Ok(report)
}
