//! Windows: half-open grid intervals, cylinders of `{0,1}^N`, and finite
//! disjoint unions of either.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::point::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    Interval,
    Cylinder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowSpec", into = "WindowSpec")]
pub enum Window {
    /// `[a, b)` with `a < b`.
    Interval { a: Fixed, b: Fixed },
    /// Sequences starting with the prefix; the empty prefix is the whole space.
    Cylinder(BitString),
    /// Nonempty list of pairwise-disjoint windows of one kind, never nested.
    Union(Vec<Window>),
}

impl Window {
    pub fn interval(a: f64, b: f64) -> Result<Window> {
        Window::interval_fixed(Fixed::from_f64(a)?, Fixed::from_f64(b)?)
    }

    pub fn interval_fixed(a: Fixed, b: Fixed) -> Result<Window> {
        if a >= b {
            return Err(Error::InvalidWindow(format!("empty interval [{a}, {b})")));
        }
        Ok(Window::Interval { a, b })
    }

    pub fn cylinder(prefix: &str) -> Result<Window> {
        Ok(Window::Cylinder(prefix.parse()?))
    }

    pub fn whole_sequence_space() -> Window {
        Window::Cylinder(BitString::empty())
    }

    /// Builds a union, flattening nested unions and checking disjointness.
    pub fn union(members: Vec<Window>) -> Result<Window> {
        let mut flat = Vec::new();
        for m in members {
            match m {
                Window::Union(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        let Some(first) = flat.first() else {
            return Err(Error::InvalidWindow("empty union".into()));
        };
        let kind = first.kind();
        if flat.iter().any(|w| w.kind() != kind) {
            return Err(Error::InvalidWindow("union mixes window kinds".into()));
        }
        for i in 0..flat.len() {
            for j in i + 1..flat.len() {
                if !flat[i].is_disjoint(&flat[j])? {
                    return Err(Error::InvalidWindow(format!(
                        "union members {} and {} overlap",
                        flat[i], flat[j]
                    )));
                }
            }
        }
        Ok(Window::Union(flat))
    }

    pub fn kind(&self) -> WindowKind {
        match self {
            Window::Interval { .. } => WindowKind::Interval,
            Window::Cylinder(_) => WindowKind::Cylinder,
            Window::Union(ms) => ms[0].kind(),
        }
    }

    pub fn members(&self) -> Vec<&Window> {
        match self {
            Window::Union(ms) => ms.iter().collect(),
            w => vec![w],
        }
    }

    /// Sorted tick intervals of an interval-kind window.
    pub fn tick_intervals(&self) -> Option<Vec<(i64, i64)>> {
        if self.kind() != WindowKind::Interval {
            return None;
        }
        let mut v: Vec<(i64, i64)> = self
            .members()
            .into_iter()
            .map(|m| match m {
                Window::Interval { a, b } => (a.ticks(), b.ticks()),
                _ => unreachable!("union members are never nested"),
            })
            .collect();
        v.sort_unstable();
        Some(v)
    }

    pub fn prefixes(&self) -> Option<Vec<BitString>> {
        if self.kind() != WindowKind::Cylinder {
            return None;
        }
        Some(
            self.members()
                .into_iter()
                .map(|m| match m {
                    Window::Cylinder(p) => p.clone(),
                    _ => unreachable!("union members are never nested"),
                })
                .collect(),
        )
    }

    /// Normalized window from arbitrary tick intervals; `None` when empty.
    pub fn from_tick_intervals(intervals: Vec<(i64, i64)>) -> Result<Option<Window>> {
        let merged = interval_ops::normalize(intervals);
        let mut members = merged
            .into_iter()
            .map(|(a, b)| Window::interval_fixed(Fixed::from_ticks(a)?, Fixed::from_ticks(b)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(match members.len() {
            0 => None,
            1 => members.pop(),
            _ => Some(Window::Union(members)),
        })
    }

    /// Window from pairwise-disjoint prefixes; `None` when empty.
    pub fn from_prefixes(mut prefixes: Vec<BitString>) -> Option<Window> {
        prefixes.sort();
        prefixes.dedup();
        match prefixes.len() {
            0 => None,
            1 => Some(Window::Cylinder(prefixes.pop().unwrap())),
            _ => Some(Window::Union(prefixes.into_iter().map(Window::Cylinder).collect())),
        }
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        match (self, p) {
            (Window::Interval { a, b }, Point::Real(x)) => a <= x && x < b,
            (Window::Cylinder(prefix), Point::Seq(s)) => s.in_cylinder(prefix),
            (Window::Union(ms), p) => ms.iter().any(|m| m.contains_point(p)),
            _ => false,
        }
    }

    fn same_kind(&self, other: &Window) -> Result<WindowKind> {
        let k = self.kind();
        if k != other.kind() {
            return Err(Error::SpaceMismatch(format!("windows {self} and {other} live in different spaces")));
        }
        Ok(k)
    }

    pub fn is_disjoint(&self, other: &Window) -> Result<bool> {
        Ok(match self.same_kind(other)? {
            WindowKind::Interval => interval_ops::intersect(
                &self.tick_intervals().unwrap(),
                &other.tick_intervals().unwrap(),
            )
            .is_empty(),
            WindowKind::Cylinder => {
                let a = self.prefixes().unwrap();
                let b = other.prefixes().unwrap();
                a.iter().all(|p| b.iter().all(|q| !p.comparable(q)))
            }
        })
    }

    /// Whether `other ⊆ self` as sets.
    pub fn contains_window(&self, other: &Window) -> Result<bool> {
        Ok(self.difference_of(other)?.is_none())
    }

    /// `other ∖ self`, or `None` when empty.
    fn difference_of(&self, other: &Window) -> Result<Option<Window>> {
        other.difference(self)
    }

    /// `self ∖ other`, or `None` when empty.
    pub fn difference(&self, other: &Window) -> Result<Option<Window>> {
        match self.same_kind(other)? {
            WindowKind::Interval => Window::from_tick_intervals(interval_ops::subtract(
                &self.tick_intervals().unwrap(),
                &other.tick_intervals().unwrap(),
            )),
            WindowKind::Cylinder => {
                let removed = other.prefixes().unwrap();
                let rest = self
                    .prefixes()
                    .unwrap()
                    .iter()
                    .flat_map(|p| cylinder_ops::subtract(p, &removed))
                    .collect();
                Ok(Window::from_prefixes(rest))
            }
        }
    }

    /// `self ∩ other`, or `None` when empty.
    pub fn intersection(&self, other: &Window) -> Result<Option<Window>> {
        match self.same_kind(other)? {
            WindowKind::Interval => Window::from_tick_intervals(interval_ops::intersect(
                &self.tick_intervals().unwrap(),
                &other.tick_intervals().unwrap(),
            )),
            WindowKind::Cylinder => {
                let a = self.prefixes().unwrap();
                let b = other.prefixes().unwrap();
                let mut out = Vec::new();
                for p in &a {
                    for q in &b {
                        if p.is_prefix_of(q) {
                            out.push(q.clone());
                        } else if q.is_prefix_of(p) {
                            out.push(p.clone());
                        }
                    }
                }
                Ok(Window::from_prefixes(out))
            }
        }
    }

    /// `self ∪ other` as a normalized window.
    pub fn union_with(&self, other: &Window) -> Result<Window> {
        match self.same_kind(other)? {
            WindowKind::Interval => {
                let mut all = self.tick_intervals().unwrap();
                all.extend(other.tick_intervals().unwrap());
                Ok(Window::from_tick_intervals(all)?.expect("union of nonempty windows"))
            }
            WindowKind::Cylinder => {
                let mine = self.prefixes().unwrap();
                let mut all = mine.clone();
                for q in other.prefixes().unwrap() {
                    all.extend(cylinder_ops::subtract(&q, &mine));
                }
                Ok(Window::from_prefixes(all).expect("union of nonempty windows"))
            }
        }
    }
}

pub(crate) mod interval_ops {
    /// Sorts, drops empty pieces and merges overlapping or adjacent ones.
    pub fn normalize(mut v: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
        v.retain(|&(a, b)| a < b);
        v.sort_unstable();
        let mut out: Vec<(i64, i64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    pub fn intersect(x: &[(i64, i64)], y: &[(i64, i64)]) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for &(a, b) in x {
            for &(c, d) in y {
                let lo = a.max(c);
                let hi = b.min(d);
                if lo < hi {
                    out.push((lo, hi));
                }
            }
        }
        normalize(out)
    }

    pub fn subtract(x: &[(i64, i64)], y: &[(i64, i64)]) -> Vec<(i64, i64)> {
        let y = normalize(y.to_vec());
        let mut out = Vec::new();
        for &(a, b) in x {
            let mut cur = a;
            for &(c, d) in &y {
                if d <= cur || c >= b {
                    continue;
                }
                if c > cur {
                    out.push((cur, c));
                }
                cur = cur.max(d);
                if cur >= b {
                    break;
                }
            }
            if cur < b {
                out.push((cur, b));
            }
        }
        normalize(out)
    }
}

pub(crate) mod cylinder_ops {
    use crate::bits::BitString;

    /// Cylinder `c` minus the union of `removed`, as disjoint prefixes.
    pub fn subtract(c: &BitString, removed: &[BitString]) -> Vec<BitString> {
        if removed.iter().any(|r| r.is_prefix_of(c)) {
            return Vec::new();
        }
        if !removed.iter().any(|r| c.is_prefix_of(r)) {
            return vec![c.clone()];
        }
        let mut out = subtract(&c.child(false), removed);
        out.extend(subtract(&c.child(true), removed));
        out
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Interval { a, b } => write!(f, "[{a},{b})"),
            Window::Cylinder(p) => write!(f, "c:{p}"),
            Window::Union(ms) => {
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" u ")?;
                    }
                    write!(f, "{m}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Window {
    type Err = Error;
    fn from_str(s: &str) -> Result<Window> {
        let parts: Vec<&str> = s.split(" u ").map(str::trim).collect();
        let parse_one = |p: &str| -> Result<Window> {
            if let Some(prefix) = p.strip_prefix("c:") {
                return Window::cylinder(prefix);
            }
            let inner = p
                .strip_prefix('[')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("bad window {p:?}")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad interval {p:?}")))?;
            let num = |x: &str| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}")));
            Window::interval(num(a)?, num(b)?)
        };
        if parts.len() == 1 {
            parse_one(parts[0])
        } else {
            Window::union(parts.into_iter().map(parse_one).collect::<Result<_>>()?)
        }
    }
}

/// JSON-model encoding of a window: `{"interval": [a, b]}`,
/// `{"cylinder": "101"}` or `{"union": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSpec {
    Interval([f64; 2]),
    Cylinder(String),
    Union(Vec<WindowSpec>),
}

impl TryFrom<WindowSpec> for Window {
    type Error = Error;
    fn try_from(spec: WindowSpec) -> Result<Window> {
        match spec {
            WindowSpec::Interval([a, b]) => Window::interval(a, b),
            WindowSpec::Cylinder(p) => Window::cylinder(&p),
            WindowSpec::Union(ms) => {
                Window::union(ms.into_iter().map(Window::try_from).collect::<Result<_>>()?)
            }
        }
    }
}

impl From<Window> for WindowSpec {
    fn from(w: Window) -> WindowSpec {
        match w {
            Window::Interval { a, b } => WindowSpec::Interval([a.to_f64(), b.to_f64()]),
            Window::Cylinder(p) => WindowSpec::Cylinder(p.to_string()),
            Window::Union(ms) => WindowSpec::Union(ms.into_iter().map(WindowSpec::from).collect()),
        }
    }
}
