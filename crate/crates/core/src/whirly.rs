//! Dyadic discretization of the measure algebra of `[0, 1)`.
//!
//! At depth `d` the algebra has `2^d` cells `[i/2^d, (i+1)/2^d)` of equal
//! mass. Sets are unions of cells and transformations are permutations of
//! cells, so every transformation preserves mass exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest supported algebra.
pub const MAX_DEPTH: u32 = 20;

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_DEPTH {
        return Err(Error::InvalidArgument(format!("depth {depth} exceeds {MAX_DEPTH}")));
    }
    Ok(())
}

fn mismatch(a: u32, b: u32) -> Error {
    Error::SpaceMismatch(format!("depth {a} vs depth {b}"))
}

/// The algebra generated by the dyadic cells of one depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellAlgebra {
    depth: u32,
}

impl CellAlgebra {
    pub fn new(depth: u32) -> Result<CellAlgebra> {
        check_depth(depth)?;
        Ok(CellAlgebra { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn cells(&self) -> usize {
        1 << self.depth
    }

    pub fn cell_mass(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// Endpoints of cell `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        (i as f64 * self.cell_mass(), (i + 1) as f64 * self.cell_mass())
    }

    pub fn empty(&self) -> CellSet {
        CellSet { depth: self.depth, words: vec![0; self.cells().div_ceil(64)] }
    }

    pub fn full(&self) -> CellSet {
        self.range(0, self.cells())
    }

    /// Cells `lo..hi`.
    pub fn range(&self, lo: usize, hi: usize) -> CellSet {
        let mut s = self.empty();
        for i in lo..hi.min(self.cells()) {
            s.insert(i);
        }
        s
    }

    /// The union of cells covering `[lo, hi)`; both ends must lie on the grid.
    pub fn interval(&self, lo: f64, hi: f64) -> Result<CellSet> {
        let n = self.cells() as f64;
        let (a, b) = (lo * n, hi * n);
        if !(0.0..=n).contains(&a) || !(a..=n).contains(&b) || a.fract() != 0.0 || b.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!("[{lo}, {hi}) is not a union of depth-{} cells", self.depth)));
        }
        Ok(self.range(a as usize, b as usize))
    }

    /// All dyadic intervals of level `0..=depth`.
    pub fn dyadic_family(&self) -> Vec<CellSet> {
        (0..=self.depth)
            .flat_map(|level| {
                let width = 1usize << (self.depth - level);
                (0..1usize << level).map(move |j| self.range(j * width, (j + 1) * width))
            })
            .collect()
    }

    pub fn identity(&self) -> CellMap {
        CellMap { depth: self.depth, images: (0..self.cells()).collect() }
    }
}

/// A union of cells, encoded as a bitmask with bit `i` for cell `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CellSetRepr", into = "CellSetRepr")]
pub struct CellSet {
    depth: u32,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct CellSetRepr {
    depth: u32,
    mask: String,
}

impl TryFrom<CellSetRepr> for CellSet {
    type Error = Error;
    fn try_from(r: CellSetRepr) -> Result<CellSet> {
        CellSet::from_hex(r.depth, &r.mask)
    }
}

impl From<CellSet> for CellSetRepr {
    fn from(s: CellSet) -> CellSetRepr {
        CellSetRepr { depth: s.depth, mask: s.to_hex() }
    }
}

impl CellSet {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn algebra(&self) -> CellAlgebra {
        CellAlgebra { depth: self.depth }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < 1 << self.depth, "cell {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn mass(&self) -> f64 {
        self.count() as f64 * self.algebra().cell_mass()
    }

    /// Cell indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..1usize << self.depth).filter(|&i| self.contains(i))
    }

    fn zip(&self, other: &CellSet, f: impl Fn(u64, u64) -> u64) -> Result<CellSet> {
        if self.depth != other.depth {
            return Err(mismatch(self.depth, other.depth));
        }
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect();
        Ok(CellSet { depth: self.depth, words })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip(other, |a, b| a & !b)
    }

    pub fn symmetric_difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip(other, |a, b| a ^ b)
    }

    /// Hex digits of the mask, most significant first.
    pub fn to_hex(&self) -> String {
        let digits = (1usize << self.depth).div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (self.words[d * 4 / 64] >> (d * 4 % 64)) & 0xf;
                char::from_digit(nibble as u32, 16).unwrap()
            })
            .collect()
    }

    pub fn from_hex(depth: u32, hex: &str) -> Result<CellSet> {
        check_depth(depth)?;
        let mut s = CellAlgebra { depth }.empty();
        let hex = hex.strip_prefix("0x").unwrap_or(hex);
        if hex.is_empty() {
            return Err(Error::Parse("empty mask".into()));
        }
        for (d, c) in hex.chars().rev().enumerate() {
            let nibble = c.to_digit(16).ok_or_else(|| Error::Parse(format!("bad hex digit {c:?}")))?;
            for b in 0..4 {
                if nibble >> b & 1 == 1 {
                    let i = d * 4 + b;
                    if i >= 1 << depth {
                        return Err(Error::Parse(format!("mask {hex} has bits beyond {} cells", 1 << depth)));
                    }
                    s.insert(i);
                }
            }
        }
        Ok(s)
    }
}

impl fmt::Display for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.depth, self.to_hex())
    }
}

impl FromStr for CellSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<CellSet> {
        let (depth, mask) = s.split_once(':').ok_or_else(|| Error::Parse(format!("expected depth:mask, got {s:?}")))?;
        let depth = depth.trim().parse().map_err(|_| Error::Parse(format!("bad depth {depth:?}")))?;
        CellSet::from_hex(depth, mask.trim())
    }
}

/// A permutation of the cells of one depth.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct CellMap {
    depth: u32,
    images: Vec<usize>,
}

impl TryFrom<Vec<usize>> for CellMap {
    type Error = Error;
    fn try_from(images: Vec<usize>) -> Result<CellMap> {
        CellMap::new(images)
    }
}

impl From<CellMap> for Vec<usize> {
    fn from(m: CellMap) -> Vec<usize> {
        m.images
    }
}

impl CellMap {
    /// `images[i]` is the cell that cell `i` is sent to.
    pub fn new(images: Vec<usize>) -> Result<CellMap> {
        let n = images.len();
        if !n.is_power_of_two() {
            return Err(Error::InvalidMap(format!("{n} cells is not a power of two")));
        }
        let depth = n.trailing_zeros();
        check_depth(depth)?;
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidMap(format!("not a permutation of 0..{n}")));
            }
        }
        Ok(CellMap { depth, images })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Swaps cells `i` and `j` in place.
    pub fn transpose(&mut self, i: usize, j: usize) {
        self.images.swap(i, j);
    }

    /// Image `T(A)`.
    pub fn apply(&self, a: &CellSet) -> Result<CellSet> {
        if a.depth != self.depth {
            return Err(mismatch(self.depth, a.depth));
        }
        let mut out = a.algebra().empty();
        for i in a.iter() {
            out.insert(self.images[i]);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> CellMap {
        let mut images = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        CellMap { depth: self.depth, images }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &CellMap) -> Result<CellMap> {
        if self.depth != other.depth {
            return Err(mismatch(self.depth, other.depth));
        }
        let images = other.images.iter().map(|&j| self.images[j]).collect();
        Ok(CellMap { depth: self.depth, images })
    }
}

/// `λ(A Δ B)`.
pub fn d_lambda(a: &CellSet, b: &CellSet) -> Result<f64> {
    Ok(a.symmetric_difference(b)?.mass())
}

/// Largest `λ(T(A) Δ A)` over the family; sets of another depth are
/// rejected.
pub fn weak_distance(t: &CellMap, family: &[CellSet]) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty family".into()));
    }
    family.iter().try_fold(0.0f64, |m, a| Ok(m.max(d_lambda(&t.apply(a)?, a)?)))
}

/// A map `S` close to the identity with `λ(A ∩ S(B)) > 0`.
///
/// Returns the identity when `A` and `B` already overlap. Otherwise swaps
/// the lowest cell of `A ∖ B` with the lowest cell of `B ∖ A`, which moves
/// mass `2^{1-depth}`, so `eps` must exceed that.
pub fn swap_witness(a: &CellSet, b: &CellSet, eps: f64) -> Result<CellMap> {
    let alg = a.algebra();
    if a.depth != b.depth {
        return Err(mismatch(a.depth, b.depth));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("A and B must have positive mass".into()));
    }
    let cost = 2.0 * alg.cell_mass();
    if eps.is_nan() || eps <= cost {
        return Err(Error::InvalidArgument(format!("eps {eps} must exceed {cost} at depth {}", alg.depth)));
    }
    let mut s = alg.identity();
    if !a.intersection(b)?.is_empty() {
        return Ok(s);
    }
    let i = a.difference(b)?.iter().next().expect("A is disjoint from B and nonempty");
    let j = b.difference(a)?.iter().next().expect("B is disjoint from A and nonempty");
    s.transpose(i, j);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg(d: u32) -> CellAlgebra {
        CellAlgebra::new(d).unwrap()
    }

    #[test]
    fn d_lambda_examples() {
        let a = alg(1).interval(0.0, 0.5).unwrap();
        assert_eq!(d_lambda(&a, &a).unwrap(), 0.0);
        assert_eq!(d_lambda(&a, &alg(1).interval(0.5, 1.0).unwrap()).unwrap(), 1.0);
        let (a, b) = (alg(2).interval(0.0, 0.5).unwrap(), alg(2).interval(0.25, 0.75).unwrap());
        assert_eq!(d_lambda(&a, &b).unwrap(), 0.5);
        assert!(matches!(d_lambda(&a, &alg(3).full()), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn weak_distance_examples() {
        let a = alg(3);
        assert_eq!(weak_distance(&a.identity(), &a.dyadic_family()).unwrap(), 0.0);
        let mut t = a.identity();
        t.transpose(2, 5);
        assert!(weak_distance(&t, &a.dyadic_family()).unwrap() <= 0.25);
        let reversal = CellMap::new(vec![3, 2, 1, 0]).unwrap();
        assert_eq!(weak_distance(&reversal, &[alg(2).interval(0.0, 0.5).unwrap()]).unwrap(), 1.0);
        assert!(weak_distance(&reversal, &[]).is_err());
    }

    #[test]
    fn swap_witness_examples() {
        let a = alg(2).interval(0.0, 0.5).unwrap();
        assert!(swap_witness(&a, &a, 0.9).unwrap().is_identity());

        let d4 = alg(4);
        let (a, b) = (d4.interval(0.0, 0.5).unwrap(), d4.interval(0.5, 1.0).unwrap());
        let s = swap_witness(&a, &b, 0.2).unwrap();
        assert_eq!(s.images().iter().enumerate().filter(|(i, j)| i != *j).count(), 2);
        assert_eq!(a.intersection(&s.apply(&b).unwrap()).unwrap().mass(), 1.0 / 16.0);
        assert!(weak_distance(&s, &d4.dyadic_family()).unwrap() <= 0.125);

        assert!(swap_witness(&a, &b, 0.01).is_err());
        assert!(swap_witness(&a, &d4.empty(), 0.5).is_err());
    }

    #[test]
    fn family_size_and_hex() {
        let a = alg(3);
        assert_eq!(a.dyadic_family().len(), 15);
        let s = a.interval(0.25, 0.75).unwrap();
        assert_eq!(s.to_hex(), "3c");
        assert_eq!(CellSet::from_hex(3, "3c").unwrap(), s);
        assert_eq!(CellSet::from_hex(3, "0x03c").unwrap(), s);
        assert!(CellSet::from_hex(3, "1ff").is_err());
        assert_eq!(alg(0).full().to_hex(), "1");
        assert_eq!("3:3c".parse::<CellSet>().unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"depth":3,"mask":"3c"}"#);
        assert_eq!(serde_json::from_str::<CellSet>(&json).unwrap(), s);
    }

    #[test]
    fn cell_map_serde() {
        let m = CellMap::new(vec![1, 0, 3, 2]).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[1,0,3,2]");
        assert!(serde_json::from_str::<CellMap>("[0,1,2]").is_err());
        assert!(serde_json::from_str::<CellMap>("[0,0]").is_err());
        assert_eq!(m.compose(&m.inverse()).unwrap(), alg(2).identity());
    }
}
