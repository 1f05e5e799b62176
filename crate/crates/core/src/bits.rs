//! Finite bit strings and lazily materialized points of `{0,1}^N`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite bit string, written most-significant-first as `"0110"`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> BitString {
        BitString(bits)
    }

    pub fn empty() -> BitString {
        BitString(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Two cylinders intersect iff one prefix extends the other.
    pub fn comparable(&self, other: &BitString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn child(&self, bit: bool) -> BitString {
        let mut v = self.0.clone();
        v.push(bit);
        BitString(v)
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;
    fn from_str(s: &str) -> Result<BitString> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("bad bit {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;
    fn try_from(s: String) -> Result<BitString> {
        s.parse()
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> String {
        b.to_string()
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Coordinates beyond the materialized head of a sequence point: iid
/// Bernoulli(`p`) bits derived from a per-point key by a counter-based hash,
/// so coordinate `i` is a pure function of `(key, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LazyTail {
    pub key: u64,
    pub p: f64,
}

impl LazyTail {
    pub fn bit(&self, i: usize) -> bool {
        let h = splitmix64(self.key ^ splitmix64(i as u64));
        let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u < self.p
    }
}

/// Number of leading coordinates compared when deciding whether two sequence
/// points coincide.
pub const COMPARE_DEPTH: usize = 64;

/// A point of `{0,1}^N`: an explicit head followed by an optional lazy tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqPoint {
    pub head: BitString,
    pub tail: Option<LazyTail>,
}

impl SeqPoint {
    pub fn new(head: BitString, tail: Option<LazyTail>) -> SeqPoint {
        SeqPoint { head, tail }
    }

    /// Coordinate `i`, or `None` when it lies past the head of a point
    /// without a tail.
    pub fn bit(&self, i: usize) -> Option<bool> {
        match self.head.get(i) {
            Some(b) => Some(b),
            None => self.tail.map(|t| t.bit(i)),
        }
    }

    pub fn known_len(&self) -> Option<usize> {
        match self.tail {
            Some(_) => None,
            None => Some(self.head.len()),
        }
    }

    pub fn prefix(&self, depth: usize) -> Result<BitString> {
        (0..depth)
            .map(|i| {
                self.bit(i).ok_or_else(|| {
                    Error::InvalidArgument(format!("coordinate {i} of a finite point requested"))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }

    /// Extends the head to at least `depth` coordinates.
    pub fn materialize(&self, depth: usize) -> Result<SeqPoint> {
        if depth <= self.head.len() {
            return Ok(self.clone());
        }
        Ok(SeqPoint { head: self.prefix(depth)?, tail: self.tail })
    }

    pub fn in_cylinder(&self, prefix: &BitString) -> bool {
        prefix.bits().iter().enumerate().all(|(i, &b)| self.bit(i) == Some(b))
    }

    /// Whether both describe the same sequence, regardless of how much of
    /// it has been materialized.
    pub fn same_sequence(&self, other: &SeqPoint) -> bool {
        if self.tail != other.tail {
            return false;
        }
        let n = self.head.len().max(other.head.len());
        (0..n).all(|i| self.bit(i) == other.bit(i))
    }

    /// Comparison key for duplicate detection.
    pub fn compare_key(&self) -> Vec<bool> {
        let depth = self.known_len().map_or(COMPARE_DEPTH, |n| n.min(COMPARE_DEPTH));
        (0..depth).filter_map(|i| self.bit(i)).collect()
    }
}

impl fmt::Display for SeqPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if let Some(t) = self.tail {
            write!(f, "~{:016x}/{}", t.key, t.p)?;
        }
        Ok(())
    }
}

impl FromStr for SeqPoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<SeqPoint> {
        let (head, tail) = match s.split_once('~') {
            None => (s, None),
            Some((h, t)) => {
                let (key, p) = t
                    .split_once('/')
                    .ok_or_else(|| Error::Parse(format!("bad tail in {s:?}")))?;
                let key = u64::from_str_radix(key, 16)
                    .map_err(|e| Error::Parse(format!("bad tail key {key:?}: {e}")))?;
                let p: f64 = p.parse().map_err(|e| Error::Parse(format!("bad tail p {p:?}: {e}")))?;
                (h, Some(LazyTail { key, p }))
            }
        };
        Ok(SeqPoint { head: head.parse()?, tail })
    }
}
