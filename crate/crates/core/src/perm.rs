//! Permutations of `ℕ` with finite support.

use std::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection of `ℕ` fixing every `i ≥ images.len()`, stored as the images
/// of `0..len`. Trailing fixed points are trimmed, so equal permutations
/// have equal representations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity() -> Permutation {
        Permutation { images: Vec::new() }
    }

    pub fn new(images: Vec<usize>) -> Result<Permutation> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidMap(format!("{images:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Permutation::trimmed(images))
    }

    fn trimmed(mut images: Vec<usize>) -> Permutation {
        while images.last().is_some_and(|&x| x == images.len() - 1) {
            images.pop();
        }
        Permutation { images }
    }

    pub fn transposition(i: usize, j: usize) -> Permutation {
        let mut images: Vec<usize> = (0..=i.max(j)).collect();
        images.swap(i, j);
        Permutation::trimmed(images)
    }

    /// Uniform permutation of `0..n`.
    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Permutation {
        let mut images: Vec<usize> = (0..n).collect();
        images.shuffle(rng);
        Permutation::trimmed(images)
    }

    /// Every point `≥ support_bound()` is fixed.
    pub fn support_bound(&self) -> usize {
        self.images.len()
    }

    pub fn is_identity(&self) -> bool {
        self.images.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images.get(i).copied().unwrap_or(i)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { images: inv }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        let n = self.images.len().max(other.images.len());
        Permutation::trimmed((0..n).map(|i| self.apply(other.apply(i))).collect())
    }

    /// Images of `0..n`, which must cover the support.
    pub fn images(&self, n: usize) -> Result<Vec<usize>> {
        if n < self.images.len() {
            return Err(Error::InvalidArgument(format!(
                "permutation support {} exceeds {n}",
                self.images.len()
            )));
        }
        Ok((0..n).map(|i| self.apply(i)).collect())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Permutation> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.images
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![2, 0]).is_err());
        assert!(Permutation::new(vec![0, 1, 2]).unwrap().is_identity());
    }

    #[test]
    fn group_laws() {
        let mut rng = stream(1, 0);
        for _ in 0..200 {
            let a = Permutation::random(7, &mut rng);
            let b = Permutation::random(5, &mut rng);
            assert!(a.compose(&a.inverse()).is_identity());
            assert!(a.inverse().compose(&a).is_identity());
            let ab = a.compose(&b);
            for i in 0..10 {
                assert_eq!(ab.apply(i), a.apply(b.apply(i)));
            }
        }
    }

    #[test]
    fn transposition_and_serde() {
        let t = Permutation::transposition(0, 2);
        assert_eq!(t.images(4).unwrap(), vec![2, 1, 0, 3]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "[2,1,0]");
        assert_eq!(serde_json::from_str::<Permutation>(&json).unwrap(), t);
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
    }
}
