//! Finite linear orders, the action of finitary permutations on them, and
//! back-and-forth between countable dense orders without endpoints.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::rng::{open_unit, stream, RandomStream};

/// A linear order on `0..n`: `i < j` iff `rank[i] < rank[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FiniteLinearOrder {
    rank: Vec<usize>,
}

impl FiniteLinearOrder {
    pub fn new(rank: Vec<usize>) -> Result<FiniteLinearOrder> {
        let n = rank.len();
        let mut seen = vec![false; n];
        for &r in &rank {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidArgument(format!("{rank:?} is not a rank array")));
            }
        }
        Ok(FiniteLinearOrder { rank })
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    pub fn less(&self, i: usize, j: usize) -> bool {
        self.rank[i] < self.rank[j]
    }

    /// Elements from smallest to largest.
    pub fn sorted_elements(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (i, &r) in self.rank.iter().enumerate() {
            out[r] = i;
        }
        out
    }

    /// Position of the rank array among all `n!` permutations in
    /// lexicographic order.
    pub fn lex_index(&self) -> usize {
        let n = self.len();
        let mut index = 0;
        for i in 0..n {
            let smaller_later = self.rank[i + 1..].iter().filter(|&&r| r < self.rank[i]).count();
            index = index * (n - i) + smaller_later;
        }
        index
    }
}

impl TryFrom<Vec<usize>> for FiniteLinearOrder {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<FiniteLinearOrder> {
        FiniteLinearOrder::new(v)
    }
}

impl From<FiniteLinearOrder> for Vec<usize> {
    fn from(o: FiniteLinearOrder) -> Vec<usize> {
        o.rank
    }
}

/// `i < j ⇔ xs[i] < xs[j]`.
pub fn order_from_reals(xs: &[f64]) -> Result<FiniteLinearOrder> {
    if let Some(i) = xs.iter().position(|x| x.is_nan()) {
        return Err(Error::InvalidArgument(format!("entry {i} is NaN")));
    }
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut rank = vec![0; xs.len()];
    for (r, w) in idx.iter().enumerate() {
        rank[*w] = r;
        if r > 0 && xs[idx[r - 1]] == xs[*w] {
            let (a, b) = (idx[r - 1].min(*w), idx[r - 1].max(*w));
            return Err(Error::Tie(a, b));
        }
    }
    Ok(FiniteLinearOrder { rank })
}

/// Order induced by `n` iid uniforms, hence uniform over all `n!` orders.
pub fn sample_uniform_order<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> FiniteLinearOrder {
    loop {
        let xs: Vec<f64> = (0..n).map(|_| open_unit(rng)).collect();
        if let Ok(o) = order_from_reals(&xs) {
            return o;
        }
    }
}

/// `n <_new m ⇔ σ⁻¹(n) <_old σ⁻¹(m)`, i.e. `rank_new = rank_old ∘ σ⁻¹`.
pub fn permute_order(sigma: &Permutation, ord: &FiniteLinearOrder) -> Result<FiniteLinearOrder> {
    if sigma.support_bound() > ord.len() {
        return Err(Error::InvalidArgument(format!(
            "permutation {sigma} moves points outside 0..{}",
            ord.len()
        )));
    }
    let inv = sigma.inverse();
    Ok(FiniteLinearOrder { rank: (0..ord.len()).map(|m| ord.rank[inv.apply(m)]).collect() })
}

/// Proportion of entries below `q`.
pub fn lln_frequency(xs: &[f64], q: f64) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    Ok(xs.iter().filter(|&&x| x < q).count() as f64 / xs.len() as f64)
}

/// An element of one of the countable orders.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(into = "ElementRepr", try_from = "ElementRepr")]
pub enum Element {
    Rational(Ratio<i64>),
    Real(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ElementRepr {
    Rational(String),
    Real(f64),
}

impl From<Element> for ElementRepr {
    fn from(e: Element) -> ElementRepr {
        match e {
            Element::Rational(r) => ElementRepr::Rational(r.to_string()),
            Element::Real(x) => ElementRepr::Real(x),
        }
    }
}

impl TryFrom<ElementRepr> for Element {
    type Error = Error;
    fn try_from(r: ElementRepr) -> Result<Element> {
        match r {
            ElementRepr::Rational(s) => s
                .parse()
                .map(Element::Rational)
                .map_err(|e| Error::Parse(format!("rational {s:?}: {e}"))),
            ElementRepr::Real(x) if x.is_nan() => Err(Error::Parse("NaN element".into())),
            ElementRepr::Real(x) => Ok(Element::Real(x)),
        }
    }
}

fn ratio_cmp(a: &Ratio<i64>, b: &Ratio<i64>) -> Ordering {
    (*a.numer() as i128 * *b.denom() as i128).cmp(&(*b.numer() as i128 * *a.denom() as i128))
}

fn ratio_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl Ord for Element {
    fn cmp(&self, other: &Element) -> Ordering {
        match (self, other) {
            (Element::Rational(a), Element::Rational(b)) => ratio_cmp(a, b),
            (Element::Real(a), Element::Real(b)) => a.total_cmp(b),
            (Element::Rational(a), Element::Real(b)) => ratio_f64(a).total_cmp(b).then(Ordering::Less),
            (Element::Real(a), Element::Rational(b)) => a.total_cmp(&ratio_f64(b)).then(Ordering::Greater),
        }
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Element) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Element) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Element {}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Rational(r) => write!(f, "{r}"),
            Element::Real(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OracleKind {
    /// Stage `h ≥ 1` lists, in increasing order, the reduced `p/q` with
    /// `max(|p|, q) = h`.
    Rationals,
    /// Stage `k` lists, in increasing order, the dyadics `m/2^k` with
    /// `|m/2^k| ≤ k` that no earlier stage listed.
    Dyadics,
    /// Independent uniform keys in `(0,1)` from the given seed.
    RandomDense { seed: u64 },
}

enum Generator {
    Rationals { height: i64, pending: Vec<Ratio<i64>> },
    Dyadics { stage: u32, next: i64 },
}

impl Generator {
    fn next(&mut self) -> Element {
        match self {
            Generator::Rationals { height, pending } => loop {
                if let Some(r) = pending.pop() {
                    break Element::Rational(r);
                }
                *height += 1;
                *pending = rationals_of_height(*height);
            },
            Generator::Dyadics { stage, next } => loop {
                let k = *stage as i64;
                let scale = 1i64 << *stage;
                if *next > k * scale {
                    *stage += 1;
                    *next = -((*stage as i64) << *stage);
                    continue;
                }
                let m = *next;
                *next += 1;
                let listed_before = k > 0 && m % 2 == 0 && m.abs() <= (k - 1) * scale;
                if !listed_before {
                    break Element::Rational(Ratio::new(m, scale));
                }
            },
        }
    }
}

struct Explicit {
    elements: Vec<Element>,
    /// Elements beyond the generated prefix, found by first-fit searches.
    sparse: HashMap<usize, Element>,
    generator: Generator,
    totients: Totients,
}

impl Explicit {
    fn element(&mut self, i: usize) -> Element {
        if let Some(e) = self.elements.get(i).or_else(|| self.sparse.get(&i)) {
            return *e;
        }
        while self.elements.len() <= i {
            let e = self.generator.next();
            self.elements.push(e);
        }
        self.elements[i]
    }

    /// First-fit search, solved in closed form from the stage structure of
    /// the enumeration rather than by scanning it.
    fn first_between(&mut self, lo: Option<&Element>, hi: Option<&Element>) -> Result<usize> {
        let rat = |e: Option<&Element>| -> Result<Option<Ratio<i64>>> {
            match e {
                None => Ok(None),
                Some(Element::Rational(r)) => Ok(Some(*r)),
                Some(Element::Real(x)) => Err(Error::InvalidArgument(format!("real bound {x} for a countable order"))),
            }
        };
        let (lo, hi) = (rat(lo)?, rat(hi)?);
        if let (Some(l), Some(h)) = (lo, hi) {
            if ratio_cmp(&l, &h) != Ordering::Less {
                return Err(Error::InvalidArgument(format!("empty gap ({l}, {h})")));
            }
        }
        let (index, value) = match self.generator {
            Generator::Rationals { .. } => first_rational(lo, hi, &mut self.totients)?,
            Generator::Dyadics { .. } => first_dyadic(lo, hi)?,
        };
        let e = Element::Rational(value);
        if index >= self.elements.len() {
            self.sparse.insert(index, e);
        }
        Ok(index)
    }
}

/// Smallest integer `p` with `p/q > lo`, not below `-bound`.
fn smallest_above(lo: Option<Ratio<i64>>, q: i64, bound: i64) -> i64 {
    match lo {
        None => -bound,
        Some(l) => {
            let floor = (*l.numer() as i128 * q as i128).div_euclid(*l.denom() as i128);
            ((floor + 1).max(-(bound as i128))).min(i64::MAX as i128) as i64
        }
    }
}

fn below(p: i64, q: i64, hi: Option<Ratio<i64>>) -> bool {
    hi.is_none_or(|h| (p as i128) * (*h.denom() as i128) < (*h.numer() as i128) * q as i128)
}

/// Euler's totient, with the number of rationals of each height below `h`.
struct Totients {
    phi: Vec<u64>,
    lower: Vec<u64>,
}

impl Totients {
    fn new() -> Totients {
        Totients { phi: vec![0], lower: vec![0] }
    }

    fn ensure(&mut self, n: usize) {
        if self.phi.len() > n {
            return;
        }
        let size = (n + 1).next_power_of_two();
        let mut phi: Vec<u64> = (0..size as u64).collect();
        for p in 2..size {
            if phi[p] == p as u64 {
                for m in (p..size).step_by(p) {
                    phi[m] -= phi[m] / p as u64;
                }
            }
        }
        // heights: 1 has three rationals (−1, 0, 1), h ≥ 2 has 4φ(h)
        let mut lower = vec![0u64; size];
        for h in 1..size - 1 {
            lower[h + 1] = lower[h] + if h == 1 { 3 } else { 4 * phi[h] };
        }
        self.phi = phi;
        self.lower = lower;
    }
}

fn first_rational(lo: Option<Ratio<i64>>, hi: Option<Ratio<i64>>, tot: &mut Totients) -> Result<(usize, Ratio<i64>)> {
    let in_gap_at = |h: i64, q: i64| -> Option<i64> {
        let p = smallest_above(lo, q, h);
        (p <= h && below(p, q, hi)).then_some(p)
    };
    let exists = |h: i64| (1..=h).any(|q| in_gap_at(h, q).is_some());
    let mut top = 1i64;
    while !exists(top) {
        top *= 2;
        if top > 1 << 24 {
            return Err(Error::NoWitness(top as usize));
        }
    }
    let mut bottom = top / 2;
    while top - bottom > 1 {
        let mid = (top + bottom) / 2;
        if exists(mid) {
            top = mid;
        } else {
            bottom = mid;
        }
    }
    let h = top;
    // Everything in the gap at the minimal height is in lowest terms.
    let mut best: Option<Ratio<i64>> = None;
    let mut consider = |p: i64, q: i64| {
        let r = Ratio::new_raw(p, q);
        if best.is_none_or(|b| ratio_cmp(&r, &b) == Ordering::Less) {
            best = Some(r);
        }
    };
    for q in 1..h {
        for p in [-h, h] {
            if smallest_above(lo, q, h) <= p && below(p, q, hi) {
                consider(p, q);
            }
        }
    }
    if let Some(p) = in_gap_at(h, h) {
        consider(p, h);
    }
    let v = best.expect("height chosen to contain a rational");
    tot.ensure(h as usize + 1);
    let coprime = |a: i64, b: i64| *Ratio::new(a, b).denom() == b;
    let lt = |p: i64, q: i64| ratio_cmp(&Ratio::new_raw(p, q), &v) == Ordering::Less;
    let mut rank = (-h..=h).filter(|&p| coprime(p, h) && lt(p, h)).count();
    for q in 1..h {
        if coprime(h, q) {
            rank += lt(-h, q) as usize + lt(h, q) as usize;
        }
    }
    Ok((tot.lower[h as usize] as usize + rank, v))
}

fn first_dyadic(lo: Option<Ratio<i64>>, hi: Option<Ratio<i64>>) -> Result<(usize, Ratio<i64>)> {
    for k in 0..=56u32 {
        let scale = 1i64 << k;
        let bound = k as i64 * scale;
        let m = smallest_above(lo, scale, bound);
        if m > bound || !below(m, scale, hi) {
            continue;
        }
        if k == 0 {
            return Ok((0, Ratio::new(0, 1)));
        }
        // stage k adds m/2^k, |m| ≤ k·2^k, except even |m| ≤ (k−1)·2^k
        let prev = (k as i64 - 1) * scale;
        let earlier = prev + 1;
        let older_below = if m - 1 < -prev { 0 } else { ((m - 1).min(prev) + prev) / 2 + 1 };
        let rank = (m + bound) - older_below;
        return Ok(((earlier + rank) as usize, Ratio::new(m, scale)));
    }
    Err(Error::NoWitness(57))
}

/// A run of enumeration positions whose keys have not been drawn yet. Each
/// is uniform on `(0,1)` minus `excluded` (sorted, disjoint open intervals),
/// independently.
#[derive(Clone, Debug)]
struct Block {
    len: usize,
    excluded: Vec<(f64, f64)>,
}

impl Block {
    fn excluded_mass(&self, lo: f64, hi: f64) -> f64 {
        self.excluded.iter().map(|&(a, b)| (b.min(hi) - a.max(lo)).max(0.0)).sum()
    }

    fn exclude(&mut self, lo: f64, hi: f64) {
        let mut v = std::mem::take(&mut self.excluded);
        v.push((lo, hi));
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (a, b) in v {
            match self.excluded.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => self.excluded.push((a, b)),
            }
        }
    }

    /// The point at allowed-mass `u` from `lo` inside `(lo, hi)`.
    fn locate(&self, lo: f64, hi: f64, mut u: f64) -> f64 {
        let mut start = lo;
        for &(a, b) in self.excluded.iter().filter(|&&(a, b)| b > lo && a < hi) {
            let piece = a.max(lo) - start;
            if u < piece {
                return start + u;
            }
            u -= piece.max(0.0);
            start = start.max(b);
        }
        start + u
    }
}

enum Segment {
    Key(f64),
    Pending(Block),
}

/// Independent uniform keys, drawn only when needed. Runs of keys that a
/// search skipped over stay unresolved, conditioned on avoiding the gaps
/// they were skipped for, so a search for a narrow gap costs one geometric
/// draw instead of one draw per skipped key.
struct LazyKeys {
    rng: RandomStream,
    segments: Vec<Segment>,
    len: usize,
}

impl LazyKeys {
    fn geometric(&mut self, p: f64) -> usize {
        if p >= 1.0 {
            return 0;
        }
        let t = open_unit(&mut self.rng).ln() / (-p).ln_1p();
        if t >= usize::MAX as f64 {
            usize::MAX / 2
        } else {
            t as usize
        }
    }

    /// Uniform draw from `(lo, hi)` minus the block's exclusions.
    fn draw(&mut self, block: &Block, lo: f64, hi: f64) -> Result<f64> {
        let mass = (hi - lo) - block.excluded_mass(lo, hi);
        for _ in 0..64 {
            let x = block.locate(lo, hi, self.rng.random::<f64>() * mass);
            let clear = block.excluded.iter().all(|&(a, b)| x <= a || x >= b);
            if lo < x && x < hi && clear {
                return Ok(x);
            }
        }
        Err(Error::NoWitness(64))
    }

    /// Replaces segment `k` (a block) by `prefix`, a key at offset `t`, and
    /// the remaining suffix.
    fn split(&mut self, k: usize, t: usize, prefix: Block, key: f64, suffix: Block) {
        let mut parts = Vec::with_capacity(3);
        if t > 0 {
            parts.push(Segment::Pending(prefix));
        }
        parts.push(Segment::Key(key));
        if suffix.len > 0 {
            parts.push(Segment::Pending(suffix));
        }
        self.segments.splice(k..=k, parts);
    }

    fn element(&mut self, i: usize) -> Result<f64> {
        if i >= self.len {
            let gap = i - self.len;
            self.segments.push(Segment::Pending(Block { len: gap + 1, excluded: Vec::new() }));
            self.len = i + 1;
        }
        let mut start = 0;
        for k in 0..self.segments.len() {
            let len = match &self.segments[k] {
                Segment::Key(x) if start == i => return Ok(*x),
                Segment::Key(_) => 1,
                Segment::Pending(b) if i < start + b.len => {
                    let block = b.clone();
                    let t = i - start;
                    let x = self.draw(&block, 0.0, 1.0)?;
                    let suffix = Block { len: block.len - t - 1, excluded: block.excluded.clone() };
                    let prefix = Block { len: t, excluded: block.excluded };
                    self.split(k, t, prefix, x, suffix);
                    return Ok(x);
                }
                Segment::Pending(b) => b.len,
            };
            start += len;
        }
        unreachable!("segments cover every index below len")
    }

    fn first_between(&mut self, lo: f64, hi: f64) -> Result<usize> {
        let mut start = 0;
        let mut k = 0;
        while k < self.segments.len() {
            match &mut self.segments[k] {
                Segment::Key(x) => {
                    if lo < *x && *x < hi {
                        return Ok(start);
                    }
                    start += 1;
                }
                Segment::Pending(b) => {
                    let allowed = 1.0 - b.excluded_mass(0.0, 1.0);
                    let target = (hi - lo) - b.excluded_mass(lo, hi);
                    let len = b.len;
                    if target > 0.0 {
                        let block = b.clone();
                        let t = self.geometric(target / allowed);
                        if t < len {
                            let x = self.draw(&block, lo, hi)?;
                            let mut prefix = block.clone();
                            prefix.len = t;
                            prefix.exclude(lo, hi);
                            let suffix = Block { len: len - t - 1, excluded: block.excluded };
                            self.split(k, t, prefix, x, suffix);
                            return Ok(start + t);
                        }
                        if let Segment::Pending(b) = &mut self.segments[k] {
                            b.exclude(lo, hi);
                        }
                    }
                    start += len;
                }
            }
            k += 1;
        }
        let t = self.geometric(hi - lo);
        let fresh = Block { len: 0, excluded: Vec::new() };
        let x = self.draw(&fresh, lo, hi)?;
        if t > 0 {
            let mut skipped = fresh;
            skipped.len = t;
            skipped.exclude(lo, hi);
            self.segments.push(Segment::Pending(skipped));
        }
        self.segments.push(Segment::Key(x));
        self.len += t + 1;
        Ok(start + t)
    }
}

enum Store {
    Explicit(Explicit),
    Lazy(Box<LazyKeys>),
}

/// A countable dense order without endpoints, enumerated lazily.
pub struct OrderOracle {
    kind: OracleKind,
    store: Store,
}

impl OrderOracle {
    pub fn new(kind: OracleKind) -> OrderOracle {
        let explicit = |generator| {
            Store::Explicit(Explicit { elements: Vec::new(), sparse: HashMap::new(), generator, totients: Totients::new() })
        };
        let store = match kind {
            OracleKind::Rationals => explicit(Generator::Rationals { height: 0, pending: Vec::new() }),
            OracleKind::Dyadics => explicit(Generator::Dyadics { stage: 0, next: 0 }),
            OracleKind::RandomDense { seed } => {
                Store::Lazy(Box::new(LazyKeys { rng: stream(seed, 0), segments: Vec::new(), len: 0 }))
            }
        };
        OrderOracle { kind, store }
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    /// Length of the enumeration prefix generated so far (for the random
    /// order, including positions whose keys are not drawn yet).
    pub fn enumerated(&self) -> usize {
        match &self.store {
            Store::Explicit(e) => e.elements.len().max(e.sparse.keys().max().map_or(0, |&i| i + 1)),
            Store::Lazy(l) => l.len,
        }
    }

    /// The `i`-th element of the enumeration.
    pub fn element(&mut self, i: usize) -> Result<Element> {
        match &mut self.store {
            Store::Explicit(e) => Ok(e.element(i)),
            Store::Lazy(l) => l.element(i).map(Element::Real),
        }
    }

    /// Index of the first element of the enumeration strictly between `lo`
    /// and `hi` (`None` meaning unbounded), extending it as needed.
    pub fn first_between(&mut self, lo: Option<&Element>, hi: Option<&Element>) -> Result<usize> {
        match &mut self.store {
            Store::Explicit(e) => e.first_between(lo, hi),
            Store::Lazy(l) => {
                let real = |e: &Element| match e {
                    Element::Real(x) => *x,
                    Element::Rational(r) => ratio_f64(r),
                };
                let (a, b) = (lo.map_or(0.0, real), hi.map_or(1.0, real));
                if a >= b {
                    return Err(Error::InvalidArgument(format!("empty gap ({a}, {b})")));
                }
                l.first_between(a, b)
            }
        }
    }
}

/// Reduced fractions of height `h`, largest first.
fn rationals_of_height(h: i64) -> Vec<Ratio<i64>> {
    let mut out = Vec::new();
    for q in 1..=h {
        let ps: Vec<i64> = if q == h { (-h..=h).collect() } else { vec![-h, h] };
        out.extend(ps.into_iter().map(|p| Ratio::new(p, q)).filter(|r| *r.denom() == q));
    }
    out.sort_by(|a, b| ratio_cmp(b, a));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoPair {
    pub a_index: usize,
    pub a: Element,
    pub b_index: usize,
    pub b: Element,
}

/// A finite order-preserving bijection between subsets of two orders.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialIso {
    pub pairs: Vec<IsoPair>,
}

impl PartialIso {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks order preservation and injectivity over all pairs.
    pub fn is_valid(&self) -> bool {
        self.pairs.iter().enumerate().all(|(i, p)| {
            self.pairs[i + 1..].iter().all(|q| p.a.cmp(&q.a) == p.b.cmp(&q.b) && p.a != q.a)
        })
    }

    /// Whether the first `k` elements of both enumerations are matched.
    pub fn covers_first(&self, k: usize) -> bool {
        let dom: HashSet<usize> = self.pairs.iter().map(|p| p.a_index).collect();
        let ran: HashSet<usize> = self.pairs.iter().map(|p| p.b_index).collect();
        (0..k).all(|i| dom.contains(&i) && ran.contains(&i))
    }
}

/// Alternates forth steps (match the first unmatched element of `a`) and
/// back steps (match the first unmatched element of `b`), choosing each
/// partner as the first element of the other enumeration in the right gap.
pub fn back_and_forth(a: &mut OrderOracle, b: &mut OrderOracle, steps: usize) -> Result<PartialIso> {
    // (a, b) pairs sorted by a, hence also by b
    let mut sorted: Vec<(Element, Element)> = Vec::new();
    let mut dom = HashSet::new();
    let mut ran = HashSet::new();
    let mut iso = PartialIso::default();
    let (mut next_a, mut next_b) = (0usize, 0usize);
    for step in 0..steps {
        let forth = step % 2 == 0;
        let (src, dst, used_src, used_dst, next) = if forth {
            (&mut *a, &mut *b, &mut dom, &mut ran, &mut next_a)
        } else {
            (&mut *b, &mut *a, &mut ran, &mut dom, &mut next_b)
        };
        while used_src.contains(next) {
            *next += 1;
        }
        let i = *next;
        let x = src.element(i)?;
        let key = |p: &(Element, Element)| if forth { p.0 } else { p.1 };
        let pos = sorted.partition_point(|p| key(p) < x);
        let other = |p: &(Element, Element)| if forth { p.1 } else { p.0 };
        let lo = pos.checked_sub(1).map(|k| other(&sorted[k]));
        let hi = sorted.get(pos).map(other);
        let j = dst.first_between(lo.as_ref(), hi.as_ref())?;
        let y = dst.element(j)?;
        used_src.insert(i);
        used_dst.insert(j);
        let (pair, entry) = if forth {
            ((x, y), IsoPair { a_index: i, a: x, b_index: j, b: y })
        } else {
            ((y, x), IsoPair { a_index: j, a: y, b_index: i, b: x })
        };
        sorted.insert(pos, pair);
        iso.pairs.push(entry);
    }
    Ok(iso)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn first(kind: OracleKind, n: usize) -> Vec<String> {
        let mut o = OrderOracle::new(kind);
        (0..n).map(|i| o.element(i).unwrap().to_string()).collect()
    }

    #[test]
    fn order_examples() {
        assert_eq!(order_from_reals(&[0.1, 0.2, 0.3]).unwrap().rank(), &[0, 1, 2]);
        let o = order_from_reals(&[0.9, 0.1, 0.5]).unwrap();
        assert_eq!(o.rank(), &[2, 0, 1]);
        assert_eq!(o.sorted_elements(), vec![1, 2, 0]);
        assert_eq!(order_from_reals(&[0.3, 0.1, 0.3]), Err(Error::Tie(0, 2)));
    }

    #[test]
    fn permute_swap_example() {
        let o = FiniteLinearOrder::new(vec![0, 1, 2]).unwrap();
        let p = permute_order(&Permutation::transposition(0, 1), &o).unwrap();
        assert_eq!(p.sorted_elements(), vec![1, 0, 2]);
        assert!(permute_order(&Permutation::transposition(0, 5), &o).is_err());
    }

    #[test]
    fn lex_index_is_a_bijection() {
        let mut seen = HashSet::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        if let Ok(o) = FiniteLinearOrder::new(vec![a, b, c, d]) {
                            assert!(o.lex_index() < 24);
                            seen.insert(o.lex_index());
                        }
                    }
                }
            }
        }
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn enumerations() {
        assert_eq!(first(OracleKind::Rationals, 9), ["-1", "0", "1", "-2", "-1/2", "1/2", "2", "-3", "-3/2"]);
        assert_eq!(first(OracleKind::Dyadics, 8), ["0", "-1", "-1/2", "1/2", "1", "-2", "-7/4", "-3/2"]);
        let mut o = OrderOracle::new(OracleKind::Dyadics);
        let all: Vec<Element> = (0..2000).map(|i| o.element(i).unwrap()).collect();
        let distinct: std::collections::BTreeSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
    }

    #[test]
    fn rationals_are_distinct() {
        let mut o = OrderOracle::new(OracleKind::Rationals);
        let all: std::collections::BTreeSet<Element> = (0..20_000).map(|i| o.element(i).unwrap()).collect();
        assert_eq!(all.len(), 20_000);
    }

    #[test]
    fn witnesses() {
        for kind in [OracleKind::Rationals, OracleKind::Dyadics, OracleKind::RandomDense { seed: 3 }] {
            let mut o = OrderOracle::new(kind);
            let (x, y) = (o.element(1).unwrap(), o.element(2).unwrap());
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            let c = o.first_between(Some(&lo), Some(&hi)).unwrap();
            assert!(lo < o.element(c).unwrap() && o.element(c).unwrap() < hi);
            let above = o.first_between(Some(&hi), None).unwrap();
            assert!(o.element(above).unwrap() > hi);
            let below = o.first_between(None, Some(&lo)).unwrap();
            assert!(o.element(below).unwrap() < lo);
        }
    }

    fn brute_first(kind: OracleKind, lo: Option<Element>, hi: Option<Element>) -> usize {
        let mut o = OrderOracle::new(kind);
        (0..)
            .find(|&i| {
                let e = o.element(i).unwrap();
                lo.is_none_or(|l| l < e) && hi.is_none_or(|h| e < h)
            })
            .unwrap()
    }

    #[test]
    fn closed_form_first_fit_matches_scan() {
        let mut rng = stream(11, 0);
        for kind in [OracleKind::Rationals, OracleKind::Dyadics] {
            let mut o = OrderOracle::new(kind);
            for _ in 0..300 {
                let i = rng.random_range(0..400);
                let j = rng.random_range(0..400);
                let (x, y) = (o.element(i).unwrap(), o.element(j).unwrap());
                let (lo, hi) = if x < y { (Some(x), Some(y)) } else { (Some(y), Some(x)) };
                if lo == hi {
                    continue;
                }
                let bounds = [(lo, hi), (None, hi), (lo, None)];
                let (lo, hi) = bounds[rng.random_range(0..3)];
                let mut fresh = OrderOracle::new(kind);
                let got = fresh.first_between(lo.as_ref(), hi.as_ref()).unwrap();
                assert_eq!(got, brute_first(kind, lo, hi), "{kind:?} {lo:?} {hi:?}");
                assert_eq!(fresh.element(got).unwrap(), o.element(got).unwrap());
            }
        }
    }

    #[test]
    fn lazy_keys_have_the_iid_law() {
        // first index in a gap of width w is geometric: mean (1 − w)/w
        let w = 0.01;
        let mean = (0..4000u64)
            .map(|s| {
                let mut o = OrderOracle::new(OracleKind::RandomDense { seed: s });
                o.first_between(Some(&Element::Real(0.3)), Some(&Element::Real(0.3 + w))).unwrap() as f64
            })
            .sum::<f64>()
            / 4000.0;
        let sd = ((1.0 - w) / (w * w)).sqrt() / 4000f64.sqrt();
        assert!((mean - (1.0 - w) / w).abs() < 4.0 * sd, "mean {mean}");

        // skipped keys avoid the gap and are uniform elsewhere
        let mut below = 0;
        let mut total = 0;
        for s in 0..300u64 {
            let mut o = OrderOracle::new(OracleKind::RandomDense { seed: s });
            let hit = o.first_between(Some(&Element::Real(0.5)), Some(&Element::Real(0.6))).unwrap();
            for i in 0..hit {
                let Element::Real(x) = o.element(i).unwrap() else { unreachable!() };
                assert!(!(0.5 < x && x < 0.6));
                below += (x < 0.25) as usize;
                total += 1;
            }
        }
        let p = 0.25 / 0.9;
        let sd = (p * (1.0 - p) / total as f64).sqrt();
        assert!((below as f64 / total as f64 - p).abs() < 4.0 * sd);
    }

    #[test]
    fn back_and_forth_small() {
        let mut a = OrderOracle::new(OracleKind::Rationals);
        let mut b = OrderOracle::new(OracleKind::Rationals);
        assert!(back_and_forth(&mut a, &mut b, 0).unwrap().is_empty());
        let mut a = OrderOracle::new(OracleKind::Dyadics);
        let iso = back_and_forth(&mut a, &mut b, 200).unwrap();
        assert_eq!(iso.len(), 200);
        assert!(iso.is_valid());
        assert!(iso.covers_first(100));
    }

    #[test]
    fn lln_example() {
        assert!((lln_frequency(&[0.1, 0.2, 0.3], 0.25).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(lln_frequency(&[], 0.5).is_err());
    }

    #[test]
    fn element_serde() {
        let e = Element::Rational(Ratio::new(-3, 4));
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, "\"-3/4\"");
        assert_eq!(serde_json::from_str::<Element>(&s).unwrap(), e);
        let r = Element::Real(0.25);
        assert_eq!(serde_json::from_str::<Element>(&serde_json::to_string(&r).unwrap()).unwrap(), r);
    }
}
