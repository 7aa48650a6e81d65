//! Mergeable count-distinct sketch (BJKST).
//!
//! Each of `Δ` lists keeps the `t` smallest distinct values of a pairwise
//! independent hash `ψ_w : [n] → [n³]`. The estimate is the median over lists
//! of `t·n³ / v_w`, with `v_w` the `t`-th smallest value of list `w`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::rng::SeededRng;

/// Mersenne prime `2^61 - 1`, the modulus of the `ψ` family.
const PRIME: u64 = (1 << 61) - 1;

/// Hidden constants of `Δ = ⌈c_delta · ln(1/δ)⌉` and `t = ⌈c_t / ε²⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConstants {
    pub c_delta: f64,
    pub c_t: f64,
}

impl Default for SketchConstants {
    fn default() -> Self {
        SketchConstants { c_delta: 8.0, c_t: 4.0 }
    }
}

/// Shared hash functions and sizes; sketches from one family are mergeable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchFamily {
    t: usize,
    universe: u64,
    range: u64,
    coeffs: Vec<(u64, u64)>,
}

impl SketchFamily {
    /// A family for ids in `[0, universe)` with accuracy `eps` and failure
    /// probability `delta`.
    pub fn new(eps: f64, delta: f64, universe: u64, constants: SketchConstants, rng: &mut SeededRng) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("sketch eps must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("sketch delta must lie in (0, 1)"));
        }
        if !(constants.c_delta > 0.0 && constants.c_t > 0.0) {
            return Err(invalid("sketch constants must be positive"));
        }
        let lists = (libm::ceil(constants.c_delta * libm::log(1.0 / delta)) as usize).max(1);
        let t = (libm::ceil(constants.c_t / (eps * eps)) as usize).max(1);
        Self::with_sizes(lists, t, universe, rng)
    }

    pub fn with_sizes(lists: usize, t: usize, universe: u64, rng: &mut SeededRng) -> Result<Self> {
        if lists == 0 || t == 0 {
            return Err(invalid("sketch needs at least one list of one value"));
        }
        let universe = universe.max(1);
        let range = universe
            .checked_mul(universe)
            .and_then(|u| u.checked_mul(universe))
            .filter(|&r| r < PRIME)
            .ok_or(Error::UniverseTooLarge { n: universe })?;
        let coeffs = (0..lists)
            .map(|_| {
                let a = 1 + rand::Rng::random_range(rng, 0..PRIME - 1);
                let b = rand::Rng::random_range(rng, 0..PRIME);
                (a, b)
            })
            .collect();
        Ok(SketchFamily { t, universe, range, coeffs })
    }

    pub fn lists(&self) -> usize {
        self.coeffs.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    #[inline]
    fn psi(&self, w: usize, x: u64) -> u64 {
        let (a, b) = self.coeffs[w];
        mod_mersenne(a as u128 * x as u128 + b as u128) % self.range
    }
}

/// `v mod (2^61 − 1)` for `v < 2^125`, using `2^61 ≡ 1`.
#[inline]
fn mod_mersenne(v: u128) -> u64 {
    let r = (v as u64 & PRIME) + (v >> 61) as u64;
    let r = (r & PRIME) + (r >> 61);
    if r >= PRIME {
        r - PRIME
    } else {
        r
    }
}

/// The sketch proper: `Δ` ascending lists of at most `t` values.
#[derive(Debug, Clone)]
pub struct DistinctSketch {
    family: Arc<SketchFamily>,
    lists: Vec<Vec<u64>>,
}

impl PartialEq for DistinctSketch {
    fn eq(&self, other: &Self) -> bool {
        same_family(&self.family, &other.family) && self.lists == other.lists
    }
}

fn same_family(a: &Arc<SketchFamily>, b: &Arc<SketchFamily>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl DistinctSketch {
    pub fn new(family: Arc<SketchFamily>) -> Self {
        let lists = alloc::vec![Vec::with_capacity(family.t); family.lists()];
        DistinctSketch { family, lists }
    }

    pub fn from_ids(family: Arc<SketchFamily>, ids: impl IntoIterator<Item = u32>) -> Self {
        let mut s = DistinctSketch::new(family);
        for id in ids {
            s.insert(id as u64);
        }
        s
    }

    pub fn family(&self) -> &Arc<SketchFamily> {
        &self.family
    }

    pub fn lists(&self) -> &[Vec<u64>] {
        &self.lists
    }

    pub fn insert(&mut self, id: u64) {
        let t = self.family.t;
        for w in 0..self.lists.len() {
            let v = self.family.psi(w, id);
            let list = &mut self.lists[w];
            if list.len() == t && v >= list[t - 1] {
                continue;
            }
            if let Err(pos) = list.binary_search(&v) {
                list.insert(pos, v);
                list.truncate(t);
            }
        }
    }

    /// Replaces `self` with the sketch of the union of both streams.
    pub fn merge_from(&mut self, other: &DistinctSketch) -> Result<()> {
        if !same_family(&self.family, &other.family) {
            return Err(Error::SketchMismatch);
        }
        let t = self.family.t;
        let mut buf = Vec::with_capacity(2 * t);
        for (mine, theirs) in self.lists.iter_mut().zip(&other.lists) {
            if theirs.is_empty() {
                continue;
            }
            buf.clear();
            let (mut i, mut j) = (0, 0);
            while buf.len() < t && (i < mine.len() || j < theirs.len()) {
                let next = match (mine.get(i), theirs.get(j)) {
                    (Some(&a), Some(&b)) if a == b => {
                        i += 1;
                        j += 1;
                        a
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        i += 1;
                        a
                    }
                    (Some(_), Some(&b)) => {
                        j += 1;
                        b
                    }
                    (Some(&a), None) => {
                        i += 1;
                        a
                    }
                    (None, Some(&b)) => {
                        j += 1;
                        b
                    }
                    (None, None) => unreachable!(),
                };
                buf.push(next);
            }
            mine.clear();
            mine.extend_from_slice(&buf);
        }
        Ok(())
    }

    pub fn merge(a: &DistinctSketch, b: &DistinctSketch) -> Result<DistinctSketch> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }

    /// Estimated number of distinct ids.
    ///
    /// Exact when fewer than `t` distinct values were seen; the longest list
    /// is used there since a `ψ` collision can only shorten a list.
    pub fn estimate(&self) -> u64 {
        let t = self.family.t;
        if self.lists.iter().any(|l| l.len() < t) {
            return self.lists.iter().map(Vec::len).max().unwrap_or(0) as u64;
        }
        let mut ests: Vec<f64> =
            self.lists.iter().map(|l| t as f64 * self.family.range as f64 / l[t - 1].max(1) as f64).collect();
        ests.sort_unstable_by(f64::total_cmp);
        let mid = ests.len() / 2;
        let median = if ests.len() % 2 == 1 { ests[mid] } else { 0.5 * (ests[mid - 1] + ests[mid]) };
        libm::round(median) as u64
    }

    pub fn heap_bytes(&self) -> usize {
        self.lists.iter().map(|l| l.capacity() * 8 + 24).sum()
    }
}
