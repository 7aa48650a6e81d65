//! Gaussian filter index for inner-product similarity on unit vectors.
//!
//! Each copy draws `t` groups of `m′` standard normal vectors. A point goes to
//! the bucket `(j_1, …, j_t)` of its argmax vector in every group, so it is
//! stored once per copy while `m′^t` buckets are addressed. A query keeps, in
//! each group, the vectors within `f(α, ε)` of `α` times its own maximum and
//! inspects the product of those index sets.
//!
//! [`NnisFilterIndex`] stacks `L_f` copies and samples uniformly from the near
//! points found there by weighted bucket sampling with a multiplicity correction.

use alloc::vec;
use alloc::vec::Vec;
use core::hash::Hasher;

use hashbrown::{HashMap, HashSet};

use crate::dataset::Dataset;
use crate::digest::StateDigest;
use crate::error::{invalid, Result};
use crate::lsh::params::ceil_tolerant;
use crate::metric::{dot, Metric, Proximity};
use crate::rng::SeededRng;
use crate::SampleResult;

/// Largest group size accepted; `t · m′` filters of dimension `d` are stored.
pub const MAX_PART_SIZE: usize = 1 << 24;

fn check_similarity(x: f64, what: &str) -> Result<()> {
    if !(x > -1.0 && x < 1.0) {
        return Err(invalid(alloc::format!("{what} must lie in (-1, 1)")));
    }
    Ok(())
}

/// Query slack `√(2(1−α²) ln(1/ε))`, for `α ∈ (−1, 1]` and `ε ∈ (0, 1]`.
pub fn f_threshold(alpha: f64, eps: f64) -> Result<f64> {
    if !(alpha > -1.0 && alpha <= 1.0) {
        return Err(invalid("alpha must lie in (-1, 1]"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid("eps must lie in (0, 1]"));
    }
    Ok(libm::sqrt(2.0 * (1.0 - alpha * alpha) * libm::log(1.0 / eps)))
}

fn check_order(alpha: f64, beta: f64) -> Result<()> {
    check_similarity(alpha, "alpha")?;
    check_similarity(beta, "beta")?;
    if beta > alpha {
        return Err(invalid("need beta <= alpha"));
    }
    Ok(())
}

/// `ρ = (1−α²)(1−β²)/(1−αβ)²`.
pub fn rho_exponent(alpha: f64, beta: f64) -> Result<f64> {
    check_order(alpha, beta)?;
    let d = 1.0 - alpha * beta;
    Ok((1.0 - alpha * alpha) * (1.0 - beta * beta) / (d * d))
}

/// Exponent of `n` in the filter budget, `(1−β²)/(1−αβ)²`.
pub fn m_exponent(alpha: f64, beta: f64) -> Result<f64> {
    check_order(alpha, beta)?;
    let d = 1.0 - alpha * beta;
    Ok((1.0 - beta * beta) / (d * d))
}

/// Number of tensored groups, `⌈1/(1−α²)⌉`.
pub fn parts(alpha: f64) -> Result<usize> {
    check_similarity(alpha, "alpha")?;
    Ok((ceil_tolerant(1.0 / (1.0 - alpha * alpha)) as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSize {
    pub t: usize,
    /// `⌈n^{(1−β²)/(1−αβ)²}⌉`, before rounding to a perfect power.
    pub m: f64,
    /// `⌈m^{1/t}⌉`
    pub m_part: usize,
}

impl FilterSize {
    /// `m′^t`, the number of addressable buckets.
    pub fn effective_m(&self) -> f64 {
        libm::pow(self.m_part as f64, self.t as f64)
    }
}

pub fn choose_m(n: usize, alpha: f64, beta: f64) -> Result<FilterSize> {
    let e = m_exponent(alpha, beta)?;
    let t = parts(alpha)?;
    let m = ceil_tolerant(libm::pow(n.max(1) as f64, e)).max(1.0);
    let mut m_part = (ceil_tolerant(libm::pow(m, 1.0 / t as f64)) as usize).max(1);
    let pow = |x: usize| libm::pow(x as f64, t as f64);
    while m_part > 1 && pow(m_part - 1) >= m {
        m_part -= 1;
    }
    while pow(m_part) < m {
        m_part += 1;
    }
    Ok(FilterSize { t, m, m_part })
}

/// Copies needed so that a near point is found with probability `1 − δ` when
/// each group keeps it above threshold with probability `p`:
/// `⌈ln(1/δ) · p^{−1/(1−α²)}⌉`.
pub fn repetitions(p: f64, alpha: f64, delta: f64) -> Result<usize> {
    check_similarity(alpha, "alpha")?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("per-group success probability must lie in (0, 1]"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    let r = libm::log(1.0 / delta) * libm::pow(p, -1.0 / (1.0 - alpha * alpha));
    Ok((ceil_tolerant(r) as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub t: usize,
    pub m_part: usize,
    /// Independent copies of the structure.
    pub copies: usize,
    pub seed: u64,
}

impl FilterParams {
    /// Sizes the groups from `n` via [`choose_m`].
    pub fn new(n: usize, alpha: f64, beta: f64, eps: f64, copies: usize, seed: u64) -> Result<Self> {
        let size = choose_m(n, alpha, beta)?;
        Self::with_parts(alpha, beta, eps, size.t, size.m_part, copies, seed)
    }

    pub fn with_parts(
        alpha: f64,
        beta: f64,
        eps: f64,
        t: usize,
        m_part: usize,
        copies: usize,
        seed: u64,
    ) -> Result<Self> {
        check_order(alpha, beta)?;
        f_threshold(alpha, eps)?;
        if t == 0 || m_part == 0 || copies == 0 {
            return Err(invalid("t, m' and copies must be positive"));
        }
        if m_part > MAX_PART_SIZE {
            return Err(invalid(alloc::format!("group size {m_part} exceeds {MAX_PART_SIZE}")));
        }
        if libm::pow(m_part as f64, t as f64) >= 3.4e38 {
            return Err(invalid("m'^t does not fit a 128-bit bucket key"));
        }
        Ok(FilterParams { alpha, beta, eps, t, m_part, copies, seed })
    }

    pub fn f(&self) -> f64 {
        f_threshold(self.alpha, self.eps).expect("validated at construction")
    }

    pub fn metric(&self) -> Metric {
        Metric::InnerProduct { alpha: self.alpha, beta: self.beta }
    }
}

/// One tensored structure.
#[derive(Debug, Clone)]
struct FilterCopy {
    /// `t · m′` vectors of dimension `d`, group-major.
    filters: Vec<f32>,
    slots: HashMap<u128, u32>,
    keys: Vec<u128>,
    buckets: Vec<Vec<u32>>,
    slot_of: Vec<u32>,
}

impl FilterCopy {
    fn build(data: &Dataset, p: &FilterParams, rng: &mut SeededRng) -> Self {
        let d = data.dim();
        let filters: Vec<f32> = (0..p.t * p.m_part * d).map(|_| rng.gaussian() as f32).collect();
        let mut copy = FilterCopy {
            filters,
            slots: HashMap::new(),
            keys: Vec::new(),
            buckets: Vec::new(),
            slot_of: Vec::with_capacity(data.len()),
        };
        let mut scores = vec![0.0f64; p.m_part];
        for pt in data.iter() {
            let mut key = 0u128;
            for i in 0..p.t {
                copy.scores(d, p.m_part, i, pt.coords, &mut scores);
                key = key * p.m_part as u128 + argmax(&scores) as u128;
            }
            let next = copy.buckets.len() as u32;
            let slot = *copy.slots.entry(key).or_insert(next);
            if slot == next {
                copy.keys.push(key);
                copy.buckets.push(Vec::new());
            }
            copy.buckets[slot as usize].push(pt.id);
            copy.slot_of.push(slot);
        }
        copy
    }

    fn scores(&self, d: usize, m_part: usize, group: usize, x: &[f32], out: &mut [f64]) {
        let base = group * m_part * d;
        for (j, s) in out.iter_mut().enumerate() {
            *s = dot(&self.filters[base + j * d..base + (j + 1) * d], x);
        }
    }
}

/// Lowest index on ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = j;
        }
    }
    best
}

/// A bucket selected by a query: copy index and slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MarkedBucket {
    pub copy: u32,
    pub slot: u32,
}

#[derive(Debug, Clone)]
pub struct FilterIndex<'a> {
    data: &'a Dataset,
    params: FilterParams,
    copies: Vec<FilterCopy>,
}

impl<'a> FilterIndex<'a> {
    /// Copy `c` draws its filters from stream `c` of `params.seed`.
    pub fn build(data: &'a Dataset, params: FilterParams) -> Result<Self> {
        let metric = params.metric();
        for p in data.iter() {
            metric.check_input(p.coords)?;
        }
        let copies = (0..params.copies)
            .map(|c| FilterCopy::build(data, &params, &mut SeededRng::stream(params.seed, c as u64)))
            .collect();
        Ok(FilterIndex { data, params, copies })
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn num_copies(&self) -> usize {
        self.copies.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Bucket key of point `id` in copy `copy`, one index per group.
    pub fn bucket_key(&self, copy: usize, id: u32) -> Vec<usize> {
        let c = &self.copies[copy];
        self.unpack(c.keys[c.slot_of[id as usize] as usize])
    }

    fn unpack(&self, mut key: u128) -> Vec<usize> {
        let m = self.params.m_part as u128;
        let mut out = vec![0usize; self.params.t];
        for i in (0..self.params.t).rev() {
            out[i] = (key % m) as usize;
            key /= m;
        }
        out
    }

    /// Non-empty buckets of copy `copy`, as id lists.
    pub fn buckets(&self, copy: usize) -> &[Vec<u32>] {
        &self.copies[copy].buckets
    }

    pub fn bucket(&self, b: MarkedBucket) -> &[u32] {
        &self.copies[b.copy as usize].buckets[b.slot as usize]
    }

    pub fn slot_of(&self, copy: usize, id: u32) -> u32 {
        self.copies[copy].slot_of[id as usize]
    }

    fn check_query(&self, q: &[f32]) -> Result<()> {
        self.data.check_dim(q)?;
        self.params.metric().check_input(q)
    }

    /// Per group, the ascending indices `j` with `⟨q, a_j⟩ ≥ αΔ − f(α, ε)`.
    pub fn threshold_sets(&self, copy: usize, q: &[f32]) -> Result<Vec<Vec<usize>>> {
        self.check_query(q)?;
        Ok(self.sets_unchecked(copy, q, self.params.eps))
    }

    /// As [`Self::threshold_sets`] with a different `ε`.
    pub fn threshold_sets_with_eps(&self, copy: usize, q: &[f32], eps: f64) -> Result<Vec<Vec<usize>>> {
        self.check_query(q)?;
        f_threshold(self.params.alpha, eps)?;
        Ok(self.sets_unchecked(copy, q, eps))
    }

    fn sets_unchecked(&self, copy: usize, q: &[f32], eps: f64) -> Vec<Vec<usize>> {
        let p = &self.params;
        let f = f_threshold(p.alpha, eps).expect("validated");
        let mut scores = vec![0.0f64; p.m_part];
        (0..p.t)
            .map(|i| {
                self.copies[copy].scores(self.data.dim(), p.m_part, i, q, &mut scores);
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let cut = p.alpha * max - f;
                (0..p.m_part).filter(|&j| scores[j] >= cut).collect()
            })
            .collect()
    }

    /// Non-empty buckets of `I_1 × … × I_t` in one copy, lexicographic order.
    fn marked_in_copy(&self, copy: usize, q: &[f32], out: &mut Vec<MarkedBucket>) {
        let sets = self.sets_unchecked(copy, q, self.params.eps);
        if sets.iter().any(Vec::is_empty) {
            return;
        }
        let m = self.params.m_part as u128;
        let c = &self.copies[copy];
        let mut pos = vec![0usize; sets.len()];
        loop {
            let key = pos.iter().zip(&sets).fold(0u128, |k, (&p, s)| k * m + s[p] as u128);
            if let Some(&slot) = c.slots.get(&key) {
                out.push(MarkedBucket { copy: copy as u32, slot });
            }
            let mut i = sets.len();
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                pos[i] += 1;
                if pos[i] < sets[i].len() {
                    break;
                }
                pos[i] = 0;
            }
        }
    }

    /// Every non-empty bucket above threshold, over all copies.
    pub fn marked_buckets(&self, q: &[f32]) -> Result<Vec<MarkedBucket>> {
        self.check_query(q)?;
        let mut out = Vec::new();
        for c in 0..self.copies.len() {
            self.marked_in_copy(c, q, &mut out);
        }
        Ok(out)
    }

    /// First point with `⟨p, q⟩ ≥ β` in the marked buckets, copies in order.
    pub fn query(&self, q: &[f32]) -> Result<SampleResult> {
        self.check_query(q)?;
        let mut inspected = 0u64;
        let mut marked = Vec::new();
        for c in 0..self.copies.len() {
            marked.clear();
            self.marked_in_copy(c, q, &mut marked);
            for &b in &marked {
                for &id in self.bucket(b) {
                    inspected += 1;
                    if dot(self.data.coords(id), q) >= self.params.beta {
                        return Ok(SampleResult { outcome: Some(id), inspected });
                    }
                }
            }
        }
        Ok(SampleResult::bottom(inspected))
    }

    pub fn memory_bytes(&self) -> usize {
        self.copies
            .iter()
            .map(|c| {
                c.filters.len() * 4
                    + c.slots.len() * 20
                    + c.keys.len() * 16
                    + c.buckets.iter().map(|b| b.len() * 4 + 24).sum::<usize>()
                    + c.slot_of.len() * 4
            })
            .sum()
    }

    pub fn digest(&self, h: &mut StateDigest) {
        for c in &self.copies {
            h.write_usize(c.filters.len());
            for x in &c.filters {
                h.write_u32(x.to_bits());
            }
            for (k, b) in c.keys.iter().zip(&c.buckets) {
                h.write_u128(*k);
                h.u32s(b);
            }
            h.u32s(&c.slot_of);
        }
    }

    pub fn state_digest(&self) -> u64 {
        let mut h = StateDigest::default();
        self.digest(&mut h);
        h.finish()
    }
}

/// Constants for [`NnisFilterIndex`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterNnisConfig {
    /// `L_f = ⌈c_f · ln n⌉` copies.
    pub c_f: f64,
    pub eps: f64,
}

impl Default for FilterNnisConfig {
    fn default() -> Self {
        FilterNnisConfig { c_f: 3.0, eps: 0.1 }
    }
}

/// What happened during one sampling query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterTrace {
    /// Points dropped from the live buckets, all with `⟨p, q⟩ < β`.
    pub evicted: Vec<u32>,
    pub rounds: u64,
    pub marked_buckets: usize,
    /// `K` before any eviction.
    pub live_total: usize,
}

/// Samples from weighted buckets until a near point is reported.
///
/// Each round picks a live entry uniformly, which is bucket `i` with
/// probability `k_i/K` followed by a uniform point of bucket `i`. Near points
/// are reported with probability `1/multiplicity(p)`; far points leave their
/// bucket for the rest of the call. The caller must ensure some near point is
/// live, else the loop does not terminate.
pub fn weighted_bucket_loop(
    buckets: &[&[u32]],
    classify: impl Fn(u32) -> Proximity,
    multiplicity: impl Fn(u32) -> u32,
    rng: &mut SeededRng,
    trace: &mut FilterTrace,
) -> u32 {
    let mut live: Vec<u32> = buckets.iter().flat_map(|b| b.iter().copied()).collect();
    trace.live_total = live.len();
    loop {
        trace.rounds += 1;
        let e = rng.below(live.len());
        let p = live[e];
        match classify(p) {
            Proximity::Near => {
                if rng.chance(1.0 / multiplicity(p) as f64) {
                    return p;
                }
            }
            Proximity::Far => {
                live.swap_remove(e);
                trace.evicted.push(p);
            }
            Proximity::CNear => {}
        }
    }
}

/// `L_f` filter copies with per-point back-references, answering uniform
/// samples from the `α`-near points found.
#[derive(Debug, Clone)]
pub struct NnisFilterIndex<'a> {
    data: &'a Dataset,
    index: FilterIndex<'a>,
}

impl<'a> NnisFilterIndex<'a> {
    pub fn build(data: &'a Dataset, alpha: f64, beta: f64, config: &FilterNnisConfig, seed: u64) -> Result<Self> {
        if !(config.c_f > 0.0) {
            return Err(invalid("c_f must be positive"));
        }
        let copies = (ceil_tolerant(config.c_f * libm::log(data.len().max(1) as f64)) as usize).max(1);
        let params = FilterParams::new(data.len(), alpha, beta, config.eps, copies, seed)?;
        Self::from_params(data, params)
    }

    pub fn from_params(data: &'a Dataset, params: FilterParams) -> Result<Self> {
        Ok(NnisFilterIndex { data, index: FilterIndex::build(data, params)? })
    }

    pub fn index(&self) -> &FilterIndex<'a> {
        &self.index
    }

    /// Uniform sample from the `α`-near points present in the marked buckets.
    pub fn query(&self, q: &[f32], rng: &mut SeededRng) -> Result<SampleResult> {
        self.query_traced(q, rng).map(|(r, _)| r)
    }

    pub fn query_traced(&self, q: &[f32], rng: &mut SeededRng) -> Result<(SampleResult, FilterTrace)> {
        let marked = self.index.marked_buckets(q)?;
        let metric = self.index.params.metric();
        let mut trace = FilterTrace { marked_buckets: marked.len(), ..FilterTrace::default() };
        let mut inspected = 0u64;
        let near_exists = marked.iter().any(|&b| {
            self.index.bucket(b).iter().any(|&id| {
                inspected += 1;
                metric.is_near(self.data.coords(id), q)
            })
        });
        if !near_exists {
            return Ok((SampleResult::bottom(inspected), trace));
        }
        let set: HashSet<MarkedBucket> = marked.iter().copied().collect();
        let lists: Vec<&[u32]> = marked.iter().map(|&b| self.index.bucket(b)).collect();
        let copies = self.index.num_copies() as u32;
        let evals = core::cell::Cell::new(0u64);
        let id = weighted_bucket_loop(
            &lists,
            |p| {
                evals.set(evals.get() + 1);
                metric.classify_value(dot(self.data.coords(p), q))
            },
            |p| {
                (0..copies)
                    .filter(|&c| set.contains(&MarkedBucket { copy: c, slot: self.index.slot_of(c as usize, p) }))
                    .count() as u32
            },
            rng,
            &mut trace,
        );
        Ok((SampleResult { outcome: Some(id), inspected: inspected + evals.get() }, trace))
    }

    pub fn memory_bytes(&self) -> usize {
        self.index.memory_bytes()
    }

    pub fn state_digest(&self) -> u64 {
        self.index.state_digest()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(rng: &mut SeededRng, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        v.iter().map(|x| x / n).collect()
    }

    /// Unit vector with inner product `s` to unit `q`.
    fn at_similarity(rng: &mut SeededRng, q: &[f64], s: f64) -> Vec<f32> {
        let u = unit(rng, q.len());
        let proj: f64 = u.iter().zip(q).map(|(a, b)| a * b).sum();
        let mut w: Vec<f64> = u.iter().zip(q).map(|(a, b)| a - proj * b).collect();
        let n = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
        w.iter_mut().for_each(|x| *x /= n);
        let c = libm::sqrt(1.0 - s * s);
        q.iter().zip(&w).map(|(a, b)| (s * a + c * b) as f32).collect()
    }

    fn to_f32(v: &[f64]) -> Vec<f32> {
        v.iter().map(|&x| x as f32).collect()
    }

    #[test]
    fn closed_forms() {
        assert!((f_threshold(0.5, 0.1).unwrap() - 1.8584610944249192).abs() < 1e-14);
        assert_eq!(f_threshold(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(f_threshold(0.4, 1.0).unwrap(), 0.0);
        assert!(f_threshold(0.4, 0.0).is_err());
        assert!(f_threshold(-1.0, 0.5).is_err());
        assert!((rho_exponent(0.6, 0.6).unwrap() - 1.0).abs() < 1e-15);
        assert!((rho_exponent(0.6, 0.0).unwrap() - 0.64).abs() < 1e-15);
        assert!((rho_exponent(0.8, 0.2).unwrap() - 0.489_795_918_367_346_9).abs() < 1e-15);
        assert!(rho_exponent(0.2, 0.8).is_err());
    }

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(1, 0.8, 0.2).unwrap().m, 1.0);
        assert_eq!(choose_m(1, 0.8, 0.2).unwrap().m_part, 1);
        assert_eq!(choose_m(5000, 0.6, 0.0).unwrap().m, 5000.0);
        let s = choose_m(10_000, 0.8, 0.2).unwrap();
        assert_eq!(s.m, 276807.0);
        assert_eq!(s.t, 3);
        assert_eq!(s.m_part, 66);
        assert!(s.effective_m() >= s.m);
        let s = choose_m(2000, 0.7, 0.3).unwrap();
        assert_eq!((s.m, s.t, s.m_part), (65048.0, 2, 256));
    }

    #[test]
    fn m_part_is_smallest_cover() {
        for n in [2usize, 17, 300, 4096, 20_000] {
            for (a, b) in [(0.5, 0.1), (0.8, 0.2), (0.9, 0.5), (0.3, -0.4)] {
                let s = choose_m(n, a, b).unwrap();
                assert!(libm::pow(s.m_part as f64, s.t as f64) >= s.m);
                assert!(s.m_part == 1 || libm::pow((s.m_part - 1) as f64, s.t as f64) < s.m);
            }
        }
    }

    #[test]
    fn repetitions_formula() {
        // ln(20) / 0.5^2 for t-like exponent 1/(1 - 0.5) = 2
        let alpha = libm::sqrt(0.5);
        assert_eq!(repetitions(0.5, alpha, 0.05).unwrap(), libm::ceil(libm::log(20.0) * 4.0) as usize);
        assert_eq!(repetitions(1.0, 0.0, 0.5).unwrap(), 1);
        assert!(repetitions(0.0, 0.5, 0.1).is_err());
    }

    fn random_units(rng: &mut SeededRng, n: usize, d: usize) -> Dataset {
        let rows: Vec<Vec<f32>> = (0..n).map(|_| to_f32(&unit(rng, d))).collect();
        Dataset::from_rows(d, &rows).unwrap()
    }

    #[test]
    fn single_group_key_is_argmax() {
        let mut rng = SeededRng::new(1);
        let ds = random_units(&mut rng, 50, 8);
        let p = FilterParams::with_parts(0.5, 0.1, 0.1, 1, 16, 1, 9).unwrap();
        let idx = FilterIndex::build(&ds, p).unwrap();
        let filters = &idx.copies[0].filters;
        for pt in ds.iter() {
            let scores: Vec<f64> = (0..16).map(|j| dot(&filters[j * 8..(j + 1) * 8], pt.coords)).collect();
            assert_eq!(idx.bucket_key(0, pt.id), vec![argmax(&scores)]);
        }
    }

    #[test]
    fn each_point_stored_once_per_copy() {
        let mut rng = SeededRng::new(2);
        let mut ds_rows: Vec<Vec<f32>> = (0..200).map(|_| to_f32(&unit(&mut rng, 12))).collect();
        ds_rows.push(ds_rows[0].clone());
        let ds = Dataset::from_rows(12, &ds_rows).unwrap();
        let idx = FilterIndex::build(&ds, FilterParams::with_parts(0.7, 0.3, 0.1, 2, 8, 3, 4).unwrap()).unwrap();
        for c in 0..3 {
            let total: usize = idx.buckets(c).iter().map(Vec::len).sum();
            assert_eq!(total, 201);
            for id in 0..201u32 {
                assert!(idx.buckets(c)[idx.slot_of(c, id) as usize].contains(&id));
            }
            assert_eq!(idx.slot_of(c, 0), idx.slot_of(c, 200));
            assert!(idx.buckets(c).iter().all(|b| !b.is_empty()));
        }
    }

    #[test]
    fn empty_dataset_and_bad_input() {
        let ds = Dataset::empty(4).unwrap();
        let idx = FilterIndex::build(&ds, FilterParams::new(0, 0.5, 0.1, 0.1, 1, 0).unwrap()).unwrap();
        assert_eq!(idx.query(&[1.0, 0.0, 0.0, 0.0]).unwrap().outcome, None);
        assert!(idx.query(&[1.0, 1.0, 0.0, 0.0]).is_err());
        let bad = Dataset::from_rows(2, &[[3.0f32, 0.0]]).unwrap();
        assert!(FilterIndex::build(&bad, FilterParams::new(1, 0.5, 0.1, 0.1, 1, 0).unwrap()).is_err());
    }

    #[test]
    fn self_query_finds_a_beta_point() {
        let mut rng = SeededRng::new(3);
        let ds = random_units(&mut rng, 300, 10);
        let idx = FilterIndex::build(&ds, FilterParams::new(300, 0.7, 0.3, 0.1, 1, 5).unwrap()).unwrap();
        for id in 0..300u32 {
            let q = ds.coords(id);
            let sets = idx.threshold_sets(0, q).unwrap();
            for (i, j) in idx.bucket_key(0, id).into_iter().enumerate() {
                assert!(sets[i].contains(&j));
            }
            let r = idx.query(q).unwrap().outcome.unwrap();
            assert!(dot(ds.coords(r), q) >= 0.3);
        }
    }

    #[test]
    fn larger_eps_means_supersets() {
        let mut rng = SeededRng::new(4);
        let ds = random_units(&mut rng, 10, 16);
        let idx = FilterIndex::build(&ds, FilterParams::with_parts(0.7, 0.3, 0.5, 2, 64, 1, 6).unwrap()).unwrap();
        for _ in 0..50 {
            let q = to_f32(&unit(&mut rng, 16));
            let mut prev: Option<Vec<Vec<usize>>> = None;
            for eps in [0.9, 0.5, 0.1, 0.01, 0.0001] {
                let sets = idx.threshold_sets_with_eps(0, &q, eps).unwrap();
                if let Some(prev) = prev {
                    for (a, b) in prev.iter().zip(&sets) {
                        assert!(a.iter().all(|j| b.contains(j)));
                    }
                }
                prev = Some(sets);
            }
        }
    }

    #[test]
    fn lexicographic_enumeration_matches_product() {
        let mut rng = SeededRng::new(5);
        let ds = random_units(&mut rng, 400, 6);
        let idx = FilterIndex::build(&ds, FilterParams::with_parts(0.6, 0.2, 0.2, 3, 5, 1, 7).unwrap()).unwrap();
        let q = to_f32(&unit(&mut rng, 6));
        let sets = idx.threshold_sets(0, &q).unwrap();
        let marked = idx.marked_buckets(&q).unwrap();
        let keys: Vec<Vec<usize>> = marked.iter().map(|b| idx.unpack(idx.copies[0].keys[b.slot as usize])).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for (slot, key) in idx.copies[0].keys.iter().enumerate() {
            let key = idx.unpack(*key);
            let inside = key.iter().zip(&sets).all(|(j, s)| s.contains(j));
            assert_eq!(inside, marked.contains(&MarkedBucket { copy: 0, slot: slot as u32 }));
        }
    }

    #[test]
    fn single_near_point_always_returned() {
        let mut rng = SeededRng::new(6);
        let q = unit(&mut rng, 16);
        let mut rows = vec![at_similarity(&mut rng, &q, 0.9)];
        while rows.len() < 300 {
            let v = to_f32(&unit(&mut rng, 16));
            if dot(&v, &to_f32(&q)) < 0.6 {
                rows.push(v);
            }
        }
        let ds = Dataset::from_rows(16, &rows).unwrap();
        let idx = NnisFilterIndex::build(&ds, 0.8, 0.3, &FilterNnisConfig::default(), 8).unwrap();
        let qf = to_f32(&q);
        let before = idx.state_digest();
        for _ in 0..200 {
            let (r, trace) = idx.query_traced(&qf, &mut rng).unwrap();
            assert_eq!(r.outcome, Some(0));
            for &e in &trace.evicted {
                assert!(dot(ds.coords(e), &qf) < 0.3);
            }
        }
        assert_eq!(idx.state_digest(), before);
    }

    #[test]
    fn no_near_point_is_bottom() {
        let mut rng = SeededRng::new(7);
        let q = unit(&mut rng, 16);
        let rows: Vec<Vec<f32>> = (0..100).map(|_| at_similarity(&mut rng, &q, 0.1)).collect();
        let ds = Dataset::from_rows(16, &rows).unwrap();
        let idx = NnisFilterIndex::build(&ds, 0.8, 0.3, &FilterNnisConfig::default(), 9).unwrap();
        assert_eq!(idx.query(&to_f32(&q), &mut rng).unwrap().outcome, None);
    }

    #[test]
    fn multiplicity_correction() {
        // point 0 sits in two buckets, point 1 in one; both near
        let b1: &[u32] = &[0, 2, 3];
        let b2: &[u32] = &[0, 1, 4];
        let classify = |p: u32| match p {
            0 | 1 => Proximity::Near,
            2 => Proximity::CNear,
            _ => Proximity::Far,
        };
        let mult = |p: u32| if p == 0 { 2 } else { 1 };
        let mut rng = SeededRng::new(10);
        let mut counts = [0u32; 2];
        for _ in 0..40_000 {
            let mut trace = FilterTrace::default();
            let p = weighted_bucket_loop(&[b1, b2], classify, mult, &mut rng, &mut trace);
            counts[p as usize] += 1;
            assert!(trace.evicted.iter().all(|&e| e >= 3));
        }
        let ratio = counts[0] as f64 / counts[1] as f64;
        assert!((ratio - 1.0).abs() < 0.05, "{counts:?}");
    }
}
