//! r-near neighbor independent sampling by segment rejection.
//!
//! The rank permutation splits into `k` equal segments. A query picks a
//! segment uniformly, collects the near points colliding with `q` whose rank
//! falls in it, and accepts with probability `λ_{q,h} / λ`; on acceptance it
//! returns a uniform element of that segment. Every point in the neighborhood
//! is then returned with the same probability `1/(kλ)` per iteration. `k`
//! starts from a count-distinct estimate of the collision set and halves after
//! `Σ` consecutive iterations at the same `k`.
//!
//! Queries never mutate the structure, so answers are independent across any
//! query sequence given the caller's random stream.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::hash::Hasher;

use rand::RngCore;

use crate::dataset::Dataset;
use crate::digest::StateDigest;
use crate::error::{invalid, Error, Result};
use crate::lsh::{build_index, compute_params, BucketRef, LshConfig, LshFamily, LshIndex};
use crate::metric::Metric;
use crate::perm::RankPermutation;
use crate::rng::SeededRng;
use crate::sketch::{DistinctSketch, SketchConstants, SketchFamily};
use crate::SampleResult;

/// Constants of the segment sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnisConfig {
    pub lsh: LshConfig,
    /// `λ = ⌈c_lambda · ln n⌉`
    pub c_lambda: f64,
    /// `Σ = ⌈c_sigma · ln² n⌉`
    pub c_sigma: f64,
    pub sketch: SketchConstants,
}

impl Default for NnisConfig {
    fn default() -> Self {
        NnisConfig { lsh: LshConfig::default(), c_lambda: 4.0, c_sigma: 4.0, sketch: SketchConstants::default() }
    }
}

/// Per-query counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NnisStats {
    /// Estimated size of the collision set.
    pub estimate: u64,
    pub initial_k: usize,
    /// Segment draws (loop iterations).
    pub iterations: u64,
    /// Iterations where `λ_{q,h} > λ` forced the acceptance probability to 1.
    pub clamp_events: u64,
    /// Largest `λ_{q,h}` observed.
    pub max_segment: usize,
    pub sketch_merges: u64,
    pub sketches_synthesized: u64,
}

#[derive(Debug, Clone)]
pub struct SegmentSampler<'a> {
    data: &'a Dataset,
    metric: Metric,
    index: LshIndex,
    perm: RankPermutation,
    /// `ranks[table][slot]`: ascending ranks parallel to the index bucket.
    ranks: Vec<Vec<Vec<u32>>>,
    /// Stored sketches for buckets of at least `tau` points.
    sketches: Vec<Vec<Option<DistinctSketch>>>,
    family: Arc<SketchFamily>,
    lambda: usize,
    sigma: usize,
    tau: usize,
    /// `n` rounded up to a power of two; ranks past `n - 1` are unoccupied.
    rank_space: usize,
}

impl<'a> SegmentSampler<'a> {
    pub fn build(
        data: &'a Dataset,
        metric: Metric,
        family: LshFamily,
        config: &NnisConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if !(config.c_lambda > 0.0 && config.c_sigma > 0.0) {
            return Err(invalid("c_lambda and c_sigma must be positive"));
        }
        let n = data.len();
        let params = compute_params(&family, &metric, data.dim(), n, &config.lsh, rng.next_u64())?;
        let perm = if n == 0 { RankPermutation::identity(0) } else { RankPermutation::random(n, rng)? };
        let index = build_index(data, &family, &params, &perm)?;

        let ln_n = libm::log(n.max(1) as f64);
        let lambda = (libm::ceil(config.c_lambda * ln_n) as usize).max(1);
        let sigma = (libm::ceil(config.c_sigma * ln_n * ln_n) as usize).max(1);
        let tau = (libm::ceil(ln_n) as usize).max(1);
        // ε = 1/2, δ = 1/n³
        let nn = n.max(2) as f64;
        let sketch_family =
            Arc::new(SketchFamily::new(0.5, 1.0 / (nn * nn * nn), n.max(1) as u64, config.sketch, rng)?);

        let mut ranks = Vec::with_capacity(index.num_tables());
        let mut sketches = Vec::with_capacity(index.num_tables());
        for t in 0..index.num_tables() {
            let buckets = index.buckets(t);
            ranks.push(buckets.iter().map(|b| b.iter().map(|&id| perm.rank(id)).collect()).collect());
            sketches.push(
                buckets
                    .iter()
                    .map(|b| {
                        (b.len() >= tau).then(|| DistinctSketch::from_ids(sketch_family.clone(), b.iter().copied()))
                    })
                    .collect(),
            );
        }
        Ok(SegmentSampler {
            data,
            metric,
            index,
            perm,
            ranks,
            sketches,
            family: sketch_family,
            lambda,
            sigma,
            tau,
            rank_space: n.max(1).next_power_of_two(),
        })
    }

    pub fn index(&self) -> &LshIndex {
        &self.index
    }

    pub fn permutation(&self) -> &RankPermutation {
        &self.perm
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    /// Bucket size from which sketches are stored rather than synthesized.
    pub fn sketch_threshold(&self) -> usize {
        self.tau
    }

    pub fn rank_space(&self) -> usize {
        self.rank_space
    }

    fn check_query(&self, q: &[f32]) -> Result<()> {
        self.data.check_dim(q)?;
        self.metric.check_input(q)
    }

    fn collision_estimate(&self, refs: &[BucketRef], stats: &mut NnisStats) -> u64 {
        let mut merged = DistinctSketch::new(self.family.clone());
        for &r in refs {
            let Some(slot) = r.slot else { continue };
            stats.sketch_merges += 1;
            match &self.sketches[r.table as usize][slot as usize] {
                Some(s) => merged.merge_from(s),
                None => {
                    stats.sketches_synthesized += 1;
                    let s = DistinctSketch::from_ids(self.family.clone(), self.index.bucket(r).iter().copied());
                    merged.merge_from(&s)
                }
            }
            .expect("all bucket sketches share one family");
        }
        merged.estimate()
    }

    /// Approximate number of distinct points colliding with `q`.
    pub fn estimate_collisions(&self, q: &[f32]) -> Result<u64> {
        self.check_query(q)?;
        let refs = self.index.query_buckets(q)?;
        Ok(self.collision_estimate(&refs, &mut NnisStats::default()))
    }

    /// Near points of `q` colliding in some table with rank in
    /// `[h·N/k, (h+1)·N/k)`, `N` the padded rank space. Sorted by rank.
    pub fn segment_near_neighbors(&self, q: &[f32], k: usize, h: usize) -> Result<Vec<u32>> {
        self.check_query(q)?;
        if !k.is_power_of_two() || k > self.rank_space {
            return Err(invalid("segment count must be a power of two no larger than the rank space"));
        }
        if h >= k {
            return Err(Error::SegmentOutOfRange { h, k });
        }
        let refs = self.index.query_buckets(q)?;
        let mut out = Vec::new();
        self.segment_into(q, &refs, k, h, &mut out);
        Ok(out)
    }

    /// Returns the number of candidates whose distance was evaluated.
    fn segment_into(&self, q: &[f32], refs: &[BucketRef], k: usize, h: usize, out: &mut Vec<u32>) -> u64 {
        let width = self.rank_space / k;
        let (lo, hi) = ((h * width) as u32, ((h + 1) * width) as u32);
        out.clear();
        for &r in refs {
            let Some(slot) = r.slot else { continue };
            let ranks = &self.ranks[r.table as usize][slot as usize];
            let a = ranks.partition_point(|&x| x < lo);
            let b = a + ranks[a..].partition_point(|&x| x < hi);
            out.extend_from_slice(&ranks[a..b]);
        }
        // ranks identify points uniquely, so dedup on ranks
        out.sort_unstable();
        out.dedup();
        let inspected = out.len() as u64;
        out.retain_mut(|r| {
            let id = self.perm.id_at(*r);
            *r = id;
            self.metric.is_near(self.data.coords(id), q)
        });
        inspected
    }

    /// One independent uniform sample from the near neighbors of `q`.
    pub fn query(&self, q: &[f32], rng: &mut SeededRng) -> Result<SampleResult> {
        self.query_with_stats(q, rng).map(|(r, _)| r)
    }

    pub fn query_with_stats(&self, q: &[f32], rng: &mut SeededRng) -> Result<(SampleResult, NnisStats)> {
        self.check_query(q)?;
        let mut stats = NnisStats::default();
        let refs = self.index.query_buckets(q)?;
        let estimate = self.collision_estimate(&refs, &mut stats);
        stats.estimate = estimate;
        let mut k = if estimate == 0 { 1 } else { (2 * estimate as usize).next_power_of_two().min(self.rank_space) };
        stats.initial_k = k;
        let mut failures = 0usize;
        let mut inspected = 0u64;
        let mut segment = Vec::new();
        while k >= 1 {
            let h = rng.below(k);
            inspected += self.segment_into(q, &refs, k, h, &mut segment);
            let found = segment.len();
            stats.iterations += 1;
            stats.max_segment = stats.max_segment.max(found);
            if found > self.lambda {
                stats.clamp_events += 1;
            }
            // acceptance uses the k the segment was drawn with
            let accept = rng.chance(found as f64 / self.lambda as f64);
            failures += 1;
            if failures == self.sigma {
                k /= 2;
                failures = 0;
            }
            if accept {
                let id = segment[rng.below(found)];
                return Ok((SampleResult { outcome: Some(id), inspected }, stats));
            }
        }
        Ok((SampleResult::bottom(inspected), stats))
    }

    pub fn memory_bytes(&self) -> usize {
        let ranks: usize = self.ranks.iter().flatten().map(|r| r.len() * 4 + 24).sum();
        let sketches: usize = self.sketches.iter().flatten().flatten().map(DistinctSketch::heap_bytes).sum();
        self.index.memory_bytes() + self.perm.len() * 8 + ranks + sketches
    }

    /// Digest of every mutable-in-principle field; queries must leave it unchanged.
    pub fn state_digest(&self) -> u64 {
        let mut h = StateDigest::default();
        self.index.digest(&mut h);
        h.u32s(self.perm.ranks());
        for r in self.ranks.iter().flatten() {
            h.u32s(r);
        }
        for s in self.sketches.iter().flatten() {
            match s {
                Some(s) => {
                    h.write_u8(1);
                    for l in s.lists() {
                        h.u64s(l);
                    }
                }
                None => h.write_u8(0),
            }
        }
        h.finish()
    }
}
