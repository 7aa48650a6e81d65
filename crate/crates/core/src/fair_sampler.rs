//! Uniform r-near neighbor sampling over LSH buckets.
//!
//! Points get a uniformly random rank at build time; a query returns the
//! near point of minimum rank among everything colliding with it. In
//! [`SamplerMode::RankSwap`] the returned point then swaps its rank with a
//! uniformly chosen point of equal or higher rank, so repeating the same query
//! yields fresh independent samples.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::hash::Hasher;

use rand::RngCore;

use crate::dataset::Dataset;
use crate::digest::StateDigest;
use crate::error::{invalid, Result};
use crate::lsh::{build_index, compute_params, BucketRef, LshConfig, LshFamily, LshIndex};
use crate::metric::Metric;
use crate::perm::RankPermutation;
use crate::rng::SeededRng;
use crate::SampleResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMode {
    /// Buckets and ranks frozen after build.
    Static,
    /// Buckets are rank-keyed ordered maps updated by every answered query.
    RankSwap,
}

/// Rank-keyed buckets: `queues[table][slot]` maps rank -> id.
type Queues = Vec<Vec<BTreeMap<u32, u32>>>;

#[derive(Debug, Clone)]
pub struct NnsSampler<'a> {
    data: &'a Dataset,
    metric: Metric,
    index: LshIndex,
    perm: RankPermutation,
    queues: Option<Queues>,
}

impl<'a> NnsSampler<'a> {
    /// Draws the hash functions and the rank permutation from `rng`.
    pub fn build(
        data: &'a Dataset,
        metric: Metric,
        family: LshFamily,
        config: &LshConfig,
        mode: SamplerMode,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let params = compute_params(&family, &metric, data.dim(), data.len(), config, rng.next_u64())?;
        let perm =
            if data.is_empty() { RankPermutation::identity(0) } else { RankPermutation::random(data.len(), rng)? };
        let index = build_index(data, &family, &params, &perm)?;
        Self::from_parts(data, metric, index, perm, mode)
    }

    pub fn from_parts(
        data: &'a Dataset,
        metric: Metric,
        index: LshIndex,
        perm: RankPermutation,
        mode: SamplerMode,
    ) -> Result<Self> {
        if index.len() != data.len() || perm.len() != data.len() {
            return Err(invalid("index, permutation and dataset sizes differ"));
        }
        if !index.is_rank_sorted(&perm) {
            return Err(invalid("index buckets are not sorted by the given ranks"));
        }
        let queues = (mode == SamplerMode::RankSwap).then(|| {
            (0..index.num_tables())
                .map(|t| index.buckets(t).iter().map(|b| b.iter().map(|&id| (perm.rank(id), id)).collect()).collect())
                .collect()
        });
        Ok(NnsSampler { data, metric, index, perm, queues })
    }

    pub fn mode(&self) -> SamplerMode {
        if self.queues.is_some() {
            SamplerMode::RankSwap
        } else {
            SamplerMode::Static
        }
    }

    pub fn index(&self) -> &LshIndex {
        &self.index
    }

    pub fn permutation(&self) -> &RankPermutation {
        &self.perm
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Calls `visit` on the ids of bucket `r` in ascending rank order until it
    /// returns `false`.
    fn scan(&self, r: BucketRef, mut visit: impl FnMut(u32) -> bool) {
        let Some(slot) = r.slot else { return };
        match &self.queues {
            Some(q) => {
                for &id in q[r.table as usize][slot as usize].values() {
                    if !visit(id) {
                        return;
                    }
                }
            }
            None => {
                for &id in self.index.bucket(r) {
                    if !visit(id) {
                        return;
                    }
                }
            }
        }
    }

    fn check_query(&self, q: &[f32]) -> Result<()> {
        self.data.check_dim(q)?;
        self.metric.check_input(q)
    }

    /// The minimum-rank near point among all points colliding with `q`.
    pub fn query(&self, q: &[f32]) -> Result<SampleResult> {
        self.check_query(q)?;
        let mut best: Option<(u32, u32)> = None;
        let mut inspected = 0u64;
        for r in self.index.query_buckets(q)? {
            self.scan(r, |id| {
                let rank = self.perm.rank(id);
                // everything after this point in the bucket ranks higher
                if best.is_some_and(|(br, _)| br < rank) {
                    return false;
                }
                inspected += 1;
                if self.metric.is_near(self.data.coords(id), q) {
                    if best.is_none_or(|(br, _)| rank < br) {
                        best = Some((rank, id));
                    }
                    return false;
                }
                true
            });
        }
        Ok(SampleResult { outcome: best.map(|(_, id)| id), inspected })
    }

    /// The (at most) `k` colliding near points of smallest rank, in rank order.
    pub fn query_k(&self, q: &[f32], k: usize) -> Result<Vec<u32>> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        self.check_query(q)?;
        let mut found: Vec<(u32, u32)> = Vec::new();
        for r in self.index.query_buckets(q)? {
            let mut taken = 0;
            self.scan(r, |id| {
                if self.metric.is_near(self.data.coords(id), q) {
                    found.push((self.perm.rank(id), id));
                    taken += 1;
                }
                taken < k
            });
        }
        found.sort_unstable();
        found.dedup();
        Ok(found.into_iter().take(k).map(|(_, id)| id).collect())
    }

    /// [`NnsSampler::query`], then swaps the winner's rank with a uniformly
    /// drawn rank in `[rank(x), n)` and updates the affected buckets.
    pub fn query_rank_swap(&mut self, q: &[f32], rng: &mut SeededRng) -> Result<SampleResult> {
        if self.queues.is_none() {
            return Err(invalid("rank-swap queries need a sampler built in rank-swap mode"));
        }
        let res = self.query(q)?;
        if let Some(x) = res.outcome {
            let n = self.perm.len();
            let rx = self.perm.rank(x);
            let r = rx as usize + rng.below(n - rx as usize);
            let y = self.perm.id_at(r as u32);
            self.swap(x, y)?;
        }
        Ok(res)
    }

    /// `k` successive rank-swap queries: `k` samples with replacement.
    pub fn query_k_with_replacement(&mut self, q: &[f32], k: usize, rng: &mut SeededRng) -> Result<Vec<Option<u32>>> {
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        (0..k).map(|_| self.query_rank_swap(q, rng).map(|r| r.outcome)).collect()
    }

    fn swap(&mut self, x: u32, y: u32) -> Result<()> {
        if x == y {
            return Ok(());
        }
        let (rx, ry) = (self.perm.rank(x), self.perm.rank(y));
        self.perm.swap_ranks(x, y)?;
        let queues = self.queues.as_mut().expect("rank-swap mode");
        for (t, table) in queues.iter_mut().enumerate() {
            let (sx, sy) = (self.index.slot_of(t, x) as usize, self.index.slot_of(t, y) as usize);
            table[sx].remove(&rx);
            table[sy].remove(&ry);
            table[sx].insert(ry, x);
            table[sy].insert(rx, y);
        }
        Ok(())
    }

    /// Re-sorts the index's plain bucket arrays under the current ranks.
    pub fn resync_index(&mut self) {
        let perm = &self.perm;
        self.index.resort(perm);
    }

    /// Permutation is a bijection and every live bucket agrees with it.
    pub fn is_consistent(&self) -> bool {
        if !self.perm.is_consistent() {
            return false;
        }
        match &self.queues {
            None => self.index.is_rank_sorted(&self.perm),
            Some(queues) => queues.iter().enumerate().all(|(t, table)| {
                table.iter().enumerate().all(|(slot, q)| {
                    q.iter().all(|(&r, &id)| self.perm.rank(id) == r && self.index.slot_of(t, id) == slot as u32)
                }) && table.iter().map(BTreeMap::len).sum::<usize>() == self.perm.len()
            }),
        }
    }

    pub fn memory_bytes(&self) -> usize {
        let queues: usize = self.queues.iter().flatten().flatten().map(|q| q.len() * 24 + 32).sum();
        self.index.memory_bytes() + self.perm.len() * 8 + queues
    }

    pub fn state_digest(&self) -> u64 {
        let mut h = StateDigest::default();
        self.index.digest(&mut h);
        h.u32s(self.perm.ranks());
        if let Some(queues) = &self.queues {
            for q in queues.iter().flatten() {
                h.write_usize(q.len());
                for (&r, &id) in q {
                    h.write_u32(r);
                    h.write_u32(id);
                }
            }
        }
        h.finish()
    }
}
