use alloc::vec::Vec;
use core::hash::Hasher;

use hashbrown::HashMap;

use crate::dataset::Dataset;
use crate::digest::StateDigest;
use crate::error::{invalid, Result};
use crate::lsh::{ConcatHash, LshFamily, LshParams};
use crate::metric::{Metric, Proximity};
use crate::perm::RankPermutation;
use crate::rng::SeededRng;
use crate::SampleResult;

/// One of the `L` hash tables.
#[derive(Debug, Clone)]
struct Table {
    hash: ConcatHash,
    slots: HashMap<u64, u32>,
    /// Point ids per bucket, ascending by rank.
    buckets: Vec<Vec<u32>>,
    /// Bucket slot of every point id.
    slot_of: Vec<u32>,
}

/// A query's bucket in one table; `slot` is `None` when the key is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketRef {
    pub table: u32,
    pub slot: Option<u32>,
}

/// `L` hash tables over a dataset, each bucket rank-sorted.
#[derive(Debug, Clone)]
pub struct LshIndex {
    params: LshParams,
    dim: usize,
    n: usize,
    tables: Vec<Table>,
}

/// Hashes every point into `params.l` tables of `params.k` concatenated
/// functions. Hash functions of table `i` come from stream `i` of `params.seed`.
pub fn build_index(
    dataset: &Dataset,
    family: &LshFamily,
    params: &LshParams,
    perm: &RankPermutation,
) -> Result<LshIndex> {
    let n = dataset.len();
    if perm.len() != n {
        return Err(invalid("permutation does not cover the dataset"));
    }
    let dim = dataset.dim();
    let tables = (0..params.l)
        .map(|i| {
            let mut rng = SeededRng::stream(params.seed, i as u64);
            let hash = family.sample(dim, params.k, &mut rng);
            let mut slots: HashMap<u64, u32> = HashMap::new();
            let mut buckets: Vec<Vec<u32>> = Vec::new();
            let mut slot_of = Vec::with_capacity(n);
            for p in dataset.iter() {
                let key = hash.key(p.coords);
                let slot = *slots.entry(key).or_insert_with(|| {
                    buckets.push(Vec::new());
                    (buckets.len() - 1) as u32
                });
                buckets[slot as usize].push(p.id);
                slot_of.push(slot);
            }
            for b in &mut buckets {
                b.sort_unstable_by_key(|&id| perm.rank(id));
            }
            Table { hash, slots, buckets, slot_of }
        })
        .collect();
    Ok(LshIndex { params: *params, dim, n, tables })
}

impl LshIndex {
    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn num_tables(&self) -> usize {
        self.tables.len()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `L` buckets `q` hashes to, in table order.
    pub fn query_buckets(&self, q: &[f32]) -> Result<Vec<BucketRef>> {
        if q.len() != self.dim {
            return Err(crate::Error::DimensionMismatch { expected: self.dim, found: q.len() });
        }
        Ok(self
            .tables
            .iter()
            .enumerate()
            .map(|(i, t)| BucketRef { table: i as u32, slot: t.slots.get(&t.hash.key(q)).copied() })
            .collect())
    }

    /// Ids in a bucket, ascending by rank; empty for an absent key.
    pub fn bucket(&self, r: BucketRef) -> &[u32] {
        match r.slot {
            Some(s) => &self.tables[r.table as usize].buckets[s as usize],
            None => &[],
        }
    }

    /// Buckets of table `table`, by slot.
    pub fn buckets(&self, table: usize) -> &[Vec<u32>] {
        &self.tables[table].buckets
    }

    /// The slot of point `id` in table `table`.
    #[inline]
    pub fn slot_of(&self, table: usize, id: u32) -> u32 {
        self.tables[table].slot_of[id as usize]
    }

    /// Classic LSH query: first `(c, r)`-near point found, giving up after
    /// more than `3L` far points.
    pub fn standard_ann_query(&self, dataset: &Dataset, metric: &Metric, q: &[f32]) -> Result<SampleResult> {
        let refs = self.query_buckets(q)?;
        let far_budget = 3 * self.tables.len() as u64;
        let (mut inspected, mut far) = (0u64, 0u64);
        for r in refs {
            for &id in self.bucket(r) {
                inspected += 1;
                match metric.classify_value(metric.distance_unchecked(dataset.coords(id), q)) {
                    Proximity::Near | Proximity::CNear => return Ok(SampleResult { outcome: Some(id), inspected }),
                    Proximity::Far => {
                        far += 1;
                        if far > far_budget {
                            return Ok(SampleResult::bottom(inspected));
                        }
                    }
                }
            }
        }
        Ok(SampleResult::bottom(inspected))
    }

    /// Re-sorts every bucket by the ranks of `perm`.
    pub fn resort(&mut self, perm: &RankPermutation) {
        for t in &mut self.tables {
            for b in &mut t.buckets {
                b.sort_unstable_by_key(|&id| perm.rank(id));
            }
        }
    }

    /// Every bucket strictly increasing in rank under `perm`.
    pub fn is_rank_sorted(&self, perm: &RankPermutation) -> bool {
        self.tables.iter().all(|t| t.buckets.iter().all(|b| b.windows(2).all(|w| perm.rank(w[0]) < perm.rank(w[1]))))
    }

    /// Every table's buckets partition `0..n`, and `slot_of` agrees.
    pub fn is_partition(&self) -> bool {
        self.tables.iter().all(|t| {
            let mut seen = alloc::vec![false; self.n];
            for (slot, b) in t.buckets.iter().enumerate() {
                for &id in b {
                    if seen[id as usize] || t.slot_of[id as usize] != slot as u32 {
                        return false;
                    }
                    seen[id as usize] = true;
                }
            }
            seen.iter().all(|&s| s)
        })
    }

    /// Rough heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.tables
            .iter()
            .map(|t| {
                t.hash.heap_bytes()
                    + t.slots.len() * 16
                    + t.buckets.iter().map(|b| b.len() * 4 + 24).sum::<usize>()
                    + t.slot_of.len() * 4
            })
            .sum()
    }

    pub fn digest(&self, h: &mut StateDigest) {
        h.write_usize(self.tables.len());
        for t in &self.tables {
            for b in &t.buckets {
                h.u32s(b);
            }
            h.u32s(&t.slot_of);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsh::{compute_params, LshConfig};

    fn hamming_rows(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let data = (0..n * d).map(|_| rng.below(2) as f32).collect();
        Dataset::new(d, data).unwrap()
    }

    fn build(ds: &Dataset, seed: u64) -> (LshIndex, RankPermutation, Metric) {
        let m = Metric::hamming(4.0, 4.0).unwrap();
        let f = LshFamily::BitSampling;
        let params = compute_params(&f, &m, ds.dim(), ds.len(), &LshConfig::default(), seed).unwrap();
        let perm = if ds.is_empty() {
            RankPermutation::identity(0)
        } else {
            RankPermutation::random(ds.len(), &mut SeededRng::new(seed ^ 1)).unwrap()
        };
        (build_index(ds, &f, &params, &perm).unwrap(), perm, m)
    }

    #[test]
    fn single_point_single_bucket() {
        let ds = hamming_rows(1, 32, 1);
        let (idx, _, _) = build(&ds, 3);
        for t in 0..idx.num_tables() {
            assert_eq!(idx.buckets(t), &[alloc::vec![0u32]]);
        }
    }

    #[test]
    fn partition_and_rank_order() {
        let ds = hamming_rows(300, 32, 2);
        let (idx, perm, _) = build(&ds, 4);
        assert!(idx.is_partition());
        assert!(idx.is_rank_sorted(&perm));
        for t in 0..idx.num_tables() {
            assert_eq!(idx.buckets(t).iter().map(Vec::len).sum::<usize>(), 300);
        }
    }

    #[test]
    fn identical_points_share_buckets() {
        let mut rows = alloc::vec![alloc::vec![0.0f32; 16]; 3];
        rows[1][3] = 1.0;
        rows[2] = rows[0].clone();
        let ds = Dataset::from_rows(16, &rows).unwrap();
        let (idx, _, _) = build(&ds, 5);
        for t in 0..idx.num_tables() {
            assert_eq!(idx.slot_of(t, 0), idx.slot_of(t, 2));
        }
    }

    #[test]
    fn data_point_query_hits_all_tables() {
        let ds = hamming_rows(200, 32, 6);
        let (idx, _, m) = build(&ds, 7);
        let q = ds.coords(17);
        let refs = idx.query_buckets(q).unwrap();
        assert_eq!(refs.len(), idx.num_tables());
        assert!(refs.iter().all(|&r| idx.bucket(r).contains(&17)));
        let res = idx.standard_ann_query(&ds, &m, q).unwrap();
        let id = res.outcome.unwrap();
        assert_ne!(m.classify(ds.coords(id), q).unwrap(), Proximity::Far);
        assert!(idx.query_buckets(&[0.0; 3]).is_err());
    }

    #[test]
    fn empty_dataset_gives_empty_buckets() {
        let ds = Dataset::empty(8).unwrap();
        let (idx, _, m) = build(&ds, 1);
        let refs = idx.query_buckets(&[0.0; 8]).unwrap();
        assert_eq!(refs.len(), idx.num_tables());
        assert!(refs.iter().all(|&r| idx.bucket(r).is_empty()));
        assert_eq!(idx.standard_ann_query(&ds, &m, &[0.0; 8]).unwrap().outcome, None);
    }

    #[test]
    fn no_near_point_gives_bottom() {
        // every point far from an all-ones query
        let ds = Dataset::from_rows(16, &[[0.0f32; 16]; 5]).unwrap();
        let (idx, _, m) = build(&ds, 9);
        assert_eq!(idx.standard_ann_query(&ds, &m, &[1.0; 16]).unwrap().outcome, None);
    }
}
