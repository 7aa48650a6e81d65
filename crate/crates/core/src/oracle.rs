//! Brute-force ground truth and distribution comparison.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{Metric, Proximity};
use crate::rng::SeededRng;
use crate::stats::{chi2_sf, independence, merge_small_cells, pearson, ChiSquare};

/// Which band of the neighborhood to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallKind {
    /// Within `r` (similarity at least `α`).
    Near,
    /// Within `cr` (similarity at least `β`).
    NearOrCNear,
}

#[derive(Debug, Clone, Copy)]
pub struct NeighborhoodOracle<'a> {
    data: &'a Dataset,
    metric: Metric,
}

impl<'a> NeighborhoodOracle<'a> {
    pub fn new(data: &'a Dataset, metric: Metric) -> Self {
        NeighborhoodOracle { data, metric }
    }

    /// Ids in the ball around `q`, ascending.
    pub fn exact_ball(&self, q: &[f32], kind: BallKind) -> Result<Vec<u32>> {
        self.data.check_dim(q)?;
        Ok(self
            .data
            .iter()
            .filter(|p| match self.metric.classify_value(self.metric.distance_unchecked(p.coords, q)) {
                Proximity::Near => true,
                Proximity::CNear => kind == BallKind::NearOrCNear,
                Proximity::Far => false,
            })
            .map(|p| p.id)
            .collect())
    }

    pub fn exact_uniform_sample(&self, q: &[f32], rng: &mut SeededRng) -> Result<Option<u32>> {
        let ball = self.exact_ball(q, BallKind::Near)?;
        Ok((!ball.is_empty()).then(|| ball[rng.below(ball.len())]))
    }
}

type Closeness = fn(&[f32], &[f32]) -> f64;

/// Second implementation of the ball: rank every point by closeness and cut
/// the sorted list at the threshold.
pub fn ball_by_sorted_distances(data: &Dataset, metric: &Metric, q: &[f32], kind: BallKind) -> Vec<u32> {
    let (closeness, cut): (Closeness, f64) = match (*metric, kind) {
        (Metric::Euclidean { r, .. }, BallKind::Near) => (neg_euclidean, -r),
        (Metric::Euclidean { r, c }, BallKind::NearOrCNear) => (neg_euclidean, -(c * r)),
        (Metric::Hamming { r, .. }, BallKind::Near) => (neg_hamming, -r),
        (Metric::Hamming { r, c }, BallKind::NearOrCNear) => (neg_hamming, -(c * r)),
        (Metric::InnerProduct { alpha, .. }, BallKind::Near) => (inner, alpha),
        (Metric::InnerProduct { beta, .. }, BallKind::NearOrCNear) => (inner, beta),
    };
    let mut scored: Vec<(f64, u32)> = (0..data.len() as u32).map(|id| (closeness(data.coords(id), q), id)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let end = scored.partition_point(|&(s, _)| s >= cut);
    let mut ids: Vec<u32> = scored[..end].iter().map(|&(_, id)| id).collect();
    ids.sort_unstable();
    ids
}

fn neg_euclidean(p: &[f32], q: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..p.len() {
        let d = p[i] as f64 - q[i] as f64;
        s += d * d;
    }
    -libm::sqrt(s)
}

fn neg_hamming(p: &[f32], q: &[f32]) -> f64 {
    let mut n = 0u32;
    for i in 0..p.len() {
        n += (p[i] != q[i]) as u32;
    }
    -(n as f64)
}

fn inner(p: &[f32], q: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..p.len() {
        s += p[i] as f64 * q[i] as f64;
    }
    s
}

/// Outcome counts of a sampling experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub counts: BTreeMap<u32, u64>,
    pub bottoms: u64,
}

impl Tally {
    pub fn record(&mut self, outcome: Option<u32>) {
        match outcome {
            Some(id) => *self.counts.entry(id).or_insert(0) += 1,
            None => self.bottoms += 1,
        }
    }

    pub fn from_outcomes(outcomes: impl IntoIterator<Item = Option<u32>>) -> Self {
        let mut t = Tally::default();
        for o in outcomes {
            t.record(o);
        }
        t
    }

    /// Non-⊥ samples.
    pub fn hits(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn total(&self) -> u64 {
        self.hits() + self.bottoms
    }

    pub fn frequency(&self, id: u32) -> f64 {
        let hits = self.hits();
        if hits == 0 {
            return 0.0;
        }
        self.counts.get(&id).copied().unwrap_or(0) as f64 / hits as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionReport {
    /// Total variation distance between non-⊥ frequencies and the expectation.
    pub tvd: f64,
    pub chi2_stat: f64,
    pub chi2_dof: usize,
    pub chi2_pvalue: f64,
    /// Non-⊥ samples.
    pub n_samples: u64,
    pub bottoms: u64,
}

impl DistributionReport {
    pub fn bottom_rate(&self) -> f64 {
        let total = self.n_samples + self.bottoms;
        if total == 0 {
            0.0
        } else {
            self.bottoms as f64 / total as f64
        }
    }
}

/// Compares non-⊥ outcomes against `expected` (probabilities, normalized here).
pub fn compare_distributions(observed: &Tally, expected: &BTreeMap<u32, f64>) -> Result<DistributionReport> {
    let mass: f64 = expected.values().filter(|&&p| p > 0.0).sum();
    if !(mass > 0.0) {
        return Err(Error::EmptySupport);
    }
    for (&id, _) in observed.counts.iter().filter(|(_, &c)| c > 0) {
        if expected.get(&id).is_none_or(|&p| p <= 0.0) {
            return Err(Error::UnexpectedOutcome(id));
        }
    }
    let n = observed.hits();
    let nf = n as f64;
    let mut tvd = 0.0;
    let mut cells = Vec::new();
    for (&id, &p) in expected.iter().filter(|(_, &p)| p > 0.0) {
        let p = p / mass;
        let o = observed.counts.get(&id).copied().unwrap_or(0) as f64;
        if n > 0 {
            tvd += (o / nf - p).abs();
        }
        cells.push((o, p * nf));
    }
    let cells = merge_small_cells(&cells, 5.0);
    let chi2_stat = pearson(&cells);
    let chi2_dof = cells.len().saturating_sub(1);
    Ok(DistributionReport {
        tvd: if n > 0 { tvd / 2.0 } else { 1.0 },
        chi2_stat,
        chi2_dof,
        chi2_pvalue: chi2_sf(chi2_stat, chi2_dof),
        n_samples: n,
        bottoms: observed.bottoms,
    })
}

/// Uniform expectation over `ids`.
pub fn uniform_over(ids: &[u32]) -> BTreeMap<u32, f64> {
    ids.iter().map(|&id| (id, 1.0)).collect()
}

/// Chi-square independence over disjoint consecutive pairs `(s[2i], s[2i+1])`.
/// Pairs containing ⊥ are dropped.
pub fn pair_independence(sequence: &[Option<u32>]) -> ChiSquare {
    let mut labels: BTreeMap<u32, usize> = BTreeMap::new();
    for &id in sequence.iter().flatten() {
        let next = labels.len();
        labels.entry(id).or_insert(next);
    }
    let k = labels.len();
    let mut table = alloc::vec![0u64; k * k];
    for pair in sequence.chunks_exact(2) {
        if let (Some(a), Some(b)) = (pair[0], pair[1]) {
            table[labels[&a] * k + labels[&b]] += 1;
        }
    }
    independence(&table, k, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_instance(rng: &mut SeededRng, n: usize, dim: usize, metric: &Metric) -> Dataset {
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| match metric {
                Metric::Hamming { .. } => (0..dim).map(|_| rng.below(2) as f32).collect(),
                Metric::Euclidean { .. } => (0..dim).map(|_| rng.gaussian() as f32).collect(),
                Metric::InnerProduct { .. } => {
                    let v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
                    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
                    v.iter().map(|x| (x / norm) as f32).collect()
                }
            })
            .collect();
        Dataset::from_rows(dim, &rows).unwrap()
    }

    #[test]
    fn zero_radius_off_dataset_is_empty() {
        let ds = Dataset::from_rows(2, &[[0.0f32, 0.0], [1.0, 1.0]]).unwrap();
        let o = NeighborhoodOracle::new(&ds, Metric::euclidean(0.0, 2.0).unwrap());
        assert!(o.exact_ball(&[0.5, 0.5], BallKind::Near).unwrap().is_empty());
        assert_eq!(o.exact_uniform_sample(&[0.5, 0.5], &mut SeededRng::new(0)).unwrap(), None);
    }

    #[test]
    fn radius_past_diameter_is_everything() {
        let mut rng = SeededRng::new(1);
        let m = Metric::euclidean(100.0, 2.0).unwrap();
        let ds = random_instance(&mut rng, 50, 4, &m);
        let o = NeighborhoodOracle::new(&ds, m);
        assert_eq!(o.exact_ball(&[0.0; 4], BallKind::Near).unwrap(), (0..50).collect::<Vec<u32>>());
    }

    #[test]
    fn singleton_ball_sample() {
        let ds = Dataset::from_rows(2, &[[0.0f32, 0.0], [5.0, 5.0]]).unwrap();
        let o = NeighborhoodOracle::new(&ds, Metric::euclidean(1.0, 2.0).unwrap());
        assert_eq!(o.exact_uniform_sample(&[0.1, 0.0], &mut SeededRng::new(2)).unwrap(), Some(0));
    }

    #[test]
    fn uniform_sample_of_four() {
        let ds = Dataset::from_rows(1, &[[0.0f32], [0.1], [0.2], [0.3], [9.0]]).unwrap();
        let o = NeighborhoodOracle::new(&ds, Metric::euclidean(0.5, 2.0).unwrap());
        let mut rng = SeededRng::new(3);
        let t = Tally::from_outcomes((0..40_000).map(|_| o.exact_uniform_sample(&[0.0], &mut rng).unwrap()));
        for id in 0..4 {
            assert!((t.frequency(id) - 0.25).abs() < 0.01);
        }
        assert_eq!(t.counts.get(&4), None);
    }

    #[test]
    fn second_implementation_agrees() {
        let mut rng = SeededRng::new(4);
        let metrics = [
            Metric::hamming(6.0, 1.5).unwrap(),
            Metric::euclidean(4.0, 1.3).unwrap(),
            Metric::inner_product(0.3, 0.1).unwrap(),
        ];
        for trial in 0..300 {
            let m = metrics[trial % 3];
            let ds = random_instance(&mut rng, 100, 16, &m);
            let q = ds.coords(rng.below(100) as u32).to_vec();
            let o = NeighborhoodOracle::new(&ds, m);
            for kind in [BallKind::Near, BallKind::NearOrCNear] {
                assert_eq!(o.exact_ball(&q, kind).unwrap(), ball_by_sorted_distances(&ds, &m, &q, kind));
            }
        }
    }

    #[test]
    fn tvd_extremes() {
        let exp = uniform_over(&[1, 2]);
        let exact = Tally::from_outcomes([Some(1), Some(2), Some(1), Some(2)]);
        assert_eq!(compare_distributions(&exact, &exp).unwrap().tvd, 0.0);
        let mass = Tally::from_outcomes((0..10_000).map(|_| Some(1)));
        let r = compare_distributions(&mass, &exp).unwrap();
        assert!((r.tvd - 0.5).abs() < 1e-12);
        assert!(r.chi2_pvalue < 1e-100);
    }

    #[test]
    fn bottoms_reported_separately() {
        let exp = uniform_over(&[1, 2]);
        let t = Tally::from_outcomes([Some(1), None, Some(2), None]);
        let r = compare_distributions(&t, &exp).unwrap();
        assert_eq!((r.tvd, r.n_samples, r.bottoms), (0.0, 2, 2));
        assert_eq!(r.bottom_rate(), 0.5);
    }

    #[test]
    fn support_errors() {
        assert_eq!(compare_distributions(&Tally::default(), &BTreeMap::new()), Err(Error::EmptySupport));
        let t = Tally::from_outcomes([Some(9)]);
        assert_eq!(compare_distributions(&t, &uniform_over(&[1])), Err(Error::UnexpectedOutcome(9)));
    }

    #[test]
    fn matching_sample_has_large_pvalue() {
        // median p-value over simulated uniform samples should sit near 0.5
        let exp = uniform_over(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let mut rng = SeededRng::new(5);
        let mut ps: Vec<f64> = (0..200)
            .map(|_| {
                let t = Tally::from_outcomes((0..5000).map(|_| Some(rng.below(10) as u32)));
                compare_distributions(&t, &exp).unwrap().chi2_pvalue
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        assert!((ps[100] - 0.5).abs() < 0.1, "median p {}", ps[100]);
        let perfect = Tally::from_outcomes((0..50_000).map(|i| Some(i % 10)));
        assert!(compare_distributions(&perfect, &exp).unwrap().chi2_pvalue > 0.5);
    }

    #[test]
    fn pair_test_detects_alternation() {
        let mut rng = SeededRng::new(6);
        let iid: Vec<Option<u32>> = (0..20_000).map(|_| Some(rng.below(5) as u32)).collect();
        assert!(pair_independence(&iid).p_value > 0.001);
        let alternating: Vec<Option<u32>> = (0..20_000).map(|i| Some((i % 5) as u32)).collect();
        assert!(pair_independence(&alternating).p_value < 1e-10);
    }
}
