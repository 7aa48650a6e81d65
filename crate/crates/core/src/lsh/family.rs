use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::metric::{dot, Metric};
use crate::rng::SeededRng;

/// A locality-sensitive hash family with a closed-form collision curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LshFamily {
    /// Samples one coordinate; Hamming space.
    BitSampling,
    /// Sign of a random Gaussian projection; angular / inner-product space.
    Hyperplane,
    /// `⌊(⟨a, x⟩ + b) / w⌋` with Gaussian `a`; Euclidean space.
    PStable { width: f64 },
}

impl LshFamily {
    /// The conventional family for a metric (p-stable uses `w = r`).
    pub fn default_for(metric: &Metric) -> Self {
        match *metric {
            Metric::Euclidean { r, .. } => LshFamily::PStable { width: r },
            Metric::Hamming { .. } => LshFamily::BitSampling,
            Metric::InnerProduct { .. } => LshFamily::Hyperplane,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LshFamily::BitSampling => "bit_sampling",
            LshFamily::Hyperplane => "hyperplane",
            LshFamily::PStable { .. } => "p_stable",
        }
    }

    pub fn check_metric(&self, metric: &Metric) -> Result<()> {
        let ok = matches!(
            (self, metric),
            (LshFamily::BitSampling, Metric::Hamming { .. })
                | (LshFamily::Hyperplane, Metric::InnerProduct { .. })
                | (LshFamily::PStable { .. }, Metric::Euclidean { .. })
        );
        if ok {
            Ok(())
        } else {
            Err(Error::IncompatibleFamily { family: self.name(), metric: metric.name() })
        }
    }

    /// Probability that one base hash function collides on two points at
    /// distance `dist` (similarity, for [`LshFamily::Hyperplane`]).
    pub fn collision_probability(&self, dist: f64, dim: usize) -> f64 {
        match *self {
            LshFamily::BitSampling => (1.0 - dist / dim as f64).clamp(0.0, 1.0),
            LshFamily::Hyperplane => 1.0 - libm::acos(dist.clamp(-1.0, 1.0)) / PI,
            LshFamily::PStable { width } => {
                if dist <= 0.0 {
                    return 1.0;
                }
                let c = width / dist;
                let tail = 0.5 * libm::erfc(c / SQRT_2);
                1.0 - 2.0 * tail - 2.0 / (libm::sqrt(2.0 * PI) * c) * (1.0 - libm::exp(-c * c / 2.0))
            }
        }
    }

    /// `(p1, p2)` for a single base function at the metric's two thresholds.
    pub fn base_probabilities(&self, metric: &Metric, dim: usize) -> Result<(f64, f64)> {
        self.check_metric(metric)?;
        let (near, far) = match *metric {
            Metric::Euclidean { r, c } | Metric::Hamming { r, c } => (r, c * r),
            Metric::InnerProduct { alpha, beta } => (alpha, beta),
        };
        Ok((self.collision_probability(near, dim), self.collision_probability(far, dim)))
    }

    /// Draws `k` independent base functions, concatenated.
    pub fn sample(&self, dim: usize, k: usize, rng: &mut SeededRng) -> ConcatHash {
        match *self {
            LshFamily::BitSampling => ConcatHash::Bits { coords: (0..k).map(|_| rng.below(dim) as u32).collect() },
            LshFamily::Hyperplane => ConcatHash::Hyperplanes { dim, normals: gaussian_matrix(k * dim, rng) },
            LshFamily::PStable { width } => {
                let proj = gaussian_matrix(k * dim, rng);
                let offsets = (0..k).map(|_| width * rand::Rng::random::<f64>(rng)).collect();
                ConcatHash::PStable { dim, proj, offsets, width }
            }
        }
    }
}

fn gaussian_matrix(len: usize, rng: &mut SeededRng) -> Vec<f32> {
    (0..len).map(|_| rng.gaussian() as f32).collect()
}

/// `K` concatenated base hash functions, folded into one 64-bit key.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcatHash {
    Bits { coords: Vec<u32> },
    Hyperplanes { dim: usize, normals: Vec<f32> },
    PStable { dim: usize, proj: Vec<f32>, offsets: Vec<f64>, width: f64 },
}

const KEY_MULTIPLIER: u64 = 0x9e37_79b9_7f4a_7c15;

impl ConcatHash {
    pub fn k(&self) -> usize {
        match self {
            ConcatHash::Bits { coords } => coords.len(),
            ConcatHash::Hyperplanes { dim, normals } => normals.len() / dim,
            ConcatHash::PStable { offsets, .. } => offsets.len(),
        }
    }

    /// Polynomial fold of the base hash outputs. Injective for `K = 1`.
    pub fn key(&self, x: &[f32]) -> u64 {
        let mut h = 0u64;
        let mut push = |v: i64| h = h.wrapping_mul(KEY_MULTIPLIER).wrapping_add(v as u64);
        match self {
            ConcatHash::Bits { coords } => {
                for &c in coords {
                    push(x[c as usize].to_bits() as i64);
                }
            }
            ConcatHash::Hyperplanes { dim, normals } => {
                for a in normals.chunks_exact(*dim) {
                    push((dot(a, x) >= 0.0) as i64);
                }
            }
            ConcatHash::PStable { dim, proj, offsets, width } => {
                for (a, &b) in proj.chunks_exact(*dim).zip(offsets) {
                    push(libm::floor((dot(a, x) + b) / width) as i64);
                }
            }
        }
        h
    }

    pub(crate) fn heap_bytes(&self) -> usize {
        match self {
            ConcatHash::Bits { coords } => coords.len() * 4,
            ConcatHash::Hyperplanes { normals, .. } => normals.len() * 4,
            ConcatHash::PStable { proj, offsets, .. } => proj.len() * 4 + offsets.len() * 8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_sampling_curve_closed_form() {
        // p(dist) = 1 - dist/d
        let f = LshFamily::BitSampling;
        let m = Metric::hamming(10.0, 5.0).unwrap();
        let (p1, p2) = f.base_probabilities(&m, 100).unwrap();
        assert!((p1 - 0.9).abs() < 1e-15);
        assert!((p2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn p_stable_curve_matches_reference() {
        // mpmath, 50 digits: w = 1 at distances 1 and 2.
        let f = LshFamily::PStable { width: 1.0 };
        assert!((f.collision_probability(1.0, 8) - 0.368_746_380_372_507_24).abs() < 1e-12);
        assert!((f.collision_probability(2.0, 8) - 0.195_417_107_999_493_4).abs() < 1e-12);
        assert_eq!(f.collision_probability(0.0, 8), 1.0);
    }

    #[test]
    fn hyperplane_curve_matches_reference() {
        let f = LshFamily::Hyperplane;
        assert!((f.collision_probability(0.7, 8) - 0.746_816_688_893_365).abs() < 1e-12);
        assert!((f.collision_probability(0.3, 8) - 0.596_986_684_020_678_3).abs() < 1e-12);
    }

    #[test]
    fn family_metric_pairing() {
        let e = Metric::euclidean(1.0, 2.0).unwrap();
        assert!(LshFamily::BitSampling.check_metric(&e).is_err());
        assert_eq!(LshFamily::default_for(&e), LshFamily::PStable { width: 1.0 });
        assert!(LshFamily::default_for(&e).check_metric(&e).is_ok());
    }

    fn planted_pair(
        metric: &Metric,
        dim: usize,
        rng: &mut SeededRng,
    ) -> (alloc::vec::Vec<f32>, alloc::vec::Vec<f32>, alloc::vec::Vec<f32>) {
        // x, a point at the near threshold, a point at the far threshold
        match *metric {
            Metric::Hamming { r, c } => {
                let x: Vec<f32> = (0..dim).map(|_| rng.below(2) as f32).collect();
                let flip = |n: usize| {
                    let mut y = x.clone();
                    for v in y.iter_mut().take(n) {
                        *v = 1.0 - *v;
                    }
                    y
                };
                (x.clone(), flip(r as usize), flip((c * r) as usize))
            }
            Metric::Euclidean { r, c } => {
                let x = alloc::vec![0.0f32; dim];
                let mut near = x.clone();
                near[0] = r as f32;
                let mut far = x.clone();
                far[1] = (c * r) as f32;
                (x, near, far)
            }
            Metric::InnerProduct { alpha, beta } => {
                let mut x = alloc::vec![0.0f32; dim];
                x[0] = 1.0;
                let at = |s: f64| {
                    let mut y = alloc::vec![0.0f32; dim];
                    y[0] = s as f32;
                    y[1] = libm::sqrt(1.0 - s * s) as f32;
                    y
                };
                (x, at(alpha), at(beta))
            }
        }
    }

    #[test]
    fn empirical_collision_curves() {
        let cases = [
            (LshFamily::BitSampling, Metric::hamming(10.0, 5.0).unwrap()),
            (LshFamily::Hyperplane, Metric::inner_product(0.7, 0.3).unwrap()),
            (LshFamily::PStable { width: 1.0 }, Metric::euclidean(1.0, 2.0).unwrap()),
        ];
        let dim = 100;
        for (family, metric) in cases {
            let mut rng = SeededRng::new(2024);
            let (x, near, far) = planted_pair(&metric, dim, &mut rng);
            let (p1, p2) = family.base_probabilities(&metric, dim).unwrap();
            let trials = 10_000;
            let (mut hit_near, mut hit_far) = (0, 0);
            for _ in 0..trials {
                let h = family.sample(dim, 1, &mut rng);
                let kx = h.key(&x);
                hit_near += (h.key(&near) == kx) as u32;
                hit_far += (h.key(&far) == kx) as u32;
            }
            let (f1, f2) = (hit_near as f64 / trials as f64, hit_far as f64 / trials as f64);
            assert!((f1 - p1).abs() < 0.02, "{}: near {f1} vs {p1}", family.name());
            assert!((f2 - p2).abs() < 0.02, "{}: far {f2} vs {p2}", family.name());
        }
    }
}
