//! Synthetic instances with a known neighborhood around a query point.

use fann_core::oracle::{BallKind, NeighborhoodOracle};
use fann_core::{Dataset, Metric, SeededRng};

/// Attempts before giving up on a spec whose output keeps failing validation.
pub const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantSpec {
    pub metric: Metric,
    pub n: usize,
    pub dim: usize,
    pub near: usize,
    pub cnear: usize,
    /// Relative gap kept between planted values and the thresholds.
    pub margin: f64,
    /// Place every near point at this exact distance (similarity) instead of
    /// spreading them over the near band.
    pub near_at: Option<f64>,
}

impl PlantSpec {
    pub fn new(metric: Metric, n: usize, dim: usize, near: usize, cnear: usize) -> Self {
        PlantSpec { metric, n, dim, near, cnear, margin: 0.05, near_at: None }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub dataset: Dataset,
    pub query: Vec<f32>,
    /// Ids of the planted near points, ascending.
    pub near: Vec<u32>,
    pub cnear: Vec<u32>,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlantError {
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("no valid instance after {0} attempts")]
    ValidationFailed(usize),
}

/// Ids are shuffled so the planted points are not the lowest ids.
pub fn generate_planted(spec: &PlantSpec, rng: &mut SeededRng) -> Result<PlantedInstance, PlantError> {
    check_feasible(spec)?;
    for _ in 0..MAX_ATTEMPTS {
        let seed = rand::RngCore::next_u64(rng);
        let inst = attempt(spec, &mut SeededRng::new(seed), seed);
        if validate(spec, &inst) {
            return Ok(inst);
        }
    }
    Err(PlantError::ValidationFailed(MAX_ATTEMPTS))
}

fn check_feasible(spec: &PlantSpec) -> Result<(), PlantError> {
    let bad = |m: &str| Err(PlantError::Infeasible(m.into()));
    if spec.near + spec.cnear > spec.n {
        return bad("near + cnear exceeds n");
    }
    if spec.dim == 0 {
        return bad("dimension must be positive");
    }
    let far = spec.n - spec.near - spec.cnear;
    match spec.metric {
        Metric::Hamming { r, c } => {
            let (lo, hi) = (r.floor() as usize, (c * r).floor() as usize);
            if spec.cnear > 0 && hi <= lo {
                return bad("no integer distance in (r, cr]");
            }
            if far > 0 && hi >= spec.dim {
                return bad("cr must be below the dimension to plant far points");
            }
            if let Some(k) = spec.near_at {
                if k > r || k < 0.0 || k.fract() != 0.0 {
                    return bad("near_at must be an integer in [0, r]");
                }
            }
        }
        Metric::Euclidean { r, .. } => {
            if spec.cnear > 0 && r == 0.0 {
                return bad("cnear band is empty for r = 0");
            }
            if let Some(x) = spec.near_at {
                if !(0.0..=r).contains(&x) {
                    return bad("near_at must lie in [0, r]");
                }
            }
        }
        Metric::InnerProduct { alpha, beta } => {
            if spec.dim < 2 && spec.n > 1 {
                return bad("inner-product instances need d >= 2");
            }
            if let Some(s) = spec.near_at {
                if !(alpha..=1.0).contains(&s) {
                    return bad("near_at must lie in [alpha, 1]");
                }
            }
            if spec.cnear > 0 && alpha - beta < 1e-9 {
                return bad("cnear band is empty for alpha = beta");
            }
        }
    }
    Ok(())
}

fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rand::Rng::random::<f64>(rng)
}

fn int_in(rng: &mut SeededRng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

fn attempt(spec: &PlantSpec, rng: &mut SeededRng, seed: u64) -> PlantedInstance {
    let d = spec.dim;
    let far = spec.n - spec.near - spec.cnear;
    let m = spec.margin;
    let (q, mut rows): (Vec<f32>, Vec<Vec<f32>>) = match spec.metric {
        Metric::Hamming { r, c } => {
            let q: Vec<f32> = (0..d).map(|_| rng.below(2) as f32).collect();
            let (lo, hi) = (r.floor() as usize, (c * r).floor() as usize);
            let mut rows = Vec::with_capacity(spec.n);
            for _ in 0..spec.near {
                let k = spec.near_at.map_or_else(|| int_in(rng, 0, lo), |k| k as usize);
                rows.push(flip(&q, k, rng));
            }
            for _ in 0..spec.cnear {
                let k = int_in(rng, lo + 1, hi);
                rows.push(flip(&q, k, rng));
            }
            for _ in 0..far {
                let mut p: Vec<f32> = (0..d).map(|_| rng.below(2) as f32).collect();
                if hamming(&p, &q) <= hi {
                    p = flip(&q, int_in(rng, hi + 1, d), rng);
                }
                rows.push(p);
            }
            (q, rows)
        }
        Metric::Euclidean { r, c } => {
            let q: Vec<f32> = (0..d).map(|_| rng.gaussian() as f32).collect();
            let cr = c * r;
            let mut rows = Vec::with_capacity(spec.n);
            for _ in 0..spec.near {
                let dist = spec.near_at.unwrap_or_else(|| uniform(rng, 0.0, r * (1.0 - m)));
                rows.push(offset(&q, dist, rng));
            }
            for _ in 0..spec.cnear {
                let dist = uniform(rng, r * (1.0 + m), cr * (1.0 - m));
                rows.push(offset(&q, dist, rng));
            }
            for _ in 0..far {
                let dist = uniform(rng, cr * (1.0 + m), cr * 3.0 + 1.0);
                rows.push(offset(&q, dist, rng));
            }
            (q, rows)
        }
        Metric::InnerProduct { alpha, beta } => {
            let q = unit(rng, d);
            let gap = m * (1.0 - alpha).min(alpha - beta).max(1e-6);
            let mut rows = Vec::with_capacity(spec.n);
            for _ in 0..spec.near {
                let s = spec.near_at.unwrap_or_else(|| uniform(rng, alpha + gap, 1.0));
                rows.push(at_similarity(&q, s, rng));
            }
            for _ in 0..spec.cnear {
                rows.push(at_similarity(&q, uniform(rng, beta + gap, alpha - gap), rng));
            }
            for _ in 0..far {
                let mut p = unit(rng, d);
                if similarity(&p, &q) >= beta - gap {
                    p = at_similarity(&q, uniform(rng, -1.0, beta - gap), rng);
                }
                rows.push(p);
            }
            let q = q.iter().map(|&x| x as f32).collect();
            (q, rows.into_iter().map(|r| r.into_iter().map(|x| x as f32).collect()).collect())
        }
    };
    // shuffle ids, remembering where the planted rows went
    let mut order: Vec<usize> = (0..rows.len()).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], rng);
    let mut ids = vec![0u32; rows.len()];
    for (new, &old) in order.iter().enumerate() {
        ids[old] = new as u32;
    }
    let mut near: Vec<u32> = ids[..spec.near].to_vec();
    let mut cnear: Vec<u32> = ids[spec.near..spec.near + spec.cnear].to_vec();
    near.sort_unstable();
    cnear.sort_unstable();
    let shuffled: Vec<Vec<f32>> = order.iter().map(|&old| std::mem::take(&mut rows[old])).collect();
    let dataset = Dataset::from_rows(d, &shuffled).expect("rows have the planted dimension");
    PlantedInstance { dataset, query: q, near, cnear, seed }
}

fn validate(spec: &PlantSpec, inst: &PlantedInstance) -> bool {
    let o = NeighborhoodOracle::new(&inst.dataset, spec.metric);
    let near = o.exact_ball(&inst.query, BallKind::Near);
    let wide = o.exact_ball(&inst.query, BallKind::NearOrCNear);
    match (near, wide) {
        (Ok(near), Ok(wide)) => {
            let mut planted: Vec<u32> = inst.near.iter().chain(&inst.cnear).copied().collect();
            planted.sort_unstable();
            near == inst.near && wide == planted
        }
        _ => false,
    }
}

fn hamming(p: &[f32], q: &[f32]) -> usize {
    p.iter().zip(q).filter(|(a, b)| a != b).count()
}

/// `q` with `k` distinct coordinates flipped.
fn flip(q: &[f32], k: usize, rng: &mut SeededRng) -> Vec<f32> {
    let mut p = q.to_vec();
    for i in rand::seq::index::sample(rng, q.len(), k) {
        p[i] = 1.0 - p[i];
    }
    p
}

fn offset(q: &[f32], dist: f64, rng: &mut SeededRng) -> Vec<f32> {
    let u = unit(rng, q.len());
    q.iter().zip(&u).map(|(&a, &b)| (a as f64 + dist * b) as f32).collect()
}

pub fn unit(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn similarity(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// Unit vector with inner product `s` to the unit vector `q`.
pub fn at_similarity(q: &[f64], s: f64, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let u = unit(rng, q.len());
        let proj = similarity(&u, q);
        let w: Vec<f64> = u.iter().zip(q).map(|(a, b)| a - proj * b).collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-9 {
            continue;
        }
        let c = (1.0 - s * s).max(0.0).sqrt();
        return q.iter().zip(&w).map(|(a, b)| s * a + c * b / n).collect();
    }
}
