use crate::error::{invalid, Error, Result};

/// Allowed deviation of `‖p‖₂` from 1 for inner-product inputs.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// How a point relates to a query under a [`Metric`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Proximity {
    /// Within `r` (or similarity at least `alpha`).
    Near,
    /// Within `c·r` but not `r` (or similarity in `[beta, alpha)`).
    CNear,
    Far,
}

/// Distance function plus the near / c-near thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean {
        r: f64,
        c: f64,
    },
    Hamming {
        r: f64,
        c: f64,
    },
    /// Similarity on unit vectors: larger is nearer.
    InnerProduct {
        alpha: f64,
        beta: f64,
    },
}

impl Metric {
    pub fn euclidean(r: f64, c: f64) -> Result<Self> {
        check_radius(r, c)?;
        Ok(Metric::Euclidean { r, c })
    }

    pub fn hamming(r: f64, c: f64) -> Result<Self> {
        check_radius(r, c)?;
        Ok(Metric::Hamming { r, c })
    }

    pub fn inner_product(alpha: f64, beta: f64) -> Result<Self> {
        if !(-1.0 < beta && beta < alpha && alpha < 1.0) {
            return Err(invalid("inner product thresholds need -1 < beta < alpha < 1"));
        }
        Ok(Metric::InnerProduct { alpha, beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean { .. } => "euclidean",
            Metric::Hamming { .. } => "hamming",
            Metric::InnerProduct { .. } => "inner_product",
        }
    }

    /// Raw distance (or similarity, for inner product) between two points.
    pub fn distance(&self, p: &[f32], q: &[f32]) -> Result<f64> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), found: q.len() });
        }
        Ok(self.distance_unchecked(p, q))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, p: &[f32], q: &[f32]) -> f64 {
        match self {
            Metric::Euclidean { .. } => {
                let s: f64 = p
                    .iter()
                    .zip(q)
                    .map(|(&a, &b)| {
                        let d = a as f64 - b as f64;
                        d * d
                    })
                    .sum();
                libm::sqrt(s)
            }
            Metric::Hamming { .. } => p.iter().zip(q).filter(|(a, b)| a != b).count() as f64,
            Metric::InnerProduct { .. } => dot(p, q),
        }
    }

    /// Classifies a raw value returned by [`Metric::distance`].
    #[inline]
    pub fn classify_value(&self, v: f64) -> Proximity {
        match *self {
            Metric::Euclidean { r, c } | Metric::Hamming { r, c } => {
                if v <= r {
                    Proximity::Near
                } else if v <= c * r {
                    Proximity::CNear
                } else {
                    Proximity::Far
                }
            }
            Metric::InnerProduct { alpha, beta } => {
                if v >= alpha {
                    Proximity::Near
                } else if v >= beta {
                    Proximity::CNear
                } else {
                    Proximity::Far
                }
            }
        }
    }

    pub fn classify(&self, p: &[f32], q: &[f32]) -> Result<Proximity> {
        Ok(self.classify_value(self.distance(p, q)?))
    }

    #[inline]
    pub(crate) fn is_near(&self, p: &[f32], q: &[f32]) -> bool {
        self.classify_value(self.distance_unchecked(p, q)) == Proximity::Near
    }

    /// Errors if this is an inner-product metric and `p` is not unit norm.
    pub fn check_input(&self, p: &[f32]) -> Result<()> {
        if let Metric::InnerProduct { .. } = self {
            check_unit(p)?;
        }
        Ok(())
    }
}

fn check_radius(r: f64, c: f64) -> Result<()> {
    if !(r >= 0.0 && c > 1.0 && r.is_finite() && c.is_finite()) {
        return Err(invalid("radius metrics need r >= 0 and c > 1"));
    }
    Ok(())
}

#[inline]
pub fn dot(p: &[f32], q: &[f32]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| a as f64 * b as f64).sum()
}

pub fn check_unit(p: &[f32]) -> Result<()> {
    let norm = libm::sqrt(dot(p, p));
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::NotUnitNorm { norm });
    }
    Ok(())
}
