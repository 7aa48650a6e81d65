use crate::error::{invalid, Error, Result};
use crate::lsh::LshFamily;
use crate::metric::Metric;

/// Tunable constant for the table count `L = ⌈c_l · ln n / p1⌉`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LshConfig {
    pub c_l: f64,
}

impl Default for LshConfig {
    fn default() -> Self {
        LshConfig { c_l: 3.0 }
    }
}

/// Concatenation length, table count and the resulting collision bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LshParams {
    pub k: usize,
    pub l: usize,
    pub seed: u64,
    pub p1_base: f64,
    pub p2_base: f64,
    /// `p1_base^k`
    pub p1: f64,
    /// `p2_base^k`
    pub p2: f64,
    /// `ln p1_base / ln p2_base`
    pub rho: f64,
}

// Slack for ceilings of values that are integral in exact arithmetic.
pub(crate) const CEIL_SLACK: f64 = 1e-9;

pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    libm::ceil(x - CEIL_SLACK)
}

/// Chooses `K` so that `p2_base^K ≤ 1/n`, and `L = ⌈c_l ln n / p1_base^K⌉`.
pub fn compute_params(
    family: &LshFamily,
    metric: &Metric,
    dim: usize,
    n: usize,
    config: &LshConfig,
    seed: u64,
) -> Result<LshParams> {
    if !(config.c_l >= 1.0 && config.c_l.is_finite()) {
        return Err(invalid("c_l must be at least 1"));
    }
    let (p1_base, p2_base) = family.base_probabilities(metric, dim)?;
    let rho = libm::log(p1_base) / libm::log(p2_base);
    // p1 ≤ p2 or a quality exponent numerically indistinguishable from 1
    if !(p1_base > p2_base) || !(p2_base < 1.0) || rho >= 1.0 - CEIL_SLACK {
        return Err(Error::NotSensitive { p1: p1_base, p2: p2_base });
    }
    let ln_n = libm::log(n.max(1) as f64);
    let k = if p2_base <= 0.0 { 1 } else { (ceil_tolerant(ln_n / -libm::log(p2_base)) as usize).max(1) };
    let p1 = libm::pow(p1_base, k as f64);
    let p2 = libm::pow(p2_base, k as f64);
    let l = (ceil_tolerant(config.c_l * ln_n / p1) as usize).max(1);
    Ok(LshParams { k, l, seed, p1_base, p2_base, p1, p2, rho: if p1_base >= 1.0 { 0.0 } else { rho } })
}
