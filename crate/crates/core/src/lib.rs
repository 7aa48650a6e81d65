//! Fair near-neighbor sampling in high dimensions.
//!
//! Every structure here answers "give me a point close to `q`" with the extra
//! promise that all points in the neighborhood are equally likely:
//!
//! - [`fair_sampler::NnsSampler`]: min-rank sampling over LSH buckets, with an
//!   optional rank-swap mode for independent answers to a repeated query.
//! - [`nnis::SegmentSampler`]: segment rejection sampling with count-distinct
//!   sketches, independent across arbitrary query sequences.
//! - [`filter::FilterIndex`] / [`filter::NnisFilterIndex`]: nearly-linear-space
//!   Gaussian filters for inner-product similarity on unit vectors.
//! - [`oracle`]: brute-force neighborhoods and distribution statistics.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > y)` comparisons are how NaN parameters get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod digest;
pub mod error;
pub mod fair_sampler;
pub mod filter;
pub mod lsh;
pub mod metric;
pub mod nnis;
pub mod oracle;
pub mod perm;
pub mod rng;
pub mod sketch;
pub mod stats;

pub use dataset::{Dataset, Point};
pub use error::{Error, Result};
pub use metric::{Metric, Proximity};
pub use perm::RankPermutation;
pub use rng::SeededRng;

/// Outcome of a sampling query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleResult {
    /// The sampled point id, `None` for "no near neighbor".
    pub outcome: Option<u32>,
    /// Number of points whose distance to the query was evaluated.
    pub inspected: u64,
}

impl SampleResult {
    pub fn bottom(inspected: u64) -> Self {
        SampleResult { outcome: None, inspected }
    }
}
