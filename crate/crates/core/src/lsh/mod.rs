//! Black-box LSH layer: sensitive families, concatenation, and `L` hash tables
//! whose buckets hold point ids sorted by rank.

mod family;
mod index;
pub(crate) mod params;

pub use family::{ConcatHash, LshFamily};
pub use index::{build_index, BucketRef, LshIndex};
pub use params::{compute_params, LshConfig, LshParams};
