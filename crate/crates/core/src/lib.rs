//! Online allocation of inventory that can be sold at several prices.
//!
//! The crate builds the per-price-set value functions that drive the
//! balance and ranking policies, runs those policies (and the usual
//! benchmarks) over arrival streams, bounds them with the hindsight LP, and
//! generates the adversarial instances and hotel-style ensembles used to
//! compare them.

// `!(x > 0.0)` is how NaN inputs get rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adversary;
pub mod choice;
pub mod engine;
pub mod error;
pub mod harness;
pub mod lp;
pub mod perturb;
pub mod valuefn;

pub use error::{Error, Result};
pub use valuefn::{PriceSet, ValueFunction};
