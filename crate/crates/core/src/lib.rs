// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
// Time loops index several parallel per-step arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalog;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod proxy;
pub mod scenario;
pub mod select;

pub use error::{Error, Result};
