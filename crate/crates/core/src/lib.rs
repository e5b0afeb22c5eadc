//! Joint cell segmentation and tracking by selecting segments from
//! per-frame watershed hierarchies with an integer linear program.

// `!(x >= 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod grid;
pub mod hierarchy;
pub mod ilp;
pub mod linking;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod tensor_io;
pub mod windowed;

pub use error::{Error, Result};
