//! RecursiveMix: recursive mixed-sample augmentation that pastes a resized
//! copy of the previous iteration's mixed batch into the current one, fuses
//! labels by area, and ties the pasted region's RoI prediction to the stored
//! prediction of the historical batch.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod consistency;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod label;
pub mod mix;
pub mod nn;
pub mod trainer;

pub use error::{Error, Result};
pub use label::SoftLabel;
