//! Multiport-network channel models for RIS-aided MIMO links.
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod netparams;
pub mod framework;
pub mod architectures;
pub mod channel;
pub mod coupling;
pub mod analysis;
pub mod seeds;

pub use error::{Error, Result};
pub mod optimize;
pub mod harness;
