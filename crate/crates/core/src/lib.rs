//! Time-series forecasting from compressor code lengths.
//!
//! A history is quantized at several partition depths, every candidate
//! continuation is scored by a mixture of compressors, and the resulting
//! code lengths are turned into a distribution over futures.

pub mod codec;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod io;
pub mod prep;
pub mod prob;
pub mod quant;

pub use error::{Error, ErrorKind, Result};
