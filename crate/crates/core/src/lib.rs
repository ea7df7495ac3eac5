//! Linear-response models of optical and microwave cavities with
//! absorption-driven photothermal feedback.
//!
//! Internally every frequency and rate is angular (rad/s); see [`units`] for
//! the boundary conversions.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fitting;
pub mod optomech;
pub mod oracle;
pub mod response;
pub mod spectrum;
pub mod squeezing;
pub mod thermal;
pub mod units;

pub use error::{Error, ErrorCategory, Result};
pub use spectrum::{Channel, ChannelData, Spectrum};
