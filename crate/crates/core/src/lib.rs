//! Conjugate Teager-Kaiser energy operators on sampled signals, multipath
//! channel simulation with derivative taps, least-squares projection onto a
//! derivative basis of template powers, and per-subchannel matched-filter SNR.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod energy_ops;
pub mod error;
pub mod matched_filter;
pub mod projection;
pub mod signal;
pub mod signal_space;

pub use error::{Error, Result};
pub use signal::{Grid, SampledSignal};
