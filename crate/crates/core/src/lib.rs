//! Downlink CSI reconstruction for non-reciprocal TDD OFDM links.
//!
//! The crate simulates a single AP–UE link (or an i.i.d. batch of them):
//! tapped-delay-line channels for the five TDL classes, per-subcarrier RF
//! chain gains that break reciprocity, comb-pilot uplink sounding with LS
//! estimation, and a cascade of a channel-class classifier followed by a
//! per-class regressor that maps uplink pilot CSI straight to full-band
//! downlink CSI. Linear and Wiener interpolators serve as baselines.
//!
//! Module map:
//!
//! - [`chanmodel`]: power delay profiles, fading realizations, Doppler evolution
//! - [`rffront`]: RF chain gains and the exact reciprocity transform
//! - [`airlink`]: pilot grid, pilot reception, LS estimation, CSI flattening
//! - [`neural`]: dense feed-forward networks, training and model files
//! - [`cascade`]: classifier + per-class predictor pipeline
//! - [`baselines`]: linear and LMMSE interpolation
//! - [`bench`]: experiment configuration, datasets, sweeps and CSV output
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod airlink;
pub mod baselines;
pub mod bench;
pub mod cascade;
pub mod chanmodel;
mod error;
pub mod neural;
pub mod rffront;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
