//! Device-free activity recognition from Wi-Fi channel frequency response.
//!
//! The crate is organised as a processing chain:
//!
//! * [`sim`] generates synthetic multi-path CFR streams with hardware phase
//!   offsets and offers a waveform-level check of the CFR model.
//! * [`sanitize`] removes the offsets from each packet through a sparse
//!   delay-domain decomposition referenced to the strongest path.
//! * [`doppler`] turns windows of sanitized packets into Doppler vectors and
//!   stacks them into traces.
//! * [`classify`] hosts the inception-style classifier, its training loop and
//!   the multi-antenna decision fusion rule.
//! * [`io`] holds file formats, configuration and the end-to-end pipeline.

pub mod classify;
pub mod doppler;
pub mod error;
pub mod io;
pub mod sanitize;
pub mod sim;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Complex64 = num_complex::Complex<f64>;
