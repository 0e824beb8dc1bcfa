//! Doppler vectors and traces from windows of sanitized CFR.
//!
//! A window of `N` consecutive packets forms a `K × N` matrix. Each row is
//! tapered with a Hanning window, zero-padded to `N_D` samples and
//! transformed; the squared magnitudes summed over sub-channels give the
//! Doppler vector, indexed by `u ∈ {-N_D/2, …, N_D/2-1}`. Vectors are cut at
//! a dB threshold below their peak and stacked into traces.

mod export;
mod spectrum;
mod trace;

pub use export::{read_trace_csv, write_trace_csv, write_trace_pgm};
pub use spectrum::{
    bin_to_velocity, dominant_nonzero_bin, hanning, threshold_and_scale, velocity_to_bin, window_matrix, DbVector,
    DopplerProcessor, DopplerVector, WindowMatrix,
};
pub use trace::{DopplerStream, DopplerTrace, TraceBuilder};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DopplerParams {
    /// Packets per observation window, `N`.
    pub window_len: usize,
    /// Zero-padded transform length and number of Doppler bins, `N_D`.
    pub fft_len: usize,
    /// Doppler vectors per trace, `N_w`.
    pub trace_len: usize,
    /// Bins more than this many dB below the peak are floored.
    pub threshold_db: f64,
    /// Packets between consecutive windows.
    pub stride: usize,
}

impl Default for DopplerParams {
    fn default() -> Self {
        DopplerParams {
            window_len: 31,
            fft_len: 100,
            trace_len: 340,
            threshold_db: 12.0,
            stride: 1,
        }
    }
}

impl DopplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || self.window_len > self.fft_len {
            return Err(Error::invalid("doppler", "need 2 <= N <= N_D"));
        }
        if !self.fft_len.is_multiple_of(2) {
            return Err(Error::invalid("doppler", "N_D must be even"));
        }
        if self.trace_len == 0 || self.stride == 0 {
            return Err(Error::invalid("doppler", "N_w and stride must be >= 1"));
        }
        if !(self.threshold_db >= 0.0) || !self.threshold_db.is_finite() {
            return Err(Error::invalid("doppler", "threshold_db must be >= 0"));
        }
        Ok(())
    }

    /// Time covered by one trace, `N_w · T_c` seconds.
    pub fn trace_duration(&self, estimate_interval: f64) -> f64 {
        self.trace_len as f64 * estimate_interval
    }
}
