use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// OFDM numerology of the monitored channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    /// Number of sub-channels `K` (even).
    pub subchannels: usize,
    /// OFDM symbol time `T` in seconds; the sub-channel spacing is `1/T`.
    pub symbol_time: f64,
    /// Cyclic prefix duration in seconds.
    pub cyclic_prefix: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Interval between channel estimates `T_c` in seconds.
    pub estimate_interval: f64,
    /// Sub-channel indices carrying CFR data, sorted ascending.
    pub used_subchannels: Vec<i32>,
}

impl Default for OfdmConfig {
    /// 802.11ac, 80 MHz, channel 42 (center 5210 MHz).
    fn default() -> Self {
        OfdmConfig {
            subchannels: 256,
            symbol_time: 3.2e-6,
            cyclic_prefix: 0.8e-6,
            carrier_freq: 5.21e9,
            estimate_interval: 6e-3,
            used_subchannels: default_used_subchannels(),
        }
    }
}

/// `{-122..-2} ∪ {2..122}`: 242 data sub-channels of an 80 MHz capture.
pub(crate) fn default_used_subchannels() -> Vec<i32> {
    (-122..=-2).chain(2..=122).collect()
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subchannels == 0 || !self.subchannels.is_multiple_of(2) {
            return Err(Error::invalid("ofdm", "sub-channel count must be even and positive"));
        }
        if !(self.symbol_time > 0.0) || !(self.estimate_interval > 0.0) {
            return Err(Error::invalid("ofdm", "T and T_c must be positive"));
        }
        if !(self.cyclic_prefix >= 0.0) || !(self.carrier_freq > 0.0) {
            return Err(Error::invalid("ofdm", "cyclic prefix and carrier must be valid"));
        }
        if self.used_subchannels.is_empty() {
            return Err(Error::invalid("ofdm", "no used sub-channels"));
        }
        if self.used_subchannels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("ofdm", "used sub-channels must be strictly increasing"));
        }
        let half = (self.subchannels / 2) as i32;
        let (lo, hi) = (self.used_subchannels[0], *self.used_subchannels.last().unwrap());
        if lo < -half || hi > half - 1 {
            return Err(Error::invalid(
                "ofdm",
                format!("used sub-channels must lie in [{}, {}]", -half, half - 1),
            ));
        }
        Ok(())
    }

    pub fn subchannel_spacing(&self) -> f64 {
        1.0 / self.symbol_time
    }

    /// Every sub-channel index `-K/2..K/2-1`.
    pub fn all_subchannels(&self) -> Vec<i32> {
        let half = (self.subchannels / 2) as i32;
        (-half..half).collect()
    }

    pub fn n_used(&self) -> usize {
        self.used_subchannels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = OfdmConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_used(), 242);
        assert_eq!(cfg.subchannel_spacing(), 312_500.0);
        assert_eq!(cfg.all_subchannels().len(), 256);
    }

    #[test]
    fn rejects_out_of_band_and_unsorted() {
        let mut cfg = OfdmConfig::default();
        cfg.used_subchannels = vec![-129, 3];
        assert!(cfg.validate().is_err());
        cfg.used_subchannels = vec![4, 3];
        assert!(cfg.validate().is_err());
        cfg.used_subchannels = vec![-128, 127];
        cfg.validate().unwrap();
        cfg.subchannels = 255;
        assert!(cfg.validate().is_err());
    }
}
