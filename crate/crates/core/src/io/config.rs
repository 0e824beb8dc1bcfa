//! Flat key/value pipeline configuration (TOML syntax).
//!
//! Every key is optional; missing keys take the defaults below. Example:
//!
//! ```toml
//! estimate_interval = 6e-3
//! trace_len = 340
//! lambda = 0.1
//! seed = 7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{NetworkSpec, TrainConfig};
use crate::doppler::DopplerParams;
use crate::sanitize::{reconstruction_band, SanitizerConfig, SolverOptions};
use crate::sim::OfdmConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// OFDM symbol time `T`, seconds.
    pub symbol_time: f64,
    pub cyclic_prefix: f64,
    /// Channel estimate interval `T_c`, seconds.
    pub estimate_interval: f64,
    pub carrier_freq: f64,
    /// Sub-channel count `K`.
    pub subchannels: usize,
    /// Highest used sub-channel; the band is `-band_edge..=band_edge`.
    pub band_edge: i32,
    /// Sub-channels `-dc_guard..=dc_guard` carry no data.
    pub dc_guard: i32,
    pub n_antennas: usize,

    /// Window length `N`.
    pub window_len: usize,
    /// Doppler bins `N_D`.
    pub fft_len: usize,
    /// Vectors per trace `N_w`.
    pub trace_len: usize,
    pub window_stride: usize,
    pub threshold_db: f64,

    pub lambda: f64,
    /// Delay grid size `P'`.
    pub atoms: usize,
    /// Largest grid delay, seconds.
    pub delay_max: f64,
    pub sparsity_floor: f64,
    pub max_iter: usize,
    pub tol_kkt: f64,

    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    /// Traces between classifications in the pipeline; 0 means `N`.
    pub classify_stride: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            symbol_time: 3.2e-6,
            cyclic_prefix: 0.8e-6,
            estimate_interval: 6e-3,
            carrier_freq: 5.21e9,
            subchannels: 256,
            band_edge: 122,
            dc_guard: 1,
            n_antennas: 4,
            window_len: 31,
            fft_len: 100,
            trace_len: 340,
            window_stride: 1,
            threshold_db: 12.0,
            lambda: 0.1,
            atoms: 100,
            delay_max: 0.8e-6,
            sparsity_floor: 1e-4,
            max_iter: 10_000,
            tol_kkt: 1e-6,
            dropout_rate: 0.2,
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 10,
            classify_stride: 0,
            threads: 0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm().validate()?;
        self.doppler().validate()?;
        if self.n_antennas == 0 || self.n_antennas > u16::MAX as usize {
            return Err(Error::invalid("n_antennas", "out of range"));
        }
        if !(self.lambda > 0.0) || !(self.delay_max > 0.0) || self.atoms < 2 {
            return Err(Error::invalid(
                "sanitizer",
                "lambda, delay_max must be positive and atoms >= 2",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout_rate", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::invalid(
                "training",
                "batch_size and learning_rate must be positive",
            ));
        }
        Ok(())
    }

    pub fn ofdm(&self) -> OfdmConfig {
        OfdmConfig {
            subchannels: self.subchannels,
            symbol_time: self.symbol_time,
            cyclic_prefix: self.cyclic_prefix,
            carrier_freq: self.carrier_freq,
            estimate_interval: self.estimate_interval,
            used_subchannels: (-self.band_edge..=-(self.dc_guard + 1))
                .chain(self.dc_guard + 1..=self.band_edge)
                .collect(),
        }
    }

    pub fn sanitizer(&self) -> SanitizerConfig {
        SanitizerConfig {
            atoms: self.atoms,
            delay_max: self.delay_max,
            lambda: self.lambda,
            sparsity_floor: self.sparsity_floor,
            reconstruct: reconstruction_band(&self.ofdm()),
            solver: SolverOptions {
                max_iter: self.max_iter,
                tol_kkt: self.tol_kkt,
                ..SolverOptions::default()
            },
        }
    }

    pub fn doppler(&self) -> DopplerParams {
        DopplerParams {
            window_len: self.window_len,
            fft_len: self.fft_len,
            trace_len: self.trace_len,
            threshold_db: self.threshold_db,
            stride: self.window_stride,
        }
    }

    pub fn network(&self, n_classes: usize) -> NetworkSpec {
        NetworkSpec {
            dropout_rate: self.dropout_rate,
            ..NetworkSpec::new(self.trace_len, self.fft_len, n_classes)
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            patience: self.patience,
            seed: self.seed,
            threads: self.threads,
        }
    }

    pub fn classify_every(&self) -> usize {
        match self.classify_stride {
            0 => self.window_len,
            n => n,
        }
    }

    /// Time covered by one trace, `N_w · T_c`.
    pub fn trace_duration(&self) -> f64 {
        self.doppler().trace_duration(self.estimate_interval)
    }

    /// Sets one key from its textual value, as given on a command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut table = toml::Table::new();
        table.insert(key.to_string(), parsed);
        self.merge(table)
    }

    /// Overwrites the keys present in `table`; the result must validate.
    pub fn merge(&mut self, table: toml::Table) -> Result<()> {
        let mut current = toml::Table::try_from(&*self).map_err(|e| Error::Format(e.to_string()))?;
        for (key, value) in table {
            let slot = current
                .get_mut(&key)
                .ok_or_else(|| Error::invalid("config key", format!("unknown key {key:?}")))?;
            // integers are accepted where floats are expected
            *slot = match (&*slot, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
        }
        let updated: PipelineConfig = current
            .try_into()
            .map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
