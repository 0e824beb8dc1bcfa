//! Phase sanitization by sparse delay-domain decomposition.
//!
//! Each packet is normalized to unit mean amplitude, decomposed over a grid
//! of candidate delays with an ℓ1-regularized fit, and rebuilt with every
//! path referenced to the strongest one. Offsets common to all paths (CFO,
//! PLL phase, phase ambiguity, and the SFO/PDD delay shift) cancel in the
//! reference conjugation.

mod dictionary;
mod lasso;
mod reference;

pub use dictionary::{build_dictionary, DelayDictionary};
pub use lasso::{kkt_residual, reference_index, LassoSolver, PathDecomposition, SolverOptions};
pub use reference::{decompose_and_reference, reference_term, SanitizedCfr};

use crate::sim::{CfrPacket, OfdmConfig};
use crate::{Error, Result};

/// Scales a packet so that its mean amplitude is one.
pub fn normalize_amplitude(packet: &CfrPacket) -> Result<CfrPacket> {
    let mean = packet.values.iter().map(|v| v.norm()).sum::<f64>() / packet.values.len().max(1) as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::DegenerateCfr);
    }
    Ok(CfrPacket {
        packet_index: packet.packet_index,
        antenna_index: packet.antenna_index,
        values: packet.values.iter().map(|v| v / mean).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SanitizerConfig {
    pub atoms: usize,
    pub delay_max: f64,
    pub lambda: f64,
    /// Coefficients below this fraction of the largest one are dropped
    /// before reconstruction.
    pub sparsity_floor: f64,
    /// Sub-channels on which the sanitized CFR is rebuilt.
    pub reconstruct: Vec<i32>,
    pub solver: SolverOptions,
}

impl SanitizerConfig {
    pub fn for_ofdm(cfg: &OfdmConfig) -> Self {
        SanitizerConfig {
            atoms: 100,
            delay_max: cfg.symbol_time / 4.0,
            lambda: 0.1,
            sparsity_floor: 1e-4,
            reconstruct: reconstruction_band(cfg),
            solver: SolverOptions::default(),
        }
    }
}

/// The used band with any interior gap filled: `-122..=122` (245
/// sub-channels) for the default 80 MHz layout.
pub fn reconstruction_band(cfg: &OfdmConfig) -> Vec<i32> {
    let lo = cfg.used_subchannels.first().copied().unwrap_or(0);
    let hi = cfg.used_subchannels.last().copied().unwrap_or(0);
    (lo..=hi).collect()
}

/// Per-stream sanitizer: immutable dictionaries and solver, shareable across
/// threads.
#[derive(Clone, Debug)]
pub struct Sanitizer {
    solver: LassoSolver,
    output: DelayDictionary,
    config: SanitizerConfig,
}

impl Sanitizer {
    pub fn new(ofdm: &OfdmConfig, config: SanitizerConfig) -> Result<Self> {
        ofdm.validate()?;
        if !(config.lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        let full = build_dictionary(ofdm, config.atoms, config.delay_max)?;
        let solver = LassoSolver::new(full.restrict(&ofdm.used_subchannels)?, config.solver.clone());
        let output = full.restrict(&config.reconstruct)?;
        Ok(Sanitizer { solver, output, config })
    }

    pub fn solver(&self) -> &LassoSolver {
        &self.solver
    }

    pub fn output_dictionary(&self) -> &DelayDictionary {
        &self.output
    }

    pub fn config(&self) -> &SanitizerConfig {
        &self.config
    }

    /// normalize → lasso → reference-path reconstruction.
    pub fn sanitize_packet(&self, packet: &CfrPacket) -> Result<SanitizedCfr> {
        self.sanitize_warm(packet, None).map(|(s, _)| s)
    }

    /// As [`Sanitizer::sanitize_packet`], seeding the solver with the
    /// previous decomposition of the same stream. Returns the decomposition
    /// for the next call.
    pub fn sanitize_warm(
        &self,
        packet: &CfrPacket,
        warm: Option<&PathDecomposition>,
    ) -> Result<(SanitizedCfr, PathDecomposition)> {
        let normalized = normalize_amplitude(packet)?;
        let dec = self.solver.solve(&normalized.values, self.config.lambda, warm)?;
        let pruned = self.prune(&dec);
        if pruned.nonzeros() == 0 {
            return Err(Error::EmptyDecomposition);
        }
        let values = decompose_and_reference(&self.output, &pruned)?;
        Ok((
            SanitizedCfr {
                packet_index: packet.packet_index,
                antenna_index: packet.antenna_index,
                subchannels: self.config.reconstruct.clone(),
                values,
            },
            dec,
        ))
    }

    fn prune(&self, dec: &PathDecomposition) -> PathDecomposition {
        let max = dec.r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let floor = self.config.sparsity_floor * max;
        let mut out = dec.clone();
        for v in out.r.iter_mut() {
            if v.norm() < floor {
                *v = crate::Complex64::new(0.0, 0.0);
            }
        }
        out.reference_index = reference_index(&out.r);
        out
    }
}
