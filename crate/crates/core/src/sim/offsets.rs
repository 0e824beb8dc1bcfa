use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CfrPacket, OfdmConfig};
use crate::{Complex64, Error, Result};

/// Residual carrier frequency offset phase over packets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CfoProcess {
    Constant {
        phase: f64,
    },
    /// Uniform random start, then Gaussian increments of std-dev `step` rad.
    RandomWalk {
        step: f64,
    },
}

impl Default for CfoProcess {
    fn default() -> Self {
        CfoProcess::Constant { phase: 0.0 }
    }
}

/// Per-packet packet-detection-delay jitter: `tau_pdd + step * U{0..=max_steps}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayJitter {
    pub step: f64,
    pub max_steps: u32,
}

/// Hardware phase offset model. SFO, PDD and CFO are shared by all antennas
/// of a receiver; PPO and PA are antenna specific.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSpec {
    #[serde(default)]
    pub tau_sfo: f64,
    #[serde(default)]
    pub tau_pdd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdd_jitter: Option<DelayJitter>,
    #[serde(default)]
    pub cfo: CfoProcess,
    /// PLL phase per antenna, radians. Empty means zero on every antenna.
    #[serde(default)]
    pub ppo: Vec<f64>,
    /// Phase ambiguity per antenna as an integer multiple of π.
    #[serde(default)]
    pub pa: Vec<i32>,
}

impl OffsetSpec {
    pub fn validate(&self, n_antennas: usize) -> Result<()> {
        if !self.tau_sfo.is_finite() || !self.tau_pdd.is_finite() {
            return Err(Error::invalid("offsets", "delays must be finite"));
        }
        for (name, len) in [("ppo", self.ppo.len()), ("pa", self.pa.len())] {
            if len != 0 && len != n_antennas {
                return Err(Error::invalid(
                    "offsets",
                    format!("{name} has {len} entries for {n_antennas} antennas"),
                ));
            }
        }
        match self.cfo {
            CfoProcess::RandomWalk { step } if !(step >= 0.0) => {
                Err(Error::invalid("offsets", "random-walk step must be >= 0"))
            }
            CfoProcess::Constant { phase } if !phase.is_finite() => {
                Err(Error::invalid("offsets", "constant CFO phase must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Random hardware offsets in the ranges used by the simulator: SFO and
    /// PDD delays in 0–100 ns, random-walk CFO, random PPO and PA per antenna.
    pub fn random<R: Rng>(rng: &mut R, n_antennas: usize) -> Self {
        OffsetSpec {
            tau_sfo: rng.random_range(0.0..50e-9),
            tau_pdd: rng.random_range(0.0..50e-9),
            pdd_jitter: None,
            cfo: CfoProcess::RandomWalk { step: 0.1 },
            ppo: (0..n_antennas).map(|_| rng.random_range(0.0..TAU)).collect(),
            pa: (0..n_antennas).map(|_| rng.random_range(0..2)).collect(),
        }
    }

    /// Draws the per-packet offset sequence.
    pub fn realize(&self, seed: u64, n_packets: u64) -> OffsetTrack {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_packets as usize;
        let cfo = match self.cfo {
            CfoProcess::Constant { phase } => vec![phase; n],
            CfoProcess::RandomWalk { step } => {
                let mut phase = rng.random_range(0.0..TAU);
                let normal = Normal::new(0.0, step).expect("validated step");
                (0..n)
                    .map(|_| {
                        let current = phase;
                        phase = (phase + normal.sample(&mut rng)).rem_euclid(TAU);
                        current
                    })
                    .collect()
            }
        };
        let pdd = match &self.pdd_jitter {
            None => vec![self.tau_pdd; n],
            Some(j) => (0..n)
                .map(|_| self.tau_pdd + j.step * rng.random_range(0..=j.max_steps) as f64)
                .collect(),
        };
        OffsetTrack {
            tau_sfo: self.tau_sfo,
            pdd,
            cfo,
            ppo: self.ppo.clone(),
            pa: self.pa.clone(),
        }
    }
}

/// Realized offsets for every packet of a stream.
#[derive(Clone, Debug)]
pub struct OffsetTrack {
    tau_sfo: f64,
    pdd: Vec<f64>,
    cfo: Vec<f64>,
    ppo: Vec<f64>,
    pa: Vec<i32>,
}

impl OffsetTrack {
    pub fn at(&self, n: u64, antenna: usize) -> PacketOffsets {
        let n = n as usize;
        PacketOffsets {
            tau_sfo: self.tau_sfo,
            tau_pdd: self.pdd[n],
            phi_cfo: self.cfo[n],
            phi_ppo: self.ppo.get(antenna).copied().unwrap_or(0.0),
            pa_multiple: self.pa.get(antenna).copied().unwrap_or(0),
        }
    }
}

/// Concrete offsets for one packet on one antenna.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PacketOffsets {
    pub tau_sfo: f64,
    pub tau_pdd: f64,
    pub phi_cfo: f64,
    pub phi_ppo: f64,
    /// φ_PA = `pa_multiple`·π.
    pub pa_multiple: i32,
}

impl PacketOffsets {
    /// φ_offs,k reduced to `[0, 2π)`.
    pub fn phase(&self, k: i32, symbol_time: f64) -> f64 {
        let delay = -TAU * k as f64 * (self.tau_sfo + self.tau_pdd) / symbol_time;
        let pa = PI * self.pa_multiple.rem_euclid(2) as f64;
        (delay + self.phi_cfo + self.phi_ppo + pa).rem_euclid(TAU)
    }

    pub fn is_zero(&self) -> bool {
        *self == PacketOffsets::default()
    }
}

/// Multiplies every value by `e^{jφ_offs,k}`.
pub fn apply_offsets(packet: &CfrPacket, offsets: &PacketOffsets, cfg: &OfdmConfig) -> CfrPacket {
    let values = if offsets.is_zero() {
        packet.values.clone()
    } else {
        packet
            .values
            .iter()
            .zip(&cfg.used_subchannels)
            .map(|(h, &k)| h * Complex64::from_polar(1.0, offsets.phase(k, cfg.symbol_time)))
            .collect()
    };
    CfrPacket {
        packet_index: packet.packet_index,
        antenna_index: packet.antenna_index,
        values,
    }
}
