use serde::{Deserialize, Serialize};

use super::{OfdmConfig, OffsetSpec};
use crate::{Error, Result};

/// Piecewise-constant speed profile: `velocities[i]` holds for packets
/// `[i * segment_packets, (i + 1) * segment_packets)`; the last value is held
/// afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySchedule {
    pub segment_packets: u64,
    pub velocities: Vec<f64>,
}

impl VelocitySchedule {
    fn speed_at_segment(&self, i: u64) -> f64 {
        let i = (i as usize).min(self.velocities.len() - 1);
        self.velocities[i]
    }

    /// ∫ v(x) dx over `[0, n·T_c]`.
    fn travelled(&self, n: u64, estimate_interval: f64) -> f64 {
        let seg = self.segment_packets;
        let full = n / seg;
        let mut packets = 0.0;
        for i in 0..full {
            packets += self.speed_at_segment(i) * seg as f64;
        }
        packets += self.speed_at_segment(full) * (n - full * seg) as f64;
        packets * estimate_interval
    }
}

/// One propagation path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub amplitude: f64,
    /// Path length at packet 0, metres.
    pub initial_length: f64,
    /// Scatterer speed, m/s. Ignored when a schedule is given.
    #[serde(default)]
    pub velocity: f64,
    /// Cosine of the combined motion/arrival angle.
    #[serde(default = "one")]
    pub motion_angle_cos: f64,
    #[serde(default)]
    pub is_static: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<VelocitySchedule>,
}

fn one() -> f64 {
    1.0
}

impl PathSpec {
    pub fn fixed(amplitude: f64, length: f64) -> Self {
        PathSpec {
            amplitude,
            initial_length: length,
            velocity: 0.0,
            motion_angle_cos: 1.0,
            is_static: true,
            schedule: None,
        }
    }

    pub fn moving(amplitude: f64, length: f64, velocity: f64, motion_angle_cos: f64) -> Self {
        PathSpec {
            amplitude,
            initial_length: length,
            velocity,
            motion_angle_cos,
            is_static: false,
            schedule: None,
        }
    }

    pub fn scheduled(amplitude: f64, length: f64, schedule: VelocitySchedule, motion_angle_cos: f64) -> Self {
        PathSpec {
            amplitude,
            initial_length: length,
            velocity: 0.0,
            motion_angle_cos,
            is_static: false,
            schedule: Some(schedule),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::invalid("path", "amplitude must be finite and >= 0"));
        }
        if !(self.initial_length > 0.0) || !self.initial_length.is_finite() {
            return Err(Error::invalid("path", "initial length must be > 0"));
        }
        if !(self.motion_angle_cos.abs() <= 1.0) {
            return Err(Error::invalid("path", "|cos(alpha)| must be <= 1"));
        }
        if !self.velocity.is_finite() {
            return Err(Error::invalid("path", "velocity must be finite"));
        }
        if let Some(s) = &self.schedule {
            if s.segment_packets == 0 || s.velocities.is_empty() {
                return Err(Error::invalid("path", "schedule needs segments and velocities"));
            }
            if s.velocities.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("path", "schedule velocities must be finite"));
            }
        }
        Ok(())
    }

    /// Path length change Δ_p(n) in metres (negative when approaching).
    pub fn displacement(&self, n: u64, estimate_interval: f64) -> f64 {
        if self.is_static {
            return 0.0;
        }
        let travelled = match &self.schedule {
            Some(s) => s.travelled(n, estimate_interval),
            None => self.velocity * n as f64 * estimate_interval,
        };
        -self.motion_angle_cos * travelled
    }

    /// Radial speed `v cos α` during packet `n`.
    pub fn radial_speed(&self, n: u64) -> f64 {
        if self.is_static {
            return 0.0;
        }
        let v = match &self.schedule {
            Some(s) => s.speed_at_segment(n / s.segment_packets),
            None => self.velocity,
        };
        v * self.motion_angle_cos
    }
}

/// Declarative multi-path scenario: the simulator's ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub ofdm: OfdmConfig,
    #[serde(default = "default_antennas")]
    pub n_antennas: usize,
    pub n_packets: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub offsets: OffsetSpec,
    pub paths: Vec<PathSpec>,
}

fn default_antennas() -> usize {
    4
}

impl Scenario {
    pub fn new(ofdm: OfdmConfig, paths: Vec<PathSpec>, n_packets: u64) -> Self {
        Scenario {
            ofdm,
            n_antennas: 1,
            n_packets,
            seed: 0,
            offsets: OffsetSpec::default(),
            paths,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        if self.paths.is_empty() {
            return Err(Error::invalid("scenario", "at least one path is required"));
        }
        for p in &self.paths {
            p.validate()?;
        }
        if self.n_antennas == 0 || self.n_antennas > u16::MAX as usize {
            return Err(Error::invalid("scenario", "antenna count out of range"));
        }
        let max_amp = self.paths.iter().map(|p| p.amplitude).fold(0.0, f64::max);
        if !self.paths.iter().any(|p| p.is_static && p.amplitude == max_amp) {
            return Err(Error::invalid("scenario", "the strongest path must be static"));
        }
        self.offsets.validate(self.n_antennas)
    }

    /// True when no path moves.
    pub fn is_static(&self) -> bool {
        self.paths.iter().all(|p| p.is_static)
    }
}
