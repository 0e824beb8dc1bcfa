//! Synthetic activity scenarios with class-distinct velocity schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OfdmConfig, OffsetSpec, PathSpec, Scenario, VelocitySchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activity {
    Empty,
    Sitting,
    Walking,
    Running,
    Jumping,
}

impl Activity {
    pub const ALL: [Activity; 5] = [
        Activity::Empty,
        Activity::Sitting,
        Activity::Walking,
        Activity::Running,
        Activity::Jumping,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Empty => "empty",
            Activity::Sitting => "sitting",
            Activity::Walking => "walking",
            Activity::Running => "running",
            Activity::Jumping => "jumping",
        }
    }

    pub fn from_index(i: usize) -> Option<Activity> {
        Self::ALL.get(i).copied()
    }
}

/// Builds randomized scenarios whose moving scatterers follow an
/// activity-specific speed profile. Velocities change only at observation
/// window boundaries (`segment_packets`).
#[derive(Clone, Debug)]
pub struct ActivityGenerator {
    pub ofdm: OfdmConfig,
    pub n_packets: u64,
    pub n_antennas: usize,
    pub segment_packets: u64,
    pub hardware_offsets: bool,
}

impl ActivityGenerator {
    pub fn new(ofdm: OfdmConfig, n_packets: u64, segment_packets: u64) -> Self {
        ActivityGenerator {
            ofdm,
            n_packets,
            n_antennas: 1,
            segment_packets,
            hardware_offsets: true,
        }
    }

    fn segments(&self) -> usize {
        (self.n_packets.div_ceil(self.segment_packets)).max(1) as usize
    }

    fn schedule(&self, velocities: Vec<f64>) -> VelocitySchedule {
        VelocitySchedule {
            segment_packets: self.segment_packets,
            velocities,
        }
    }

    pub fn scenario(&self, activity: Activity, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let los = rng.random_range(3.0..8.0);
        let mut paths = vec![PathSpec::fixed(1.0, los)];
        for _ in 0..rng.random_range(0..=2) {
            let amp = rng.random_range(0.2..0.5);
            paths.push(PathSpec::fixed(amp, los + rng.random_range(5.0..30.0)));
        }

        let segs = self.segments();
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let cos = sign * rng.random_range(0.7..1.0);
        let jitter = |rng: &mut ChaCha8Rng, v: f64| v * rng.random_range(0.9..1.1);
        let moving = |rng: &mut ChaCha8Rng, velocities: Vec<f64>, amp: f64| {
            let length = los + rng.random_range(2.0..20.0);
            PathSpec::scheduled(amp, length, self.schedule(velocities), cos)
        };

        match activity {
            Activity::Empty => {}
            Activity::Sitting => {
                let base = rng.random_range(0.4..0.6);
                let v = (0..segs).map(|_| jitter(&mut rng, base)).collect();
                let amp = rng.random_range(0.5..0.8);
                paths.push(moving(&mut rng, v, amp));
            }
            Activity::Walking | Activity::Running => {
                let base = if activity == Activity::Walking {
                    rng.random_range(0.9..1.2)
                } else {
                    rng.random_range(2.0..2.5)
                };
                let torso = (0..segs).map(|_| jitter(&mut rng, base)).collect();
                let limbs = (0..segs).map(|i| base * if i % 2 == 0 { 0.6 } else { 1.4 }).collect();
                let (a1, a2) = (rng.random_range(0.5..0.8), rng.random_range(0.3..0.5));
                paths.push(moving(&mut rng, torso, a1));
                paths.push(moving(&mut rng, limbs, a2));
            }
            Activity::Jumping => {
                let base = rng.random_range(1.2..1.8);
                let phase = rng.random_range(0..2);
                let v = (0..segs)
                    .map(|i| {
                        let s = if (i + phase) % 2 == 0 { 1.0 } else { -1.0 };
                        s * jitter(&mut rng, base)
                    })
                    .collect();
                let amp = rng.random_range(0.5..0.8);
                paths.push(moving(&mut rng, v, amp));
            }
        }

        let offsets = if self.hardware_offsets {
            OffsetSpec::random(&mut rng, self.n_antennas)
        } else {
            OffsetSpec::default()
        };
        Scenario {
            ofdm: self.ofdm.clone(),
            n_antennas: self.n_antennas,
            n_packets: self.n_packets,
            seed: rng.random(),
            offsets,
            paths,
        }
    }
}
