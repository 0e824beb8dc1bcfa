use std::f64::consts::TAU;

use super::{apply_offsets, OfdmConfig, OffsetTrack, PathSpec, Scenario};
use crate::{Complex64, Result, SPEED_OF_LIGHT};

/// CFR of one packet on one antenna, indexed by the used sub-channels.
#[derive(Clone, Debug, PartialEq)]
pub struct CfrPacket {
    pub packet_index: u64,
    pub antenna_index: u16,
    pub values: Vec<Complex64>,
}

impl CfrPacket {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// τ_p(n) = (ℓ_p + Δ_p(n)) / c.
pub fn path_delay(path: &PathSpec, n: u64, cfg: &OfdmConfig) -> f64 {
    (path.initial_length + path.displacement(n, cfg.estimate_interval)) / SPEED_OF_LIGHT
}

/// `e^{-j2π(f_c + k/T)τ}` with the cycle count reduced before scaling by 2π.
fn path_term(cfg: &OfdmConfig, k: i32, delay: f64) -> Complex64 {
    let cycles = (cfg.carrier_freq + k as f64 / cfg.symbol_time) * delay;
    Complex64::from_polar(1.0, -TAU * cycles.fract())
}

/// Clean CFR at sub-channel `k` for the given per-path delays.
pub fn cfr_at(cfg: &OfdmConfig, paths: &[PathSpec], delays: &[f64], k: i32) -> Complex64 {
    paths
        .iter()
        .zip(delays)
        .map(|(p, &d)| p.amplitude * path_term(cfg, k, d))
        .sum()
}

/// H_k(n) over the used sub-channels. The clean channel is the same on every
/// antenna; antennas differ by their hardware offsets.
pub fn cfr_clean(scenario: &Scenario, n: u64, antenna: usize) -> CfrPacket {
    let cfg = &scenario.ofdm;
    let delays: Vec<f64> = scenario.paths.iter().map(|p| path_delay(p, n, cfg)).collect();
    CfrPacket {
        packet_index: n,
        antenna_index: antenna as u16,
        values: cfg
            .used_subchannels
            .iter()
            .map(|&k| cfr_at(cfg, &scenario.paths, &delays, k))
            .collect(),
    }
}

/// Streams `n_packets × n_antennas` offset-corrupted packets ordered by
/// `(n, antenna)`.
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    track: OffsetTrack,
    next: u64,
    clean: Option<CfrPacket>,
    antenna: usize,
}

impl Iterator for Simulator<'_> {
    type Item = CfrPacket;

    fn next(&mut self) -> Option<CfrPacket> {
        if self.next >= self.scenario.n_packets {
            return None;
        }
        let clean = self.clean.get_or_insert_with(|| cfr_clean(self.scenario, self.next, 0));
        let mut packet = apply_offsets(clean, &self.track.at(self.next, self.antenna), &self.scenario.ofdm);
        packet.antenna_index = self.antenna as u16;
        self.antenna += 1;
        if self.antenna == self.scenario.n_antennas {
            self.antenna = 0;
            self.next += 1;
            self.clean = None;
        }
        Some(packet)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.scenario.n_packets - self.next) as usize * self.scenario.n_antennas - self.antenna;
        (left, Some(left))
    }
}

pub fn simulate(scenario: &Scenario) -> Result<Simulator<'_>> {
    scenario.validate()?;
    Ok(Simulator {
        scenario,
        track: scenario.offsets.realize(scenario.seed, scenario.n_packets),
        next: 0,
        clean: None,
        antenna: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CfoProcess, OffsetSpec};

    fn one_path(amplitude: f64, length: f64) -> Scenario {
        Scenario::new(OfdmConfig::default(), vec![PathSpec::fixed(amplitude, length)], 4)
    }

    #[test]
    fn static_delay_is_length_over_c() {
        let cfg = OfdmConfig::default();
        let p = PathSpec::fixed(1.0, 3.0);
        for n in [0, 1, 1000] {
            assert!((path_delay(&p, n, &cfg) - 1.0007e-8).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_delay_shrinks_linearly() {
        let cfg = OfdmConfig::default();
        let p = PathSpec::moving(1.0, 3.0, 1.0, 1.0);
        let d = path_delay(&p, 100, &cfg);
        assert!((d - 2.4 / SPEED_OF_LIGHT).abs() < 1e-20);
        assert!((d - 8.006e-9).abs() < 1e-12);
        assert_eq!(path_delay(&p, 0, &cfg), 3.0 / SPEED_OF_LIGHT);
    }

    #[test]
    fn single_unit_path_has_unit_modulus() {
        let sc = one_path(1.0, 7.3);
        for n in 0..3 {
            for v in cfr_clean(&sc, n, 0).values {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_paths_match_scalar_evaluation() {
        let cfg = OfdmConfig::default();
        let (l0, l1) = (4.0, 4.0 + SPEED_OF_LIGHT * cfg.symbol_time / (2.0 * 40.0));
        let sc = Scenario::new(cfg.clone(), vec![PathSpec::fixed(1.0, l0), PathSpec::fixed(1.0, l1)], 1);
        let h = cfr_clean(&sc, 0, 0);
        let (t0, t1) = (l0 / SPEED_OF_LIGHT, l1 / SPEED_OF_LIGHT);
        for (v, &k) in h.values.iter().zip(&cfg.used_subchannels) {
            let f = cfg.carrier_freq + k as f64 / cfg.symbol_time;
            let common = Complex64::from_polar(1.0, -TAU * f * t0);
            let rel = Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -TAU * f * (t1 - t0));
            assert!((v.norm() - rel.norm()).abs() < 1e-9);
            assert!((v - common * rel).norm() < 1e-6);
        }
    }

    #[test]
    fn static_scene_is_bit_stationary() {
        let sc = Scenario::new(
            OfdmConfig::default(),
            vec![PathSpec::fixed(1.0, 3.0), PathSpec::fixed(0.4, 11.2)],
            1,
        );
        let first = cfr_clean(&sc, 0, 0).values;
        for n in [1, 17, 5000] {
            assert_eq!(cfr_clean(&sc, n, 0).values, first);
        }
    }

    #[test]
    fn moving_path_phase_advances_linearly() {
        let cfg = OfdmConfig::default();
        let (v, cos) = (0.8, 0.6);
        let sc = Scenario::new(cfg.clone(), vec![PathSpec::moving(1.0, 5.0, v, cos)], 60);
        let h0 = cfr_clean(&sc, 0, 0);
        for (i, &k) in cfg.used_subchannels.iter().enumerate().step_by(40) {
            let f = cfg.carrier_freq + k as f64 / cfg.symbol_time;
            let slope = TAU * f * v * cos * cfg.estimate_interval / SPEED_OF_LIGHT;
            for n in 1..5 {
                let hn = cfr_clean(&sc, n, 0);
                let got = (hn.values[i] * h0.values[i].conj()).arg();
                let want = (slope * n as f64 + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
                assert!((got - want).abs() < 1e-6, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn simulate_counts_and_orders_packets() {
        let mut sc = one_path(1.0, 3.0);
        sc.n_packets = 1;
        sc.n_antennas = 4;
        let packets: Vec<_> = simulate(&sc).unwrap().collect();
        assert_eq!(packets.len(), 4);
        assert_eq!(
            packets.iter().map(|p| p.antenna_index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn simulate_seed_changes_phase_only() {
        let mut sc = Scenario::new(
            OfdmConfig::default(),
            vec![PathSpec::fixed(1.0, 3.0), PathSpec::moving(0.5, 6.0, 1.0, 0.7)],
            20,
        );
        sc.n_antennas = 2;
        sc.offsets = OffsetSpec {
            cfo: CfoProcess::RandomWalk { step: 0.2 },
            tau_pdd: 20e-9,
            ..Default::default()
        };
        sc.seed = 1;
        let a: Vec<_> = simulate(&sc).unwrap().collect();
        let again: Vec<_> = simulate(&sc).unwrap().collect();
        assert_eq!(a, again);
        sc.seed = 2;
        let b: Vec<_> = simulate(&sc).unwrap().collect();
        assert_ne!(a, b);
        for (pa, pb) in a.iter().zip(&b) {
            for (x, y) in pa.values.iter().zip(&pb.values) {
                assert!((x.norm() - y.norm()).abs() < 1e-12);
            }
        }
    }
}
