//! Waveform-level check of the CFR model: synthesize one OFDM symbol with a
//! cyclic prefix, pass it through the multi-path channel, downconvert, and
//! demodulate by numerical integration over the symbol window.

use std::f64::consts::TAU;

use super::{path_delay, OfdmConfig, PathSpec};
use crate::{Complex64, Error, Result};

/// Time samples per sub-channel over one symbol.
pub const OVERSAMPLING: usize = 4;

/// Returns `â_k / (a_k T)` for every sub-channel `k = -K/2..K/2-1`.
///
/// `symbol[i]` is the data on sub-channel `i - K/2`. Paths must be static and
/// their delays must not exceed the cyclic prefix, otherwise the integration
/// window would see the neighbouring (absent) symbol.
pub fn waveform_roundtrip(cfg: &OfdmConfig, symbol: &[Complex64], paths: &[PathSpec]) -> Result<Vec<Complex64>> {
    let k_total = cfg.subchannels;
    if symbol.len() != k_total {
        return Err(Error::ShapeMismatch {
            expected: format!("{k_total} symbol samples"),
            found: symbol.len().to_string(),
        });
    }
    if let Some(i) = symbol.iter().position(|a| a.norm_sqr() == 0.0) {
        return Err(Error::invalid(
            "symbol",
            format!("sub-channel {} carries a zero sample", i as i64 - k_total as i64 / 2),
        ));
    }
    if paths.iter().any(|p| !p.is_static) {
        return Err(Error::invalid("paths", "waveform round-trip needs static paths"));
    }
    let t = cfg.symbol_time;
    let delays: Vec<f64> = paths.iter().map(|p| path_delay(p, 0, cfg)).collect();
    if delays.iter().any(|&d| d > cfg.cyclic_prefix) {
        return Err(Error::invalid("paths", "path delay exceeds the cyclic prefix"));
    }

    let half = (k_total / 2) as i64;
    // x(t) = Σ_b a_b e^{j2π b t / T}, nonzero on [-T_cp, T].
    let baseband = |time: f64| -> Complex64 {
        if time < -cfg.cyclic_prefix || time > t {
            return Complex64::new(0.0, 0.0);
        }
        symbol
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let b = i as i64 - half;
                a * Complex64::from_polar(1.0, TAU * ((b as f64 * time / t).fract()))
            })
            .sum()
    };
    // y(t) = Σ_p A_p e^{-j2π f_c τ_p} x(t - τ_p)  (carrier removed)
    let rotations: Vec<Complex64> = paths
        .iter()
        .zip(&delays)
        .map(|(p, &d)| p.amplitude * Complex64::from_polar(1.0, -TAU * (cfg.carrier_freq * d).fract()))
        .collect();
    let samples = OVERSAMPLING * k_total;
    let dt = t / samples as f64;
    let received: Vec<Complex64> = (0..=samples)
        .map(|m| {
            let time = m as f64 * dt;
            rotations
                .iter()
                .zip(&delays)
                .map(|(r, &d)| r * baseband(time - d))
                .sum()
        })
        .collect();

    // Trapezoidal integration of y(t) e^{-j2π k t / T} over [0, T].
    Ok(symbol
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let k = i as i64 - half;
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, y) in received.iter().enumerate() {
                let w = if m == 0 || m == samples { 0.5 } else { 1.0 };
                let phase = -TAU * ((k * m as i64) as f64 / samples as f64).fract();
                acc += y * Complex64::from_polar(w, phase);
            }
            acc * dt / (a * t)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> OfdmConfig {
        OfdmConfig {
            subchannels: 32,
            used_subchannels: (-16..16).collect(),
            ..OfdmConfig::default()
        }
    }

    #[test]
    fn ideal_channel_returns_ones() {
        let cfg = small_cfg();
        let symbol = vec![Complex64::new(1.0, -1.0); 32];
        // zero-length path is not a valid PathSpec, so use a vanishing one
        let path = PathSpec::fixed(1.0, 1e-12);
        let out = waveform_roundtrip(&cfg, &symbol, &[path]).unwrap();
        for v in out {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-3);
        }
    }

    #[test]
    fn rejects_zero_samples_and_moving_paths() {
        let cfg = small_cfg();
        let mut symbol = vec![Complex64::new(1.0, 0.0); 32];
        symbol[5] = Complex64::new(0.0, 0.0);
        assert!(waveform_roundtrip(&cfg, &symbol, &[PathSpec::fixed(1.0, 3.0)]).is_err());
        symbol[5] = Complex64::new(1.0, 0.0);
        assert!(waveform_roundtrip(&cfg, &symbol, &[PathSpec::moving(1.0, 3.0, 1.0, 1.0)]).is_err());
        assert!(waveform_roundtrip(&cfg, &symbol[..10], &[PathSpec::fixed(1.0, 3.0)]).is_err());
    }
}
