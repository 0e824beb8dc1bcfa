use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::DopplerParams;
use crate::sanitize::SanitizedCfr;
use crate::sim::OfdmConfig;
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

/// `K × N` window of sanitized CFR, row `k`, column `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowMatrix {
    pub rows: usize,
    pub cols: usize,
    pub start_packet: u64,
    /// Row-major.
    pub data: Vec<Complex64>,
}

impl WindowMatrix {
    pub fn from_rows(rows: Vec<Vec<Complex64>>, start_packet: u64) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("window", "ragged rows"));
        }
        Ok(WindowMatrix {
            rows: rows.len(),
            cols,
            start_packet,
            data: rows.concat(),
        })
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn get(&self, k: usize, n: usize) -> Complex64 {
        self.data[k * self.cols + n]
    }
}

/// Stacks `N` consecutive packets of one antenna into a window matrix.
pub fn window_matrix(packets: &[SanitizedCfr]) -> Result<WindowMatrix> {
    let first = packets.first().ok_or_else(|| Error::invalid("window", "no packets"))?;
    let k = first.values.len();
    for (j, p) in packets.iter().enumerate() {
        let expected = first.packet_index + j as u64;
        if p.packet_index != expected {
            return Err(Error::NonContiguousWindow {
                expected,
                found: p.packet_index,
            });
        }
        if p.antenna_index != first.antenna_index {
            return Err(Error::invalid("window", "packets from different antennas"));
        }
        if p.values.len() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("{k} sub-channels"),
                found: p.values.len().to_string(),
            });
        }
    }
    let n = packets.len();
    let mut data = vec![Complex64::new(0.0, 0.0); k * n];
    for (j, p) in packets.iter().enumerate() {
        for (row, v) in p.values.iter().enumerate() {
            data[row * n + j] = *v;
        }
    }
    Ok(WindowMatrix {
        rows: k,
        cols: n,
        start_packet: first.packet_index,
        data,
    })
}

/// Symmetric Hanning taper, zero at both ends.
pub fn hanning(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / (len - 1) as f64).cos()))
        .collect()
}

/// Doppler power over `u = -N_D/2..N_D/2-1` (stored at `u + N_D/2`).
#[derive(Clone, Debug, PartialEq)]
pub struct DopplerVector {
    pub values: Vec<f64>,
}

impl DopplerVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, u: i64) -> f64 {
        self.values[(u + self.values.len() as i64 / 2) as usize]
    }

    pub fn bin_of_index(&self, i: usize) -> i64 {
        i as i64 - self.values.len() as i64 / 2
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Doppler vector in dB relative to its peak, floored at `-threshold_db`.
#[derive(Clone, Debug, PartialEq)]
pub struct DbVector {
    pub values: Vec<f64>,
    pub threshold_db: f64,
}

impl DbVector {
    /// Bins above the floor.
    pub fn retained(&self) -> usize {
        self.values.iter().filter(|&&v| v > -self.threshold_db).count()
    }
}

/// Converts to dB relative to the maximum bin and floors everything more
/// than `threshold_db` below it. An all-zero vector maps to all-floor.
pub fn threshold_and_scale(d: &DopplerVector, threshold_db: f64) -> DbVector {
    let max = d.values.iter().copied().fold(0.0, f64::max);
    let values = d
        .values
        .iter()
        .map(|&v| {
            if max <= 0.0 || v <= 0.0 {
                return -threshold_db;
            }
            let db = 10.0 * (v / max).log10();
            if db < -threshold_db {
                -threshold_db
            } else {
                db
            }
        })
        .collect();
    DbVector { values, threshold_db }
}

/// `v cos α = u c / (f_c T_c N_D)`.
pub fn bin_to_velocity(u: i64, params: &DopplerParams, cfg: &OfdmConfig) -> f64 {
    u as f64 * SPEED_OF_LIGHT / (cfg.carrier_freq * cfg.estimate_interval * params.fft_len as f64)
}

/// Nearest Doppler bin for a radial speed (may fall outside the vector).
pub fn velocity_to_bin(radial_speed: f64, params: &DopplerParams, cfg: &OfdmConfig) -> i64 {
    (radial_speed * cfg.carrier_freq * cfg.estimate_interval * params.fft_len as f64 / SPEED_OF_LIGHT).round() as i64
}

/// Largest bin with `u ≠ 0` (lowest index on ties).
pub fn dominant_nonzero_bin(d: &DopplerVector) -> i64 {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &v) in d.values.iter().enumerate() {
        let u = d.bin_of_index(i);
        if u != 0 && v > best.0 {
            best = (v, u);
        }
    }
    best.1
}

/// Windowed, zero-padded DFT along the packet axis. Holds the FFT plan and
/// taper; cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct DopplerProcessor {
    params: DopplerParams,
    taper: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DopplerProcessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DopplerProcessor")
            .field("params", &self.params)
            .finish()
    }
}

impl DopplerProcessor {
    pub fn new(params: DopplerParams) -> Result<Self> {
        params.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(params.fft_len);
        Ok(DopplerProcessor {
            taper: hanning(params.window_len),
            params,
            fft,
        })
    }

    pub fn params(&self) -> &DopplerParams {
        &self.params
    }

    /// Centered spectrum of one row: entry `u + N_D/2` holds
    /// `Σ_n x(n) w(n) e^{-j2πnu/N_D}`.
    pub fn row_spectrum(&self, row: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.params.fft_len];
        self.spectrum_into(row, &mut buf)?;
        Ok(buf)
    }

    fn spectrum_into(&self, row: &[Complex64], buf: &mut [Complex64]) -> Result<()> {
        if row.len() != self.params.window_len {
            return Err(Error::ShapeMismatch {
                expected: format!("{} packets per window", self.params.window_len),
                found: row.len().to_string(),
            });
        }
        buf.fill(Complex64::new(0.0, 0.0));
        for ((b, x), w) in buf.iter_mut().zip(row).zip(&self.taper) {
            *b = x * w;
        }
        self.fft.process(buf);
        buf.rotate_right(self.params.fft_len / 2);
        Ok(())
    }

    /// `d(u) = Σ_k |F(k, u)|²`.
    pub fn doppler_vector(&self, window: &WindowMatrix) -> Result<DopplerVector> {
        let mut values = vec![0.0; self.params.fft_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.params.fft_len];
        for k in 0..window.rows {
            self.spectrum_into(window.row(k), &mut buf)?;
            for (acc, f) in values.iter_mut().zip(&buf) {
                *acc += f.norm_sqr();
            }
        }
        Ok(DopplerVector { values })
    }

    /// Doppler vector of the window with each row's temporal mean removed,
    /// i.e. with every zero-velocity (static) contribution suppressed.
    pub fn motion_vector(&self, window: &WindowMatrix) -> Result<DopplerVector> {
        let mut centered = window.clone();
        for k in 0..window.rows {
            let row = &mut centered.data[k * window.cols..(k + 1) * window.cols];
            let mean = row.iter().sum::<Complex64>() / window.cols as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        self.doppler_vector(&centered)
    }

    /// Bin of the strongest moving scatterer: the dominant nonzero bin of
    /// [`DopplerProcessor::motion_vector`].
    pub fn motion_bin(&self, window: &WindowMatrix) -> Result<i64> {
        Ok(dominant_nonzero_bin(&self.motion_vector(window)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window_of(rows: usize, f: impl Fn(usize, usize) -> Complex64) -> WindowMatrix {
        let n = 31;
        WindowMatrix {
            rows,
            cols: n,
            start_packet: 0,
            data: (0..rows * n).map(|i| f(i / n, i % n)).collect(),
        }
    }

    #[test]
    fn velocity_conversion() {
        let (p, cfg) = (DopplerParams::default(), OfdmConfig::default());
        assert_eq!(bin_to_velocity(0, &p, &cfg), 0.0);
        let v1 = bin_to_velocity(1, &p, &cfg);
        assert!((v1 - 0.0959).abs() < 5e-5, "{v1}");
        assert!((bin_to_velocity(-10, &p, &cfg) + 0.959).abs() < 5e-4);
        assert_eq!(velocity_to_bin(0.5, &p, &cfg), 5);
    }

    #[test]
    fn thresholding_cases() {
        let mut d = DopplerVector { values: vec![0.0; 10] };
        d.values[3] = 2.0;
        let t = threshold_and_scale(&d, 12.0);
        assert_eq!(t.values[3], 0.0);
        assert_eq!(t.retained(), 1);
        assert!(t.values.iter().enumerate().all(|(i, &v)| i == 3 || v == -12.0));

        d.values[5] = 0.02; // 20 dB down
        assert_eq!(threshold_and_scale(&d, 12.0).retained(), 1);
        d.values[5] = 0.2; // 10 dB down
        let t = threshold_and_scale(&d, 12.0);
        assert_eq!(t.retained(), 2);
        assert!((t.values[5] + 10.0).abs() < 1e-12);

        let zero = DopplerVector { values: vec![0.0; 4] };
        assert!(threshold_and_scale(&zero, 12.0).values.iter().all(|&v| v == -12.0));
    }

    #[test]
    fn tone_lands_in_expected_bin() {
        let proc = DopplerProcessor::new(DopplerParams::default()).unwrap();
        // 7 bins: e^{j2π 7 n / 100}
        let w = window_of(4, |_, n| Complex64::from_polar(1.0, 2.0 * PI * 7.0 * n as f64 / 100.0));
        let d = proc.doppler_vector(&w).unwrap();
        let argmax = (0..d.len())
            .max_by(|&a, &b| d.values[a].total_cmp(&d.values[b]))
            .unwrap();
        assert_eq!(d.bin_of_index(argmax), 7);
    }

    #[test]
    fn constant_rows_peak_at_zero() {
        let proc = DopplerProcessor::new(DopplerParams::default()).unwrap();
        let w = window_of(3, |k, _| Complex64::new(1.0 + k as f64, 0.5));
        let d = proc.doppler_vector(&w).unwrap();
        let argmax = (0..d.len())
            .max_by(|&a, &b| d.values[a].total_cmp(&d.values[b]))
            .unwrap();
        assert_eq!(d.bin_of_index(argmax), 0);
        // clutter removal leaves nothing
        assert!(proc.motion_vector(&w).unwrap().total() < 1e-20);
    }

    #[test]
    fn window_matrix_layout_and_gaps() {
        let pk = |n: u64| SanitizedCfr {
            packet_index: n,
            antenna_index: 0,
            subchannels: vec![0, 1],
            values: vec![Complex64::new(n as f64, 0.0), Complex64::new(0.0, n as f64)],
        };
        let w = window_matrix(&[pk(5), pk(6), pk(7)]).unwrap();
        assert_eq!((w.rows, w.cols, w.start_packet), (2, 3, 5));
        assert_eq!(w.get(1, 2), Complex64::new(0.0, 7.0));
        assert!(matches!(
            window_matrix(&[pk(5), pk(7)]),
            Err(Error::NonContiguousWindow { expected: 6, found: 7 })
        ));
    }

    #[test]
    fn hanning_is_symmetric_and_zero_ended() {
        let w = hanning(31);
        assert_eq!(w[0], 0.0);
        assert!((w[15] - 1.0).abs() < 1e-15);
        for i in 0..31 {
            assert!((w[i] - w[30 - i]).abs() < 1e-15);
        }
    }
}
