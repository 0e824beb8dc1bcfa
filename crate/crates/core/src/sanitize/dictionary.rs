use std::f64::consts::TAU;

use crate::sim::OfdmConfig;
use crate::{Complex64, Error, Result};

/// Delay-domain dictionary: entry `(k, p)` is `e^{-j2πk τ_p / T}` for the
/// candidate total delays `τ_p` of the grid.
#[derive(Clone, Debug)]
pub struct DelayDictionary {
    grid: Vec<f64>,
    subchannels: Vec<i32>,
    symbol_time: f64,
    /// Row-major, `subchannels.len() × grid.len()`.
    matrix: Vec<Complex64>,
}

/// `atoms` delays uniformly spaced over `[0, delay_max)`, rows for every
/// sub-channel `-K/2..K/2-1`.
pub fn build_dictionary(cfg: &OfdmConfig, atoms: usize, delay_max: f64) -> Result<DelayDictionary> {
    if atoms < 2 {
        return Err(Error::invalid("dictionary", "at least two atoms are required"));
    }
    if !(delay_max > 0.0) {
        return Err(Error::invalid("dictionary", "delay_max must be positive"));
    }
    if delay_max > cfg.symbol_time {
        return Err(Error::DictionaryAliasing {
            delay_max,
            symbol_time: cfg.symbol_time,
        });
    }
    let grid = (0..atoms).map(|p| p as f64 * delay_max / atoms as f64).collect();
    Ok(DelayDictionary::with_rows(grid, cfg.all_subchannels(), cfg.symbol_time))
}

impl DelayDictionary {
    fn with_rows(grid: Vec<f64>, subchannels: Vec<i32>, symbol_time: f64) -> Self {
        let matrix = subchannels
            .iter()
            .flat_map(|&k| grid.iter().map(move |&tau| atom_entry(k, tau, symbol_time)))
            .collect();
        DelayDictionary {
            grid,
            subchannels,
            symbol_time,
            matrix,
        }
    }

    /// Same atoms, only the rows for `subchannels` (each must be present).
    pub fn restrict(&self, subchannels: &[i32]) -> Result<DelayDictionary> {
        let p = self.atoms();
        let mut matrix = Vec::with_capacity(subchannels.len() * p);
        for k in subchannels {
            let row = self
                .subchannels
                .iter()
                .position(|x| x == k)
                .ok_or_else(|| Error::invalid("dictionary", format!("no row for sub-channel {k}")))?;
            matrix.extend_from_slice(self.row(row));
        }
        Ok(DelayDictionary {
            grid: self.grid.clone(),
            subchannels: subchannels.to_vec(),
            symbol_time: self.symbol_time,
            matrix,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn subchannels(&self) -> &[i32] {
        &self.subchannels
    }

    pub fn atoms(&self) -> usize {
        self.grid.len()
    }

    pub fn rows(&self) -> usize {
        self.subchannels.len()
    }

    pub fn symbol_time(&self) -> f64 {
        self.symbol_time
    }

    pub fn grid_step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let p = self.atoms();
        &self.matrix[i * p..(i + 1) * p]
    }

    pub fn entry(&self, row: usize, atom: usize) -> Complex64 {
        self.matrix[row * self.atoms() + atom]
    }

    /// `T r` over the dictionary rows.
    pub fn synthesize(&self, r: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows())
            .map(|i| self.row(i).iter().zip(r).map(|(t, x)| t * x).sum())
            .collect()
    }
}

fn atom_entry(k: i32, tau: f64, symbol_time: f64) -> Complex64 {
    Complex64::from_polar(1.0, -TAU * (k as f64 * tau / symbol_time).fract())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atom_grid_over_full_symbol() {
        let cfg = OfdmConfig::default();
        let d = build_dictionary(&cfg, 2, cfg.symbol_time).unwrap();
        assert_eq!(d.grid(), &[0.0, cfg.symbol_time / 2.0]);
        for i in 0..d.rows() {
            assert_eq!(d.entry(i, 0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn quarter_symbol_atom_at_k1_is_minus_j() {
        let cfg = OfdmConfig::default();
        let d = build_dictionary(&cfg, 4, cfg.symbol_time).unwrap();
        assert_eq!(d.grid()[1], cfg.symbol_time / 4.0);
        let row = d.subchannels().iter().position(|&k| k == 1).unwrap();
        assert!((d.entry(row, 1) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn entries_have_unit_modulus() {
        let cfg = OfdmConfig::default();
        let d = build_dictionary(&cfg, 100, cfg.symbol_time / 4.0).unwrap();
        assert_eq!((d.rows(), d.atoms()), (256, 100));
        for i in 0..d.rows() {
            for v in d.row(i) {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn aliasing_and_small_grids_are_rejected() {
        let cfg = OfdmConfig::default();
        assert!(matches!(
            build_dictionary(&cfg, 10, 2.0 * cfg.symbol_time),
            Err(Error::DictionaryAliasing { .. })
        ));
        assert!(build_dictionary(&cfg, 1, 1e-7).is_err());
        assert!(build_dictionary(&cfg, 10, 0.0).is_err());
    }

    #[test]
    fn restrict_keeps_rows() {
        let cfg = OfdmConfig::default();
        let d = build_dictionary(&cfg, 8, 1e-7).unwrap();
        let r = d.restrict(&cfg.used_subchannels).unwrap();
        assert_eq!(r.rows(), 242);
        let k = cfg.used_subchannels[10];
        let full_row = d.subchannels().iter().position(|&x| x == k).unwrap();
        assert_eq!(r.row(10), d.row(full_row));
        assert!(d.restrict(&[500]).is_err());
    }
}
