use super::{DelayDictionary, PathDecomposition};
use crate::{Complex64, Error, Result};

/// Offset-free CFR reconstructed from a path decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct SanitizedCfr {
    pub packet_index: u64,
    pub antenna_index: u16,
    pub subchannels: Vec<i32>,
    pub values: Vec<Complex64>,
}

/// Per sub-channel path terms `X_k = T_kᵀ ∘ r`, referenced to path `p*`
/// (`X̄_k = conj(X_{k,p*}) X_k`) and summed into `Ĥ_k`. `dict` supplies the
/// output rows, so sub-channels absent from the measurement (the three central
/// ones) are filled in as well.
pub fn decompose_and_reference(dict: &DelayDictionary, dec: &PathDecomposition) -> Result<Vec<Complex64>> {
    if dec.r.len() != dict.atoms() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} coefficients", dict.atoms()),
            found: dec.r.len().to_string(),
        });
    }
    let p_star = dec.reference_index;
    if dec.r[p_star].norm_sqr() == 0.0 {
        return Err(Error::EmptyDecomposition);
    }
    let support: Vec<usize> = (0..dec.r.len()).filter(|&p| dec.r[p].norm_sqr() > 0.0).collect();
    Ok((0..dict.rows())
        .map(|row| {
            let reference = (dict.entry(row, p_star) * dec.r[p_star]).conj();
            support
                .iter()
                .map(|&p| {
                    if p == p_star {
                        Complex64::new(dec.r[p].norm_sqr(), 0.0)
                    } else {
                        reference * dict.entry(row, p) * dec.r[p]
                    }
                })
                .sum()
        })
        .collect())
}

/// The `p*` summand of `Ĥ_k`, `conj(X_{k,p*}) X_{k,p*} = |r_{p*}|²`.
pub fn reference_term(dict: &DelayDictionary, dec: &PathDecomposition, row: usize) -> Complex64 {
    let x = dict.entry(row, dec.reference_index) * dec.r[dec.reference_index];
    x.conj() * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sanitize::build_dictionary;
    use crate::sim::OfdmConfig;

    fn dict() -> DelayDictionary {
        let cfg = OfdmConfig::default();
        build_dictionary(&cfg, 100, cfg.symbol_time / 4.0).unwrap()
    }

    fn dec(r: Vec<Complex64>) -> PathDecomposition {
        PathDecomposition {
            reference_index: crate::sanitize::reference_index(&r),
            r,
            residual_norm: 0.0,
            lasso_objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn single_atom_gives_real_constant() {
        let d = dict();
        let mut r = vec![Complex64::new(0.0, 0.0); 100];
        r[12] = Complex64::new(0.3, -0.4);
        let h = decompose_and_reference(&d, &dec(r)).unwrap();
        for v in h {
            assert_eq!(v.im, 0.0);
            assert!((v.re - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_atoms_match_direct_formula() {
        let d = dict();
        let mut r = vec![Complex64::new(0.0, 0.0); 100];
        r[5] = Complex64::new(1.0, 1.0);
        r[40] = Complex64::new(-0.2, 0.3);
        let h = decompose_and_reference(&d, &dec(r.clone())).unwrap();
        for (row, v) in h.iter().enumerate() {
            let k = d.subchannels()[row] as f64;
            let phase =
                |p: usize| Complex64::from_polar(1.0, -std::f64::consts::TAU * k * d.grid()[p] / d.symbol_time());
            let want = r[5].norm_sqr() + (phase(5) * r[5]).conj() * phase(40) * r[40];
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn common_phase_cancels() {
        let d = dict();
        let mut r = vec![Complex64::new(0.0, 0.0); 100];
        r[5] = Complex64::new(1.0, 0.2);
        r[7] = Complex64::new(0.1, -0.3);
        r[60] = Complex64::new(-0.2, 0.3);
        let base = decompose_and_reference(&d, &dec(r.clone())).unwrap();
        let rot = Complex64::from_polar(1.0, 2.1);
        let turned: Vec<_> = r.iter().map(|v| v * rot).collect();
        let other = decompose_and_reference(&d, &dec(turned)).unwrap();
        for (a, b) in base.iter().zip(&other) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_decomposition_is_an_error() {
        let d = dict();
        let r = vec![Complex64::new(0.0, 0.0); 100];
        assert!(matches!(
            decompose_and_reference(&d, &dec(r)),
            Err(Error::EmptyDecomposition)
        ));
    }
}
