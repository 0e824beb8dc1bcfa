//! ℓ1-regularized least squares over a complex delay dictionary.
//!
//! The complex problem `min ‖h − T r‖² + λ‖r‖₁` is embedded in real
//! coordinates with the map `z ↦ [Re z, −Im z]` applied to `h` and `r`
//! (so `r = x[..P] − j·x[P..]`), which turns `T` into the block matrix
//! `[[Re T, Im T], [−Im T, Re T]]`. The ℓ1 penalty acts on the `2P` real
//! coordinates.
//!
//! Two solvers share the embedding: an exact active-set method
//! (feature-sign search) used by default, and accelerated proximal gradient
//! (FISTA with restart) used as a fallback and as an independent check.

use nalgebra::{DMatrix, DVector};

use super::DelayDictionary;
use crate::{Complex64, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Maximum iterations (active-set steps or FISTA iterations).
    pub max_iter: usize,
    /// FISTA stops when the relative objective change drops below this.
    pub rel_tol: f64,
    /// Accepted optimality (subgradient) residual.
    pub tol_kkt: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 10_000,
            rel_tol: 1e-8,
            tol_kkt: 1e-6,
        }
    }
}

/// Sparse path decomposition of one CFR vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PathDecomposition {
    pub r: Vec<Complex64>,
    /// Index of the largest-modulus entry of `r` (lowest index on ties).
    pub reference_index: usize,
    /// ‖h − T r‖₂.
    pub residual_norm: f64,
    /// ‖h − T r‖₂² + λ‖x‖₁ with `x` the real embedding of `r`.
    pub lasso_objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl PathDecomposition {
    pub fn nonzeros(&self) -> usize {
        self.r.iter().filter(|v| v.norm_sqr() > 0.0).count()
    }

    /// Real coordinates `[Re r, −Im r]`.
    pub fn embedded(&self) -> Vec<f64> {
        embed(&self.r)
    }
}

pub(crate) fn embed(z: &[Complex64]) -> Vec<f64> {
    z.iter().map(|v| v.re).chain(z.iter().map(|v| -v.im)).collect()
}

pub(crate) fn unembed(x: &[f64]) -> Vec<Complex64> {
    let p = x.len() / 2;
    (0..p).map(|i| Complex64::new(x[i], -x[p + i])).collect()
}

/// Lowest index attaining the maximum modulus.
pub fn reference_index(r: &[Complex64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in r.iter().enumerate() {
        let m = v.norm_sqr();
        if m > best_val {
            best = i;
            best_val = m;
        }
    }
    best
}

/// Largest subgradient violation at `x` for gradient `g = 2(Gx − c)`.
pub fn kkt_residual(x: &[f64], gradient: &[f64], lambda: f64) -> f64 {
    x.iter()
        .zip(gradient)
        .map(|(&xi, &gi)| {
            if xi != 0.0 {
                (gi + lambda * xi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Solver bound to one dictionary: caches the real Gram matrix and its
/// largest eigenvalue.
#[derive(Clone, Debug)]
pub struct LassoSolver {
    dict: DelayDictionary,
    /// `G = T_extᵀ T_ext`, dense `2P × 2P`.
    gram: DMatrix<f64>,
    lipschitz: f64,
    pub options: SolverOptions,
}

impl LassoSolver {
    pub fn new(dict: DelayDictionary, options: SolverOptions) -> Self {
        let p = dict.atoms();
        // complex Gram Tᴴ T, then its real embedding
        let mut gc = vec![Complex64::new(0.0, 0.0); p * p];
        for i in 0..dict.rows() {
            let row = dict.row(i);
            for a in 0..p {
                let ca = row[a].conj();
                for b in a..p {
                    gc[a * p + b] += ca * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                gc[a * p + b] = gc[b * p + a].conj();
            }
        }
        let gram = DMatrix::from_fn(2 * p, 2 * p, |i, j| {
            let (ia, ja) = (i % p, j % p);
            let g = gc[ia * p + ja];
            match (i < p, j < p) {
                (true, true) | (false, false) => g.re,
                (true, false) => g.im,
                (false, true) => -g.im,
            }
        });
        let lipschitz = 2.0 * largest_eigenvalue(&gram);
        LassoSolver {
            dict,
            gram,
            lipschitz,
            options,
        }
    }

    pub fn dictionary(&self) -> &DelayDictionary {
        &self.dict
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `c = T_extᵀ h_ext`, the embedding of `Tᴴ h`.
    fn correlation(&self, h: &[Complex64]) -> DVector<f64> {
        let p = self.dict.atoms();
        let mut th = vec![Complex64::new(0.0, 0.0); p];
        for (i, hk) in h.iter().enumerate() {
            for (acc, t) in th.iter_mut().zip(self.dict.row(i)) {
                *acc += t.conj() * hk;
            }
        }
        DVector::from_vec(embed(&th))
    }

    /// Smallest λ for which the zero vector is optimal.
    pub fn lambda_max(&self, h: &[Complex64]) -> Result<f64> {
        self.check_input(h)?;
        Ok(2.0 * self.correlation(h).amax())
    }

    fn check_input(&self, h: &[Complex64]) -> Result<()> {
        if h.len() != self.dict.rows() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} CFR values", self.dict.rows()),
                found: h.len().to_string(),
            });
        }
        if h.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("cfr", "non-finite value"));
        }
        Ok(())
    }

    /// Solves the embedded lasso. `warm` seeds the active set (typically the
    /// previous packet of the same stream).
    pub fn solve(&self, h: &[Complex64], lambda: f64, warm: Option<&PathDecomposition>) -> Result<PathDecomposition> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        self.check_input(h)?;
        let c = self.correlation(h);
        let x0 = match warm {
            Some(w) if w.r.len() == self.dict.atoms() => DVector::from_vec(w.embedded()),
            _ => DVector::zeros(c.len()),
        };
        let (x, iterations) = match self.feature_sign(&c, lambda, x0) {
            Ok(done) => done,
            Err(_) => {
                log::debug!("active-set search stalled; falling back to FISTA");
                let (xf, it_f) = self.fista_embedded(&c, lambda, None);
                let (x, it) = self.feature_sign(&c, lambda, xf.clone()).unwrap_or((xf, 0));
                (x, it_f + it)
            }
        };
        let dec = self.finish(h, &c, lambda, x.as_slice(), iterations);
        if dec.kkt_residual > self.options.tol_kkt {
            return Err(Error::NonConvergence {
                iterations,
                objective: dec.lasso_objective,
                residual: dec.kkt_residual,
            });
        }
        Ok(dec)
    }

    /// Plain accelerated proximal gradient, no active-set refinement.
    pub fn solve_fista(&self, h: &[Complex64], lambda: f64) -> Result<PathDecomposition> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        self.check_input(h)?;
        let c = self.correlation(h);
        let (x, iterations) = self.fista_embedded(&c, lambda, None);
        Ok(self.finish(h, &c, lambda, x.as_slice(), iterations))
    }

    fn finish(
        &self,
        h: &[Complex64],
        c: &DVector<f64>,
        lambda: f64,
        x: &[f64],
        iterations: usize,
    ) -> PathDecomposition {
        let r = unembed(x);
        let fit = self.dict.synthesize(&r);
        let residual_sq: f64 = h.iter().zip(&fit).map(|(a, b)| (a - b).norm_sqr()).sum();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let xv = DVector::from_column_slice(x);
        let gradient = 2.0 * (&self.gram * &xv - c);
        PathDecomposition {
            reference_index: reference_index(&r),
            r,
            residual_norm: residual_sq.sqrt(),
            lasso_objective: residual_sq + lambda * l1,
            kkt_residual: kkt_residual(x, gradient.as_slice(), lambda),
            iterations,
        }
    }

    /// `2(Gx − c)` using only the nonzero columns of `x`.
    fn sparse_gradient(&self, x: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
        let mut g = -c.clone();
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                g.axpy(xj, &self.gram.column(j), 1.0);
            }
        }
        g * 2.0
    }

    /// Feature-sign search: alternates exact solves on the active set with
    /// sign-consistent line searches, activating the most violating
    /// coordinate when the active set is optimal.
    fn feature_sign(&self, c: &DVector<f64>, lambda: f64, mut x: DVector<f64>) -> Result<(DVector<f64>, usize)> {
        let n = c.len();
        let tol = self.options.tol_kkt * 1e-3;
        let mut theta: Vec<f64> = x.iter().map(|v| v.signum() * (*v != 0.0) as i32 as f64).collect();
        let mut need_step = x.iter().any(|v| *v != 0.0);

        for it in 0..self.options.max_iter {
            if !need_step {
                let gradient = self.sparse_gradient(&x, c);
                // optimality of active coordinates holds; look at the zeros
                let mut best = None;
                let mut best_val = lambda + tol;
                for i in 0..n {
                    if x[i] == 0.0 && gradient[i].abs() > best_val {
                        best_val = gradient[i].abs();
                        best = Some(i);
                    }
                }
                match best {
                    None => return Ok((x, it)),
                    Some(i) => theta[i] = -gradient[i].signum(),
                }
            }

            let active: Vec<usize> = (0..n).filter(|&i| theta[i] != 0.0).collect();
            let m = active.len();
            let g_aa = DMatrix::from_fn(m, m, |a, b| self.gram[(active[a], active[b])]);
            let rhs = DVector::from_fn(m, |a, _| c[active[a]] - 0.5 * lambda * theta[active[a]]);
            let target = match g_aa.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => g_aa
                    .clone()
                    .svd(true, true)
                    .solve(&rhs, 1e-12)
                    .map_err(|e| Error::invalid("lasso", e.to_string()))?,
            };
            let current = DVector::from_fn(m, |a, _| x[active[a]]);

            // On the segment x(t) = current + t·d the smooth part is
            // q0 + q1·t + q2·t², so each candidate costs O(m).
            let c_a = DVector::from_fn(m, |a, _| c[active[a]]);
            let d = &target - &current;
            let gd = &g_aa * &d;
            let q1 = 2.0 * (current.dot(&gd) - c_a.dot(&d));
            let q2 = d.dot(&gd);
            let at = |t: f64, x: &DVector<f64>| q1 * t + q2 * t * t + lambda * x.lp_norm(1);

            // candidates: the target and every zero crossing on the segment
            let mut best_x = target.clone();
            let mut best_obj = at(1.0, &target);
            for a in 0..m {
                let (x0, x1) = (current[a], target[a]);
                if x0 != 0.0 && x0.signum() != x1.signum() {
                    let t = x0 / (x0 - x1);
                    let mut cand = &current + &d * t;
                    cand[a] = 0.0;
                    let obj = at(t, &cand);
                    if obj < best_obj {
                        best_obj = obj;
                        best_x = cand;
                    }
                }
            }
            for (a, &i) in active.iter().enumerate() {
                x[i] = best_x[a];
                theta[i] = if best_x[a] == 0.0 { 0.0 } else { best_x[a].signum() };
            }

            // active coordinates optimal?
            let gradient = self.sparse_gradient(&x, c);
            need_step = active
                .iter()
                .any(|&i| x[i] != 0.0 && (gradient[i] + lambda * theta[i]).abs() > tol);
        }
        Err(Error::NonConvergence {
            iterations: self.options.max_iter,
            objective: f64::NAN,
            residual: f64::NAN,
        })
    }

    fn fista_embedded(&self, c: &DVector<f64>, lambda: f64, x0: Option<DVector<f64>>) -> (DVector<f64>, usize) {
        let step = 1.0 / self.lipschitz;
        let shrink = lambda * step;
        let objective =
            |x: &DVector<f64>| (x.transpose() * &self.gram * x)[(0, 0)] - 2.0 * c.dot(x) + lambda * x.lp_norm(1);
        let mut x = x0.unwrap_or_else(|| DVector::zeros(c.len()));
        let mut y = x.clone();
        let mut t = 1.0_f64;
        let mut prev = objective(&x);
        for it in 0..self.options.max_iter {
            let gradient = 2.0 * (&self.gram * &y - c);
            let mut next = &y - gradient * step;
            next.apply(|v| *v = v.signum() * (v.abs() - shrink).max(0.0));
            let obj = objective(&next);
            if obj > prev {
                // adaptive restart
                t = 1.0;
                y = x.clone();
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            let change = (prev - obj).abs() / prev.abs().max(1e-300);
            x = next;
            t = t_next;
            prev = obj;
            if change < self.options.rel_tol {
                return (x, it + 1);
            }
        }
        (x, self.options.max_iter)
    }
}

fn largest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut v = DVector::from_element(m.nrows(), 1.0);
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm / v.norm();
        v = w / norm;
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    // small safety margin so 1/L stays a valid step
    lambda * 1.01
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sanitize::build_dictionary;
    use crate::sim::OfdmConfig;

    fn solver() -> LassoSolver {
        let cfg = OfdmConfig::default();
        let dict = build_dictionary(&cfg, 100, cfg.symbol_time / 4.0)
            .unwrap()
            .restrict(&cfg.used_subchannels)
            .unwrap();
        LassoSolver::new(dict, SolverOptions::default())
    }

    fn column(s: &LassoSolver, p: usize, a: Complex64) -> Vec<Complex64> {
        (0..s.dictionary().rows())
            .map(|i| s.dictionary().entry(i, p) * a)
            .collect()
    }

    fn multipath(s: &LassoSolver) -> Vec<Complex64> {
        let mut h = column(s, 3, Complex64::new(1.0, 0.4));
        for (i, v) in column(s, 17, Complex64::new(-0.3, 0.5)).into_iter().enumerate() {
            h[i] += v;
        }
        // an off-grid component
        let d = s.dictionary();
        for (i, v) in h.iter_mut().enumerate() {
            let k = d.subchannels()[i] as f64;
            let tau = 41.37 * d.grid_step();
            *v += Complex64::from_polar(0.25, -std::f64::consts::TAU * k * tau / d.symbol_time());
        }
        h
    }

    #[test]
    fn zero_input_gives_zero() {
        let s = solver();
        let h = vec![Complex64::new(0.0, 0.0); s.dictionary().rows()];
        assert_eq!(s.lambda_max(&h).unwrap(), 0.0);
        let dec = s.solve(&h, 0.1, None).unwrap();
        assert_eq!(dec.nonzeros(), 0);
    }

    #[test]
    fn lambda_above_max_gives_zero() {
        let s = solver();
        let h = multipath(&s);
        let lmax = s.lambda_max(&h).unwrap();
        assert_eq!(s.solve(&h, lmax * 1.0001, None).unwrap().nonzeros(), 0);
        assert!(s.solve(&h, lmax * 0.9, None).unwrap().nonzeros() > 0);
    }

    #[test]
    fn single_atom_matches_soft_threshold() {
        // With `h` a scaled atom the optimum keeps only that atom, each real
        // coordinate shrunk by λ/(2‖T_p‖²).
        let s = solver();
        let a = Complex64::new(0.8, -0.6);
        let p0 = 37;
        let h = column(&s, p0, a);
        let lambda = 0.1;
        let dec = s.solve(&h, lambda, None).unwrap();
        let n = s.dictionary().rows() as f64;
        let shrink = lambda / (2.0 * n);
        let want = Complex64::new(a.re - shrink * a.re.signum(), a.im - shrink * a.im.signum());
        assert_eq!(dec.nonzeros(), 1);
        assert_eq!(dec.reference_index, p0);
        assert!((dec.r[p0] - want).norm() < 1e-10);

        // exhaustive single-atom least squares picks the same atom
        let best = (0..s.dictionary().atoms())
            .map(|p| {
                let col = column(&s, p, Complex64::new(1.0, 0.0));
                let coef: Complex64 = col.iter().zip(&h).map(|(t, v)| t.conj() * v).sum::<Complex64>() / n;
                let res: f64 = col.iter().zip(&h).map(|(t, v)| (v - t * coef).norm_sqr()).sum();
                (p, res)
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        assert_eq!(best.0, p0);
    }

    #[test]
    fn reported_objective_is_recomputable() {
        let s = solver();
        let h = multipath(&s);
        let lambda = 0.1;
        let dec = s.solve(&h, lambda, None).unwrap();
        let d = s.dictionary();
        let mut obj = 0.0;
        for i in 0..d.rows() {
            let fit: Complex64 = (0..d.atoms()).map(|p| d.entry(i, p) * dec.r[p]).sum();
            obj += (h[i] - fit).norm_sqr();
        }
        obj += lambda * dec.r.iter().map(|v| v.re.abs() + v.im.abs()).sum::<f64>();
        assert!((obj - dec.lasso_objective).abs() < 1e-9 * obj.max(1.0));
        assert!(dec.kkt_residual <= s.options.tol_kkt);
    }

    #[test]
    fn proximal_gradient_agrees_with_active_set() {
        let s = solver();
        let h = multipath(&s);
        let exact = s.solve(&h, 0.1, None).unwrap();
        let fista = s.solve_fista(&h, 0.1).unwrap();
        let rel = (fista.lasso_objective - exact.lasso_objective) / exact.lasso_objective;
        assert!(rel > -1e-9, "active set worse than FISTA: {rel}");
        assert!(rel < 1e-4, "objectives differ by {rel}");
        assert_eq!(fista.reference_index, exact.reference_index);
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let s = solver();
        let h = multipath(&s);
        let cold = s.solve(&h, 0.1, None).unwrap();
        let seed = s.solve(&h, 0.3, None).unwrap();
        let warm = s.solve(&h, 0.1, Some(&seed)).unwrap();
        assert!((cold.lasso_objective - warm.lasso_objective).abs() < 1e-9);
    }

    #[test]
    fn l1_norm_shrinks_with_lambda() {
        let s = solver();
        let h = multipath(&s);
        let mut prev = f64::INFINITY;
        for lambda in [0.02, 0.05, 0.1, 0.5, 2.0, 10.0] {
            let l1: f64 = s
                .solve(&h, lambda, None)
                .unwrap()
                .embedded()
                .iter()
                .map(|v| v.abs())
                .sum();
            assert!(l1 <= prev + 1e-9);
            prev = l1;
        }
    }

    #[test]
    fn kkt_residual_cases() {
        assert_eq!(kkt_residual(&[0.0], &[0.05], 0.1), 0.0);
        assert!((kkt_residual(&[0.0], &[0.15], 0.1) - 0.05).abs() < 1e-15);
        assert!((kkt_residual(&[1.0], &[-0.1], 0.1)).abs() < 1e-15);
        assert!((kkt_residual(&[-1.0], &[0.3], 0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reference_index_prefers_lowest_on_ties() {
        let r = [
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
        ];
        assert_eq!(reference_index(&r), 0);
    }

    #[test]
    fn rejects_bad_input() {
        let s = solver();
        assert!(s.solve(&[Complex64::new(1.0, 0.0)], 0.1, None).is_err());
        let mut h = multipath(&s);
        assert!(s.solve(&h, 0.0, None).is_err());
        h[0].re = f64::NAN;
        assert!(s.solve(&h, 0.1, None).is_err());
    }
}
