//! Exact linear MMSE detection, the reference detector.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::model::{quantize, Constellation, RealSystemModel};
use crate::pjadmm::DetectionResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Cholesky,
}

/// Factored MMSE normal matrix `HᵀH + (σ²/E_s) I`, where `σ²` is the noise
/// variance per real dimension and `E_s` the per-dimension symbol energy.
/// For unit-energy QAM (`E_s = 1/2`) the regularizer is the complex noise
/// variance σ_v², i.e. the real form of `H̃ᴴH̃ + σ_v² I`.
#[derive(Debug, Clone)]
pub struct MmseWorkspace {
    pub gram: DMatrix<f64>,
    pub regularization: f64,
    pub factorization: Factorization,
    chol: Cholesky<f64, Dyn>,
}

impl MmseWorkspace {
    pub fn new(m: &RealSystemModel, c: &Constellation, noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::param("noise_var", format!("{noise_var} must be finite and >= 0")));
        }
        let h = m.channel();
        let regularization = noise_var / c.dim_energy();
        let mut gram = h.tr_mul(h);
        for i in 0..gram.nrows() {
            gram[(i, i)] += regularization;
        }
        let chol = Cholesky::new(gram.clone()).ok_or(Error::Singular)?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if !(lo > 0.0) || lo * lo < 1e-14 * hi * hi {
            return Err(Error::Singular);
        }
        Ok(Self {
            gram,
            regularization,
            factorization: Factorization::Cholesky,
            chol,
        })
    }

    /// `(HᵀH + reg·I)⁻¹ Hᵀ y` by two triangular solves.
    pub fn solve(&self, m: &RealSystemModel) -> DVector<f64> {
        self.chol.solve(&m.channel().tr_mul(m.received()))
    }
}

/// MMSE soft estimate and its hard decision. `noise_var` is per real
/// dimension, as stored in [`RealSystemModel::noise_var`].
pub fn mmse_detect(m: &RealSystemModel, c: &Constellation, noise_var: f64) -> Result<DetectionResult> {
    let ws = MmseWorkspace::new(m, c, noise_var)?;
    let x = ws.solve(m);
    Ok(DetectionResult {
        x_hard: quantize(&x, c).as_slice().to_vec(),
        x_soft: x.as_slice().to_vec(),
        iterations_used: 0,
        converged: true,
        trace: Vec::new(),
        final_kkt: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn random_model(rows: usize, cols: usize, noise: f64, seed: u64) -> RealSystemModel {
        let mut rng = rng::seeded(seed);
        let h = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(rows, |_, _| rng.random::<f64>() - 0.5);
        RealSystemModel::new(h, y, noise).unwrap()
    }

    #[test]
    fn orthogonal_noiseless_recovery() {
        // 2x2 rotation scaled, orthogonal columns
        let h = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let x = DVector::from_vec(vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
        let m = RealSystemModel::new(h.clone(), &h * &x, 0.0).unwrap();
        let r = mmse_detect(&m, &Constellation::qpsk(), 0.0).unwrap();
        assert_eq!(r.x_hard, x.as_slice());
        assert_eq!(r.iterations_used, 0);
    }

    #[test]
    fn matches_explicit_inverse() {
        let m = random_model(8, 4, 0.3, 1);
        let q = Constellation::qpsk();
        let r = mmse_detect(&m, &q, 0.3).unwrap();
        let h = m.channel();
        let w = (h.transpose() * h + DMatrix::identity(4, 4) * 0.6).try_inverse().unwrap();
        let oracle = w * h.transpose() * m.received();
        for (a, b) in r.x_soft.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn vanishing_noise_gives_least_squares() {
        let m = random_model(10, 4, 0.0, 2);
        let r = mmse_detect(&m, &Constellation::qpsk(), 1e-12).unwrap();
        let ls = m.channel().clone().svd(true, true).solve(m.received(), 1e-14).unwrap();
        for (a, b) in r.x_soft.iter().zip(ls.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_without_regularization() {
        let mut h = DMatrix::from_element(4, 2, 1.0);
        h[(0, 0)] = 1.0;
        let m = RealSystemModel::new(h, DVector::from_element(4, 1.0), 0.0).unwrap();
        assert_eq!(mmse_detect(&m, &Constellation::qpsk(), 0.0).unwrap_err(), Error::Singular);
        assert!(mmse_detect(&m, &Constellation::qpsk(), 0.1).is_ok());
        assert!(mmse_detect(&m, &Constellation::qpsk(), -0.1).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = rng::seeded(3);
        let q = Constellation::qpsk();
        for trial in 0..20 {
            let m = random_model(12, 6, 0.05, 100 + trial);
            let r = mmse_detect(&m, &q, 0.05).unwrap();
            let perm: Vec<usize> = {
                let mut p: Vec<usize> = (0..6).collect();
                for i in (1..6).rev() {
                    p.swap(i, rng.random_range(0..=i));
                }
                p
            };
            let hp = DMatrix::from_fn(12, 6, |r, c| m.channel()[(r, perm[c])]);
            let mp = RealSystemModel::new(hp, m.received().clone(), 0.05).unwrap();
            let rp = mmse_detect(&mp, &q, 0.05).unwrap();
            for c in 0..6 {
                assert_eq!(rp.x_hard[c], r.x_hard[perm[c]]);
            }
        }
    }
}
