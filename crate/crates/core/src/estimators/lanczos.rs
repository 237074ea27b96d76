use serde::{Deserialize, Serialize};

use super::eigen::tridiagonal_eigen;
use crate::error::{Error, Result};
use crate::matrix::SpdMatrix;

/// Breakdown threshold relative to the running norm estimate.
pub const BREAKDOWN_TOLERANCE: f64 = 1e-13;

/// Symmetric tridiagonal matrix produced by the Lanczos recurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanczosTriDiag {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LanczosTriDiag {
    pub fn degree(&self) -> usize {
        self.alpha.len()
    }

    /// Gauss quadrature nodes and weights: the eigenvalues `θ_j` and the
    /// squared first components of the eigenvectors.
    pub fn quadrature(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let eig = tridiagonal_eigen(&self.alpha, &self.beta, true)?;
        let k = self.degree();
        let v = eig.vectors.expect("vectors requested");
        let weights = (0..k).map(|j| v[j] * v[j]).collect();
        Ok((eig.values, weights))
    }
}

/// Lanczos tridiagonalization of `m` from `v0` with full
/// reorthogonalization. Stops early when the next `β` falls below
/// [`BREAKDOWN_TOLERANCE`] times the norm estimate.
pub fn lanczos(m: &SpdMatrix, v0: &[f64], degree: usize) -> Result<LanczosTriDiag> {
    let n = m.order();
    if v0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v0.len() });
    }
    if degree == 0 {
        return Err(Error::InvalidArgument("Lanczos degree must be at least 1".into()));
    }
    let norm0 = v0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm0 > 0.0) || !norm0.is_finite() {
        return Err(Error::InvalidArgument("Lanczos start vector must be nonzero".into()));
    }
    let degree = degree.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(degree);
    basis.push(v0.iter().map(|x| x / norm0).collect());
    let mut alpha = Vec::with_capacity(degree);
    let mut beta: Vec<f64> = Vec::with_capacity(degree);
    let mut w = vec![0.0; n];
    let mut norm_est: f64 = 0.0;

    for j in 0..degree {
        m.matvec(&basis[j], &mut w)?;
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= a * vi;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * vi;
            }
        }
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        norm_est = norm_est.max(a.abs() + b + beta.last().copied().unwrap_or(0.0));
        if j + 1 == degree || b < BREAKDOWN_TOLERANCE * norm_est {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Ok(LanczosTriDiag { alpha, beta })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_identity_truncates_after_one_step() {
        let m = SpdMatrix::identity(6).scaled(3.0);
        let t = lanczos(&m, &[1.0, -1.0, 1.0, 1.0, -1.0, 1.0], 5).unwrap();
        assert_eq!(t.degree(), 1);
        assert!((t.alpha[0] - 3.0).abs() < 1e-14);
        assert!(t.beta.is_empty());
    }

    #[test]
    fn two_by_two_by_hand() {
        let m = SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let s = 0.5_f64.sqrt();
        let t = lanczos(&m, &[s, s], 2).unwrap();
        assert!((t.alpha[0] - 1.5).abs() < 1e-15);
        assert!((t.alpha[1] - 1.5).abs() < 1e-15);
        assert!((t.beta[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_zero_start() {
        let m = SpdMatrix::identity(2);
        assert!(lanczos(&m, &[0.0, 0.0], 2).is_err());
        assert!(lanczos(&m, &[1.0, 0.0], 0).is_err());
    }
}
