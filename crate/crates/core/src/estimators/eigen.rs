//! Dense symmetric eigensolver (Householder tridiagonalization followed by
//! implicit QL iterations) and the pencil spectrum built on top of it.

use crate::error::{Error, Result};
use crate::matrix::{cholesky, SpdMatrix};

/// Largest order accepted by the dense eigen back-end.
pub const MAX_EIGEN_ORDER: usize = 2000;

/// Eigenvalues in ascending order and, optionally, the matching
/// eigenvectors stored column-wise in a row-major `n x n` array.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
}

/// Eigen-decomposition of a dense symmetric matrix given in full row-major form.
pub fn symmetric_eigen(n: usize, full: &[f64], want_vectors: bool) -> Result<SymmetricEigen> {
    if full.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: full.len() });
    }
    if n == 0 {
        return Ok(SymmetricEigen { values: vec![], vectors: want_vectors.then(Vec::new) });
    }
    let mut v = full.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    // Shift the off-diagonal so that e[i] couples i and i+1.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    ql_implicit(n, &mut d, &mut e, want_vectors.then_some(v.as_mut_slice()))?;
    Ok(sort_pairs(n, d, want_vectors.then_some(v)))
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off` (length `diag.len() - 1`).
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64], want_vectors: bool) -> Result<SymmetricEigen> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::DimensionMismatch { expected: n.saturating_sub(1), found: off.len() });
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut z = want_vectors.then(|| {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        z
    });
    ql_implicit(n, &mut d, &mut e, z.as_deref_mut())?;
    Ok(sort_pairs(n, d, z))
}

fn sort_pairs(n: usize, d: Vec<f64>, v: Option<Vec<f64>>) -> SymmetricEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = v.map(|v| {
        let mut out = vec![0.0; n * n];
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                out[k * n + new] = v[k * n + old];
            }
        }
        out
    });
    SymmetricEigen { values, vectors }
}

/// Householder reduction to tridiagonal form, accumulating the transform in `v`.
/// On return `d` is the diagonal and `e[1..]` the sub-diagonal.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in j + 1..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    // Accumulate transformations.
    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iterations on a symmetric tridiagonal matrix. `e[i]` couples
/// `i` and `i+1`; `e[n-1]` must be zero. Rotations are applied to the columns
/// of `z` when given.
fn ql_implicit(n: usize, d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::SingularSystem(
                        "tridiagonal QL iteration did not converge".into(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        for k in 0..n {
                            let zk = &mut z[k * n..(k + 1) * n];
                            let h = zk[i + 1];
                            zk[i + 1] = s * zk[i] + c * h;
                            zk[i] = c * zk[i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Generalized eigenvalues of the pencil `(A, B)` written as pairs
/// `(λ_i, μ_i)` with `trace((A + tB)⁻¹) = Σ 1/(λ_i + t μ_i)`.
///
/// For `B = I` the pairs are `(eig_i(A), 1)`. Otherwise, with `B = L Lᵀ` and
/// `C = L⁻¹ A L⁻ᵀ = Q Θ Qᵀ`, the generalized eigenvectors `y_i = L⁻ᵀ q_i`
/// give `λ_i = θ_i / ‖y_i‖²` and `μ_i = 1 / ‖y_i‖²`.
#[derive(Debug, Clone)]
pub struct PencilSpectrum {
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

impl PencilSpectrum {
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `Σ 1/(λ_i + t μ_i)`.
    pub fn trace_inverse(&self, t: f64) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| 1.0 / (l + t * m)).sum()
    }

    /// `−min_i λ_i/μ_i`: below this `A + tB` is no longer positive definite.
    pub fn t_min(&self) -> f64 {
        -self.lambda.iter().zip(&self.mu).map(|(l, m)| l / m).fold(f64::INFINITY, f64::min)
    }

    pub fn into_fn(self) -> impl Fn(f64) -> f64 {
        move |t| self.trace_inverse(t)
    }
}

/// Exact `t ↦ trace((A + tB)⁻¹)` from a full generalized eigendecomposition.
pub fn trace_inv_exact_eigen(a: &SpdMatrix, b: &SpdMatrix) -> Result<PencilSpectrum> {
    let n = a.order();
    if b.order() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.order() });
    }
    if n > MAX_EIGEN_ORDER {
        return Err(Error::InvalidArgument(format!(
            "eigen back-end limited to order {MAX_EIGEN_ORDER}, got {n}"
        )));
    }
    let spectrum = if b.is_identity() {
        let eig = symmetric_eigen(n, &a.to_dense(), false)?;
        PencilSpectrum { lambda: eig.values, mu: vec![1.0; n] }
    } else {
        let l = cholesky(b)?;
        // W = L⁻¹ A, column by column (columns of A are its rows).
        let full = a.to_dense();
        let mut w = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.copy_from_slice(&full[j * n..(j + 1) * n]);
            l.solve_lower_in_place(&mut col)?;
            for i in 0..n {
                w[i * n + j] = col[i];
            }
        }
        // C = L⁻¹ Wᵀ: solve against each row of W.
        let mut c = vec![0.0; n * n];
        for j in 0..n {
            col.copy_from_slice(&w[j * n..(j + 1) * n]);
            l.solve_lower_in_place(&mut col)?;
            for i in 0..n {
                c[i * n + j] = col[i];
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (c[i * n + j] + c[j * n + i]);
                c[i * n + j] = s;
                c[j * n + i] = s;
            }
        }
        let eig = symmetric_eigen(n, &c, true)?;
        let q = eig.vectors.expect("vectors requested");
        let mut lambda = Vec::with_capacity(n);
        let mut mu = Vec::with_capacity(n);
        for (k, &theta) in eig.values.iter().enumerate() {
            for i in 0..n {
                col[i] = q[i * n + k];
            }
            l.solve_upper_in_place(&mut col)?;
            let norm_sq: f64 = col.iter().map(|x| x * x).sum();
            lambda.push(theta / norm_sq);
            mu.push(1.0 / norm_sq);
        }
        PencilSpectrum { lambda, mu }
    };
    if let Some((row, &l)) = spectrum.lambda.iter().enumerate().find(|(_, &l)| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite { row, pivot: l });
    }
    Ok(spectrum)
}
