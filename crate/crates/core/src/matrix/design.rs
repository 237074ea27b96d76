use serde::{Deserialize, Serialize};

use super::{cholesky::dot, packed_offset, SpdMatrix};
use crate::error::{Error, Result};

/// Reflector `I − 2 v vᵀ / ‖v‖²`, applied without forming the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Householder {
    v: Vec<f64>,
    scale: f64,
}

impl Householder {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::InvalidArgument(
                "Householder vector must be nonzero and finite".into(),
            ));
        }
        Ok(Self { scale: 2.0 / norm_sq, v })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn vector(&self) -> &[f64] {
        &self.v
    }

    pub fn apply(&self, x: &mut [f64]) {
        let c = self.scale * dot(&self.v, x);
        for (xi, vi) in x.iter_mut().zip(&self.v) {
            *xi -= c * vi;
        }
    }

    /// Dense copy, for verification on small sizes.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.v.len();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = f64::from(u8::from(i == j)) - self.scale * self.v[i] * self.v[j];
            }
        }
        out
    }
}

/// `exp(−c ((i−1)/m)^e)` for `i = 1..=m`.
pub fn singular_value_profile(m: usize, decay_coeff: f64, decay_exp: f64) -> Vec<f64> {
    (0..m).map(|i| (-decay_coeff * (i as f64 / m as f64).powf(decay_exp)).exp()).collect()
}

/// Design matrix `X = U Σ Vᵀ` with Householder `U` (n×n) and `V` (m×m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    /// Row-major entries of `X`.
    data: Vec<f64>,
    left: Householder,
    right: Householder,
    singular_values: Vec<f64>,
}

pub fn build_design_matrix(
    n: usize,
    m: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    decay_coeff: f64,
    decay_exp: f64,
) -> Result<DesignMatrix> {
    if m == 0 || n <= m {
        return Err(Error::InvalidShape(format!(
            "design matrix needs n > m >= 1, got n = {n}, m = {m}"
        )));
    }
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.len() });
    }
    if v.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: v.len() });
    }
    let left = Householder::new(u)?;
    let right = Householder::new(v)?;
    let sigma = singular_value_profile(m, decay_coeff, decay_exp);

    // Rows of Σ Vᵀ: since V is symmetric, row i is σ_i (e_i − β v_i v)ᵀ.
    let mut data = vec![0.0; n * m];
    let vv = right.vector();
    for i in 0..m {
        let row = &mut data[i * m..(i + 1) * m];
        let c = right.scale * vv[i];
        for (k, x) in row.iter_mut().enumerate() {
            *x = -sigma[i] * c * vv[k];
        }
        row[i] += sigma[i];
    }
    // Left reflector as a rank-1 update: X ← X − β u (uᵀ X).
    let uu = left.vector();
    let mut w = vec![0.0; m];
    for (r, &ur) in uu.iter().enumerate().take(m) {
        for (wk, x) in w.iter_mut().zip(&data[r * m..(r + 1) * m]) {
            *wk += ur * x;
        }
    }
    for (r, &ur) in uu.iter().enumerate() {
        let c = left.scale * ur;
        for (x, wk) in data[r * m..(r + 1) * m].iter_mut().zip(&w) {
            *x -= c * wk;
        }
    }
    Ok(DesignMatrix { rows: n, cols: m, data, left, right, singular_values: sigma })
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn left_reflector(&self) -> &Householder {
        &self.left
    }

    pub fn right_reflector(&self) -> &Householder {
        &self.right
    }

    /// `X w`.
    pub fn mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: w.len() });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), w)).collect())
    }

    /// `Xᵀ z`.
    pub fn mul_transpose_vec(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: z.len() });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &zi) in z.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += zi * x;
            }
        }
        Ok(out)
    }

    /// `XᵀX` computed from the stored entries.
    pub fn gram(&self) -> SpdMatrix {
        let m = self.cols;
        let mut packed = vec![0.0; packed_offset(m)];
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..m {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let dst = &mut packed[packed_offset(a)..packed_offset(a) + a + 1];
                for (d, &rb) in dst.iter_mut().zip(&row[..=a]) {
                    *d += ra * rb;
                }
            }
        }
        SpdMatrix::from_lower_packed(m, packed).expect("packed size matches order")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflector_is_orthogonal_and_involutive() {
        let u: Vec<f64> = (0..20).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let h = Householder::new(u).unwrap();
        let d = h.to_dense();
        for i in 0..20 {
            for j in 0..20 {
                let s: f64 = (0..20).map(|k| d[k * 20 + i] * d[k * 20 + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12);
            }
        }
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut y = x.clone();
        h.apply(&mut y);
        h.apply(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_starts_at_one() {
        for m in [1, 7, 500] {
            assert_eq!(singular_value_profile(m, 40.0, 0.75)[0], 1.0);
        }
        let s = singular_value_profile(500, 40.0, 0.75);
        let expect = (-40.0 * (499.0_f64 / 500.0).powf(0.75)).exp();
        assert_eq!(s[499], expect);
        assert!((expect.ln() + 39.94).abs() < 0.01);
    }

    #[test]
    fn shape_checks() {
        assert!(matches!(
            build_design_matrix(5, 5, vec![1.0; 5], vec![1.0; 5], 40.0, 0.75),
            Err(Error::InvalidShape(_))
        ));
        assert!(Householder::new(vec![0.0; 3]).is_err());
    }

    #[test]
    fn gram_and_products_match_dense_formulas() {
        let u: Vec<f64> = (0..9).map(|i| 1.0 + i as f64).collect();
        let v: Vec<f64> = (0..4).map(|i| i as f64 - 1.5).collect();
        let x = build_design_matrix(9, 4, u, v, 40.0, 0.75).unwrap();
        let g = x.gram();
        for a in 0..4 {
            for b in 0..4 {
                let s: f64 = (0..9).map(|i| x.row(i)[a] * x.row(i)[b]).sum();
                assert!((g.get(a, b) - s).abs() < 1e-14);
            }
        }
        let w = [1.0, -1.0, 0.5, 2.0];
        let xw = x.mul_vec(&w).unwrap();
        let xtxw = x.mul_transpose_vec(&xw).unwrap();
        let mut gw = vec![0.0; 4];
        g.matvec(&w, &mut gw).unwrap();
        for (a, b) in xtxw.iter().zip(&gw) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
