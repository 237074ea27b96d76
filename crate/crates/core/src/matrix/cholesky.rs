use super::{packed_offset, SpdMatrix, Storage};
use crate::error::{Error, Result};

/// Pivots below this multiple of the largest diagonal entry are treated as
/// loss of positive definiteness rather than round-off.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Lower-triangular factor `L` with `L Lᵀ = A`, packed row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    order: usize,
    data: Vec<f64>,
}

/// Rows processed together by the factorization kernel.
const ROW_BLOCK: usize = 8;
/// Right-hand sides solved together when accumulating `‖L⁻¹‖²_F`.
const RHS_BLOCK: usize = 8;

pub fn cholesky(a: &SpdMatrix) -> Result<CholeskyFactor> {
    let n = a.order();
    if let Storage::Identity = a.storage() {
        return CholeskyFactor::from_lower_packed(n, a.to_lower_packed());
    }
    let mut l = a.to_lower_packed();
    let max_diag = (0..n).map(|i| l[packed_offset(i) + i]).fold(0.0_f64, f64::max);
    let tol = PIVOT_TOLERANCE * max_diag;

    let mut i0 = 0;
    while i0 < n {
        let rows = ROW_BLOCK.min(n - i0);
        let (done, block) = l.split_at_mut(packed_offset(i0));
        // Columns left of the block: every pivot row j < i0 is final.
        if rows == ROW_BLOCK {
            let mut rest: &mut [f64] = block;
            let mut rows_mut: Vec<&mut [f64]> = Vec::with_capacity(ROW_BLOCK);
            for r in 0..ROW_BLOCK {
                let (head, tail) = rest.split_at_mut(i0 + r + 1);
                rows_mut.push(head);
                rest = tail;
            }
            for j in 0..i0 {
                let lj = &done[packed_offset(j)..packed_offset(j) + j + 1];
                let s = {
                    let heads: [&[f64]; ROW_BLOCK] = std::array::from_fn(|r| &rows_mut[r][..j]);
                    dot_rows(heads, &lj[..j])
                };
                let d = lj[j];
                for (row, sr) in rows_mut.iter_mut().zip(s) {
                    row[j] = (row[j] - sr) / d;
                }
            }
        } else {
            for r in 0..rows {
                let off = packed_offset(i0 + r) - packed_offset(i0);
                let row = &mut block[off..off + i0 + r + 1];
                for j in 0..i0 {
                    let lj = &done[packed_offset(j)..packed_offset(j) + j + 1];
                    row[j] = (row[j] - dot(&row[..j], &lj[..j])) / lj[j];
                }
            }
        }
        // Triangle inside the block.
        for j in i0..i0 + rows {
            let offj = packed_offset(j) - packed_offset(i0);
            let (head, tail) = block.split_at_mut(offj + j + 1);
            let lj = &mut head[offj..];
            let pivot = lj[j] - dot(&lj[..j], &lj[..j]);
            if pivot.is_nan() || pivot <= tol {
                return Err(Error::NotPositiveDefinite { row: j, pivot });
            }
            lj[j] = pivot.sqrt();
            let lj = &head[offj..];
            for r in j + 1..i0 + rows {
                let off = packed_offset(r) - packed_offset(j + 1);
                let row = &mut tail[off..off + r + 1];
                row[j] = (row[j] - dot(&row[..j], &lj[..j])) / lj[j];
            }
        }
        i0 += rows;
    }
    Ok(CholeskyFactor { order: n, data: l })
}

/// Solves `L x = b` by forward substitution.
pub fn solve_lower_triangular(l: &CholeskyFactor, b: &[f64]) -> Result<Vec<f64>> {
    let mut x = b.to_vec();
    l.solve_lower_in_place(&mut x)?;
    Ok(x)
}

impl CholeskyFactor {
    /// Wraps an existing packed lower-triangular matrix. Diagonal entries
    /// must be positive.
    pub fn from_lower_packed(order: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != packed_offset(order) {
            return Err(Error::DimensionMismatch {
                expected: packed_offset(order),
                found: data.len(),
            });
        }
        for i in 0..order {
            let d = data[packed_offset(i) + i];
            if d.is_nan() || d <= 0.0 {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
        }
        Ok(Self { order, data })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Row `i` of `L`, entries `0..=i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[packed_offset(i)..packed_offset(i) + i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[packed_offset(i) + j]
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.order {
            return Err(Error::DimensionMismatch { expected: self.order, found: len });
        }
        Ok(())
    }

    pub fn solve_lower_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        for k in 0..self.order {
            let row = self.row(k);
            x[k] = (x[k] - dot(&row[..k], &x[..k])) / row[k];
        }
        Ok(())
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        for k in (0..self.order).rev() {
            let row = self.row(k);
            let xk = x[k] / row[k];
            x[k] = xk;
            for (xj, &a) in x[..k].iter_mut().zip(&row[..k]) {
                *xj -= a * xk;
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x)?;
        self.solve_upper_in_place(&mut x)?;
        Ok(x)
    }

    /// `trace((L Lᵀ)⁻¹) = ‖L⁻¹‖²_F`, accumulated from the columns `L⁻¹ e_i`
    /// without ever holding more than a few of them.
    pub fn inverse_frobenius_sq(&self) -> f64 {
        let n = self.order;
        let mut x = vec![0.0; n * RHS_BLOCK];
        let mut total = 0.0;
        let mut i0 = 0;
        while i0 < n {
            let width = RHS_BLOCK.min(n - i0);
            let mut block_sum = 0.0;
            for k in i0..n {
                let row = self.row(k);
                let (solved, cur) = x.split_at_mut((k - i0) * RHS_BLOCK);
                let acc = accumulate_rows(&row[i0..k], solved);
                let cur = &mut cur[..RHS_BLOCK];
                let inv = 1.0 / row[k];
                for c in 0..RHS_BLOCK {
                    let rhs = if c < width && k == i0 + c { 1.0 } else { 0.0 };
                    let v = (rhs - acc[c]) * inv;
                    cur[c] = v;
                    block_sum += v * v;
                }
            }
            total += block_sum;
            i0 += width;
        }
        total
    }

    /// `L Lᵀ` as an [`SpdMatrix`].
    pub fn reconstruct(&self) -> SpdMatrix {
        let n = self.order;
        let mut out = Vec::with_capacity(packed_offset(n));
        for i in 0..n {
            for j in 0..=i {
                out.push(dot(&self.row(i)[..=j], &self.row(j)[..=j]));
            }
        }
        SpdMatrix::from_lower_packed(n, out).expect("packed size matches order")
    }
}

/// `Σ_j coeffs[j] · block_row_j` over rows of `RHS_BLOCK` entries.
#[inline]
fn accumulate_rows(coeffs: &[f64], rows: &[f64]) -> [f64; RHS_BLOCK] {
    let mut acc = [[0.0; RHS_BLOCK]; 4];
    let mut chunks = coeffs.chunks_exact(4);
    let mut row_chunks = rows.chunks_exact(4 * RHS_BLOCK);
    for (c, r) in (&mut chunks).zip(&mut row_chunks) {
        for u in 0..4 {
            let a = c[u];
            let row = &r[u * RHS_BLOCK..(u + 1) * RHS_BLOCK];
            for l in 0..RHS_BLOCK {
                acc[u][l] += a * row[l];
            }
        }
    }
    let tail_rows = &rows[(coeffs.len() / 4) * 4 * RHS_BLOCK..];
    for (u, &a) in chunks.remainder().iter().enumerate() {
        let row = &tail_rows[u * RHS_BLOCK..(u + 1) * RHS_BLOCK];
        for l in 0..RHS_BLOCK {
            acc[u][l] += a * row[l];
        }
    }
    let mut out = [0.0; RHS_BLOCK];
    for l in 0..RHS_BLOCK {
        out[l] = (acc[0][l] + acc[1][l]) + (acc[2][l] + acc[3][l]);
    }
    out
}

const LANES: usize = 8;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    reduce(&acc) + tail
}

#[inline]
fn reduce(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Several dot products against a shared right operand.
#[inline]
fn dot_rows<const R: usize>(rows: [&[f64]; R], b: &[f64]) -> [f64; R] {
    let mut acc = [[0.0; LANES]; R];
    let len = b.len() / LANES * LANES;
    for c in (0..len).step_by(LANES) {
        let y = &b[c..c + LANES];
        for r in 0..R {
            let x = &rows[r][c..c + LANES];
            for l in 0..LANES {
                acc[r][l] += x[l] * y[l];
            }
        }
    }
    let mut out = [0.0; R];
    for r in 0..R {
        let mut tail = 0.0;
        for k in len..b.len() {
            tail += rows[r][k] * b[k];
        }
        out[r] = reduce(&acc[r]) + tail;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor_is_identity() {
        let l = cholesky(&SpdMatrix::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = SpdMatrix::from_dense(2, &[4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(1, 0), 1.0);
        assert!((l.get(1, 1) - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn forward_substitution_by_hand() {
        let a = SpdMatrix::from_dense(2, &[4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = cholesky(&a).unwrap();
        let x = solve_lower_triangular(&l, &[2.0, 1.0 + 2.0_f64.sqrt()]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let e2 =
            solve_lower_triangular(&cholesky(&SpdMatrix::identity(3)).unwrap(), &[0.0, 1.0, 0.0])
                .unwrap();
        assert_eq!(e2, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let l = cholesky(&SpdMatrix::identity(3)).unwrap();
        assert!(matches!(
            solve_lower_triangular(&l, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SpdMatrix::from_dense(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { row: 1, .. })));
        // Singular to round-off: pivot of order 1e-17 relative.
        let b = SpdMatrix::from_dense(2, &[1.0, 1.0, 1.0, 1.0 + 1e-17]).unwrap();
        assert!(cholesky(&b).is_err());
    }

    #[test]
    fn diagonal_inverse_trace() {
        let a = SpdMatrix::from_diagonal(&[2.0, 4.0]).unwrap();
        assert!((cholesky(&a).unwrap().inverse_frobenius_sq() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn blocked_paths_match_unblocked_reference() {
        // Orders that exercise full and partial row and RHS blocks.
        for n in [1, 3, 4, 5, 9, 17, 33] {
            let mut full = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    full[i * n + j] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                }
                full[i * n + i] += n as f64;
            }
            let a = SpdMatrix::from_dense(n, &full).unwrap();
            let l = cholesky(&a).unwrap();
            // Textbook row-by-row Cholesky.
            let mut r = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let s: f64 = (0..j).map(|k| r[i][k] * r[j][k]).sum();
                    r[i][j] = if i == j {
                        (full[i * n + i] - s).sqrt()
                    } else {
                        (full[i * n + j] - s) / r[j][j]
                    };
                }
            }
            for (i, row) in r.iter().enumerate() {
                for (j, want) in row.iter().enumerate().take(i + 1) {
                    assert!((l.get(i, j) - want).abs() < 1e-12, "n={n} ({i},{j})");
                }
            }
            // ‖L⁻¹‖²_F against explicit column solves.
            let mut expect = 0.0;
            for c in 0..n {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                l.solve_lower_in_place(&mut e).unwrap();
                expect += e.iter().map(|v| v * v).sum::<f64>();
            }
            let got = l.inverse_frobenius_sq();
            assert!((got - expect).abs() <= 1e-13 * expect, "n={n}");
        }
    }
}
