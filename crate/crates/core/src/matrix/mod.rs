//! Symmetric positive-definite operands and their factorizations.
//!
//! Dense matrices keep only the lower triangle, packed row by row, so row
//! `i` occupies `data[i(i+1)/2 .. i(i+1)/2 + i + 1]`. This is also the layout
//! of [`CholeskyFactor`], which lets the factorization stream contiguous rows.

mod cholesky;
mod design;
mod kernel;

pub use cholesky::{cholesky, solve_lower_triangular, CholeskyFactor};
pub use design::{build_design_matrix, singular_value_profile, DesignMatrix, Householder};
pub use kernel::{build_exponential_kernel, build_kernel, grid_points, random_points, PointCloud};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry of user-supplied entries.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[inline]
pub(crate) fn packed_offset(row: usize) -> usize {
    row * (row + 1) / 2
}

/// Lower triangle of a sparse symmetric matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLower {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseLower {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over `(row, col, value)` with `col <= row`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.row_ptr.len() - 1).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Storage {
    /// Packed lower triangle, row-major.
    Dense(Vec<f64>),
    Sparse(SparseLower),
    /// The identity; no entries are stored.
    Identity,
}

/// A symmetric matrix that callers promise is positive definite.
///
/// Symmetry is enforced at construction. Positive definiteness is checked
/// lazily: [`cholesky`] reports [`Error::NotPositiveDefinite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    order: usize,
    storage: Storage,
}

impl SpdMatrix {
    pub fn identity(order: usize) -> Self {
        Self { order, storage: Storage::Identity }
    }

    /// Builds a dense matrix from its packed lower triangle.
    pub fn from_lower_packed(order: usize, data: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidShape("matrix order must be positive".into()));
        }
        if data.len() != packed_offset(order) {
            return Err(Error::DimensionMismatch {
                expected: packed_offset(order),
                found: data.len(),
            });
        }
        Ok(Self { order, storage: Storage::Dense(data) })
    }

    /// Builds a dense matrix from a full row-major `order x order` array,
    /// rejecting it if it is not symmetric to [`SYMMETRY_TOLERANCE`].
    pub fn from_dense(order: usize, full: &[f64]) -> Result<Self> {
        if full.len() != order * order {
            return Err(Error::DimensionMismatch { expected: order * order, found: full.len() });
        }
        let scale = full.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut data = Vec::with_capacity(packed_offset(order));
        for i in 0..order {
            for j in 0..=i {
                let (a, b) = (full[i * order + j], full[j * order + i]);
                let diff = (a - b).abs();
                if diff > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
                data.push(0.5 * (a + b));
            }
        }
        Self::from_lower_packed(order, data)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_triplets(n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds a sparse matrix from `(row, col, value)` triplets (0-based).
    ///
    /// Entries above the diagonal are mirrored into the lower triangle. An
    /// entry given at both `(i, j)` and `(j, i)` must agree.
    pub fn from_triplets<I>(order: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if order == 0 {
            return Err(Error::InvalidShape("matrix order must be positive".into()));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= order || j >= order {
                return Err(Error::InvalidShape(format!(
                    "entry ({i}, {j}) outside a matrix of order {order}"
                )));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            entries.push((r, c, v));
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let scale = entries.iter().fold(0.0_f64, |m, e| m.max(e.2.abs()));
        let mut dedup: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match dedup.last() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => {
                    let diff = (last.2 - e.2).abs();
                    if diff > SYMMETRY_TOLERANCE * scale {
                        return Err(Error::NotSymmetric { row: e.0, col: e.1, diff });
                    }
                }
                _ => dedup.push(e),
            }
        }
        let mut row_ptr = vec![0usize; order + 1];
        for &(r, _, _) in &dedup {
            row_ptr[r + 1] += 1;
        }
        for i in 0..order {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            order,
            storage: Storage::Sparse(SparseLower {
                row_ptr,
                col_idx: dedup.iter().map(|e| e.1).collect(),
                values: dedup.iter().map(|e| e.2).collect(),
            }),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.storage, Storage::Identity)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        match &self.storage {
            Storage::Dense(d) => d[packed_offset(r) + c],
            Storage::Sparse(s) => {
                let cols = &s.col_idx[s.row_ptr[r]..s.row_ptr[r + 1]];
                cols.binary_search(&c).map(|k| s.values[s.row_ptr[r] + k]).unwrap_or(0.0)
            }
            Storage::Identity => f64::from(u8::from(r == c)),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        match &self.storage {
            Storage::Dense(d) => {
                for i in 0..self.order {
                    let row = &d[packed_offset(i)..packed_offset(i) + i + 1];
                    let off: f64 = row[..i].iter().map(|v| v * v).sum();
                    sum += 2.0 * off + row[i] * row[i];
                }
            }
            Storage::Sparse(s) => {
                for (r, c, v) in s.entries() {
                    sum += if r == c { v * v } else { 2.0 * v * v };
                }
            }
            Storage::Identity => sum = self.order as f64,
        }
        sum.sqrt()
    }

    /// Packed lower triangle, materializing sparse and identity storage.
    pub fn to_lower_packed(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(s) => {
                let mut out = vec![0.0; packed_offset(self.order)];
                for (r, c, v) in s.entries() {
                    out[packed_offset(r) + c] = v;
                }
                out
            }
            Storage::Identity => {
                let mut out = vec![0.0; packed_offset(self.order)];
                for i in 0..self.order {
                    out[packed_offset(i) + i] = 1.0;
                }
                out
            }
        }
    }

    /// Full row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.get(i, j);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n = self.order;
        if x.len() != n || y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if x.len() != n { x.len() } else { y.len() },
            });
        }
        match &self.storage {
            Storage::Dense(d) => {
                y.fill(0.0);
                for i in 0..n {
                    let row = &d[packed_offset(i)..packed_offset(i) + i + 1];
                    let xi = x[i];
                    let mut acc = 0.0;
                    for (j, (&a, yj)) in row[..i].iter().zip(y[..i].iter_mut()).enumerate() {
                        acc += a * x[j];
                        *yj += a * xi;
                    }
                    y[i] += acc + row[i] * xi;
                }
            }
            Storage::Sparse(s) => {
                y.fill(0.0);
                for (r, c, v) in s.entries() {
                    y[r] += v * x[c];
                    if r != c {
                        y[c] += v * x[r];
                    }
                }
            }
            Storage::Identity => y.copy_from_slice(x),
        }
        Ok(())
    }

    /// `self + t * other`. Adding a multiple of the identity only touches the
    /// diagonal; otherwise both operands are combined in the denser storage.
    pub fn add_scaled(&self, other: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
        if self.order != other.order {
            return Err(Error::DimensionMismatch { expected: self.order, found: other.order });
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        let n = self.order;
        match (&self.storage, &other.storage) {
            (_, Storage::Identity) => Ok(self.shifted(t)),
            (Storage::Sparse(a), Storage::Sparse(b)) => {
                SpdMatrix::from_triplets(n, merge_sparse(a, b, t))
            }
            (Storage::Identity, Storage::Sparse(b)) => {
                let mut trip: Vec<_> = b.entries().map(|(r, c, v)| (r, c, t * v)).collect();
                add_to_diagonal(&mut trip, n, 1.0);
                SpdMatrix::from_triplets(n, trip)
            }
            _ => {
                let mut data = self.to_lower_packed();
                match &other.storage {
                    Storage::Dense(b) => {
                        for (a, &bv) in data.iter_mut().zip(b) {
                            *a += t * bv;
                        }
                    }
                    Storage::Sparse(b) => {
                        for (r, c, v) in b.entries() {
                            data[packed_offset(r) + c] += t * v;
                        }
                    }
                    Storage::Identity => unreachable!(),
                }
                SpdMatrix::from_lower_packed(n, data)
            }
        }
    }

    /// `self + t * I`.
    pub fn shifted(&self, t: f64) -> SpdMatrix {
        let n = self.order;
        let storage = match &self.storage {
            Storage::Dense(d) => {
                let mut data = d.clone();
                for i in 0..n {
                    data[packed_offset(i) + i] += t;
                }
                Storage::Dense(data)
            }
            Storage::Sparse(s) => {
                let mut trip: Vec<_> = s.entries().collect();
                add_to_diagonal(&mut trip, n, t);
                return SpdMatrix::from_triplets(n, trip).expect("valid sparse shift");
            }
            Storage::Identity => {
                if t == 0.0 {
                    Storage::Identity
                } else {
                    return SpdMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0 + t)))
                        .expect("valid diagonal");
                }
            }
        };
        SpdMatrix { order: n, storage }
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> SpdMatrix {
        let n = self.order;
        match &self.storage {
            Storage::Dense(d) => {
                SpdMatrix { order: n, storage: Storage::Dense(d.iter().map(|v| c * v).collect()) }
            }
            Storage::Sparse(s) => {
                let mut s = s.clone();
                s.values.iter_mut().for_each(|v| *v *= c);
                SpdMatrix { order: n, storage: Storage::Sparse(s) }
            }
            Storage::Identity => {
                SpdMatrix::from_triplets(n, (0..n).map(|i| (i, i, c))).expect("valid diagonal")
            }
        }
    }
}

fn add_to_diagonal(trip: &mut Vec<(usize, usize, f64)>, n: usize, t: f64) {
    let mut seen = vec![false; n];
    for e in trip.iter_mut() {
        if e.0 == e.1 {
            e.2 += t;
            seen[e.0] = true;
        }
    }
    for (i, s) in seen.into_iter().enumerate() {
        if !s {
            trip.push((i, i, t));
        }
    }
}

fn merge_sparse(a: &SparseLower, b: &SparseLower, t: f64) -> Vec<(usize, usize, f64)> {
    let mut all: Vec<(usize, usize, f64)> =
        a.entries().chain(b.entries().map(|(r, c, v)| (r, c, t * v))).collect();
    all.sort_by_key(|e| (e.0, e.1));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(all.len());
    for e in all {
        match out.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => out.push(e),
        }
    }
    out
}
