use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of a small dense system with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution {
    pub x: Vec<f64>,
    /// 1-norm condition number of the column-equilibrated matrix.
    pub condition: f64,
    /// `‖Mx − r‖_∞ / ‖r‖_∞` (absolute when `r = 0`).
    pub residual: f64,
}

/// Solves the `n×n` row-major system `M x = r` by LU with partial pivoting
/// after scaling every column to unit max-norm.
pub fn solve_dense(n: usize, m: &[f64], r: &[f64]) -> Result<DenseSolution> {
    if m.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: m.len() });
    }
    if r.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: r.len() });
    }
    if n == 0 {
        return Ok(DenseSolution { x: Vec::new(), condition: 1.0, residual: 0.0 });
    }
    if m.iter().chain(r).any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite entries".into()));
    }
    let mut scaled = DMatrix::from_row_slice(n, n, m);
    let mut col_scale = vec![1.0; n];
    for (j, s) in col_scale.iter_mut().enumerate() {
        let c = scaled.column(j).amax();
        if c == 0.0 {
            return Err(Error::SingularSystem(format!("column {j} is zero")));
        }
        *s = c;
        scaled.column_mut(j).unscale_mut(c);
    }
    let lu = scaled.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("zero pivot in LU factorization".into()))?;
    let condition = one_norm(&scaled) * one_norm(&inv);
    if !(condition < 1.0 / f64::EPSILON) {
        return Err(Error::SingularSystem(format!("condition estimate {condition:e}")));
    }
    let rhs = DVector::from_column_slice(r);
    let y = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("zero pivot in LU factorization".into()))?;
    let x: Vec<f64> = y.iter().zip(&col_scale).map(|(v, s)| v / s).collect();

    let full = DMatrix::from_row_slice(n, n, m);
    let res = &full * DVector::from_column_slice(&x) - &rhs;
    let rnorm = rhs.amax();
    let residual = if rnorm > 0.0 { res.amax() / rnorm } else { res.amax() };
    Ok(DenseSolution { x, condition, residual })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let s = solve_dense(2, &[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0]).unwrap();
        assert!((s.x[0] - 0.8).abs() < 1e-15);
        assert!((s.x[1] - 1.4).abs() < 1e-15);
        assert!(s.residual < 1e-15);
        assert!(s.condition >= 1.0);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let s = solve_dense(2, &[0.0, 1.0, 1.0, 0.0], &[2.0, 3.0]).unwrap();
        assert_eq!(s.x, vec![3.0, 2.0]);
    }

    #[test]
    fn equilibration_removes_column_scaling() {
        let s = solve_dense(2, &[1e12, 1.0, 2e12, 3.0], &[1e12 + 1.0, 2e12 + 3.0]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!(s.condition < 100.0);
    }

    #[test]
    fn singular_rejected() {
        assert!(matches!(
            solve_dense(2, &[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]),
            Err(Error::SingularSystem(_))
        ));
        assert!(solve_dense(2, &[1.0, 0.0, 1.0, 0.0], &[1.0, 1.0]).is_err());
    }
}
