//! `τ(t) = trace((K + tI)⁻¹)/n` for an exponential correlation kernel on a
//! regular grid, compared against its bounds and basis interpolants.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::TraceMethod;
use crate::interpolants::{fit_basis, log_space, Interpolant, InterpolantPoints, TauContext};
use crate::matrix::{build_exponential_kernel, grid_points, SpdMatrix};
use crate::ortho::gram_schmidt;

/// Largest kernel order accepted by the experiment.
pub const MAX_GP_ORDER: usize = 10_000;

/// One basis fit: its interpolant points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpFit {
    pub nodes: Vec<f64>,
}

impl GpFit {
    pub fn p(&self) -> usize {
        self.nodes.len()
    }
}

/// Node sets for `p = 1, 3, 5, 7, 9`.
pub fn default_gp_fits() -> Vec<GpFit> {
    let sets: [&[f64]; 5] = [
        &[1e-1],
        &[1e-2, 1e-1, 1.0],
        &[1e-4, 1e-2, 1e-1, 1.0, 1e2],
        &[1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e3],
        &[1e-4, 4e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
    ];
    sets.iter().map(|s| GpFit { nodes: s.to_vec() }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub side: usize,
    pub rho: f64,
    pub fits: Vec<GpFit>,
    pub sweep: Vec<f64>,
    /// Seed for `side²` uniformly random points instead of the cell-centre grid.
    #[serde(default)]
    pub random_points: Option<u64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            side: 50,
            rho: 0.1,
            fits: default_gp_fits(),
            sweep: log_space(1e-4, 1e3, 100),
            random_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpFitResult {
    pub p: usize,
    pub points: InterpolantPoints,
    pub interpolant: Interpolant,
    /// `τ̃_p` at every sweep point.
    pub values: Vec<f64>,
    /// `|τ̃_p − τ| / τ` at every sweep point.
    pub rel_error: Vec<f64>,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpCurves {
    pub n: usize,
    pub tau0: f64,
    pub t: Vec<f64>,
    pub exact: Vec<f64>,
    pub upper: Vec<f64>,
    /// `1/(1 + t)`, valid because the kernel has unit diagonal.
    pub lower: Vec<f64>,
    pub fits: Vec<GpFitResult>,
}

/// The kernel matrix of the experiment, on the cell-centre grid or on
/// `side²` random points drawn from `random_points`.
pub fn gp_kernel(side: usize, rho: f64, random_points: Option<u64>) -> Result<SpdMatrix> {
    if side == 0 || side * side > MAX_GP_ORDER {
        return Err(Error::InvalidArgument(format!(
            "grid side must satisfy 1 <= side² <= {MAX_GP_ORDER}, got {side}"
        )));
    }
    let pts = match random_points {
        Some(seed) => crate::matrix::random_points(side * side, seed),
        None => grid_points(side)?,
    };
    build_exponential_kernel(&pts, rho)
}

/// Runs the experiment with exact (Cholesky) values of `τ`.
pub fn gp_experiment(config: &GpConfig) -> Result<GpCurves> {
    let k = gp_kernel(config.side, config.rho, config.random_points)?;
    let n = k.order();
    let ctx = TauContext::new(k, SpdMatrix::identity(n), TraceMethod::Cholesky)?;

    // Every distinct t is evaluated once.
    let mut wanted: Vec<f64> = config.sweep.clone();
    for f in &config.fits {
        wanted.extend_from_slice(&f.nodes);
    }
    wanted.sort_by(f64::total_cmp);
    wanted.dedup();
    let values =
        wanted.par_iter().map(|&t| ctx.tau(t).map(|(v, _)| v)).collect::<Result<Vec<f64>>>()?;
    let cache: HashMap<u64, f64> =
        wanted.iter().zip(&values).map(|(t, v)| (t.to_bits(), *v)).collect();
    let lookup = |t: f64| cache[&t.to_bits()];

    let t = config.sweep.clone();
    let exact: Vec<f64> = t.iter().map(|&x| lookup(x)).collect();
    let upper = t.iter().map(|&x| ctx.upper_bound(x)).collect();
    let lower = t.iter().map(|&x| ctx.lower_bound(x)).collect();

    let mut fits = Vec::with_capacity(config.fits.len());
    for f in &config.fits {
        let node_values = f.nodes.iter().map(|&x| lookup(x)).collect();
        let points = InterpolantPoints::new(f.nodes.clone(), node_values, None)?;
        let coeffs = gram_schmidt(f.p().max(1))?.truncated(f.p())?;
        let interpolant = fit_basis(ctx.tau0(), &points, &coeffs)?;
        // The sweep deliberately extends below the oscillation floor.
        let vals = t.iter().map(|&x| interpolant.eval_forced(x)).collect::<Result<Vec<_>>>()?;
        let rel_error: Vec<f64> = vals.iter().zip(&exact).map(|(a, e)| (a - e).abs() / e).collect();
        let max_rel_error = rel_error.iter().copied().fold(0.0, f64::max);
        fits.push(GpFitResult {
            p: f.p(),
            points,
            interpolant,
            values: vals,
            rel_error,
            max_rel_error,
        });
    }
    Ok(GpCurves { n, tau0: ctx.tau0(), t, exact, upper, lower, fits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_run() {
        let cfg = GpConfig {
            side: 8,
            rho: 0.1,
            fits: vec![GpFit { nodes: vec![0.1] }, GpFit { nodes: vec![1e-2, 1e-1, 1.0] }],
            sweep: log_space(1e-3, 1e2, 12),
            random_points: None,
        };
        let c = gp_experiment(&cfg).unwrap();
        assert_eq!(c.n, 64);
        assert_eq!(c.t.len(), 12);
        for i in 0..12 {
            assert!(c.lower[i] <= c.exact[i] * (1.0 + 1e-12));
            assert!(c.exact[i] <= c.upper[i] * (1.0 + 1e-12));
            assert!((c.lower[i] - 1.0 / (1.0 + c.t[i])).abs() < 1e-12);
        }
        assert!(c.fits[1].max_rel_error <= c.fits[0].max_rel_error);
        assert!(c.fits[0].max_rel_error < 0.05);
    }

    #[test]
    fn default_sets_and_limits() {
        let sets = default_gp_fits();
        assert_eq!(sets.iter().map(GpFit::p).collect::<Vec<_>>(), vec![1, 3, 5, 7, 9]);
        assert!(gp_kernel(101, 0.1, None).is_err());
        assert!(gp_kernel(0, 0.1, None).is_err());
        let a = gp_kernel(4, 0.1, Some(7)).unwrap();
        assert_eq!(a, gp_kernel(4, 0.1, Some(7)).unwrap());
        assert_ne!(a, gp_kernel(4, 0.1, None).unwrap());
    }
}
