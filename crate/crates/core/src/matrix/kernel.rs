use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{packed_offset, SpdMatrix};
use crate::error::{Error, Result};

/// Points in the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<[f64; 2]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if let Some((i, p)) =
            points.iter().enumerate().find(|(_, p)| p.iter().any(|c| !(0.0..=1.0).contains(c)))
        {
            return Err(Error::InvalidArgument(format!(
                "point {i} = ({}, {}) lies outside [0, 1]^2",
                p[0], p[1]
            )));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }
}

/// `side²` cell centres of a uniform grid over the unit square.
pub fn grid_points(side: usize) -> Result<PointCloud> {
    if side == 0 {
        return Err(Error::InvalidArgument("grid side must be at least 1".into()));
    }
    let h = 1.0 / side as f64;
    let mut pts = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            pts.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
        }
    }
    PointCloud::new(pts)
}

/// Uniformly random points in the unit square.
pub fn random_points(count: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..count).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    PointCloud { points: pts }
}

/// Kernel matrix `K_ij = f(‖x_i − x_j‖₂)`. The diagonal is `f(0)`.
pub fn build_kernel<F>(points: &PointCloud, f: F) -> Result<SpdMatrix>
where
    F: Fn(f64) -> f64,
{
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidShape("empty point cloud".into()));
    }
    let p = points.points();
    let mut data = Vec::with_capacity(packed_offset(n));
    for i in 0..n {
        for j in 0..i {
            let d = ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt();
            data.push(f(d));
        }
        data.push(f(0.0));
    }
    SpdMatrix::from_lower_packed(n, data)
}

/// Isotropic exponential decay kernel `exp(−r / ρ)`.
pub fn build_exponential_kernel(points: &PointCloud, rho: f64) -> Result<SpdMatrix> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    build_kernel(points, |r| (-r / rho).exp())
}
