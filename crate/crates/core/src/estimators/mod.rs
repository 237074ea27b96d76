//! Exact and stochastic estimators of `trace(M⁻¹)`.
//!
//! Stochastic estimators draw Rademacher probe vectors from one master seed.
//! Probe `k` uses ChaCha stream `k` of that seed, so every probe is
//! reproducible on its own and samples can be computed in parallel. Sample
//! values are reduced in probe order, which keeps results bit-identical for
//! any thread count.

mod eigen;
mod lanczos;

pub use eigen::{
    symmetric_eigen, trace_inv_exact_eigen, tridiagonal_eigen, PencilSpectrum, SymmetricEigen,
    MAX_EIGEN_ORDER,
};
pub use lanczos::{lanczos, LanczosTriDiag, BREAKDOWN_TOLERANCE};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cholesky, SpdMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    ExactCholesky,
    ExactEigen,
    Hutchinson,
    Slq,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodTag::ExactCholesky => "exact-cholesky",
            MethodTag::ExactEigen => "exact-eigen",
            MethodTag::Hutchinson => "hutchinson",
            MethodTag::Slq => "slq",
        })
    }
}

/// A value of `trace(M⁻¹)` with the metadata of how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub value: f64,
    pub method: MethodTag,
    /// Number of probe vectors; zero for exact methods.
    pub num_samples: usize,
    /// Sample standard deviation over `√num_samples`; zero for exact methods.
    pub std_error: f64,
    pub seed: Option<u64>,
}

impl TraceEstimate {
    fn exact(value: f64, method: MethodTag) -> Self {
        Self { value, method, num_samples: 0, std_error: 0.0, seed: None }
    }

    pub fn record(&self, t: f64) -> TraceRecord {
        TraceRecord {
            t,
            value: self.value,
            method: self.method,
            n_v: self.num_samples,
            std_error: self.std_error,
            seed: self.seed,
        }
    }
}

/// Serialized form of one estimate at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub value: f64,
    pub method: MethodTag,
    pub n_v: usize,
    pub std_error: f64,
    pub seed: Option<u64>,
}

/// Which back-end computes `trace(M⁻¹)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TraceMethod {
    Cholesky,
    Eigen,
    Hutchinson { num_samples: usize, seed: u64 },
    Slq { num_samples: usize, degree: usize, seed: u64 },
}

impl TraceMethod {
    pub fn tag(&self) -> MethodTag {
        match self {
            TraceMethod::Cholesky => MethodTag::ExactCholesky,
            TraceMethod::Eigen => MethodTag::ExactEigen,
            TraceMethod::Hutchinson { .. } => MethodTag::Hutchinson,
            TraceMethod::Slq { .. } => MethodTag::Slq,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, TraceMethod::Cholesky | TraceMethod::Eigen)
    }

    pub fn estimate(&self, m: &SpdMatrix) -> Result<TraceEstimate> {
        match *self {
            TraceMethod::Cholesky => trace_inv_exact_cholesky(m),
            TraceMethod::Eigen => {
                let s = trace_inv_exact_eigen(m, &SpdMatrix::identity(m.order()))?;
                Ok(TraceEstimate::exact(s.trace_inverse(0.0), MethodTag::ExactEigen))
            }
            TraceMethod::Hutchinson { num_samples, seed } => {
                trace_inv_hutchinson(m, num_samples, seed)
            }
            TraceMethod::Slq { num_samples, degree, seed } => {
                trace_inv_slq(m, num_samples, degree, seed)
            }
        }
    }
}

/// `A + tB`, materialized. With `B = I` only the diagonal of `A` changes.
pub fn shifted_operand(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    a.add_scaled(b, t)
}

/// `trace(M⁻¹) = ‖L⁻¹‖²_F` from the Cholesky factor of `M`.
pub fn trace_inv_exact_cholesky(m: &SpdMatrix) -> Result<TraceEstimate> {
    let value =
        if m.is_identity() { m.order() as f64 } else { cholesky(m)?.inverse_frobenius_sq() };
    Ok(TraceEstimate::exact(value, MethodTag::ExactCholesky))
}

/// Rademacher probe `index` of the stream family rooted at `seed`.
pub fn rademacher_probe(n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let bits = rng.next_u64();
        for b in 0..64.min(n - out.len()) {
            out.push(if (bits >> b) & 1 == 1 { 1.0 } else { -1.0 });
        }
    }
    out
}

fn summarize(samples: &[f64], method: MethodTag, seed: u64) -> TraceEstimate {
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let std_error = if samples.len() > 1 {
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    TraceEstimate { value: mean, method, num_samples: samples.len(), std_error, seed: Some(seed) }
}

/// Hutchinson's estimator `(1/n_v) Σ zᵀ M⁻¹ z`. Each sample is evaluated as
/// `‖L⁻¹ z‖²` against a single Cholesky factorization of `M`.
pub fn trace_inv_hutchinson(m: &SpdMatrix, num_samples: usize, seed: u64) -> Result<TraceEstimate> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument("number of probe vectors must be positive".into()));
    }
    let n = m.order();
    let l = cholesky(m)?;
    let samples = (0..num_samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut z = rademacher_probe(n, seed, k);
            l.solve_lower_in_place(&mut z)?;
            Ok(z.iter().map(|x| x * x).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&samples, MethodTag::Hutchinson, seed))
}

/// Stochastic Lanczos quadrature: each probe contributes
/// `n Σ_j w_j / θ_j` from the Gauss rule of its Lanczos tridiagonal.
pub fn trace_inv_slq(
    m: &SpdMatrix,
    num_samples: usize,
    degree: usize,
    seed: u64,
) -> Result<TraceEstimate> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument("number of probe vectors must be positive".into()));
    }
    let n = m.order();
    let samples = (0..num_samples as u64)
        .into_par_iter()
        .map(|k| {
            let z = rademacher_probe(n, seed, k);
            let tri = lanczos(m, &z, degree)?;
            let (nodes, weights) = tri.quadrature()?;
            let mut acc = 0.0;
            for (j, (&theta, &w)) in nodes.iter().zip(&weights).enumerate() {
                if !(theta > 0.0) {
                    return Err(Error::NotPositiveDefinite { row: j, pivot: theta });
                }
                acc += w / theta;
            }
            Ok(n as f64 * acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&samples, MethodTag::Slq, seed))
}
