use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::trace_inv_exact_cholesky;
use crate::matrix::SpdMatrix;

/// Relative slack tolerated by the inequality checks.
const INEQUALITY_SLACK: f64 = 1e-12;
/// Relative tolerance of the equality case `B = cA`.
const EQUALITY_TOLERANCE: f64 = 1e-10;
/// Number of random vector pairs for the harmonic-mean check.
pub const HARMONIC_MEAN_VECTORS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityKind {
    /// `1/tr((A+B)⁻¹) ≥ 1/tr(A⁻¹) + 1/tr(B⁻¹)`.
    Sum,
    /// Equality for `B = cA`.
    Proportional,
    /// `1/tr((A−B)⁻¹) ≤ 1/tr(A⁻¹) − 1/tr(B⁻¹)` when `A − B` is SPD.
    Difference,
    /// `H(x + y) ≥ H(x) + H(y)` for positive vectors.
    HarmonicMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: InequalityKind,
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub trials: usize,
    pub n: usize,
    pub seed: u64,
    pub harmonic_vectors: usize,
    /// Smallest relative slack `(lhs − rhs)/|rhs|` seen for the sum inequality.
    pub min_sum_slack: f64,
    /// Largest relative deviation seen in the proportional case.
    pub max_proportional_error: f64,
    /// Smallest relative slack `(rhs − lhs)/|rhs|` of the difference inequality.
    pub min_difference_slack: f64,
    pub min_harmonic_slack: f64,
    pub violations: Vec<Violation>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `n / Σ 1/x_i`.
pub fn harmonic_mean(x: &[f64]) -> f64 {
    x.len() as f64 / x.iter().map(|v| 1.0 / v).sum::<f64>()
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `G Gᵀ / n + δ I` with a random Gaussian `G`.
fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian(rng, n, n);
    let shift: f64 = rng.gen_range(1e-3..1.0);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

fn to_spd(m: &DMatrix<f64>) -> Result<SpdMatrix> {
    let n = m.nrows();
    // nalgebra is column-major; symmetrize against round-off first.
    let sym = (m + m.transpose()) * 0.5;
    SpdMatrix::from_dense(n, sym.as_slice())
}

fn inv_trace(m: &DMatrix<f64>) -> Result<f64> {
    Ok(trace_inv_exact_cholesky(&to_spd(m)?)?.value)
}

struct TrialOutcome {
    sum: (f64, f64),
    proportional: (f64, f64),
    difference: (f64, f64),
}

fn run_trial(n: usize, seed: u64, trial: usize) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);

    let a = random_spd(&mut rng, n);
    let b = random_spd(&mut rng, n);
    let (ia, ib) = (inv_trace(&a)?, inv_trace(&b)?);
    let sum = (1.0 / inv_trace(&(&a + &b))?, 1.0 / ia + 1.0 / ib);

    let c: f64 = rng.gen_range(0.1..10.0);
    let bc = &a * c;
    let proportional = (1.0 / inv_trace(&(&a + &bc))?, 1.0 / ia + 1.0 / inv_trace(&bc)?);

    // Shared eigenvectors with λ_i > μ_i.
    let q = gaussian(&mut rng, n, n).qr().q();
    let lambda: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
    let mu: Vec<f64> = lambda.iter().map(|l| l * rng.gen_range(0.05..0.95)).collect();
    let build = |d: &[f64]| &q * DMatrix::from_diagonal(&d.to_vec().into()) * q.transpose();
    let (ma, mb) = (build(&lambda), build(&mu));
    let diff = 1.0 / inv_trace(&(&ma - &mb))?;
    let difference = (diff, 1.0 / inv_trace(&ma)? - 1.0 / inv_trace(&mb)?);

    Ok(TrialOutcome { sum, proportional, difference })
}

/// Checks the trace inequalities on `trials` random SPD pairs of order `n`
/// and harmonic-mean superadditivity on random positive vectors.
pub fn check_inequality_suite(trials: usize, n: usize, seed: u64) -> Result<InequalityReport> {
    if trials == 0 || n == 0 {
        return Err(Error::InvalidArgument("trials and n must be positive".into()));
    }
    let outcomes =
        (0..trials).into_par_iter().map(|k| run_trial(n, seed, k)).collect::<Result<Vec<_>>>()?;

    let mut report = InequalityReport {
        trials,
        n,
        seed,
        harmonic_vectors: HARMONIC_MEAN_VECTORS,
        min_sum_slack: f64::INFINITY,
        max_proportional_error: 0.0,
        min_difference_slack: f64::INFINITY,
        min_harmonic_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    for (k, o) in outcomes.iter().enumerate() {
        let (lhs, rhs) = o.sum;
        let slack = (lhs - rhs) / rhs.abs();
        report.min_sum_slack = report.min_sum_slack.min(slack);
        if slack < -INEQUALITY_SLACK {
            report.violations.push(Violation { kind: InequalityKind::Sum, trial: k, lhs, rhs });
        }
        let (lhs, rhs) = o.proportional;
        let err = (lhs - rhs).abs() / rhs.abs();
        report.max_proportional_error = report.max_proportional_error.max(err);
        if err > EQUALITY_TOLERANCE {
            report.violations.push(Violation {
                kind: InequalityKind::Proportional,
                trial: k,
                lhs,
                rhs,
            });
        }
        let (lhs, rhs) = o.difference;
        let slack = (rhs - lhs) / rhs.abs();
        report.min_difference_slack = report.min_difference_slack.min(slack);
        if slack < -INEQUALITY_SLACK {
            report.violations.push(Violation {
                kind: InequalityKind::Difference,
                trial: k,
                lhs,
                rhs,
            });
        }
    }

    // Harmonic means on a separate stream past the matrix trials.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    for k in 0..HARMONIC_MEAN_VECTORS {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-3..10.0)).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (lhs, rhs) = (harmonic_mean(&xy), harmonic_mean(&x) + harmonic_mean(&y));
        let slack = (lhs - rhs) / rhs;
        report.min_harmonic_slack = report.min_harmonic_slack.min(slack);
        if slack < -INEQUALITY_SLACK {
            report.violations.push(Violation {
                kind: InequalityKind::HarmonicMean,
                trial: k,
                lhs,
                rhs,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pair_is_equality() {
        let i = DMatrix::<f64>::identity(3, 3);
        let lhs = 1.0 / inv_trace(&(&i + &i)).unwrap();
        let rhs = 2.0 / inv_trace(&i).unwrap();
        assert!((lhs - 2.0 / 3.0).abs() < 1e-15 && (rhs - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn proportional_diagonal_pair() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let b = &a * 2.0;
        let lhs = 1.0 / inv_trace(&(&a + &b)).unwrap();
        let rhs = 1.0 / inv_trace(&a).unwrap() + 1.0 / inv_trace(&b).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }

    #[test]
    fn harmonic_mean_values() {
        assert_eq!(harmonic_mean(&[2.0, 2.0]), 2.0);
        assert!((harmonic_mean(&[1.0, 3.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn small_suite_passes_and_is_deterministic() {
        let r = check_inequality_suite(20, 6, 5).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.min_sum_slack >= -1e-12);
        assert_eq!(r, check_inequality_suite(20, 6, 5).unwrap());
    }
}
