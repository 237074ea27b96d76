//! Bounds and interpolants of `τ(t) = trace((A + tB)⁻¹) / trace(B⁻¹)`.
//!
//! Both interpolating families start from the upper bound
//! `τ̂(t) = τ₀ / (1 + tτ₀)` and correct it with a handful of exactly computed
//! values `τ(t_i)`:
//!
//! * **basis**: `1/τ̃(t) = 1/τ₀ + t + Σ_j w_j φ_j^⊥(t / l)` with the
//!   orthonormalized fractional powers from [`crate::ortho`];
//! * **rational**: `τ̃(t) = (t^p + a_{p−1} t^{p−1} + … + a₀) /
//!   (t^{p+1} + b_p t^p + … + b₀)` with `a₀ = b₀ τ₀`.
//!
//! With no nodes (`p = 0`) both reduce to the upper bound.

mod basis;
mod inequalities;
mod linalg;
mod rational;

pub use basis::{fit_basis, OSCILLATION_FLOOR};
pub use inequalities::{check_inequality_suite, harmonic_mean, InequalityKind, InequalityReport};
pub use linalg::{solve_dense, DenseSolution};
pub use rational::{default_pole_domain, fit_rational, real_roots};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    shifted_operand, trace_inv_exact_cholesky, trace_inv_exact_eigen, TraceMethod, TraceRecord,
};
use crate::matrix::SpdMatrix;
use crate::ortho::OrthoCoefficients;

/// `τ̂(t) = τ₀ / (1 + tτ₀)`, an upper bound of `τ(t)` for `t ≥ 0`.
pub fn tau_upper_bound(t: f64, tau0: f64) -> f64 {
    tau0 / (1.0 + t * tau0)
}

/// `n² / (trace(A) + t·trace(B))`, a lower bound of `trace((A + tB)⁻¹)` by
/// the arithmetic-harmonic mean inequality. Divide by `trace(B⁻¹)` to compare
/// with `τ(t)`; for a unit-diagonal `A` and `B = I` that gives `1/(1 + t)`.
pub fn tau_lower_bound(t: f64, trace_a: f64, trace_b: f64, n: usize) -> f64 {
    let n = n as f64;
    n * n / (trace_a + t * trace_b)
}

/// The pair `(A, B)` together with the normalization and the chosen back-end.
#[derive(Debug, Clone)]
pub struct TauContext {
    a: SpdMatrix,
    b: SpdMatrix,
    method: TraceMethod,
    trace_b_inv: f64,
    tau0: f64,
    t_min: Option<f64>,
}

impl TauContext {
    /// Computes `trace(B⁻¹)` exactly and `τ₀` with `method`.
    pub fn new(a: SpdMatrix, b: SpdMatrix, method: TraceMethod) -> Result<Self> {
        if a.order() != b.order() {
            return Err(Error::DimensionMismatch { expected: a.order(), found: b.order() });
        }
        let trace_b_inv = trace_inv_exact_cholesky(&b)?.value;
        let tau0 = method.estimate(&a)?.value / trace_b_inv;
        if !(tau0 > 0.0) {
            return Err(Error::NonPositiveResult { t: 0.0 });
        }
        Ok(Self { a, b, method, trace_b_inv, tau0, t_min: None })
    }

    /// Records a known `t_min < 0`, below which `A + tB` is indefinite.
    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        if !(t_min < 0.0) {
            return Err(Error::InvalidArgument(format!("t_min must be negative, got {t_min}")));
        }
        self.t_min = Some(t_min);
        Ok(self)
    }

    /// Computes `t_min = −min λ_i/μ_i` from the generalized eigenvalues.
    /// Dense and cubic; only for moderate orders.
    pub fn with_spectral_t_min(self) -> Result<Self> {
        let t_min = trace_inv_exact_eigen(&self.a, &self.b)?.t_min();
        self.with_t_min(t_min)
    }

    pub fn a(&self) -> &SpdMatrix {
        &self.a
    }

    pub fn b(&self) -> &SpdMatrix {
        &self.b
    }

    pub fn method(&self) -> TraceMethod {
        self.method
    }

    pub fn order(&self) -> usize {
        self.a.order()
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn trace_b_inv(&self) -> f64 {
        self.trace_b_inv
    }

    pub fn t_min(&self) -> Option<f64> {
        self.t_min
    }

    /// `τ(t)` from the configured back-end, with the raw estimate record.
    pub fn tau(&self, t: f64) -> Result<(f64, TraceRecord)> {
        if t == 0.0 {
            let rec = TraceRecord {
                t,
                value: self.tau0 * self.trace_b_inv,
                method: self.method.tag(),
                n_v: 0,
                std_error: 0.0,
                seed: None,
            };
            return Ok((self.tau0, rec));
        }
        let m = shifted_operand(&self.a, &self.b, t)?;
        let est = self.method.estimate(&m)?;
        Ok((est.value / self.trace_b_inv, est.record(t)))
    }

    /// Normalized lower bound `n² / (trace(A) + t·trace(B)) / trace(B⁻¹)`.
    pub fn lower_bound(&self, t: f64) -> f64 {
        tau_lower_bound(t, self.a.trace(), self.b.trace(), self.order()) / self.trace_b_inv
    }

    pub fn upper_bound(&self, t: f64) -> f64 {
        tau_upper_bound(t, self.tau0)
    }

    /// Evaluates `τ` at every node (in parallel) and validates the result.
    pub fn sample(&self, nodes: &[f64]) -> Result<InterpolantPoints> {
        let results = nodes.par_iter().map(|&t| self.tau(t)).collect::<Result<Vec<_>>>()?;
        let (values, records): (Vec<f64>, Vec<TraceRecord>) = results.into_iter().unzip();
        InterpolantPoints::new(nodes.to_vec(), values, self.t_min)?.with_records(records)
    }
}

/// Node locations and values of `τ` used to fit an interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolantPoints {
    nodes: Vec<f64>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    records: Vec<TraceRecord>,
}

impl InterpolantPoints {
    /// Checks that nodes are positive and strictly increasing, lie above
    /// `t_min`, and that the values are positive and strictly decreasing.
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, t_min: Option<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: nodes.len(), found: values.len() });
        }
        if let Some(tm) = t_min {
            if !(tm < 0.0) {
                return Err(Error::InvalidArgument(format!("t_min must be negative, got {tm}")));
            }
        }
        for (i, &t) in nodes.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "interpolant points must be positive and finite, got t = {t}"
                )));
            }
            if i > 0 && !(t > nodes[i - 1]) {
                return Err(Error::InvalidArgument(format!(
                    "interpolant points must be strictly increasing, got {} then {t}",
                    nodes[i - 1]
                )));
            }
        }
        for (i, (&t, &v)) in nodes.iter().zip(&values).enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveResult { t });
            }
            if i > 0 && !(v < values[i - 1]) {
                return Err(Error::NonMonotoneNodes { index: i, t });
            }
        }
        Ok(Self { nodes, values, t_min, records: Vec::new() })
    }

    /// The empty set, for `p = 0` fits.
    pub fn empty() -> Self {
        Self { nodes: Vec::new(), values: Vec::new(), t_min: None, records: Vec::new() }
    }

    pub fn with_records(mut self, records: Vec<TraceRecord>) -> Result<Self> {
        if records.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                found: records.len(),
            });
        }
        self.records = records;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t_min(&self) -> Option<f64> {
        self.t_min
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }
}

/// `count` nodes one decade apart, centred on `1/τ₀` in log scale.
pub fn default_nodes(tau0: f64, count: usize) -> Vec<f64> {
    let centre = (1.0 / tau0).log10();
    let half = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| 10f64.powf(centre + i as f64 - half)).collect()
}

/// `count` points from `lo` to `hi`, log-spaced (both ends included).
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { hi } else { 10f64.powf(a + i as f64 * step) })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Bound,
    Basis,
    Rational,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bound" => Ok(Variant::Bound),
            "basis" => Ok(Variant::Basis),
            "rational" => Ok(Variant::Rational),
            other => Err(Error::InvalidArgument(format!("unknown interpolant variant {other:?}"))),
        }
    }
}

/// Conditioning and residual of the linear system solved during a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// 1-norm condition number of the (equilibrated) system matrix.
    pub condition: f64,
    /// Max-norm of the relative residual `‖Mx − r‖ / ‖r‖`.
    pub residual: f64,
}

/// A fitted approximation of `τ(t)`. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolant {
    variant: Variant,
    p: usize,
    tau0: f64,
    /// Domain scale `l` of the basis variant; 1 otherwise.
    scale: f64,
    /// Basis: `w_1..w_p`. Rational: `a_0..a_{p−1}` followed by `b_0..b_p`.
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    nodes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ortho: Option<OrthoCoefficients>,
    /// Interval that was checked to be free of poles (rational only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pole_free: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnostics: Option<FitDiagnostics>,
}

impl Interpolant {
    pub fn bound(tau0: f64) -> Result<Self> {
        if !(tau0 > 0.0) || !tau0.is_finite() {
            return Err(Error::InvalidArgument(format!("tau0 must be positive, got {tau0}")));
        }
        Ok(Self {
            variant: Variant::Bound,
            p: 0,
            tau0,
            scale: 1.0,
            coefficients: Vec::new(),
            nodes: Vec::new(),
            ortho: None,
            pole_free: None,
            diagnostics: None,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn diagnostics(&self) -> Option<FitDiagnostics> {
        self.diagnostics
    }

    pub fn pole_free_interval(&self) -> Option<[f64; 2]> {
        self.pole_free
    }

    /// Numerator coefficients `a_0..a_{p−1}` of the rational variant.
    pub fn numerator(&self) -> &[f64] {
        match self.variant {
            Variant::Rational => &self.coefficients[..self.p],
            _ => &[],
        }
    }

    /// Denominator coefficients `b_0..b_p` of the rational variant.
    pub fn denominator(&self) -> &[f64] {
        match self.variant {
            Variant::Rational => &self.coefficients[self.p..],
            _ => &[],
        }
    }

    /// `τ̃(t)`. The basis variant refuses `0 < t < 10⁻³·min node`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.eval_inner(t, false)
    }

    /// Like [`Interpolant::eval`] but ignores the oscillation floor.
    pub fn eval_forced(&self, t: f64) -> Result<f64> {
        self.eval_inner(t, true)
    }

    fn eval_inner(&self, t: f64, force: bool) -> Result<f64> {
        if t.is_nan() {
            return Err(Error::InvalidArgument("t is NaN".into()));
        }
        if t == 0.0 {
            return Ok(self.tau0);
        }
        match self.variant {
            Variant::Bound => Ok(tau_upper_bound(t, self.tau0)),
            Variant::Basis => basis::eval(self, t, force),
            Variant::Rational => rational::eval(self, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_bound_values() {
        assert_eq!(tau_upper_bound(0.0, 6.33), 6.33);
        assert!((tau_upper_bound(1e6, 6.33) - 1e-6).abs() < 1e-11);
        // A = diag(1, 2), B = I, t = 1.
        let tau = (0.5 + 1.0 / 3.0) / 2.0;
        let hat = tau_upper_bound(1.0, 0.75);
        assert!((hat - 3.0 / 7.0).abs() < 1e-15);
        assert!(tau <= hat);
    }

    #[test]
    fn lower_bound_values() {
        assert_eq!(tau_lower_bound(0.0, 3.0, 3.0, 3), 3.0);
        assert_eq!(tau_lower_bound(0.0, 4.0, 2.0, 2), 1.0);
        // A = cI: equality.
        assert!((tau_lower_bound(0.5, 5.0 * 2.0, 5.0, 5) - 5.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn context_normalizes_by_trace_of_b_inverse() {
        let a = SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[2.0, 2.0]).unwrap();
        let ctx = TauContext::new(a, b, TraceMethod::Cholesky).unwrap();
        assert!((ctx.trace_b_inv() - 1.0).abs() < 1e-15);
        assert!((ctx.tau0() - 1.5).abs() < 1e-15);
        let (v, rec) = ctx.tau(0.5).unwrap();
        assert!((v - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(rec.t, 0.5);
        assert!(ctx.lower_bound(0.5) <= v && v <= ctx.upper_bound(0.5));
    }

    #[test]
    fn spectral_t_min() {
        let a = SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let ctx =
            TauContext::new(a, b, TraceMethod::Cholesky).unwrap().with_spectral_t_min().unwrap();
        assert!((ctx.t_min().unwrap() + 0.5).abs() < 1e-14);
        assert!(ctx.clone().with_t_min(0.0).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(InterpolantPoints::new(vec![0.1, 1.0], vec![2.0, 1.0], None).is_ok());
        assert!(InterpolantPoints::new(vec![1.0, 0.1], vec![2.0, 1.0], None).is_err());
        assert!(InterpolantPoints::new(vec![0.0, 1.0], vec![2.0, 1.0], None).is_err());
        assert!(matches!(
            InterpolantPoints::new(vec![0.1, 1.0], vec![1.0, 1.0], None),
            Err(Error::NonMonotoneNodes { index: 1, .. })
        ));
        assert!(matches!(
            InterpolantPoints::new(vec![0.1], vec![-1.0], None),
            Err(Error::NonPositiveResult { .. })
        ));
        assert!(InterpolantPoints::new(vec![0.1], vec![1.0, 2.0], None).is_err());
    }

    #[test]
    fn node_helpers() {
        let n = default_nodes(10.0, 3);
        assert_eq!(n.len(), 3);
        assert!((n[1] - 0.1).abs() < 1e-15);
        assert!((n[0] - 0.01).abs() < 1e-16 && (n[2] - 1.0).abs() < 1e-14);
        let g = log_space(1e-4, 1e3, 8);
        assert_eq!(g[0], 1e-4);
        assert_eq!(g[7], 1e3);
        assert!((g[4] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bound_variant_and_json_shape() {
        let b = Interpolant::bound(2.0).unwrap();
        assert_eq!(b.eval(0.0).unwrap(), 2.0);
        assert!((b.eval(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let json = serde_json::to_value(&b).unwrap();
        assert_eq!(json["variant"], "bound");
        for key in ["p", "tau0", "scale", "coefficients"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let back: Interpolant = serde_json::from_value(json).unwrap();
        assert_eq!(back, b);
        assert!("spline".parse::<Variant>().is_err());
    }
}
