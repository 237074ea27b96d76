//! Generalized cross-validation for ridge regression.
//!
//! `V(θ) = (1/n)‖z − Xw_θ‖² / ((1/n)·trace(I − X(XᵀX + nθI)⁻¹Xᵀ))²`, with
//! the trace rewritten as `n − m + nθ·m·τ(nθ − s)` where
//! `τ(t) = trace((XᵀX + sI + tI)⁻¹)/m`.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::de::{differential_evolution, DeConfig};
use crate::error::{Error, Result};
use crate::estimators::TraceMethod;
use crate::interpolants::{fit_rational, Interpolant, InterpolantPoints, TauContext};
use crate::matrix::{build_design_matrix, cholesky, DesignMatrix, SpdMatrix};

/// A seed whose sample has a `V(θ)` with two local minima.
pub const DEFAULT_GCV_SEED: u64 = 105;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvConfig {
    pub n: usize,
    pub m: usize,
    pub shift: f64,
    pub sigma: f64,
    /// Singular values are `exp(−c ((i−1)/m)^e)`.
    pub decay_coeff: f64,
    pub decay_exp: f64,
    pub log10_theta_bounds: (f64, f64),
    pub seed: u64,
}

impl Default for GcvConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            m: 500,
            shift: 1e-3,
            sigma: 0.4,
            decay_coeff: 40.0,
            decay_exp: 0.75,
            log10_theta_bounds: (-7.0, 1.0),
            seed: DEFAULT_GCV_SEED,
        }
    }
}

/// A synthetic ridge-regression problem `z = Xβ + δ`.
#[derive(Debug, Clone)]
pub struct GcvProblem {
    config: GcvConfig,
    x: DesignMatrix,
    z: Vec<f64>,
    beta_true: Vec<f64>,
    xtx: SpdMatrix,
    xtz: Vec<f64>,
}

impl GcvProblem {
    /// Draws the reflector vectors, `β ~ N(0, 1)` and `δ ~ N(0, σ²)` from
    /// separate streams of `config.seed`.
    pub fn generate(config: GcvConfig) -> Result<Self> {
        let GcvConfig { n, m, shift, sigma, .. } = config;
        let (lo, hi) = config.log10_theta_bounds;
        if !(shift > 0.0) || !(sigma >= 0.0) || !(lo < hi) {
            return Err(Error::InvalidArgument(
                "GCV problem needs shift > 0, sigma >= 0 and a non-empty theta interval".into(),
            ));
        }
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(k);
            r
        };
        let normal_vec = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
            (0..len).map(|_| rng.sample(StandardNormal)).collect()
        };
        let u = normal_vec(&mut stream(0), n);
        let v = normal_vec(&mut stream(1), m);
        let x = build_design_matrix(n, m, u, v, config.decay_coeff, config.decay_exp)?;
        let beta_true = normal_vec(&mut stream(2), m);
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = stream(3);
        let mut z = x.mul_vec(&beta_true)?;
        for zi in z.iter_mut() {
            *zi += rng.sample(noise);
        }
        Self::from_parts(config, x, z, beta_true)
    }

    /// Uses a given design and response; `config` supplies `s` and bounds.
    pub fn from_parts(
        config: GcvConfig,
        x: DesignMatrix,
        z: Vec<f64>,
        beta_true: Vec<f64>,
    ) -> Result<Self> {
        if z.len() != x.rows() {
            return Err(Error::DimensionMismatch { expected: x.rows(), found: z.len() });
        }
        let config = GcvConfig { n: x.rows(), m: x.cols(), ..config };
        let xtx = x.gram();
        let xtz = x.mul_transpose_vec(&z)?;
        Ok(Self { config, x, z, beta_true, xtx, xtz })
    }

    pub fn config(&self) -> &GcvConfig {
        &self.config
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn response(&self) -> &[f64] {
        &self.z
    }

    pub fn beta_true(&self) -> &[f64] {
        &self.beta_true
    }

    pub fn shift(&self) -> f64 {
        self.config.shift
    }

    /// `A = XᵀX + sI`.
    pub fn shifted_gram(&self) -> SpdMatrix {
        self.xtx.shifted(self.config.shift)
    }

    /// `t = nθ − s`.
    pub fn t_of_theta(&self, theta: f64) -> f64 {
        self.config.n as f64 * theta - self.config.shift
    }

    /// `−λ_min(A) = −(s + σ_m²)`, known from the construction.
    pub fn t_min(&self) -> f64 {
        let sm = *self.x.singular_values().last().expect("m >= 1");
        -(self.config.shift + sm * sm)
    }

    /// `[nθ_lo − s, nθ_hi − s]`.
    pub fn t_interval(&self) -> (f64, f64) {
        let (lo, hi) = self.config.log10_theta_bounds;
        (self.t_of_theta(10f64.powf(lo)), self.t_of_theta(10f64.powf(hi)))
    }

    /// `τ` context for `A = XᵀX + sI`, `B = I`.
    pub fn tau_context(&self, method: TraceMethod) -> Result<TauContext> {
        TauContext::new(self.shifted_gram(), SpdMatrix::identity(self.config.m), method)?
            .with_t_min(self.t_min())
    }

    /// `(1/n)‖z − Xw‖²` with `(XᵀX + nθI) w = Xᵀz`.
    pub fn residual_term(&self, theta: f64) -> Result<f64> {
        let n = self.config.n as f64;
        let l = cholesky(&self.xtx.shifted(n * theta))?;
        let w = l.solve(&self.xtz)?;
        let xw = self.x.mul_vec(&w)?;
        let r: f64 = self.z.iter().zip(&xw).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(r / n)
    }

    /// `V(θ)` from the known factors `X = UΣVᵀ`, without any linear solve:
    /// with `c = Uᵀz` and `f_i = nθ/(σ_i² + nθ)`,
    /// `V = (1/n)(Σ f_i² c_i² + Σ_{i>m} c_i²) / ((n − m + Σ f_i)/n)²`.
    pub fn gcv_spectral(&self, theta: f64) -> f64 {
        let (n, m) = (self.config.n, self.config.m);
        let lambda = n as f64 * theta;
        let mut c = self.z.clone();
        self.x.left_reflector().apply(&mut c);
        let mut num: f64 = c[m..].iter().map(|v| v * v).sum();
        let mut dof = (n - m) as f64;
        for (ci, s) in c[..m].iter().zip(self.x.singular_values()) {
            let f = lambda / (s * s + lambda);
            num += f * f * ci * ci;
            dof += f;
        }
        let d = dof / n as f64;
        num / n as f64 / (d * d)
    }

    /// `V(θ)` given `τ(nθ − s)`.
    pub fn gcv_from_tau(&self, theta: f64, tau: f64) -> Result<f64> {
        let (n, m) = (self.config.n as f64, self.config.m as f64);
        let denom = (n - m + n * theta * m * tau) / n;
        Ok(self.residual_term(theta)? / (denom * denom))
    }

    /// `V(θ)` with `τ` from `source`.
    pub fn gcv_value(&self, theta: f64, source: &dyn TauSource) -> Result<f64> {
        if !(theta > 0.0) {
            return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
        }
        let tau = source.tau(self.t_of_theta(theta))?;
        self.gcv_from_tau(theta, tau)
    }
}

/// Something that returns `τ(t)`, counting its calls.
pub trait TauSource: Sync {
    fn tau(&self, t: f64) -> Result<f64>;
    /// Calls to the exact (expensive) back-end so far.
    fn exact_calls(&self) -> usize;
    /// All calls so far.
    fn total_calls(&self) -> usize;
    /// Time spent in the exact back-end.
    fn exact_time(&self) -> Duration;
}

/// `τ(t)` from a trace back-end on every call.
pub struct ExactTau {
    a: SpdMatrix,
    method: TraceMethod,
    calls: AtomicUsize,
    nanos: AtomicU64,
}

impl ExactTau {
    pub fn new(a: SpdMatrix, method: TraceMethod) -> Self {
        Self { a, method, calls: AtomicUsize::new(0), nanos: AtomicU64::new(0) }
    }
}

impl TauSource for ExactTau {
    fn tau(&self, t: f64) -> Result<f64> {
        let start = Instant::now();
        let m = self.a.shifted(t);
        let v = self.method.estimate(&m)?.value / self.a.order() as f64;
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.nanos.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        Ok(v)
    }

    fn exact_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn total_calls(&self) -> usize {
        self.exact_calls()
    }

    fn exact_time(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::Relaxed))
    }
}

/// `τ(t)` from a fitted interpolant. The exact evaluations spent on the fit
/// are carried over into the counters.
pub struct InterpolatedTau {
    interp: Interpolant,
    fit_calls: usize,
    fit_time: Duration,
    calls: AtomicUsize,
}

impl InterpolatedTau {
    pub fn new(interp: Interpolant, fit_calls: usize, fit_time: Duration) -> Self {
        Self { interp, fit_calls, fit_time, calls: AtomicUsize::new(0) }
    }

    pub fn interpolant(&self) -> &Interpolant {
        &self.interp
    }
}

impl TauSource for InterpolatedTau {
    fn tau(&self, t: f64) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.interp.eval(t)
    }

    fn exact_calls(&self) -> usize {
        self.fit_calls
    }

    fn total_calls(&self) -> usize {
        self.fit_calls + self.calls.load(Ordering::Relaxed)
    }

    fn exact_time(&self) -> Duration {
        self.fit_time
    }
}

/// How `τ` is supplied during the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GcvMode {
    Exact,
    Rational { p: usize },
}

impl GcvMode {
    /// Interpolant points used for the rational modes.
    pub fn nodes(&self) -> Result<Vec<f64>> {
        match self {
            GcvMode::Exact => Ok(Vec::new()),
            GcvMode::Rational { p: 1 } => Ok(vec![1e-3, 1e-1]),
            GcvMode::Rational { p: 2 } => Ok(vec![1e-3, 1e-2, 1e-1, 1.0]),
            GcvMode::Rational { p } => Ok(crate::interpolants::log_space(1e-3, 1.0, 2 * p)),
        }
    }
}

/// One row of the optimization comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub mode: GcvMode,
    pub method: TraceMethod,
    pub theta: f64,
    pub log10_theta: f64,
    pub gcv: f64,
    pub n_tr: usize,
    pub n_tot: usize,
    pub t_tr: f64,
    pub t_tot: f64,
    pub generations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GcvRun {
    pub result: OptimizationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpolant: Option<Interpolant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<InterpolantPoints>,
}

/// The `τ` source for one optimization run.
pub struct TauSetup {
    pub source: Box<dyn TauSource>,
    pub interpolant: Option<Interpolant>,
    pub points: Option<InterpolantPoints>,
}

/// Builds the `τ` source for `mode`: the exact back-end, or a rational
/// interpolant fitted to `τ₀` and `2p` exact values.
pub fn build_tau_source(
    problem: &GcvProblem,
    mode: GcvMode,
    method: TraceMethod,
) -> Result<TauSetup> {
    match mode {
        GcvMode::Exact => Ok(TauSetup {
            source: Box::new(ExactTau::new(problem.shifted_gram(), method)),
            interpolant: None,
            points: None,
        }),
        GcvMode::Rational { p } => {
            let start = Instant::now();
            let ctx = problem.tau_context(method)?;
            let pts = ctx.sample(&mode.nodes()?)?;
            let interp = fit_rational(ctx.tau0(), &pts, p, Some(problem.t_interval()))?;
            let source = InterpolatedTau::new(interp.clone(), 1 + pts.len(), start.elapsed());
            Ok(TauSetup { source: Box::new(source), interpolant: Some(interp), points: Some(pts) })
        }
    }
}

/// Minimizes `V(θ)` over `log₁₀θ` by differential evolution.
pub fn gcv_experiment(
    problem: &GcvProblem,
    mode: GcvMode,
    method: TraceMethod,
    de: &DeConfig,
) -> Result<GcvRun> {
    let start = Instant::now();
    let TauSetup { source, interpolant, points } = build_tau_source(problem, mode, method)?;
    let (lo, hi) = problem.config.log10_theta_bounds;
    let best = differential_evolution(
        |x| problem.gcv_value(10f64.powf(x[0]), source.as_ref()),
        &[(lo, hi)],
        de,
    )?;
    let log10_theta = best.x[0];
    Ok(GcvRun {
        result: OptimizationResult {
            mode,
            method,
            theta: 10f64.powf(log10_theta),
            log10_theta,
            gcv: best.fun,
            n_tr: source.exact_calls(),
            n_tot: source.total_calls(),
            t_tr: source.exact_time().as_secs_f64(),
            t_tot: start.elapsed().as_secs_f64(),
            generations: best.generations,
            converged: best.converged,
        },
        interpolant,
        points,
    })
}

/// `|log₁₀θ_i − log₁₀θ_e| / |log₁₀θ_e|`.
pub fn relative_log_theta_error(theta_interp: f64, theta_exact: f64) -> f64 {
    let (a, b) = (theta_interp.log10(), theta_exact.log10());
    (a - b).abs() / b.abs()
}

/// 300 log-spaced `θ` values over the search interval, merged with a linear
/// segment of 100 points from `θ_lo` to `10·s/n`.
pub fn theta_grid(problem: &GcvProblem) -> Vec<f64> {
    let (lo, hi) = problem.config.log10_theta_bounds;
    let (tlo, thi) = (10f64.powf(lo), 10f64.powf(hi));
    let mut g = crate::interpolants::log_space(tlo, thi, 300);
    let lin_hi = (10.0 * problem.config.shift / problem.config.n as f64).min(thi);
    if lin_hi > tlo {
        g.extend((0..100).map(|i| tlo + (lin_hi - tlo) * i as f64 / 99.0));
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Number of local minima of a sampled curve, counted as sign changes of the
/// finite-difference slope from negative to positive.
pub fn count_local_minima(values: &[f64]) -> usize {
    let slopes: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).collect();
    slopes.windows(2).filter(|s| s[0] < 0.0 && s[1] > 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::symmetric_eigen;

    fn small() -> GcvProblem {
        GcvProblem::generate(GcvConfig { n: 80, m: 50, seed: 4, ..GcvConfig::default() }).unwrap()
    }

    #[test]
    fn log_theta_error_examples() {
        assert_eq!(relative_log_theta_error(1e-3, 1e-3), 0.0);
        let e = relative_log_theta_error(10f64.powf(-3.5627), 10f64.powf(-3.8164));
        assert!((e - 0.0665).abs() < 5e-4, "{e}");
        let e = relative_log_theta_error(10f64.powf(-3.9807), 10f64.powf(-3.8164));
        assert!((e - 0.0430).abs() < 5e-4, "{e}");
    }

    #[test]
    fn denominator_matches_dense_trace() {
        let p = small();
        let (n, m) = (80usize, 50usize);
        let x = p.design();
        let src = ExactTau::new(p.shifted_gram(), TraceMethod::Cholesky);
        for theta in [1e-5, 1e-3, 0.1] {
            let tau = src.tau(p.t_of_theta(theta)).unwrap();
            let lhs = n as f64 - m as f64 + n as f64 * theta * m as f64 * tau;
            // trace(I − X (XᵀX + nθI)⁻¹ Xᵀ) column by column.
            let l = cholesky(&p.xtx.shifted(n as f64 * theta)).unwrap();
            let mut tr = n as f64;
            for i in 0..n {
                let w = l.solve(x.row(i)).unwrap();
                tr -= x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            }
            assert!((lhs - tr).abs() <= 1e-8 * tr, "{theta}: {lhs} vs {tr}");
        }
        assert_eq!(src.exact_calls(), 3);
    }

    #[test]
    fn tau_against_eigenvalues() {
        let p = small();
        let a = p.shifted_gram();
        let eig = symmetric_eigen(50, &a.to_dense(), false).unwrap();
        let src = ExactTau::new(a, TraceMethod::Cholesky);
        for t in [0.0, 1e-2, 3.0] {
            let expect = eig.values.iter().map(|l| 1.0 / (l + t)).sum::<f64>() / 50.0;
            assert!((src.tau(t).unwrap() / expect - 1.0).abs() < 1e-10);
        }
        let sv = p.design().singular_values();
        for (l, s) in eig.values.iter().rev().zip(sv) {
            assert!((l - (s * s + 1e-3)).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_formula_matches_cholesky_path() {
        let p = small();
        let src = ExactTau::new(p.shifted_gram(), TraceMethod::Cholesky);
        for theta in [1e-7, 1e-5, 1e-3, 0.1, 10.0] {
            let a = p.gcv_value(theta, &src).unwrap();
            let b = p.gcv_spectral(theta);
            assert!((a / b - 1.0).abs() < 1e-9, "{theta}: {a} vs {b}");
        }
    }

    #[test]
    fn gcv_asymptote_is_flat() {
        let p = small();
        let src = ExactTau::new(p.shifted_gram(), TraceMethod::Cholesky);
        let v1 = p.gcv_value(1e4, &src).unwrap();
        let v2 = p.gcv_value(1e6, &src).unwrap();
        let zz: f64 = p.response().iter().map(|z| z * z).sum::<f64>() / 80.0;
        assert!((v1 / v2 - 1.0).abs() < 1e-3);
        assert!((v2 / zz - 1.0).abs() < 1e-3);
        assert!(p.gcv_value(0.0, &src).is_err());
    }

    #[test]
    fn interpolated_mode_accounting() {
        let p = small();
        let de = DeConfig { seed: 1, max_generations: 30, ..DeConfig::default() };
        for (mode, ntr) in [(GcvMode::Rational { p: 1 }, 3), (GcvMode::Rational { p: 2 }, 5)] {
            let run = gcv_experiment(&p, mode, TraceMethod::Cholesky, &de).unwrap();
            assert_eq!(run.result.n_tr, ntr);
            assert_eq!(run.result.n_tot, ntr + 40 * (run.result.generations + 1));
            assert!(run.points.is_some());
        }
        let run = gcv_experiment(&p, GcvMode::Exact, TraceMethod::Cholesky, &de).unwrap();
        assert_eq!(run.result.n_tr, run.result.n_tot);
        let again = gcv_experiment(&p, GcvMode::Exact, TraceMethod::Cholesky, &de).unwrap();
        assert_eq!(run.result.theta, again.result.theta);
        assert_eq!(run.result.n_tot, again.result.n_tot);
    }

    #[test]
    fn minima_counting() {
        assert_eq!(count_local_minima(&[3.0, 2.0, 1.0, 2.0, 3.0]), 1);
        assert_eq!(count_local_minima(&[3.0, 1.0, 2.0, 1.5, 2.5]), 2);
        assert_eq!(count_local_minima(&[1.0, 2.0, 3.0]), 0);
        assert_eq!(count_local_minima(&[2.0, 1.0, 1.0, 2.0]), 1);
    }

    #[test]
    fn grid_contains_linear_segment() {
        let p = small();
        let g = theta_grid(&p);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[0], 1e-7);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(g.len() > 350);
    }
}
