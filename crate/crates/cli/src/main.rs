mod args;
mod output;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use args::{Cli, Command, EstimatorArgs, MatrixInput, SweepSpec, VariantArg};
use output::{Manifest, OutDir};
use trace_interp::applications::{
    gcv_experiment, gp_experiment, relative_log_theta_error, theta_grid, DeConfig, GcvConfig,
    GcvMode, GcvProblem, GcvRun, GpConfig, InterpolatedTau,
};
use trace_interp::estimators::{shifted_operand, TraceMethod};
use trace_interp::interpolants::{
    check_inequality_suite, default_nodes, fit_basis, fit_rational, Interpolant, TauContext,
};
use trace_interp::io;
use trace_interp::matrix::{build_exponential_kernel, grid_points, random_points, SpdMatrix};
use trace_interp::ortho::gram_schmidt;
use trace_interp::Error;

/// Relative slack allowed when checking the bounds on computed values.
const BOUND_SLACK: f64 = 1e-12;
/// Largest relative error accepted at an interpolant's own nodes.
const NODE_TOLERANCE: f64 = 1e-8;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in failures {
                eprintln!("invariant failed: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(hint) = e.downcast_ref::<Error>().and_then(hint) {
                eprintln!("hint: {hint}");
            }
            ExitCode::FAILURE
        }
    }
}

fn hint(e: &Error) -> Option<&'static str> {
    match e {
        Error::PoleInDomain { .. } => {
            Some("move or add interpolant points, or lower --p, so the fit has no real pole there")
        }
        Error::NonMonotoneNodes { .. } => Some(
            "stochastic estimates are too noisy for these nodes; raise --nv or spread the nodes",
        ),
        Error::BelowDomainFloor { .. } => Some("pass --force to evaluate the basis variant there"),
        Error::SingularSystem { .. } => Some("use fewer or better separated nodes"),
        _ => None,
    }
}

/// Runs the subcommand and returns the driver invariants that failed.
fn run(cli: &Cli) -> Result<Vec<String>> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("cannot start the thread pool")?;
    let mut out = OutDir::create(&cli.out)?;
    let result = pool.install(|| dispatch(cli, &mut out));
    let outputs = out.written().to_vec();
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        threads: pool.current_num_threads(),
        config: cli,
        outputs: &outputs,
    };
    out.json("manifest.json", &manifest)?;
    result
}

fn dispatch(cli: &Cli, out: &mut OutDir) -> Result<Vec<String>> {
    let verbose = cli.verbose > 0;
    match &cli.command {
        Command::Trace { input, t, estimator } => cmd_trace(out, input, t, estimator),
        Command::Interpolate { input, estimator, variant, p, nodes, sweep, no_exact, force } => {
            let opts = InterpolateOpts {
                variant: *variant,
                p: *p,
                nodes: nodes.clone(),
                sweep: *sweep,
                exact: !no_exact,
                force: *force,
            };
            cmd_interpolate(out, input, estimator, &opts, verbose)
        }
        Command::Ortho { p } => cmd_ortho(out, *p),
        Command::GpExperiment { kernel, random_points, seed, sweep } => {
            let config = GpConfig {
                side: kernel.side,
                rho: kernel.rho,
                sweep: sweep.points(),
                random_points: random_points.then_some(*seed),
                ..GpConfig::default()
            };
            cmd_gp(out, &config, verbose)
        }
        Command::GcvExperiment { design, estimator, p, de_seed } => {
            let config =
                GcvConfig { n: design.n, m: design.m, seed: design.seed, ..GcvConfig::default() };
            let de = DeConfig { seed: *de_seed, ..DeConfig::default() };
            cmd_gcv(out, config, estimator.single()?, p, &de, verbose)
        }
        Command::CheckInequalities { trials, n, seed } => {
            let report = check_inequality_suite(*trials, *n, *seed)?;
            out.json("inequalities.json", &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report
                .violations
                .iter()
                .map(|v| {
                    format!("{:?} inequality, trial {}: {} vs {}", v.kind, v.trial, v.lhs, v.rhs)
                })
                .collect())
        }
    }
}

/// Loads `A` and `B` from the input flags.
fn load_pair(input: &MatrixInput) -> Result<(SpdMatrix, SpdMatrix)> {
    let src = &input.source;
    let a = if let Some(path) = &src.matrix {
        io::read_matrix(path).with_context(|| format!("reading {}", path.display()))?
    } else if let Some(k) = &src.kernel {
        let pts = match &input.points {
            Some(path) => {
                io::read_points(path).with_context(|| format!("reading {}", path.display()))?
            }
            None if input.random_points => random_points(k.side * k.side, input.point_seed),
            None => grid_points(k.side)?,
        };
        build_exponential_kernel(&pts, k.rho)?
    } else if let Some(d) = &src.design {
        let config = GcvConfig { n: d.n, m: d.m, seed: d.seed, ..GcvConfig::default() };
        GcvProblem::generate(config)?.shifted_gram()
    } else {
        bail!("one of --matrix, --kernel or --design is required");
    };
    let b = match &input.matrix_b {
        Some(path) => {
            io::read_matrix(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => SpdMatrix::identity(a.order()),
    };
    if b.order() != a.order() {
        bail!("A has order {} but B has order {}", a.order(), b.order());
    }
    Ok((a, b))
}

fn cmd_trace(
    out: &mut OutDir,
    input: &MatrixInput,
    ts: &[f64],
    estimator: &EstimatorArgs,
) -> Result<Vec<String>> {
    let (a, b) = load_pair(input)?;
    let mut records = Vec::new();
    for method in estimator.methods() {
        for &t in ts {
            let m = shifted_operand(&a, &b, t)?;
            records.push(method.estimate(&m).with_context(|| format!("t = {t}"))?.record(t));
        }
    }
    out.json("trace.json", &records)?;
    println!("{}", serde_json::to_string_pretty(&records)?);
    Ok(Vec::new())
}

struct InterpolateOpts {
    variant: VariantArg,
    p: Option<usize>,
    nodes: Option<Vec<f64>>,
    sweep: Option<SweepSpec>,
    exact: bool,
    force: bool,
}

/// Number of nodes a fit of order `p` uses.
fn node_count(variant: VariantArg, p: usize) -> usize {
    match variant {
        VariantArg::Bound => 0,
        VariantArg::Basis => p,
        VariantArg::Rational => 2 * p,
    }
}

fn cmd_interpolate(
    out: &mut OutDir,
    input: &MatrixInput,
    estimator: &EstimatorArgs,
    opts: &InterpolateOpts,
    verbose: bool,
) -> Result<Vec<String>> {
    let (a, b) = load_pair(input)?;
    let ctx = TauContext::new(a, b, estimator.single()?)?;
    if verbose {
        eprintln!("order {}, tau0 = {}", ctx.order(), ctx.tau0());
    }
    let nodes = match (&opts.nodes, opts.p) {
        (Some(nodes), p) => {
            if let Some(p) = p {
                let want = node_count(opts.variant, p);
                if nodes.len() != want {
                    bail!("order {p} of this variant needs {want} nodes, got {}", nodes.len());
                }
            }
            nodes.clone()
        }
        (None, p) => default_nodes(ctx.tau0(), node_count(opts.variant, p.unwrap_or(0))),
    };
    let pts = ctx.sample(&nodes)?;
    let interp = match opts.variant {
        VariantArg::Bound => Interpolant::bound(ctx.tau0())?,
        VariantArg::Basis => {
            let coeffs = gram_schmidt(pts.len().max(1))?.truncated(pts.len())?;
            fit_basis(ctx.tau0(), &pts, &coeffs)?
        }
        VariantArg::Rational => {
            if pts.len() % 2 != 0 {
                bail!("the rational variant needs an even number of nodes, got {}", pts.len());
            }
            fit_rational(ctx.tau0(), &pts, pts.len() / 2, None)?
        }
    };
    out.json("interpolant.json", &interp)?;
    out.json("points.json", &pts)?;
    if let Some(d) = interp.diagnostics() {
        if verbose {
            eprintln!("condition {:.3e}, residual {:.3e}", d.condition, d.residual);
        }
    }

    let mut failures = Vec::new();
    if let Some(sweep) = &opts.sweep {
        let t = sweep.points();
        let approx = t
            .iter()
            .map(|&x| if opts.force { interp.eval_forced(x) } else { interp.eval(x) })
            .collect::<trace_interp::Result<Vec<f64>>>()?;
        let exact: Option<Vec<f64>> = if opts.exact {
            Some(
                t.par_iter()
                    .map(|&x| ctx.tau(x).map(|r| r.0))
                    .collect::<trace_interp::Result<_>>()?,
            )
        } else {
            None
        };
        let mut header = vec!["t".to_string()];
        if exact.is_some() {
            header.push("tau_exact".into());
        }
        header.push("tau_interp".into());
        if exact.is_some() {
            header.push("rel_error".into());
        }
        let rows: Vec<Vec<Option<f64>>> = t
            .iter()
            .enumerate()
            .map(|(i, &x)| match &exact {
                Some(e) => vec![
                    Some(x),
                    Some(e[i]),
                    Some(approx[i]),
                    Some((approx[i] - e[i]).abs() / e[i]),
                ],
                None => vec![Some(x), Some(approx[i])],
            })
            .collect();
        out.csv("curve.csv", &header, &rows)?;
        if let Some(e) = &exact {
            let worst = approx.iter().zip(e).map(|(a, e)| (a - e).abs() / e).fold(0.0, f64::max);
            println!("max relative error over the sweep: {worst:.6e}");
        }
    }
    for (&t, &v) in pts.nodes().iter().zip(pts.values()) {
        let got = interp.eval_forced(t)?;
        if (got - v).abs() > NODE_TOLERANCE * v {
            failures.push(format!("interpolant misses node t = {t}: {got} vs {v}"));
        }
    }
    println!("{}", serde_json::to_string_pretty(&interp)?);
    Ok(failures)
}

fn cmd_ortho(out: &mut OutDir, p: usize) -> Result<Vec<String>> {
    let coeffs = gram_schmidt(p)?;
    let table = coeffs.to_table();
    out.json("ortho.json", &coeffs)?;
    out.text("ortho.txt", &table)?;
    print!("{table}");
    Ok(Vec::new())
}

fn cmd_gp(out: &mut OutDir, config: &GpConfig, verbose: bool) -> Result<Vec<String>> {
    if verbose {
        eprintln!(
            "kernel order {}, {} sweep points",
            config.side * config.side,
            config.sweep.len()
        );
    }
    let curves = gp_experiment(config)?;
    let mut header: Vec<String> = ["t", "exact", "upper", "lower"].map(String::from).to_vec();
    for f in &curves.fits {
        header.push(format!("interp_p{}", f.p));
        header.push(format!("rel_error_p{}", f.p));
    }
    let rows: Vec<Vec<Option<f64>>> = (0..curves.t.len())
        .map(|i| {
            let mut r = vec![curves.t[i], curves.exact[i], curves.upper[i], curves.lower[i]];
            for f in &curves.fits {
                r.push(f.values[i]);
                r.push(f.rel_error[i]);
            }
            r.into_iter().map(Some).collect()
        })
        .collect();
    out.csv("gp_curves.csv", &header, &rows)?;

    let fits: Vec<_> = curves
        .fits
        .iter()
        .map(|f| {
            json!({
                "p": f.p,
                "max_rel_error": f.max_rel_error,
                "points": f.points,
                "interpolant": f.interpolant,
            })
        })
        .collect();
    let summary = json!({ "n": curves.n, "tau0": curves.tau0, "fits": fits });
    out.json("gp_summary.json", &summary)?;
    println!("n = {}, tau0 = {:.6}", curves.n, curves.tau0);
    for f in &curves.fits {
        println!("p = {}: max relative error {:.4e}", f.p, f.max_rel_error);
    }

    let mut failures = Vec::new();
    for i in 0..curves.t.len() {
        let (lo, e, hi) = (curves.lower[i], curves.exact[i], curves.upper[i]);
        if lo > e * (1.0 + BOUND_SLACK) || e > hi * (1.0 + BOUND_SLACK) {
            failures.push(format!("bounds violated at t = {}: {lo} <= {e} <= {hi}", curves.t[i]));
        }
    }
    for f in &curves.fits {
        for (&t, &v) in f.points.nodes().iter().zip(f.points.values()) {
            let got = f.interpolant.eval_forced(t)?;
            if (got - v).abs() > NODE_TOLERANCE * v {
                failures.push(format!("p = {} misses node t = {t}", f.p));
            }
        }
    }
    Ok(failures)
}

#[derive(Serialize)]
struct GcvRow {
    #[serde(flatten)]
    result: trace_interp::applications::OptimizationResult,
    /// Relative `log₁₀θ` error against the exact run; absent for the exact run.
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<f64>,
}

fn cmd_gcv(
    out: &mut OutDir,
    config: GcvConfig,
    method: TraceMethod,
    orders: &[usize],
    de: &DeConfig,
    verbose: bool,
) -> Result<Vec<String>> {
    let problem = GcvProblem::generate(config)?;
    let mut runs: Vec<GcvRun> = Vec::new();
    for mode in
        std::iter::once(GcvMode::Exact).chain(orders.iter().map(|&p| GcvMode::Rational { p }))
    {
        if verbose {
            eprintln!("optimizing with {mode:?}");
        }
        runs.push(gcv_experiment(&problem, mode, method, de)?);
    }
    let exact_theta = runs[0].result.theta;
    let rows: Vec<GcvRow> = runs
        .iter()
        .map(|r| GcvRow {
            result: r.result.clone(),
            error: match r.result.mode {
                GcvMode::Exact => None,
                _ => Some(relative_log_theta_error(r.result.theta, exact_theta)),
            },
        })
        .collect();
    out.json("gcv_results.json", &rows)?;
    let fitted: Vec<_> = runs
        .iter()
        .filter_map(|r| Some(json!({ "mode": r.result.mode, "interpolant": r.interpolant.as_ref()?, "points": r.points.as_ref()? })))
        .collect();
    out.json("gcv_interpolants.json", &fitted)?;

    // Curves over θ: V from the known factorization, and τ from the singular values.
    let thetas = theta_grid(&problem);
    let sv = problem.design().singular_values();
    let shift = problem.shift();
    let tau_exact =
        |t: f64| sv.iter().map(|s| 1.0 / (s * s + shift + t)).sum::<f64>() / sv.len() as f64;
    let sources: Vec<(usize, InterpolatedTau)> = runs
        .iter()
        .filter_map(|r| match (r.result.mode, &r.interpolant) {
            (GcvMode::Rational { p }, Some(i)) => {
                Some((p, InterpolatedTau::new(i.clone(), 0, Default::default())))
            }
            _ => None,
        })
        .collect();
    let mut v_header = vec!["theta".to_string(), "v_exact".into()];
    let mut tau_header = vec!["theta".to_string(), "t".into(), "tau_exact".into()];
    for (p, _) in &sources {
        v_header.push(format!("v_p{p}"));
        tau_header.push(format!("tau_p{p}"));
        tau_header.push(format!("rel_error_p{p}"));
    }
    let mut v_rows = Vec::with_capacity(thetas.len());
    let mut tau_rows = Vec::with_capacity(thetas.len());
    for &theta in &thetas {
        let t = problem.t_of_theta(theta);
        let e = tau_exact(t);
        let mut vr = vec![Some(theta), Some(problem.gcv_spectral(theta))];
        let mut tr = vec![Some(theta), Some(t), Some(e)];
        for (_, src) in &sources {
            vr.push(problem.gcv_value(theta, src).ok());
            let approx = src.interpolant().eval(t).ok();
            tr.push(approx);
            tr.push(approx.map(|a| (a - e).abs() / e));
        }
        v_rows.push(vr);
        tau_rows.push(tr);
    }
    out.csv("gcv_curve.csv", &v_header, &v_rows)?;
    out.csv("gcv_tau.csv", &tau_header, &tau_rows)?;

    println!(
        "{:<14} {:>12} {:>12} {:>6} {:>6} {:>9}",
        "mode", "log10 theta", "V", "N_tr", "N_tot", "error"
    );
    for row in &rows {
        let r = &row.result;
        let mode = match r.mode {
            GcvMode::Exact => "exact".to_string(),
            GcvMode::Rational { p } => format!("rational p={p}"),
        };
        let err = row.error.map_or("-".to_string(), |e| format!("{:.2}%", 100.0 * e));
        println!(
            "{mode:<14} {:>12.5} {:>12.6} {:>6} {:>6} {err:>9}",
            r.log10_theta, r.gcv, r.n_tr, r.n_tot
        );
    }

    let mut failures = Vec::new();
    for row in &rows {
        let r = &row.result;
        let want = match r.mode {
            GcvMode::Exact => r.n_tot,
            GcvMode::Rational { p } => 1 + 2 * p,
        };
        if r.n_tr != want {
            failures.push(format!("{:?}: {} exact evaluations, expected {want}", r.mode, r.n_tr));
        }
        if !r.gcv.is_finite() {
            failures.push(format!("{:?}: non-finite V at the optimum", r.mode));
        }
    }
    Ok(failures)
}
