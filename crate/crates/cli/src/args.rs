use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use trace_interp::estimators::TraceMethod;
use trace_interp::interpolants::{log_space, Variant};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "trace-interp",
    version,
    about = "Bounds, interpolants and estimators of trace((A + tB)^-1)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for all output files.
    #[arg(long, global = true, default_value = "trace-interp-out")]
    pub out: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Estimate trace((A + tB)^-1) at the given t with one or more methods.
    Trace {
        #[command(flatten)]
        input: MatrixInput,
        /// Parameter values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        t: Vec<f64>,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Fit an interpolant of tau(t) and optionally sweep it against exact values.
    Interpolate {
        #[command(flatten)]
        input: MatrixInput,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[arg(long, value_enum, default_value = "rational")]
        variant: VariantArg,
        /// Interpolant order; inferred from --nodes when omitted.
        #[arg(long)]
        p: Option<usize>,
        /// Interpolant points, strictly increasing.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<f64>>,
        /// Evaluation points as min,max,count[,log|lin].
        #[arg(long)]
        sweep: Option<SweepSpec>,
        /// Skip exact values in the sweep output.
        #[arg(long)]
        no_exact: bool,
        /// Evaluate the basis variant below its oscillation floor.
        #[arg(long)]
        force: bool,
    },
    /// Print the orthogonalized basis coefficients.
    Ortho {
        #[arg(long, default_value_t = 9)]
        p: usize,
    },
    /// Exponential-kernel study: bounds and basis interpolants against exact tau.
    GpExperiment {
        /// Grid side and correlation scale.
        #[arg(long, default_value = "50,0.1")]
        kernel: KernelSpec,
        /// Use uniformly random points drawn with --seed instead of a grid.
        #[arg(long)]
        random_points: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "1e-4,1e3,100,log")]
        sweep: SweepSpec,
    },
    /// Ridge-regression GCV optimization with exact and interpolated tau.
    GcvExperiment {
        /// Rows, columns and data seed of the synthetic design.
        #[arg(long, default_value = "1000,500,105")]
        design: DesignSpec,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Rational orders to compare against the exact run.
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        p: Vec<usize>,
        /// Seed of the differential-evolution optimizer.
        #[arg(long, default_value_t = 0)]
        de_seed: u64,
    },
    /// Randomized checks of the trace inequalities.
    CheckInequalities {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct MatrixSource {
    /// Matrix A (`.mtx` MatrixMarket or dense CSV).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Exponential kernel on a grid: side,rho.
    #[arg(long)]
    pub kernel: Option<KernelSpec>,
    /// Shifted Gram matrix XᵀX + sI of a synthetic design: n,m,seed.
    #[arg(long)]
    pub design: Option<DesignSpec>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixInput {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Matrix B (default: identity).
    #[arg(long, requires = "matrix")]
    pub matrix_b: Option<PathBuf>,
    /// Kernel points from an `x,y` CSV file instead of the grid.
    #[arg(long, requires = "kernel", conflicts_with = "random_points")]
    pub points: Option<PathBuf>,
    /// Kernel on side² uniformly random points drawn with --point-seed.
    #[arg(long, requires = "kernel")]
    pub random_points: bool,
    #[arg(long, default_value_t = 0)]
    pub point_seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatorArgs {
    /// Trace back-end(s).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cholesky")]
    pub method: Vec<MethodName>,
    /// Probe vectors of the stochastic methods.
    #[arg(long, default_value_t = 30)]
    pub nv: usize,
    /// Lanczos degree of SLQ.
    #[arg(long, default_value_t = 30)]
    pub degree: usize,
    /// Probe seed of the stochastic methods.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EstimatorArgs {
    pub fn methods(&self) -> Vec<TraceMethod> {
        self.method.iter().map(|m| m.build(self.nv, self.degree, self.seed)).collect()
    }

    pub fn single(&self) -> anyhow::Result<TraceMethod> {
        match self.methods().as_slice() {
            [m] => Ok(*m),
            _ => anyhow::bail!("this subcommand takes exactly one --method"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Cholesky,
    Eigen,
    Hutchinson,
    Slq,
}

impl MethodName {
    fn build(self, num_samples: usize, degree: usize, seed: u64) -> TraceMethod {
        match self {
            MethodName::Cholesky => TraceMethod::Cholesky,
            MethodName::Eigen => TraceMethod::Eigen,
            MethodName::Hutchinson => TraceMethod::Hutchinson { num_samples, seed },
            MethodName::Slq => TraceMethod::Slq { num_samples, degree, seed },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Bound,
    Basis,
    Rational,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Bound => Variant::Bound,
            VariantArg::Basis => Variant::Basis,
            VariantArg::Rational => Variant::Rational,
        }
    }
}

fn fields<const N: usize>(s: &str, what: &str) -> Result<[String; N], String> {
    let parts: Vec<String> = s.split(',').map(|p| p.trim().to_string()).collect();
    parts.try_into().map_err(|_| format!("expected {what}"))
}

fn num<T: FromStr>(s: &str, name: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("invalid {name} {s:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    pub side: usize,
    pub rho: f64,
}

impl FromStr for KernelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [side, rho] = fields(s, "side,rho")?;
        Ok(Self { side: num(&side, "side")?, rho: num(&rho, "rho")? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl FromStr for DesignSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [n, m, seed] = fields(s, "n,m,seed")?;
        Ok(Self { n: num(&n, "n")?, m: num(&m, "m")?, seed: num(&seed, "seed")? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub log: bool,
}

impl SweepSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.log {
            return log_space(self.min, self.max, self.count);
        }
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            c => (0..c)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (c - 1) as f64)
                .collect(),
        }
    }
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let (min, max, count, scale) = match parts.as_slice() {
            [a, b, c] => (a, b, c, "log"),
            [a, b, c, d] => (a, b, c, *d),
            _ => return Err("expected min,max,count[,log|lin]".into()),
        };
        let spec = Self {
            min: num(min, "min")?,
            max: num(max, "max")?,
            count: num(count, "count")?,
            log: match scale {
                "log" => true,
                "lin" | "linear" => false,
                other => return Err(format!("unknown sweep scale {other:?}")),
            },
        };
        if spec.min.is_nan()
            || spec.max.is_nan()
            || spec.min >= spec.max
            || (spec.log && spec.min <= 0.0)
        {
            return Err("sweep needs min < max, and min > 0 on a log scale".into());
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse() {
        assert_eq!("50,0.1".parse::<KernelSpec>().unwrap(), KernelSpec { side: 50, rho: 0.1 });
        assert_eq!("10, 5, 3".parse::<DesignSpec>().unwrap(), DesignSpec { n: 10, m: 5, seed: 3 });
        let s: SweepSpec = "1e-2,1e2,5".parse().unwrap();
        assert!(s.log);
        let p = s.points();
        assert_eq!(p.len(), 5);
        assert_eq!((p[0], p[4]), (1e-2, 1e2));
        let lin: SweepSpec = "0,1,3,lin".parse().unwrap();
        assert_eq!(lin.points(), vec![0.0, 0.5, 1.0]);
        assert!("0,1,3,log".parse::<SweepSpec>().is_err());
        assert!("1,2".parse::<KernelSpec>().is_ok());
        assert!("1".parse::<KernelSpec>().is_err());
        assert!("1,2,3,cubic".parse::<SweepSpec>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
