//! End-to-end experiments: the correlation-kernel study and GCV ridge
//! regression with differential evolution.

mod de;
mod gcv;
mod gp;

pub use de::{differential_evolution, DeConfig, DeResult, Strategy};
pub use gcv::{
    build_tau_source, count_local_minima, gcv_experiment, relative_log_theta_error, theta_grid,
    ExactTau, GcvConfig, GcvMode, GcvProblem, GcvRun, InterpolatedTau, OptimizationResult,
    TauSetup, TauSource, DEFAULT_GCV_SEED,
};
pub use gp::{
    default_gp_fits, gp_experiment, gp_kernel, GpConfig, GpCurves, GpFit, GpFitResult, MAX_GP_ORDER,
};
