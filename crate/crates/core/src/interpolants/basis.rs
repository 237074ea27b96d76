use super::{linalg::solve_dense, FitDiagnostics, Interpolant, InterpolantPoints, Variant};
use crate::error::{Error, Result};
use crate::ortho::{eval_ortho_function, OrthoCoefficients};

/// The basis variant is not evaluated below this fraction of the first node.
pub const OSCILLATION_FLOOR: f64 = 1e-3;

/// Fits `1/τ̃(t) = 1/τ₀ + t + Σ_j w_j φ_j^⊥(t/l)` through the points, with
/// `l` the largest node. `coeffs` must hold exactly one function per node.
pub fn fit_basis(
    tau0: f64,
    pts: &InterpolantPoints,
    coeffs: &OrthoCoefficients,
) -> Result<Interpolant> {
    let mut out = Interpolant::bound(tau0)?;
    out.variant = Variant::Basis;
    let p = pts.len();
    if p == 0 {
        return Ok(out);
    }
    if coeffs.order() != p {
        return Err(Error::InvalidArgument(format!(
            "{p} interpolant points need {p} orthogonal functions, got {}",
            coeffs.order()
        )));
    }
    let scale = *pts.nodes().last().expect("non-empty");
    let mut m = Vec::with_capacity(p * p);
    let mut rhs = Vec::with_capacity(p);
    for (&t, &tau) in pts.nodes().iter().zip(pts.values()) {
        m.extend((1..=p).map(|j| eval_ortho_function(coeffs, j, t / scale)));
        rhs.push(1.0 / tau - 1.0 / tau0 - t);
    }
    let sol = solve_dense(p, &m, &rhs)?;
    out.p = p;
    out.scale = scale;
    out.coefficients = sol.x;
    out.nodes = pts.nodes().to_vec();
    out.ortho = Some(coeffs.clone());
    out.diagnostics = Some(FitDiagnostics { condition: sol.condition, residual: sol.residual });
    Ok(out)
}

pub(super) fn eval(interp: &Interpolant, t: f64, force: bool) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "basis interpolant is defined for t >= 0, got {t}"
        )));
    }
    if interp.p > 0 && !force {
        let floor = OSCILLATION_FLOOR * interp.nodes[0];
        if t < floor {
            return Err(Error::BelowDomainFloor { t, floor });
        }
    }
    let mut inv = 1.0 / interp.tau0 + t;
    if let Some(coeffs) = &interp.ortho {
        let x = t / interp.scale;
        for (j, w) in interp.coefficients.iter().enumerate() {
            inv += w * eval_ortho_function(coeffs, j + 1, x);
        }
    }
    if !(inv > 0.0) {
        return Err(Error::NonPositiveResult { t });
    }
    Ok(1.0 / inv)
}
