use nalgebra::DMatrix;

use super::{linalg::solve_dense, FitDiagnostics, Interpolant, InterpolantPoints, Variant};
use crate::error::{Error, Result};

/// Imaginary parts below this (relative to `max(1, |z|)`) count as real.
const REAL_ROOT_TOLERANCE: f64 = 1e-8;

/// `[−|t_min|/2, 10·max node]`, or `[0, 10·max node]` without `t_min`.
pub fn default_pole_domain(pts: &InterpolantPoints) -> Option<(f64, f64)> {
    let hi = 10.0 * pts.nodes().last()?;
    let lo = pts.t_min().map_or(0.0, |m| -m.abs() / 2.0);
    Some((lo, hi))
}

/// Real roots of the monic polynomial `x^d + c_{d−1} x^{d−1} + … + c_0`,
/// from the eigenvalues of its companion matrix, sorted ascending.
pub fn real_roots(lower_coeffs: &[f64]) -> Vec<f64> {
    let d = lower_coeffs.len();
    if d == 0 {
        return Vec::new();
    }
    let mut c = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        c[(i, i - 1)] = 1.0;
    }
    for (i, &a) in lower_coeffs.iter().enumerate() {
        c[(i, d - 1)] = -a;
    }
    let mut roots: Vec<f64> = c
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= REAL_ROOT_TOLERANCE * z.re.abs().max(1.0))
        .map(|z| z.re)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots
}

/// Fits the rational interpolant of order `p` through `2p` points.
///
/// Unknowns are `a_1..a_{p−1}` and `b_0..b_p`; `a_0 = b_0 τ₀` is eliminated so
/// that `τ̃(0) = τ₀`. The denominator is then checked for real roots inside
/// `domain` (default: [`default_pole_domain`]).
pub fn fit_rational(
    tau0: f64,
    pts: &InterpolantPoints,
    p: usize,
    domain: Option<(f64, f64)>,
) -> Result<Interpolant> {
    let mut out = Interpolant::bound(tau0)?;
    out.variant = Variant::Rational;
    if pts.len() != 2 * p {
        return Err(Error::InvalidArgument(format!(
            "rational interpolant of order {p} needs {} points, got {}",
            2 * p,
            pts.len()
        )));
    }
    let (a, b, diagnostics) = if p == 0 {
        (Vec::new(), vec![1.0 / tau0], None)
    } else {
        let n = 2 * p;
        let mut m = Vec::with_capacity(n * n);
        let mut rhs = Vec::with_capacity(n);
        for (&t, &tau) in pts.nodes().iter().zip(pts.values()) {
            m.extend((1..p).map(|k| -t.powi(k as i32)));
            m.push(tau - tau0);
            m.extend((1..=p).map(|k| tau * t.powi(k as i32)));
            rhs.push(t.powi(p as i32) - tau * t.powi(p as i32 + 1));
        }
        let sol = solve_dense(n, &m, &rhs)?;
        let b0 = sol.x[p - 1];
        let mut a = vec![b0 * tau0];
        a.extend_from_slice(&sol.x[..p - 1]);
        let b = sol.x[p - 1..].to_vec();
        let d = FitDiagnostics { condition: sol.condition, residual: sol.residual };
        (a, b, Some(d))
    };
    out.p = p;
    out.coefficients = a.into_iter().chain(b).collect();
    out.nodes = pts.nodes().to_vec();
    out.diagnostics = diagnostics;

    if let Some((lo, hi)) = domain.or_else(|| default_pole_domain(pts)) {
        let poles: Vec<f64> =
            real_roots(out.denominator()).into_iter().filter(|r| (lo..=hi).contains(r)).collect();
        if !poles.is_empty() {
            return Err(Error::PoleInDomain { roots: poles, lower: lo, upper: hi });
        }
        out.pole_free = Some([lo, hi]);
    }
    Ok(out)
}

/// Evaluates a monic polynomial with lower coefficients `c` at `t`, divided
/// by `t^deg` when `|t| > 1` to avoid overflow. Returns the value and the
/// matching sum of absolute terms.
fn monic_scaled(c: &[f64], t: f64) -> (f64, f64) {
    if t.abs() <= 1.0 {
        let mut v = 1.0;
        let mut s = 1.0;
        for &ck in c.iter().rev() {
            v = v * t + ck;
            s = s * t.abs() + ck.abs();
        }
        (v, s)
    } else {
        // Σ c_k u^{d−k} with u = 1/t, leading term 1.
        let u = 1.0 / t;
        let mut v = 0.0;
        let mut s = 0.0;
        for &ck in c {
            v = v * u + ck;
            s = s * u.abs() + ck.abs();
        }
        (v * u + 1.0, s * u.abs() + 1.0)
    }
}

pub(super) fn eval(interp: &Interpolant, t: f64) -> Result<f64> {
    let (num, num_scale) = monic_scaled(interp.numerator(), t);
    let (den, den_scale) = monic_scaled(interp.denominator(), t);
    if den.abs() < 1e-300 * num_scale.max(den_scale) || den == 0.0 {
        return Err(Error::PoleInDomain { roots: vec![t], lower: t, upper: t });
    }
    // For |t| > 1 the numerator was divided by t^p and the denominator by t^{p+1}.
    let v = num / den;
    Ok(if t.abs() > 1.0 { v / t } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolants::tau_upper_bound;

    fn tau(t: f64) -> f64 {
        [1.0, 2.0, 5.0, 9.0].iter().map(|l| 1.0 / (l + t)).sum::<f64>() / 4.0
    }

    fn points(nodes: &[f64]) -> InterpolantPoints {
        InterpolantPoints::new(nodes.to_vec(), nodes.iter().map(|&t| tau(t)).collect(), None)
            .unwrap()
    }

    #[test]
    fn order_zero_is_the_bound() {
        let f = fit_rational(2.0, &InterpolantPoints::empty(), 0, None).unwrap();
        assert!((f.eval(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-16);
        for t in [0.0, 1e-3, 0.5, 7.0, 1e5] {
            let b = tau_upper_bound(t, 2.0);
            assert!((f.eval(t).unwrap() - b).abs() <= 1e-15 * b);
        }
        assert_eq!(f.denominator(), &[0.5]);
        assert!(f.numerator().is_empty());
    }

    #[test]
    fn reproduces_nodes_origin_and_asymptote() {
        let pts = points(&[1e-2, 1e-1, 1.0, 10.0]);
        let f = fit_rational(tau(0.0), &pts, 2, None).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), tau(0.0));
        for &t in pts.nodes() {
            assert!((f.eval(t).unwrap() / tau(t) - 1.0).abs() < 1e-8, "{t}");
        }
        let t = 1e8 / tau(0.0);
        assert!((t * f.eval(t).unwrap() - 1.0).abs() <= 0.01);
        assert!((f.numerator()[0] - f.denominator()[0] * tau(0.0)).abs() < 1e-15);
    }

    #[test]
    fn exact_for_two_pole_function() {
        // τ with two distinct eigenvalues is itself rational of order 1.
        let g = |t: f64| (1.0 / (1.0 + t) + 1.0 / (3.0 + t)) / 2.0;
        let pts = InterpolantPoints::new(vec![0.5, 2.0], vec![g(0.5), g(2.0)], None).unwrap();
        let f = fit_rational(g(0.0), &pts, 1, None).unwrap();
        for t in [0.01, 0.3, 4.0, 100.0] {
            assert!((f.eval(t).unwrap() / g(t) - 1.0).abs() < 1e-12);
        }
        let poles = real_roots(f.denominator());
        assert_eq!(poles.len(), 2);
        assert!((poles[0] + 3.0).abs() < 1e-10 && (poles[1] + 1.0).abs() < 1e-10);
        // The pole at −1 is found when the caller widens the domain.
        assert!(matches!(
            fit_rational(g(0.0), &pts, 1, Some((-2.0, 10.0))),
            Err(Error::PoleInDomain { .. })
        ));
    }

    #[test]
    fn root_finder() {
        // (x − 1)(x + 2)(x² + 1)
        let r = real_roots(&[-2.0, 1.0, -1.0, 1.0]);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        assert!(real_roots(&[]).is_empty());
    }

    #[test]
    fn wrong_point_count() {
        assert!(fit_rational(tau(0.0), &points(&[0.1, 1.0, 10.0]), 2, None).is_err());
    }
}
