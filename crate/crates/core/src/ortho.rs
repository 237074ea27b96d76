//! Orthonormal combinations of the fractional powers `φ_j(t) = t^(1/(j+1))`
//! on `[0, 1]` under the scale-invariant measure `dt/t`.
//!
//! Everything is computed in exact rational arithmetic. Each orthonormal
//! function is reported as `α_i Σ_j a_ij φ_j` with a primitive integer vector
//! `a_i` (`a_i1 > 0`) and `α_i = ±√q_i` for a rational radicand `q_i`.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of functions generated.
pub const MAX_ORDER: usize = 12;

/// `⟨φ_i, φ_j⟩ = ∫₀¹ t^(1/(i+1)) t^(1/(j+1)) dt/t = (i+1)(j+1)/(i+j+2)`.
pub fn haar_inner_product_basis(i: usize, j: usize) -> BigRational {
    assert!(i >= 1 && j >= 1, "basis indices start at 1");
    let (a, b) = (i as i64 + 1, j as i64 + 1);
    BigRational::new(BigInt::from(a * b), BigInt::from(a + b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthoRow {
    /// `+1` or `-1`.
    pub alpha_sign: i8,
    /// `α_i² = radicand_num / radicand_den`, in lowest terms.
    pub radicand_num: i64,
    pub radicand_den: i64,
    /// `a_i1 .. a_ii`.
    pub coeffs: Vec<i64>,
}

impl OrthoRow {
    pub fn alpha(&self) -> f64 {
        f64::from(self.alpha_sign) * (self.radicand_num as f64 / self.radicand_den as f64).sqrt()
    }

    pub fn radicand(&self) -> BigRational {
        BigRational::new(self.radicand_num.into(), self.radicand_den.into())
    }

    /// `α_i` as text, written as `sqrt(2/k)` whenever `α_i² = 2/k`.
    pub fn alpha_text(&self) -> String {
        let sign = if self.alpha_sign > 0 { '+' } else { '-' };
        let (n, d) = (self.radicand_num, self.radicand_den);
        if (2 * d) % n == 0 {
            format!("{sign}sqrt(2/{})", 2 * d / n)
        } else {
            format!("{sign}sqrt({n}/{d})")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthoCoefficients {
    rows: Vec<OrthoRow>,
}

impl OrthoCoefficients {
    pub fn order(&self) -> usize {
        self.rows.len()
    }

    /// Row `i`, 1-based.
    pub fn row(&self, i: usize) -> &OrthoRow {
        &self.rows[i - 1]
    }

    pub fn rows(&self) -> &[OrthoRow] {
        &self.rows
    }

    /// The first `p` functions.
    pub fn truncated(&self, p: usize) -> Result<OrthoCoefficients> {
        if p > self.order() {
            return Err(Error::InvalidArgument(format!(
                "requested {p} orthogonal functions, only {} available",
                self.order()
            )));
        }
        Ok(OrthoCoefficients { rows: self.rows[..p].to_vec() })
    }

    /// Plain-text table: one row per function with `α_i` and `a_i1..a_ip`.
    pub fn to_table(&self) -> String {
        let p = self.order();
        let mut cells: Vec<Vec<String>> = Vec::with_capacity(p + 1);
        let mut header = vec!["i".to_string(), "alpha_i".to_string()];
        header.extend((1..=p).map(|j| format!("a_i{j}")));
        cells.push(header);
        for (i, row) in self.rows.iter().enumerate() {
            let mut line = vec![(i + 1).to_string(), row.alpha_text()];
            line.extend(row.coeffs.iter().map(|c| c.to_string()));
            line.resize(p + 2, String::new());
            cells.push(line);
        }
        let widths: Vec<usize> =
            (0..p + 2).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &cells {
            let line: Vec<String> =
                r.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// Gram-Schmidt on `φ_1..φ_p` in exact arithmetic.
pub fn gram_schmidt(p: usize) -> Result<OrthoCoefficients> {
    if p == 0 || p > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "number of orthogonal functions must be in 1..={MAX_ORDER}, got {p}"
        )));
    }
    let gram: Vec<Vec<BigRational>> =
        (1..=p).map(|i| (1..=p).map(|j| haar_inner_product_basis(i, j)).collect()).collect();
    let inner = |x: &[BigRational], y: &[BigRational]| -> BigRational {
        let mut s = BigRational::zero();
        for (k, xk) in x.iter().enumerate() {
            if xk.is_zero() {
                continue;
            }
            for (l, yl) in y.iter().enumerate() {
                if !yl.is_zero() {
                    s += xk * yl * &gram[k][l];
                }
            }
        }
        s
    };

    let mut psi: Vec<Vec<BigRational>> = Vec::with_capacity(p);
    let mut norms: Vec<BigRational> = Vec::with_capacity(p);
    let mut rows = Vec::with_capacity(p);
    for i in 0..p {
        let mut e = vec![BigRational::zero(); p];
        e[i] = BigRational::one();
        let mut v = e.clone();
        for (prev, norm) in psi.iter().zip(&norms) {
            let c = inner(&e, prev) / norm;
            for (vk, pk) in v.iter_mut().zip(prev) {
                *vk -= &c * pk;
            }
        }
        let norm = inner(&v, &v);
        rows.push(integer_split(&v[..=i], &norm)?);
        psi.push(v);
        norms.push(norm);
    }
    Ok(OrthoCoefficients { rows })
}

/// Writes `v / √norm` as `α a` with primitive integer `a`, `a_1 > 0`.
fn integer_split(v: &[BigRational], norm: &BigRational) -> Result<OrthoRow> {
    let denom_lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&denom_lcm / x.denom())).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let mut scale = BigRational::new(g.clone(), denom_lcm);
    let mut a: Vec<BigInt> = ints.iter().map(|x| x / &g).collect();
    if a[0].is_negative() {
        a.iter_mut().for_each(|x| *x = -&*x);
        scale = -scale;
    }
    let radicand = &scale * &scale / norm;
    let to_i64 = |x: &BigInt| {
        x.to_i64().ok_or_else(|| Error::InvalidArgument("coefficient exceeds 64-bit range".into()))
    };
    Ok(OrthoRow {
        alpha_sign: if scale.is_negative() { -1 } else { 1 },
        radicand_num: to_i64(radicand.numer())?,
        radicand_den: to_i64(radicand.denom())?,
        coeffs: a.iter().map(to_i64).collect::<Result<_>>()?,
    })
}

/// `φ_i^⊥(t) = α_i Σ_j a_ij t^(1/(j+1))` in floating point.
pub fn eval_ortho_function(coeffs: &OrthoCoefficients, i: usize, t: f64) -> f64 {
    let row = coeffs.row(i);
    if t == 0.0 {
        return 0.0;
    }
    let s: f64 = row
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, &a)| a as f64 * t.powf(1.0 / (j as f64 + 2.0)))
        .sum();
    row.alpha() * s
}
