//! Brute-force reference for desk-scale problems: explicit `det P(x)` by
//! evaluation and interpolation, a standalone scalar Aberth root finder, and
//! spectrum matching. Never used by the solver itself.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eai::Eigenvalue;
use crate::error::{PepError, Result};
use crate::linalg::lu_factor;
use crate::matpoly::MatrixPolynomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest `nk` for which interpolation is trusted.
pub const ORACLE_LIMIT: usize = 64;
const TRIM: f64 = 1e-10;

/// Scalar polynomial, coefficients lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarPoly {
    pub coeffs: Vec<Complex64>,
}

impl ScalarPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
    }

    /// `(p(x), p'(x))` by Horner.
    pub fn eval_with_deriv(&self, x: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut d = ZERO;
        for &c in self.coeffs.iter().rev() {
            d = d * x + p;
            p = p * x + c;
        }
        (p, d)
    }

    /// Number of exactly zero low-order coefficients.
    pub fn zero_multiplicity(&self) -> usize {
        self.coeffs.iter().take_while(|c| **c == ZERO).count().min(self.degree())
    }
}

/// `det P(x)` from values at `nk+1` scaled roots of unity. Coefficients
/// below `1e-10` of the largest (after scaling by the interpolation radius)
/// are set to zero at the top (eigenvalues at infinity) and at the bottom
/// (eigenvalues at zero).
pub fn det_poly(p: &MatrixPolynomial) -> Result<ScalarPoly> {
    let nk = p.grade();
    if nk > ORACLE_LIMIT {
        return Err(PepError::OracleTooLarge { nk, limit: ORACLE_LIMIT });
    }
    let r = interpolation_radius(p);
    let m = nk + 1;
    let values: Vec<Complex64> = (0..m)
        .map(|j| {
            let x = Complex64::from_polar(r, TAU * j as f64 / m as f64);
            lu_factor(&p.eval(x)).map(|f| f.det())
        })
        .collect::<Result<_>>()?;
    let mut scaled: Vec<Complex64> = (0..m)
        .map(|i| {
            let s: Complex64 = values
                .iter()
                .enumerate()
                .map(|(j, &v)| v * Complex64::from_polar(1.0, -TAU * ((i * j) % m) as f64 / m as f64))
                .sum();
            s / m as f64
        })
        .collect();
    let big = scaled.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        return Err(PepError::ZeroPolynomial);
    }
    while scaled.len() > 1 && scaled.last().is_some_and(|c| c.norm() <= TRIM * big) {
        scaled.pop();
    }
    for c in scaled.iter_mut() {
        if c.norm() <= TRIM * big {
            *c = ZERO;
        } else {
            break;
        }
    }
    let coeffs = scaled
        .iter()
        .enumerate()
        .map(|(i, &c)| c / r.powi(i as i32))
        .collect();
    Ok(ScalarPoly { coeffs })
}

/// Geometric mean of the Newton-polygon radii of the coefficient norms,
/// clamped to `[1e-2, 1e2]`.
fn interpolation_radius(p: &MatrixPolynomial) -> f64 {
    let pts: Vec<(usize, f64)> = p
        .coeff_norms2()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i, v.ln()))
        .collect();
    let hull = upper_hull(&pts);
    let mut num = 0.0;
    let mut den = 0.0;
    for w in hull.windows(2) {
        let cnt = (w[1].0 - w[0].0) as f64;
        num += w[0].1 - w[1].1;
        den += cnt;
    }
    let lr = if den > 0.0 { num / den } else { 0.0 };
    lr.exp().clamp(1e-2, 1e2)
}

fn upper_hull(pts: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in pts {
        while let [.., a, b] = hull[..] {
            let cross = (b.0 as f64 - a.0 as f64) * (p.1 - a.1) - (b.1 - a.1) * (p.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// All roots of `q` by a plain scalar Ehrlich–Aberth iteration; exact zero
/// roots are returned as zeros.
pub fn scalar_roots(q: &ScalarPoly) -> Vec<Complex64> {
    let zm = q.zero_multiplicity();
    let reduced = ScalarPoly::new(q.coeffs[zm..].to_vec());
    let d = reduced.degree();
    let mut roots = vec![ZERO; zm];
    if d == 0 {
        return roots;
    }
    let abs: Vec<f64> = reduced.coeffs.iter().map(|c| c.norm()).collect();
    let pts: Vec<(usize, f64)> = abs
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i, v.ln()))
        .collect();
    let mut y: Vec<Complex64> = Vec::with_capacity(d);
    for (s, w) in upper_hull(&pts).windows(2).enumerate() {
        let cnt = w[1].0 - w[0].0;
        let rad = ((w[0].1 - w[1].1) / cnt as f64).exp();
        for j in 0..cnt {
            y.push(Complex64::from_polar(rad, TAU * j as f64 / cnt as f64 + 0.25 + 0.61 * s as f64));
        }
    }
    let mut done = vec![false; d];
    let eps = f64::EPSILON;
    for _ in 0..500 {
        if done.iter().all(|&b| b) {
            break;
        }
        for j in 0..d {
            if done[j] {
                continue;
            }
            let (pv, dv) = reduced.eval_with_deriv(y[j]);
            let scale: f64 = abs.iter().rev().fold(0.0, |acc, &a| acc * y[j].norm() + a);
            if pv.norm() <= 4.0 * eps * scale {
                done[j] = true;
                continue;
            }
            let newton = pv / dv;
            let a: Complex64 = (0..d).filter(|&l| l != j).map(|l| ONE / (y[j] - y[l])).sum();
            let mut c = newton / (ONE - newton * a);
            if !c.is_finite() {
                c = newton;
            }
            y[j] -= c;
            if c.norm() <= 4.0 * eps * y[j].norm() {
                done[j] = true;
            }
        }
    }
    roots.extend(y);
    roots
}

/// Oracle spectrum of `P`: the roots of `det P(x)` plus `nk − deg` infinities.
pub fn oracle_spectrum(p: &MatrixPolynomial) -> Result<Vec<Eigenvalue>> {
    let q = det_poly(p)?;
    let mut out: Vec<Eigenvalue> = scalar_roots(&q).into_iter().map(Eigenvalue::Finite).collect();
    out.extend(std::iter::repeat_n(Eigenvalue::Infinite, p.grade() - q.degree()));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub max_rel_err: f64,
    /// Geometric mean of the relative errors, each floored at `ε/2`.
    pub avg_rel_err: f64,
    /// `(index in a, index in b)`.
    pub pairing: Vec<(usize, usize)>,
}

/// Relative distance of `a` from the reference `b` (absolute when `b = 0`).
pub fn relative_error(a: Complex64, b: Complex64) -> f64 {
    let d = (a - b).norm();
    if b == ZERO {
        d
    } else {
        d / b.norm().max(1e-300)
    }
}

/// Greedy matching by increasing relative distance; infinities pair with
/// infinities first.
pub fn match_spectra(a: &[Eigenvalue], b: &[Eigenvalue]) -> Result<MatchReport> {
    if a.len() != b.len() {
        return Err(PepError::LengthMismatch(a.len(), b.len()));
    }
    let floor = f64::EPSILON / 2.0;
    let mut pairing = Vec::with_capacity(a.len());
    let mut errs = Vec::with_capacity(a.len());
    let inf_a: Vec<usize> = (0..a.len()).filter(|&i| a[i].is_infinite()).collect();
    let inf_b: Vec<usize> = (0..b.len()).filter(|&i| b[i].is_infinite()).collect();
    for (&i, &j) in inf_a.iter().zip(&inf_b) {
        pairing.push((i, j));
        errs.push(floor);
    }
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    for &(i, j) in &pairing {
        used_a[i] = true;
        used_b[j] = true;
    }
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if let (Some(x), Some(y)) = (x.finite(), y.finite()) {
                cand.push((relative_error(x, y), i, j));
            }
        }
    }
    cand.sort_by(|u, v| u.0.total_cmp(&v.0));
    for (e, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairing.push((i, j));
            errs.push(e.max(floor));
        }
    }
    // whatever is left pairs a finite value with an infinite one
    let rest_a: Vec<usize> = (0..a.len()).filter(|&i| !used_a[i]).collect();
    let rest_b: Vec<usize> = (0..b.len()).filter(|&j| !used_b[j]).collect();
    for (&i, &j) in rest_a.iter().zip(&rest_b) {
        pairing.push((i, j));
        errs.push(f64::INFINITY);
    }
    let max_rel_err = errs.iter().copied().fold(floor, f64::max);
    let avg_rel_err = if errs.is_empty() {
        floor
    } else {
        floor * (errs.iter().map(|e| (e / floor).ln()).sum::<f64>() / errs.len() as f64).exp()
    };
    Ok(MatchReport {
        max_rel_err,
        avg_rel_err,
        pairing,
    })
}

/// [`match_spectra`] on finite values.
pub fn match_values(a: &[Complex64], b: &[Complex64]) -> Result<MatchReport> {
    let wrap = |v: &[Complex64]| v.iter().map(|&z| Eigenvalue::Finite(z)).collect::<Vec<_>>();
    match_spectra(&wrap(a), &wrap(b))
}
