//! Dense complex factorizations and the per-point quantities the iteration needs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PepError, Result};
use crate::matpoly::MatrixPolynomial;
use crate::matrix::{vec_norm2, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `Π·A = L·U` with unit lower `L` stored below the diagonal of `lu`.
#[derive(Clone, Debug)]
pub struct LuFactors {
    pub lu: CMatrix,
    /// `perm[i]` is the row of `A` that ended up in row `i`.
    pub perm: Vec<usize>,
    pub swap_count: usize,
    /// First column whose pivot was exactly zero, if any.
    pub zero_pivot: Option<usize>,
}

/// Partial-pivoting LU. An exactly zero pivot is recorded, not raised.
pub fn lu_factor(a: &CMatrix) -> Result<LuFactors> {
    if !a.is_finite() {
        return Err(PepError::NonFinite("matrix to factor"));
    }
    let n = a.n();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swap_count = 0;
    let mut zero_pivot = None;
    let m = lu.as_mut_slice();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].norm_sqr();
        for r in col + 1..n {
            let v = m[r * n + col].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            zero_pivot.get_or_insert(col);
            continue;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            perm.swap(col, piv);
            swap_count += 1;
        }
        let inv = ONE / m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] * inv;
            m[r * n + col] = f;
            if f == ZERO {
                continue;
            }
            let (top, bottom) = m.split_at_mut(r * n);
            let prow = &top[col * n + col + 1..col * n + n];
            for (dst, &p) in bottom[col + 1..n].iter_mut().zip(prow) {
                *dst -= f * p;
            }
        }
    }
    Ok(LuFactors {
        lu,
        perm,
        swap_count,
        zero_pivot,
    })
}

impl LuFactors {
    #[inline]
    pub fn n(&self) -> usize {
        self.lu.n()
    }

    pub fn is_singular(&self) -> bool {
        self.zero_pivot.is_some()
    }

    pub fn det(&self) -> Complex64 {
        let n = self.n();
        let mut d = if self.swap_count % 2 == 0 { ONE } else { -ONE };
        for i in 0..n {
            d *= self.lu[(i, i)];
        }
        d
    }

    /// `ln|det A|` as a sum of logs (`-inf` when singular).
    pub fn log_abs_det(&self) -> f64 {
        (0..self.n()).map(|i| self.lu[(i, i)].norm().ln()).sum()
    }

    /// Complex logarithm of the determinant, imaginary part modulo 2π.
    pub fn log_det(&self) -> Complex64 {
        let mut arg = if self.swap_count % 2 == 0 { 0.0 } else { std::f64::consts::PI };
        for i in 0..self.n() {
            arg += self.lu[(i, i)].arg();
        }
        Complex64::new(self.log_abs_det(), arg)
    }

    /// Overwrites `b` with `A⁻¹ b`. Undefined when singular.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n();
        let m = self.lu.as_slice();
        let mut y: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &m[i * n..i * n + i];
            let s: Complex64 = row.iter().zip(&y[..i]).map(|(&l, &v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &m[i * n + i + 1..i * n + n];
            let s: Complex64 = row.iter().zip(&y[i + 1..]).map(|(&u, &v)| u * v).sum();
            y[i] = (y[i] - s) / m[i * n + i];
        }
        b.copy_from_slice(&y);
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `A⁻ᴴ b`.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let m = self.lu.as_slice();
        // Aᴴ = Uᴴ Lᴴ Π, so solve Uᴴ w = b, then Lᴴ v = w, then undo the permutation
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= m[j * n + i].conj() * w[j];
            }
            w[i] = s / m[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= m[j * n + i].conj() * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![ZERO; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> CMatrix {
        let n = self.n();
        let mut inv = CMatrix::zeros(n);
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = ZERO);
            e[j] = ONE;
            self.solve_in_place(&mut e);
            for i in 0..n {
                inv[(i, j)] = e[i];
            }
        }
        inv
    }

    /// Hager–Higham estimate of `‖A⁻¹‖₁` (a lower bound, usually sharp).
    pub fn inv_norm1_estimate(&self) -> f64 {
        if self.is_singular() {
            return f64::INFINITY;
        }
        let n = self.n();
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..5 {
            let y = self.solve(&x);
            let ny: f64 = y.iter().map(|v| v.norm()).sum();
            if iter > 0 && ny <= est {
                est = est.max(ny);
                break;
            }
            est = ny;
            let xi: Vec<Complex64> = y
                .iter()
                .map(|v| {
                    let a = v.norm();
                    if a == 0.0 {
                        ONE
                    } else {
                        v / a
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x.iter_mut().for_each(|v| *v = ZERO);
            x[j] = ONE;
        }
        // Higham's alternating test vector guards against unlucky cancellation
        let alt: Vec<Complex64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                Complex64::new(s * (1.0 + t), 0.0)
            })
            .collect();
        let y = self.solve(&alt);
        let alt_est = 2.0 * y.iter().map(|v| v.norm()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt_est)
    }

    /// Reciprocal 1-norm condition number estimate of `A`, in `[0, 1]`.
    pub fn rcond(&self, anorm1: f64) -> f64 {
        if self.is_singular() || anorm1 == 0.0 {
            return 0.0;
        }
        let inv = self.inv_norm1_estimate();
        (1.0 / (anorm1 * inv)).clamp(0.0, 1.0)
    }
}

/// Per-point quantities derived from one factorization of `P(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    /// `p(x)/p'(x) = 1/tr(P(x)⁻¹P'(x))`; zero at an exact root.
    pub newton_correction: Complex64,
    /// `tr(P(x)⁻¹P'(x)) = p'(x)/p(x)`; infinite at an exact root.
    pub log_derivative: Complex64,
    pub log_abs_det: f64,
    pub rcond: f64,
    pub exact_root: bool,
    /// Estimate of `‖P(x)⁻¹‖₁`.
    pub inv_norm1: f64,
}

impl PointDiagnostics {
    /// The trace vanished, so the Newton correction is infinite.
    pub fn trace_is_zero(&self) -> bool {
        !self.exact_root && self.log_derivative == ZERO
    }
}

/// Factors `P(x)` once and derives the Newton correction, `ln|det P(x)|` and
/// the reciprocal condition estimate.
pub fn point_diagnostics(p: &MatrixPolynomial, x: Complex64) -> Result<PointDiagnostics> {
    let (v, d) = p.eval_with_deriv(x);
    diagnostics_from(&v, &d)
}

/// Same as [`point_diagnostics`] for an already evaluated pair `(P(x), P'(x))`.
pub fn diagnostics_from(value: &CMatrix, deriv: &CMatrix) -> Result<PointDiagnostics> {
    if !value.is_finite() || !deriv.is_finite() {
        return Err(PepError::NonFinite("matrix polynomial evaluation"));
    }
    let lu = lu_factor(value)?;
    if lu.is_singular() {
        return Ok(PointDiagnostics {
            newton_correction: ZERO,
            log_derivative: Complex64::new(f64::INFINITY, 0.0),
            log_abs_det: f64::NEG_INFINITY,
            rcond: 0.0,
            exact_root: true,
            inv_norm1: f64::INFINITY,
        });
    }
    let n = value.n();
    let mut col = vec![ZERO; n];
    let mut trace = ZERO;
    for j in 0..n {
        for i in 0..n {
            col[i] = deriv[(i, j)];
        }
        lu.solve_in_place(&mut col);
        trace += col[j];
    }
    let inv_norm1 = lu.inv_norm1_estimate();
    let anorm = value.norm1();
    let rcond = (1.0 / (anorm * inv_norm1)).clamp(0.0, 1.0);
    let newton_correction = if trace == ZERO {
        Complex64::new(f64::INFINITY, 0.0)
    } else {
        ONE / trace
    };
    Ok(PointDiagnostics {
        newton_correction,
        log_derivative: trace,
        log_abs_det: lu.log_abs_det(),
        rcond,
        exact_root: false,
        inv_norm1,
    })
}

/// How the coefficient weights enter the backward-error estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardErrorMode {
    /// `1 / (‖P(y)⁻¹‖₂ (1 + Σ_ℓ |y|^ℓ))`, unweighted.
    #[default]
    Literal,
    /// `1 / (‖P(y)⁻¹‖₂ Σ_ℓ ‖P_ℓ‖₂ |y|^ℓ)`, the usual normwise backward error.
    NormWeighted,
}

/// Backward error estimate of `y` as an eigenvalue. `‖P(y)⁻¹‖₂` is taken as
/// the 1-norm estimate divided by `√n`.
pub fn backward_error(
    diag: &PointDiagnostics,
    y: Complex64,
    coeff_norms: &[f64],
    n: usize,
    mode: BackwardErrorMode,
) -> f64 {
    if diag.exact_root {
        return 0.0;
    }
    let inv2 = diag.inv_norm1 / (n as f64).sqrt();
    let r = y.norm();
    let alpha = match mode {
        BackwardErrorMode::Literal => {
            1.0 + (0..coeff_norms.len()).map(|l| r.powi(l as i32)).sum::<f64>()
        }
        BackwardErrorMode::NormWeighted => coeff_norms
            .iter()
            .enumerate()
            .map(|(l, &w)| w * r.powi(l as i32))
            .sum(),
    };
    1.0 / (inv2 * alpha)
}

/// Cholesky test for `H` Hermitian positive definite with eigenvalues above
/// `margin`: factors `H - margin·I`.
pub fn is_positive_definite(h: &CMatrix, margin: f64) -> bool {
    let n = h.n();
    let mut l = h.clone();
    for i in 0..n {
        l[(i, i)] -= Complex64::new(margin, 0.0);
    }
    for j in 0..n {
        let mut d = l[(j, j)].re;
        for p in 0..j {
            d -= l[(j, p)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = l[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    true
}

/// Numerical rank from column-pivoted Householder QR: `|r_jj| > tol·|r_11|`.
/// Returns `(rank, nullity)`.
pub fn rank_lower_bound(a: &CMatrix, tol: f64) -> (usize, usize) {
    let n = a.n();
    if a.is_zero() {
        return (0, n);
    }
    // work on columns
    let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
    let mut diag = Vec::with_capacity(n);
    for step in 0..n {
        let (piv, _) = (step..n)
            .map(|j| (j, cols[j][step..].iter().map(|v| v.norm_sqr()).sum::<f64>()))
            .fold((step, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        cols.swap(step, piv);
        let x = &cols[step][step..];
        let alpha = vec_norm2(x);
        diag.push(alpha);
        if alpha == 0.0 {
            break;
        }
        // v = x + e^{i arg x0} ‖x‖ e1
        let phase = if x[0] == ZERO { ONE } else { x[0] / x[0].norm() };
        let mut v = x.to_vec();
        v[0] += phase * alpha;
        let vn2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        if vn2 == 0.0 {
            continue;
        }
        for col in cols.iter_mut().skip(step + 1) {
            let seg = &mut col[step..];
            let dot: Complex64 = v.iter().zip(seg.iter()).map(|(a, b)| a.conj() * b).sum();
            let f = dot * (2.0 / vn2);
            for (s, &vi) in seg.iter_mut().zip(&v) {
                *s -= f * vi;
            }
        }
    }
    let r11 = diag[0];
    let rank = diag.iter().filter(|&&d| d > tol * r11).count();
    (rank, n - rank)
}

/// Result of [`null_vector`].
#[derive(Clone, Debug)]
pub struct NullVector {
    pub vector: Vec<Complex64>,
    /// `‖P(λ)v‖₂` for the returned unit vector.
    pub residual: f64,
}

/// Right null vector estimate of `P(λ)` by two steps of inverse iteration.
pub fn null_vector(p: &MatrixPolynomial, lambda: Complex64) -> Result<NullVector> {
    let a = p.eval(lambda);
    let n = a.n();
    let mut lu = lu_factor(&a)?;
    if lu.is_singular() {
        let shift = f64::EPSILON * a.norm1().max(f64::MIN_POSITIVE);
        let mut reg = a.clone();
        for i in 0..n {
            reg[(i, i)] += Complex64::new(shift, 0.0);
        }
        lu = lu_factor(&reg)?;
        if lu.is_singular() {
            return Err(PepError::NonFinite("regularized null-vector factorization"));
        }
    }
    let residual_of = |v: &[Complex64]| vec_norm2(&a.mul_vec(v));
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * 0.754_877_666;
            Complex64::new(t.fract() + 0.5, (t * 1.618_034).fract() - 0.5)
        })
        .collect();
    let nv = vec_norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut best = (residual_of(&v), v.clone());
    for _ in 0..2 {
        lu.solve_in_place(&mut v);
        let nv = vec_norm2(&v);
        if !(nv.is_finite() && nv > 0.0) {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let r = residual_of(&v);
        if r < best.0 {
            best = (r, v.clone());
        }
    }
    Ok(NullVector {
        vector: best.1,
        residual: best.0,
    })
}
