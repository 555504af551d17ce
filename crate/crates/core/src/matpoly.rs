//! Matrix polynomials `P(x) = P_0 + P_1 x + ... + P_k x^k` and their evaluation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PepError, Result};
use crate::matrix::{vec_norm2, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A degree-`k` polynomial with `n`×`n` complex coefficients `P_0..P_k`.
///
/// The degree is taken at face value: a zero leading coefficient is kept and
/// shows up as eigenvalues at infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixPolynomial {
    n: usize,
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs.first().ok_or(PepError::Empty)?;
        let n = first.n();
        if n == 0 {
            return Err(PepError::Empty);
        }
        for (index, c) in coeffs.iter().enumerate() {
            if c.n() != n {
                return Err(PepError::ShapeMismatch {
                    index,
                    rows: c.n(),
                    cols: c.n(),
                    n,
                });
            }
            if !c.is_finite() {
                return Err(PepError::NonFinite("coefficients"));
            }
        }
        Ok(Self { n, coeffs })
    }

    /// Scalar (`n = 1`) polynomial from its coefficients, lowest degree first.
    pub fn scalar(coeffs: &[Complex64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| CMatrix::diag(&[c])).collect())
    }

    /// Diagonal matrix polynomial `diag(d_1(x), ..., d_n(x))`; each entry lists
    /// scalar coefficients lowest degree first and is zero-padded to the
    /// common degree.
    pub fn diagonal(entries: &[Vec<Complex64>]) -> Result<Self> {
        let n = entries.len();
        let len = entries.iter().map(Vec::len).max().ok_or(PepError::Empty)?;
        let coeffs = (0..len)
            .map(|j| {
                let d: Vec<Complex64> = entries
                    .iter()
                    .map(|e| e.get(j).copied().unwrap_or(ZERO))
                    .collect();
                CMatrix::diag(&d)
            })
            .collect();
        let p = Self::new(coeffs)?;
        debug_assert_eq!(p.n, n);
        Ok(p)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `n * k`, the number of eigenvalues counted with those at infinity.
    #[inline]
    pub fn grade(&self) -> usize {
        self.n * self.degree()
    }

    #[inline]
    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, j: usize) -> &CMatrix {
        &self.coeffs[j]
    }

    pub fn leading(&self) -> &CMatrix {
        &self.coeffs[self.degree()]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(CMatrix::is_zero)
    }

    /// `P(x)` by Horner's scheme.
    pub fn eval(&self, x: Complex64) -> CMatrix {
        let k = self.degree();
        let mut acc = self.coeffs[k].clone();
        for j in (0..k).rev() {
            horner_step(&mut acc, x, &self.coeffs[j]);
        }
        acc
    }

    /// `P'(x)` by Horner's scheme on the derivative coefficients.
    pub fn eval_deriv(&self, x: Complex64) -> CMatrix {
        let k = self.degree();
        if k == 0 {
            return CMatrix::zeros(self.n);
        }
        let mut acc = self.coeffs[k].scale(Complex64::new(k as f64, 0.0));
        for j in (1..k).rev() {
            let s = Complex64::new(j as f64, 0.0);
            for (a, &c) in acc
                .as_mut_slice()
                .iter_mut()
                .zip(self.coeffs[j].as_slice())
            {
                *a = *a * x + s * c;
            }
        }
        acc
    }

    /// `P(x)` and `P'(x)` in a single Horner pass.
    pub fn eval_with_deriv(&self, x: Complex64) -> (CMatrix, CMatrix) {
        let k = self.degree();
        let mut val = self.coeffs[k].clone();
        let mut der = CMatrix::zeros(self.n);
        for j in (0..k).rev() {
            for ((d, v), &c) in der
                .as_mut_slice()
                .iter_mut()
                .zip(val.as_mut_slice().iter_mut())
                .zip(self.coeffs[j].as_slice())
            {
                *d = *d * x + *v;
                *v = *v * x + c;
            }
        }
        (val, der)
    }

    /// `sum_{j != m} P_j x^j`, skipping the `m`-th term inside Horner.
    pub fn eval_excluding(&self, x: Complex64, m: usize) -> CMatrix {
        let k = self.degree();
        let zero = CMatrix::zeros(self.n);
        let pick = |j: usize| if j == m { &zero } else { &self.coeffs[j] };
        let mut acc = pick(k).clone();
        for j in (0..k).rev() {
            horner_step(&mut acc, x, pick(j));
        }
        acc
    }

    /// `Rev P(x) = x^k P(1/x)`: the coefficient list reversed.
    pub fn reversal(&self) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().rev().cloned().collect(),
        }
    }

    /// Coefficient-wise transpose, `P(x)^T`.
    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            coeffs: self.coeffs.iter().map(CMatrix::transpose).collect(),
        }
    }

    /// `Q(z) = (γz+δ)^k P((αz+β)/(γz+δ))` evaluated without forming the
    /// coefficients of `Q`. Returns `Q(z)` together with the scale `(γz+δ)^k`.
    pub fn eval_mobius(&self, map: &MobiusMap, z: Complex64) -> Result<(CMatrix, Complex64)> {
        let den = map.gamma * z + map.delta;
        if den == ZERO {
            return Err(PepError::MobiusPole);
        }
        let x = (map.alpha * z + map.beta) / den;
        let scale = den.powu(self.degree() as u32);
        let q = self.eval(x);
        if scale == ONE {
            return Ok((q, scale));
        }
        Ok((q.scale(scale), scale))
    }

    /// Spectral-norm estimates of every coefficient.
    pub fn coeff_norms2(&self) -> Vec<f64> {
        self.coeffs.iter().map(coeff_norm2).collect()
    }
}

#[inline]
fn horner_step(acc: &mut CMatrix, x: Complex64, c: &CMatrix) {
    for (a, &b) in acc.as_mut_slice().iter_mut().zip(c.as_slice()) {
        *a = *a * x + b;
    }
}

/// The change of variable `x(z) = (αz + β)/(γz + δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
}

impl MobiusMap {
    pub fn new(alpha: Complex64, beta: Complex64, gamma: Complex64, delta: Complex64) -> Result<Self> {
        if alpha * delta - gamma * beta == ZERO {
            return Err(PepError::DegenerateMobius);
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            delta,
        })
    }

    pub fn identity() -> Self {
        Self {
            alpha: ONE,
            beta: ZERO,
            gamma: ZERO,
            delta: ONE,
        }
    }

    #[inline]
    pub fn determinant(&self) -> Complex64 {
        self.alpha * self.delta - self.gamma * self.beta
    }

    /// The pole `-δ/γ` of `x(z)`, if `γ ≠ 0`.
    pub fn pole(&self) -> Option<Complex64> {
        (self.gamma != ZERO).then(|| -self.delta / self.gamma)
    }

    /// `x(z)`; `None` at the pole.
    pub fn apply(&self, z: Complex64) -> Option<Complex64> {
        let den = self.gamma * z + self.delta;
        (den != ZERO).then(|| (self.alpha * z + self.beta) / den)
    }

    /// `z(x)`, the inverse map; `None` when `x = α/γ` (the image of `z = ∞`).
    pub fn invert(&self, x: Complex64) -> Option<Complex64> {
        let den = self.alpha - self.gamma * x;
        (den != ZERO).then(|| (self.delta * x - self.beta) / den)
    }

    /// Image of `z = ∞`, i.e. `α/γ` (`None` if `γ = 0`).
    pub fn image_of_infinity(&self) -> Option<Complex64> {
        (self.gamma != ZERO).then(|| self.alpha / self.gamma)
    }
}

/// Estimate of `‖A‖₂` by power iteration on `A*A`, accurate to about 1%.
pub fn coeff_norm2(a: &CMatrix) -> f64 {
    let n = a.n();
    if a.is_zero() {
        return 0.0;
    }
    // fixed, non-symmetric start so that no singular direction is missed by accident
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.37 * i as f64, 0.21 * ((i * 7) % 5) as f64 - 0.4))
        .collect();
    let mut est = 0.0_f64;
    let ah = a.adjoint();
    for _ in 0..30 {
        let nv = vec_norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let w = a.mul_vec(&v);
        let next = vec_norm2(&w);
        v = ah.mul_vec(&w);
        let done = (next - est).abs() <= 1e-4 * next;
        est = next;
        if done || vec_norm2(&v) == 0.0 {
            break;
        }
    }
    est.max(max_abs_entry(a))
}

fn max_abs_entry(a: &CMatrix) -> f64 {
    a.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max)
}
