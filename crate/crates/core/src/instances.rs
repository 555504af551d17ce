//! Test and benchmark problem generators.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matpoly::MatrixPolynomial;
use crate::matrix::CMatrix;

/// Complex entry with independent unit-variance Gaussian real and imaginary parts.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, |_, _| gaussian(rng))
}

fn build(coeffs: Vec<CMatrix>) -> MatrixPolynomial {
    MatrixPolynomial::new(coeffs).expect("generated coefficients are finite and square")
}

/// Dense polynomial with Gaussian coefficients.
pub fn random_dense<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> MatrixPolynomial {
    build((0..=k).map(|_| gaussian_matrix(rng, n)).collect())
}

/// `P_j = P_{k−j}ᵀ`.
pub fn random_palindromic<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> MatrixPolynomial {
    let mut c = vec![CMatrix::zeros(n); k + 1];
    for j in 0..=k / 2 {
        let a = gaussian_matrix(rng, n);
        if j == k - j {
            let mut s = a.transpose();
            s.axpy(Complex64::new(1.0, 0.0), &a);
            c[j] = s;
        } else {
            c[k - j] = a.transpose();
            c[j] = a;
        }
    }
    build(c)
}

/// Even coefficients symmetric, odd coefficients skew-symmetric, so that
/// `P(−x) = P(x)ᵀ`.
pub fn random_even_odd<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> MatrixPolynomial {
    let one = Complex64::new(1.0, 0.0);
    build(
        (0..=k)
            .map(|j| {
                let a = gaussian_matrix(rng, n);
                let mut t = a.transpose();
                if j % 2 == 1 {
                    t = t.scale(-one);
                }
                t.axpy(one, &a);
                t
            })
            .collect(),
    )
}

/// Every coefficient skew-symmetric (`n` should be even for a regular problem).
pub fn random_skew<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> MatrixPolynomial {
    build(
        (0..=k)
            .map(|_| {
                let a = gaussian_matrix(rng, n);
                a.sub(&a.transpose())
            })
            .collect(),
    )
}

/// Monic scalar polynomial with the given roots, lowest degree first.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

fn real(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// `2×2`, degree 10, spectrum closed under `x ↦ (x+1)/(x−1)` with a
/// Wilkinson-like determinant `θ(x)·θ((x+1)/(x−1))·(x−1)^10`,
/// `θ(x) = x·Π_{j=2}^{10}(x − j)`. Returns the polynomial and its exact
/// eigenvalues.
pub fn wilkinson_paired() -> (MatrixPolynomial, Vec<Complex64>) {
    let w1 = real(&[0.0, -1.0, 2.0, 3.0, 4.0, 5.0 / 3.0, 6.0, 7.0 / 5.0, 8.0, 9.0 / 7.0]);
    let w2 = real(&[3.0, 2.0, 5.0, 3.0 / 2.0, 7.0, 4.0 / 3.0, 9.0, 5.0 / 4.0, 10.0, 11.0 / 9.0]);
    let p = MatrixPolynomial::diagonal(&[poly_from_roots(&w1), poly_from_roots(&w2)])
        .expect("diagonal entries have equal degree");
    let mut all = w1;
    all.extend(w2);
    (p, all)
}

fn quadratic_with(a: CMatrix, n: usize) -> MatrixPolynomial {
    let b = CMatrix::from_fn(n, |i, j| match i.abs_diff(j) {
        0 => Complex64::new(2.0, 0.0),
        1 => Complex64::new(1.0, 0.0),
        _ => Complex64::new(0.0, 0.0),
    });
    build(vec![a.transpose(), b, a])
}

/// `A x² + B x + Aᵀ` with `A = diag(100, 1, 1e-3, 1e-5)` and `B` tridiagonal
/// `[1, 2, 1]`: eight eigenvalues with moduli from about `5e-6` to `2e5`.
pub fn unbalanced_quadratic() -> MatrixPolynomial {
    quadratic_with(CMatrix::diag_real(&[100.0, 1.0, 1e-3, 1e-5]), 4)
}

/// The `5×5` variant with ones on the superdiagonal of `A` and a zero last
/// diagonal entry, which has one eigenvalue at zero and one at infinity.
pub fn unbalanced_quadratic_5x5() -> MatrixPolynomial {
    let d = [100.0, 1.0, 1e-3, 1e-5, 0.0];
    let a = CMatrix::from_fn(5, |i, j| {
        if i == j {
            Complex64::new(d[i], 0.0)
        } else if j == i + 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    quadratic_with(a, 5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn palindromic_and_even_odd_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..5 {
            let p = random_palindromic(&mut rng, 3, k);
            for j in 0..=k {
                assert_eq!(p.coeff(j), &p.coeff(k - j).transpose());
            }
            let q = random_even_odd(&mut rng, 3, k);
            for j in 0..=k {
                let t = q.coeff(j).transpose();
                let want = if j % 2 == 0 { t } else { t.scale(Complex64::new(-1.0, 0.0)) };
                assert_eq!(q.coeff(j), &want);
            }
        }
    }

    #[test]
    fn wilkinson_paired_is_closed_under_the_map() {
        let (p, roots) = wilkinson_paired();
        assert_eq!((p.n(), p.degree()), (2, 10));
        for &r in &roots {
            let fr = (r + 1.0) / (r - 1.0);
            assert!(roots.iter().any(|&s| (s - fr).norm() < 1e-14));
        }
    }
}
