use pep_core::instances::random_dense;
use pep_core::linalg::{lu_factor, point_diagnostics};
use pep_core::oracle::det_poly;
use pep_core::{Complex64, MatrixPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(log det P)'` by central differences of the complex log-determinant.
fn fd_log_derivative(p: &MatrixPolynomial, x: Complex64) -> Complex64 {
    let h = 1e-5 * (1.0 + x.norm());
    let d = |t: Complex64| lu_factor(&p.eval(t)).unwrap().det();
    (d(x + h) / d(x - h)).ln() / (2.0 * h)
}

#[test]
fn inverse_correction_is_log_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(1..=5);
        let p = random_dense(&mut rng, n, k);
        let q = det_poly(&p).unwrap();
        let x = Complex64::from_polar(rng.random_range(0.2..3.0), rng.random_range(0.0..6.3));
        let diag = point_diagnostics(&p, x).unwrap();
        if diag.rcond < 1e-3 {
            continue;
        }
        let inv = 1.0 / diag.newton_correction;
        let fd = fd_log_derivative(&p, x);
        assert!((inv - fd).norm() <= 1e-5 * fd.norm(), "fd {inv} vs {fd}");
        let (v, dv) = q.eval_with_deriv(x);
        let explicit = dv / v;
        assert!((inv - explicit).norm() <= 1e-8 * explicit.norm(), "oracle {inv} vs {explicit}");
        checked += 1;
    }
}
