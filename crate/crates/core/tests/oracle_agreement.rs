use pep_core::bounds::{cluster_analysis, disks_for_result, DiskKind, InclusionDisk};
use pep_core::instances::{gaussian_matrix, random_dense};
use pep_core::oracle::{det_poly, match_spectra, oracle_spectrum, scalar_roots};
use pep_core::{solve, CMatrix, Complex64, MatrixPolynomial, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rank_deficient(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = gaussian_matrix(rng, n);
    let mut d = vec![1.0; n];
    d[rng.random_range(0..n)] = 0.0;
    a.matmul(&CMatrix::diag_real(&d)).matmul(&gaussian_matrix(rng, n))
}

fn singular_instance(rng: &mut ChaCha8Rng, which: u32) -> MatrixPolynomial {
    let n = rng.random_range(2..=3);
    let k = rng.random_range(1..=5);
    let mut c = random_dense(rng, n, k).coeffs().to_vec();
    if which & 1 != 0 {
        c[0] = rank_deficient(rng, n);
    }
    if which & 2 != 0 {
        c[k] = rank_deficient(rng, n);
    }
    MatrixPolynomial::new(c).unwrap()
}

/// Containment up to the resolution of the oracle roots themselves.
fn holds(d: &InclusionDisk, r: Complex64, slack: f64) -> bool {
    (d.center - r).norm() <= d.radius() + slack * r.norm()
}

#[test]
fn det_poly_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_dense(&mut rng, 3, 4);
    let q = det_poly(&p).unwrap();
    for _ in 0..20 {
        let x = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let want = pep_core::linalg::lu_factor(&p.eval(x)).unwrap().det();
        assert!((q.eval(x) - want).norm() <= 1e-9 * want.norm());
    }
}

#[test]
fn random_instances_match_oracle_and_disks_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..60 {
        let n = rng.random_range(1..=3);
        let k = rng.random_range(1..=5);
        let p = random_dense(&mut rng, n, k);
        let res = solve(&p, &SolverConfig::default()).unwrap();
        let oracle = oracle_spectrum(&p).unwrap();
        let m = match_spectra(&res.values(), &oracle).unwrap();
        worst = worst.max(m.max_rel_err);
        assert!(m.max_rel_err <= 1e-7, "n={n} k={k} err={:e}", m.max_rel_err);

        let roots = scalar_roots(&det_poly(&p).unwrap());
        check_disks(&p, &res, &roots);
    }
    println!("worst {worst:e}");
}

fn check_disks(p: &MatrixPolynomial, res: &pep_core::SpectrumResult, roots: &[Complex64]) {
    let slack = 16.0 * p.grade() as f64 * f64::EPSILON;
    let smith = disks_for_result(p, res, DiskKind::Smith).unwrap();
    let mut disks: Vec<_> = smith.iter().map(|d| d.1).collect();
    let report = cluster_analysis(&mut disks);
    // oracle roots not divided out as known values
    let mut pending: Vec<Complex64> = roots.to_vec();
    for e in res.estimates.iter().filter(|e| e.status.is_deflated()) {
        if let Some(v) = e.value.finite() {
            let i = pending.iter().enumerate().min_by(|a, b| (a.1 - v).norm().total_cmp(&(b.1 - v).norm())).unwrap().0;
            pending.remove(i);
        }
    }
    for r in &pending {
        assert!(disks.iter().any(|d| holds(d, *r, slack)), "root {r} outside all disks");
    }
    for c in &report.clusters {
        let inside = pending
            .iter()
            .filter(|r| c.members.iter().any(|&i| holds(&disks[i], **r, slack)))
            .count();
        assert_eq!(inside, c.count);
    }
    for (_, d) in disks_for_result(p, res, DiskKind::Henrici).unwrap() {
        assert!(roots.iter().any(|r| holds(&d, *r, slack)));
    }
}

#[test]
fn singular_extremal_coefficients_deflate_to_oracle_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..24 {
        let which = 1 + t % 3;
        let p = singular_instance(&mut rng, which);
        let q = det_poly(&p).unwrap();
        let cfg = SolverConfig {
            mobius_fallback: true,
            ..SolverConfig::default()
        };
        let res = solve(&p, &cfg).unwrap();
        let zeros = res.count_status(pep_core::Status::DeflatedZero);
        let infs = res.count_status(pep_core::Status::DeflatedInfinity);
        assert_eq!(zeros, q.zero_multiplicity(), "case {t}");
        assert_eq!(infs, p.grade() - q.degree(), "case {t}");
        let m = match_spectra(&res.values(), &oracle_spectrum(&p).unwrap()).unwrap();
        assert!(m.max_rel_err <= 1e-7, "case {t}: {:e}", m.max_rel_err);
        check_disks(&p, &res, &scalar_roots(&q));
    }
}
