//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use pep_cli::commands::{run_bench, BenchArgs, VariantArg};
use pep_core::bounds::{cluster_analysis, disks_for_result, DiskKind, InclusionDisk};
use pep_core::eai::Eigenvalue;
use pep_core::instances::{
    gaussian_matrix, random_dense, random_even_odd, random_palindromic, random_skew, unbalanced_quadratic,
    wilkinson_paired,
};
use pep_core::linalg::{lu_factor, point_diagnostics};
use pep_core::oracle::{det_poly, match_spectra, match_values, oracle_spectrum, scalar_roots};
use pep_core::starting::rouche_annulus;
use pep_core::structured::solve_structured;
use pep_core::{solve, CMatrix, Complex64, MatrixPolynomial, SolverConfig, SpectrumResult, Status, StructureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn structured_config(s: StructureSpec) -> SolverConfig {
    SolverConfig {
        structure: s,
        ..SolverConfig::default()
    }
}

fn criterion_1() -> Outcome {
    let reference = [2.0050e5, 1.4969e3, 1.0, 1.0, 1.0, 1.0, 6.6805e-4, 4.9874e-6];
    let start = Instant::now();
    let p = unbalanced_quadratic();
    let res = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let ann = rouche_annulus(&p, 32).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut moduli: Vec<f64> = res.finite_values().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    if moduli.len() != reference.len() {
        return Err(format!("{} finite eigenvalues, expected 8", moduli.len()));
    }
    for (m, w) in moduli.iter().zip(reference) {
        if format!("{m:.4e}") != format!("{w:.4e}") {
            return Err(format!("modulus {m:.5e} does not round to {w:.4e}"));
        }
    }
    let brackets = moduli.iter().all(|&m| ann.r_lower < m && m < ann.r_upper);
    let within = |v: f64, w: f64| v >= w / 2.0 && v <= w * 2.0;
    check(
        brackets && within(ann.r_lower, 4.4e-6) && within(ann.r_upper, 2.24e5) && secs < 1.0,
        format!(
            "moduli match to 4 digits; annulus [{:.3e}, {:.3e}]; {secs:.3}s",
            ann.r_lower, ann.r_upper
        ),
        format!(
            "annulus [{:.3e}, {:.3e}], brackets={brackets}, {secs:.3}s",
            ann.r_lower, ann.r_upper
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let args = BenchArgs {
        n: 2,
        k_list: vec![100, 200, 400],
        trials: 3,
        seed: 0,
        variant: VariantArg::Gs,
        threads: 1,
        output: None,
    };
    let report = run_bench(&args).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let e = report.fitted_exponent.unwrap_or(f64::NAN);
    let times: Vec<String> = report.rows.iter().map(|r| format!("k={} {:.3}s", r.k, r.median_seconds)).collect();
    let per_point = report
        .rows
        .iter()
        .map(|r| r.total_scalar_iterations as f64 / (2 * r.k) as f64)
        .fold(0.0, f64::max);
    check(
        (1.5..=2.5).contains(&e) && secs < 120.0,
        format!(
            "exponent {e:.3} ({}); max iterations per eigenvalue {per_point:.1}; total {secs:.1}s",
            times.join(", ")
        ),
        format!("exponent {e:.3} ({}); total {secs:.1}s", times.join(", ")),
    )
}

fn criterion_3() -> Outcome {
    let (p, exact) = wilkinson_paired();
    let one = Complex64::new(1.0, 0.0);
    let out = solve_structured(&p, &structured_config(StructureSpec::mobius(one, one, one))).map_err(|e| e.to_string())?;
    let got = out.spectrum.finite_values();
    let m = match_values(&got, &exact).map_err(|e| e.to_string())?;
    check(
        m.avg_rel_err <= 1e-10 && m.max_rel_err <= 1e-8,
        format!(
            "avg {:.2e}, max {:.2e} over {} eigenvalues, z-vector length {}",
            m.avg_rel_err,
            m.max_rel_err,
            got.len(),
            out.z_roots.len()
        ),
        format!("avg {:.2e}, max {:.2e}", m.avg_rel_err, m.max_rel_err),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ulp4 = 4.0 * f64::EPSILON;
    let mut worst_identity = 0.0f64;
    let mut worst_match = 0.0f64;
    for t in 0..100 {
        let (n, k) = (rng.random_range(1..=4), rng.random_range(1..=6));
        let palindromic = t < 50;
        let (p, s) = if palindromic {
            (random_palindromic(&mut rng, n, k), StructureSpec::Palindromic)
        } else {
            (random_even_odd(&mut rng, n, k), StructureSpec::EvenOdd)
        };
        let out = solve_structured(&p, &structured_config(s)).map_err(|e| format!("instance {t}: {e}"))?;
        for &(a, b) in &out.pairs {
            if let (Eigenvalue::Finite(a), Eigenvalue::Finite(b)) = (a, b) {
                let r = if palindromic {
                    (a * b - 1.0).norm()
                } else {
                    (a + b).norm() / a.norm().max(f64::MIN_POSITIVE)
                };
                worst_identity = worst_identity.max(r);
            }
        }
        let plain = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let m = match_spectra(&out.spectrum.values(), &plain.values()).map_err(|e| e.to_string())?;
        worst_match = worst_match.max(m.max_rel_err);
    }
    check(
        worst_identity <= ulp4 && worst_match <= 1e-7,
        format!(
            "worst pair identity residual {:.1} ulp; worst structured/unstructured mismatch {worst_match:.2e}",
            worst_identity / f64::EPSILON
        ),
        format!(
            "pair identity {:.1} ulp, mismatch {worst_match:.2e}",
            worst_identity / f64::EPSILON
        ),
    )
}

fn rank_deficient(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let mut d = vec![1.0; n];
    d[rng.random_range(0..n)] = 0.0;
    gaussian_matrix(rng, n)
        .matmul(&CMatrix::diag_real(&d))
        .matmul(&gaussian_matrix(rng, n))
}

struct Instance {
    p: MatrixPolynomial,
    result: SpectrumResult,
}

/// The 100 regular and 25 singular-extremal instances shared by criteria 5 and 6.
fn oracle_instances() -> Result<(Vec<Instance>, Vec<Instance>), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut regular = Vec::new();
    for _ in 0..100 {
        let (n, k) = (rng.random_range(1..=3), rng.random_range(1..=5));
        let p = random_dense(&mut rng, n, k);
        let result = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
        regular.push(Instance { p, result });
    }
    let mut singular = Vec::new();
    let cfg = SolverConfig {
        mobius_fallback: true,
        ..SolverConfig::default()
    };
    for t in 0..25 {
        let (n, k) = (rng.random_range(2..=3), rng.random_range(1..=5));
        let mut c = random_dense(&mut rng, n, k).coeffs().to_vec();
        let which = 1 + t % 3;
        if which & 1 != 0 {
            c[0] = rank_deficient(&mut rng, n);
        }
        if which & 2 != 0 {
            c[k] = rank_deficient(&mut rng, n);
        }
        let p = MatrixPolynomial::new(c).map_err(|e| e.to_string())?;
        let result = solve(&p, &cfg).map_err(|e| e.to_string())?;
        singular.push(Instance { p, result });
    }
    Ok((regular, singular))
}

fn criterion_5(regular: &[Instance], singular: &[Instance]) -> Outcome {
    let mut worst = 0.0f64;
    for inst in regular {
        let o = oracle_spectrum(&inst.p).map_err(|e| e.to_string())?;
        let m = match_spectra(&inst.result.values(), &o).map_err(|e| e.to_string())?;
        worst = worst.max(m.max_rel_err);
    }
    let mut count_failures = 0;
    for inst in singular {
        let q = det_poly(&inst.p).map_err(|e| e.to_string())?;
        let zeros = inst.result.count_status(Status::DeflatedZero);
        let infs = inst.result.count_status(Status::DeflatedInfinity);
        if zeros != q.zero_multiplicity() || infs != inst.p.grade() - q.degree() {
            count_failures += 1;
        }
    }
    check(
        worst <= 1e-7 && count_failures == 0,
        format!("worst matched error {worst:.2e} on 100 instances; deflation counts agree on 25/25"),
        format!("worst {worst:.2e}; {count_failures}/25 deflation count mismatches"),
    )
}

/// Containment up to the rounding error carried by the oracle roots.
fn holds(d: &InclusionDisk, r: Complex64, slack: f64) -> bool {
    (d.center - r).norm() <= d.radius() + slack * r.norm()
}

fn disk_failures(inst: &Instance) -> Result<Vec<String>, String> {
    let mut fails = Vec::new();
    let p = &inst.p;
    let res = &inst.result;
    let roots = scalar_roots(&det_poly(p).map_err(|e| e.to_string())?);
    let slack = 16.0 * p.grade() as f64 * f64::EPSILON;
    let smith = disks_for_result(p, res, DiskKind::Smith).map_err(|e| e.to_string())?;
    let mut disks: Vec<InclusionDisk> = smith.iter().map(|d| d.1).collect();
    let report = cluster_analysis(&mut disks);
    let mut pending = roots.clone();
    for e in res.estimates.iter().filter(|e| e.status.is_deflated()) {
        if let Some(v) = e.value.finite() {
            if let Some(i) = (0..pending.len()).min_by(|&a, &b| (pending[a] - v).norm().total_cmp(&(pending[b] - v).norm())) {
                pending.remove(i);
            }
        }
    }
    if let Some(r) = pending.iter().find(|r| !disks.iter().any(|d| holds(d, **r, slack))) {
        fails.push(format!("root {r} outside the union"));
    }
    for c in &report.clusters {
        let inside = pending
            .iter()
            .filter(|r| c.members.iter().any(|&i| holds(&disks[i], **r, slack)))
            .count();
        if inside != c.count {
            fails.push(format!("component of {} disks holds {inside} roots", c.count));
        }
    }
    for (_, d) in disks_for_result(p, res, DiskKind::Henrici).map_err(|e| e.to_string())? {
        if !roots.iter().any(|r| holds(&d, *r, slack)) {
            fails.push(format!("Henrici disk at {} holds no root", d.center));
        }
    }
    Ok(fails)
}

fn criterion_6(regular: &[Instance], singular: &[Instance]) -> Outcome {
    let mut fails = Vec::new();
    for inst in regular.iter().chain(singular) {
        fails.extend(disk_failures(inst)?);
    }
    check(
        fails.is_empty(),
        format!("Smith union, component counts and Henrici disks sound on {} instances", regular.len() + singular.len()),
        format!("{} failures, first: {}", fails.len(), fails.first().cloned().unwrap_or_default()),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_fd, mut worst_oracle) = (0.0f64, 0.0f64);
    let mut checked = 0;
    while checked < 200 {
        let (n, k) = (rng.random_range(1..=3), rng.random_range(1..=5));
        let p = random_dense(&mut rng, n, k);
        let x = Complex64::from_polar(rng.random_range(0.2..3.0), rng.random_range(0.0..std::f64::consts::TAU));
        let d = point_diagnostics(&p, x).map_err(|e| e.to_string())?;
        if d.rcond < 1e-3 {
            continue;
        }
        let inv = 1.0 / d.newton_correction;
        let h = 1e-5 * (1.0 + x.norm());
        let det = |t: Complex64| lu_factor(&p.eval(t)).map(|f| f.det());
        let fd = (det(x + h).map_err(|e| e.to_string())? / det(x - h).map_err(|e| e.to_string())?).ln() / (2.0 * h);
        let q = det_poly(&p).map_err(|e| e.to_string())?;
        let (v, dv) = q.eval_with_deriv(x);
        worst_fd = worst_fd.max((inv - fd).norm() / fd.norm());
        worst_oracle = worst_oracle.max((inv - dv / v).norm() / (dv / v).norm());
        checked += 1;
    }
    check(
        worst_fd <= 1e-5 && worst_oracle <= 1e-8,
        format!("200 points: finite differences {worst_fd:.2e}, explicit p'/p {worst_oracle:.2e}"),
        format!("finite differences {worst_fd:.2e}, explicit p'/p {worst_oracle:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut odd_clusters = 0;
    let mut wrong_length = 0;
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = 2 * rng.random_range(1..=2);
        let k = rng.random_range(1..=5);
        let p = random_skew(&mut rng, n, k);
        let out = solve_structured(&p, &structured_config(StructureSpec::SkewSquare)).map_err(|e| e.to_string())?;
        if out.spectrum.active_length * 2 != p.grade() - out.exceptional.len() {
            wrong_length += 1;
        }
        let vals = out.spectrum.finite_values();
        for v in &vals {
            let c = vals.iter().filter(|w| (*w - v).norm() <= 1e-8 * v.norm().max(1e-300)).count();
            if c % 2 != 0 {
                odd_clusters += 1;
            }
        }
        let o = oracle_spectrum(&p).map_err(|e| e.to_string())?;
        worst = worst.max(match_spectra(&out.spectrum.values(), &o).map_err(|e| e.to_string())?.max_rel_err);
    }
    check(
        odd_clusters == 0 && wrong_length == 0,
        format!("all clusters even, half-length z-vector on 25/25; worst oracle mismatch {worst:.2e}"),
        format!("{odd_clusters} odd clusters, {wrong_length} wrong vector lengths"),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "unbalanced quadratic: moduli and annulus", criterion_1()),
        (2, "scaling of time with degree", criterion_2()),
        (3, "paired Wilkinson-like problem", criterion_3()),
        (4, "pair closure and structured/unstructured agreement", criterion_4()),
    ];
    match oracle_instances() {
        Ok((regular, singular)) => {
            results.push((5, "oracle equivalence and deflation counts", criterion_5(&regular, &singular)));
            results.push((6, "inclusion-disk soundness", criterion_6(&regular, &singular)));
        }
        Err(e) => {
            results.push((5, "oracle equivalence and deflation counts", Err(e.clone())));
            results.push((6, "inclusion-disk soundness", Err(e)));
        }
    }
    results.push((7, "Newton correction", criterion_7()));
    results.push((8, "skew-symmetric even multiplicity", criterion_8()));

    let mut failed = 0;
    for (i, name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {i} ({name}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {i} ({name}): {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
