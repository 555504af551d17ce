use pep_core::eai::Status;
use pep_core::instances::wilkinson_paired;
use pep_core::oracle::match_values;
use pep_core::structured::{solve_structured, StructureSpec};
use pep_core::{solve, Complex64, SolverConfig};

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[test]
fn structured_solve_recovers_rational_pairs() {
    let (p, exact) = wilkinson_paired();
    let cfg = SolverConfig {
        structure: StructureSpec::mobius(one(), one(), one()),
        ..SolverConfig::default()
    };
    let out = solve_structured(&p, &cfg).unwrap();
    let got = out.spectrum.finite_values();
    assert_eq!(got.len(), 20);
    let m = match_values(&got, &exact).unwrap();
    println!("structured avg {:e} max {:e}", m.avg_rel_err, m.max_rel_err);
    assert!(m.avg_rel_err <= 1e-10 && m.max_rel_err <= 1e-8);
    assert_eq!(out.paired_degree, 18);
    assert!(out.spectrum.estimates.iter().filter(|e| e.status.is_deflated()).count() == 2);
    assert!(out.spectrum.count_status(Status::MaxIters) == 0);
}

#[test]
fn unstructured_solve_on_the_same_problem() {
    let (p, exact) = wilkinson_paired();
    let out = solve(&p, &SolverConfig::default()).unwrap();
    let m = match_values(&out.finite_values(), &exact).unwrap();
    println!("unstructured avg {:e} max {:e}", m.avg_rel_err, m.max_rel_err);
    assert!(m.max_rel_err <= 1e-6);
}
