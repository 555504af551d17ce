use pep_core::instances::random_dense;
use pep_core::oracle::{match_spectra, oracle_spectrum};
use pep_core::{solve, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn local_convergence_is_fast_for_simple_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..5 {
        let p = random_dense(&mut rng, 2, 4);
        let exact = oracle_spectrum(&p).unwrap();
        let err_after = |s: usize| {
            let cfg = SolverConfig {
                max_vector_iters: s,
                ..SolverConfig::default()
            };
            match_spectra(&solve(&p, &cfg).unwrap().values(), &exact).unwrap().max_rel_err
        };
        let first = (1..60).find(|&s| err_after(s) < 1e-4).expect("reaches 1e-4");
        assert!(err_after(first + 2) < 1e-12, "sweep {first}: {:e}", err_after(first + 2));
    }
}

#[test]
fn scalar_iterations_grow_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut t = Vec::new();
    for k in [25, 50, 100] {
        let total: usize = (0..3)
            .map(|_| solve(&random_dense(&mut rng, 2, k), &SolverConfig::default()).unwrap().total_scalar_iterations)
            .sum();
        t.push(total as f64);
    }
    assert!(t[1] / t[0] <= 3.0 && t[2] / t[1] <= 3.0, "{t:?}");
}
