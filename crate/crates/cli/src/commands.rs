use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pep_core::bounds::{cluster_analysis, disks_for_result, DiskKind, InclusionDisk};
use pep_core::instances;
use pep_core::oracle::{match_spectra, oracle_spectrum, ORACLE_LIMIT};
use pep_core::starting::rouche_annulus;
use pep_core::{solve, MatrixPolynomial, SolverConfig, SpectrumResult, StructureSpec, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::{parse_structure_tag, ProblemFile};
use crate::report::{AnnulusRecord, ResultFile};

/// Exit status when some estimate stopped at the sweep limit.
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INPUT: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "pep", version, about = "Polynomial eigenvalue problems by the Ehrlich-Aberth iteration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the problem in a JSON file.
    Solve(SolveArgs),
    /// Time random dense problems for a list of degrees.
    Bench(BenchArgs),
    /// Write a generated problem file.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Jacobi,
    Gs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "gs")]
    pub variant: VariantArg,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub backward_tol: Option<f64>,
    /// Maximum number of vector sweeps.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// none, palindromic, even_odd, skew or mobius:a_re,a_im,b_re,b_im,c_re,c_im;
    /// overrides the file.
    #[arg(long)]
    pub structure: Option<String>,
    /// Attach inclusion disks and cluster ids.
    #[arg(long)]
    pub disks: bool,
    /// Attach the Rouché annulus.
    #[arg(long)]
    pub annulus: bool,
    #[arg(long, default_value_t = 32)]
    pub annulus_samples: usize,
    /// Compare with the interpolation oracle (nk ≤ 64).
    #[arg(long)]
    pub oracle_check: bool,
    #[arg(long)]
    pub mobius_fallback: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub rank_tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub k_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "gs")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Dense,
    Palindromic,
    EvenOdd,
    Skew,
    /// The 2×2 degree-10 problem with pairs {λ, (λ+1)/(λ−1)}.
    PairedWilkinson,
    /// A x² + B x + Aᵀ with widely spread eigenvalue moduli.
    Unbalanced,
}

#[derive(Args, Debug, Clone)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "dense")]
    pub kind: Kind,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn write_out(path: &Option<PathBuf>, text: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text)?;
            Ok(out.flush()?)
        }
    }
}

/// Runs a subcommand and returns the process exit code. Errors in the
/// input are reported on stderr with exit code 1.
pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Bench(a) => cmd_bench(&a).map(|_| 0),
        Command::Generate(a) => cmd_generate(&a).map(|_| 0),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}

impl SolveArgs {
    pub fn config(&self, structure: StructureSpec) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            variant: match self.variant {
                VariantArg::Jacobi => Variant::Jacobi,
                VariantArg::Gs => Variant::GaussSeidel,
            },
            tau1: self.tau1,
            tau2: self.tau2.unwrap_or(d.tau2),
            backward_tol: self.backward_tol,
            max_vector_iters: self.max_iters.unwrap_or(d.max_vector_iters),
            structure,
            rank_tol: self.rank_tol,
            threads: self.threads,
            mobius_fallback: self.mobius_fallback,
            seed: self.seed,
            ..d
        }
    }
}

/// Solves and assembles the result file; the exit code is decided by the caller.
pub fn solve_to_report(args: &SolveArgs) -> Result<(ResultFile, SpectrumResult)> {
    let problem = ProblemFile::read(&args.input)?.into_problem()?;
    let structure = match &args.structure {
        Some(t) => parse_structure_tag(t)?,
        None => problem.structure.clone(),
    };
    let p = &problem.poly;
    let config = args.config(structure);
    let result = solve(p, &config)?;
    let mut warnings = Vec::new();
    let mut disks: Vec<Option<InclusionDisk>> = vec![None; result.estimates.len()];
    let mut disk_kind = None;
    if args.disks {
        let (kind, found) = match disks_for_result(p, &result, DiskKind::Smith) {
            Ok(d) => (DiskKind::Smith, d),
            Err(e) => {
                warnings.push(format!("inclusion disks unavailable ({e}); using Henrici disks"));
                (DiskKind::Henrici, disks_for_result(p, &result, DiskKind::Henrici)?)
            }
        };
        let mut list: Vec<InclusionDisk> = found.iter().map(|d| d.1).collect();
        if kind == DiskKind::Smith {
            cluster_analysis(&mut list);
        }
        for ((i, _), d) in found.iter().zip(list) {
            disks[*i] = Some(d);
        }
        disk_kind = Some(if kind == DiskKind::Smith { "smith" } else { "henrici" }.to_string());
    }
    let mut report = ResultFile::new(&result, &disks);
    report.disk_kind = disk_kind;
    if args.annulus {
        report.annulus = Some(AnnulusRecord::from(rouche_annulus(p, args.annulus_samples)?));
    }
    if args.oracle_check {
        if p.grade() > ORACLE_LIMIT {
            warnings.push(format!("oracle check skipped: nk = {} exceeds {ORACLE_LIMIT}", p.grade()));
        } else {
            let m = match_spectra(&result.values(), &oracle_spectrum(p)?)?;
            report.oracle_max_rel_err = Some(m.max_rel_err);
            report.oracle_avg_rel_err = Some(m.avg_rel_err);
        }
    }
    report.warnings.extend(warnings);
    Ok((report, result))
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let (report, result) = solve_to_report(args)?;
    let mut buf = Vec::new();
    match args.format {
        Format::Json => {
            buf.extend_from_slice(report.to_json()?.as_bytes());
            buf.push(b'\n');
        }
        Format::Csv => report.write_csv(&mut buf)?,
    }
    write_out(&args.output, &buf)?;
    Ok(if result.all_converged() { 0 } else { EXIT_NOT_CONVERGED })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub median_seconds: f64,
    pub total_scalar_iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln t` against `ln k`; `None` with fewer than two degrees.
    pub fitted_exponent: Option<f64>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,median_seconds,total_scalar_iterations\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.k, r.median_seconds, r.total_scalar_iterations));
        }
        if let Some(e) = self.fitted_exponent {
            s.push_str(&format!("# fitted_exponent={e}\n"));
        }
        s
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times `trials` random Gaussian problems per degree. Problem `t` of degree
/// `k` is drawn from a generator seeded by `(seed, k, t)`.
pub fn run_bench(args: &BenchArgs) -> Result<BenchReport> {
    if args.n == 0 || args.trials == 0 || args.k_list.is_empty() || args.k_list.contains(&0) {
        bail!("bench needs n ≥ 1, trials ≥ 1 and positive degrees");
    }
    let cfg = SolverConfig {
        variant: match args.variant {
            VariantArg::Jacobi => Variant::Jacobi,
            VariantArg::Gs => Variant::GaussSeidel,
        },
        threads: args.threads,
        ..SolverConfig::default()
    };
    let mut rows = Vec::with_capacity(args.k_list.len());
    for &k in &args.k_list {
        let mut times = Vec::with_capacity(args.trials);
        let mut iters = Vec::with_capacity(args.trials);
        for t in 0..args.trials {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ ((k as u64) << 32) ^ t as u64);
            let p = instances::random_dense(&mut rng, args.n, k);
            let start = Instant::now();
            let res = solve(&p, &cfg)?;
            times.push(start.elapsed().as_secs_f64());
            iters.push(res.total_scalar_iterations as f64);
        }
        rows.push(BenchRow {
            k,
            median_seconds: median(&mut times),
            total_scalar_iterations: median(&mut iters).round() as usize,
        });
    }
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.median_seconds.max(1e-9)).collect();
    Ok(BenchReport {
        fitted_exponent: fit_exponent(&ks, &ts),
        rows,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let report = run_bench(args)?;
    write_out(&args.output, report.to_csv().as_bytes())
}

pub fn generate(args: &GenerateArgs) -> Result<(MatrixPolynomial, StructureSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (n, k) = (args.n, args.k);
    if matches!(args.kind, Kind::Dense | Kind::Palindromic | Kind::EvenOdd | Kind::Skew) && (n == 0 || k == 0) {
        bail!("n and k must be at least 1");
    }
    Ok(match args.kind {
        Kind::Dense => (instances::random_dense(&mut rng, n, k), StructureSpec::None),
        Kind::Palindromic => (instances::random_palindromic(&mut rng, n, k), StructureSpec::Palindromic),
        Kind::EvenOdd => (instances::random_even_odd(&mut rng, n, k), StructureSpec::EvenOdd),
        Kind::Skew => {
            if n % 2 != 0 {
                bail!("skew problems need even n");
            }
            (instances::random_skew(&mut rng, n, k), StructureSpec::SkewSquare)
        }
        Kind::PairedWilkinson => {
            let one = num_complex::Complex64::new(1.0, 0.0);
            (instances::wilkinson_paired().0, StructureSpec::mobius(one, one, one))
        }
        Kind::Unbalanced => (instances::unbalanced_quadratic(), StructureSpec::None),
    })
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (p, s) = generate(args)?;
    let mut text = serde_json::to_string(&ProblemFile::from_problem(&p, &s))?;
    text.push('\n');
    write_out(&args.output, text.as_bytes())
}
