//! The Ehrlich–Aberth driver: sweeps, stopping logic and deflation of
//! eigenvalues at zero and infinity.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PepError, Result};
use crate::linalg::{backward_error, point_diagnostics, rank_lower_bound, BackwardErrorMode};
use crate::matpoly::{MatrixPolynomial, MobiusMap};
use crate::matrix::CMatrix;
use crate::starting::{initial_points, newton_polygon, polygon_starts, radius_range};
use crate::structured::{self, StructureSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Approximations beyond this modulus are declared divergent to infinity.
pub(crate) const DIVERGENCE_MODULUS: f64 = 1e154;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Jacobi,
    #[default]
    GaussSeidel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Starting {
    #[default]
    NewtonPolygon,
    SingleCircle(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Reciprocal-condition stop; `None` means `n·ε`.
    pub tau1: Option<f64>,
    pub tau2: f64,
    pub backward_tol: Option<f64>,
    pub backward_mode: BackwardErrorMode,
    pub max_vector_iters: usize,
    pub starting: Starting,
    pub structure: StructureSpec,
    /// Relative rank tolerance for deflation; `None` means `n·k·ε`.
    pub rank_tol: Option<f64>,
    /// Optional exponent `m` turning the condition stop into `rcond < τ₁^m`.
    pub defective_exponent: u32,
    pub threads: usize,
    /// Solve through a random Möbius change of variable when `P_k` is singular.
    pub mobius_fallback: bool,
    pub seed: u64,
    /// Relative residual allowed when verifying a declared structure.
    pub structure_tol: f64,
    /// Use the mirrored half-vector update instead of the change of variable.
    pub naive_structured: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::GaussSeidel,
            tau1: None,
            tau2: 4.0 * f64::EPSILON,
            backward_tol: None,
            backward_mode: BackwardErrorMode::Literal,
            max_vector_iters: 400,
            starting: Starting::NewtonPolygon,
            structure: StructureSpec::None,
            rank_tol: None,
            defective_exponent: 1,
            threads: 1,
            mobius_fallback: false,
            seed: 0,
            structure_tol: 1e-12,
            naive_structured: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PepError::InvalidConfig(m.to_string()));
        if let Some(t) = self.tau1 {
            if !(t > 0.0 && t < 1.0) {
                return bad("tau1 must lie in (0, 1)");
            }
        }
        if !(self.tau2 > 0.0 && self.tau2 < 1.0) {
            return bad("tau2 must lie in (0, 1)");
        }
        if let Some(t) = self.backward_tol {
            if !(t > 0.0) {
                return bad("backward tolerance must be positive");
            }
        }
        if self.max_vector_iters == 0 {
            return bad("max_vector_iters must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.defective_exponent == 0 {
            return bad("defective exponent must be at least 1");
        }
        if let Starting::SingleCircle(r) = self.starting {
            if !(r > 0.0 && r.is_finite()) {
                return bad("starting radius must be positive");
            }
        }
        if let Some(t) = self.rank_tol {
            if !(t >= 0.0) {
                return bad("rank tolerance must be non-negative");
            }
        }
        Ok(())
    }

    pub fn tau1_for(&self, n: usize) -> f64 {
        self.tau1.unwrap_or(n as f64 * f64::EPSILON)
    }

    pub fn rank_tol_for(&self, n: usize, k: usize) -> f64 {
        self.rank_tol.unwrap_or((n * k) as f64 * f64::EPSILON)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eigenvalue {
    Finite(Complex64),
    Infinite,
}

impl Eigenvalue {
    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            Eigenvalue::Finite(z) => Some(z),
            Eigenvalue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Eigenvalue::Infinite)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ConvergedRcond,
    ConvergedCorrection,
    ConvergedBackward,
    ExactRoot,
    DeflatedZero,
    DeflatedInfinity,
    /// Known a priori from the declared structure (exceptional or paired with
    /// a deflated zero/infinity).
    DeflatedStructural,
    /// The approximation left every finite bound; reported at infinity.
    DivergedInfinity,
    MaxIters,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::ConvergedRcond => "converged_rcond",
            Status::ConvergedCorrection => "converged_correction",
            Status::ConvergedBackward => "converged_backward",
            Status::ExactRoot => "exact_root",
            Status::DeflatedZero => "deflated_zero",
            Status::DeflatedInfinity => "deflated_infinity",
            Status::DeflatedStructural => "deflated_structural",
            Status::DivergedInfinity => "diverged_infinity",
            Status::MaxIters => "max_iters",
        }
    }

    pub fn is_deflated(&self) -> bool {
        matches!(
            self,
            Status::DeflatedZero | Status::DeflatedInfinity | Status::DeflatedStructural
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub value: Eigenvalue,
    pub status: Status,
    pub iterations: usize,
    pub last_correction: f64,
    pub rcond: f64,
    pub log_abs_det: f64,
}

impl EigenEstimate {
    pub(crate) fn deflated(value: Eigenvalue, status: Status) -> Self {
        Self {
            value,
            status,
            iterations: 0,
            last_correction: 0.0,
            rcond: 0.0,
            log_abs_det: f64::NEG_INFINITY,
        }
    }
}

/// Record of a solve carried out on `Q(z) = (γz+δ)^k P(x(z))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobiusTrace {
    pub map: MobiusMap,
    /// z-space value of every estimate, aligned with `estimates`.
    pub z_values: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub estimates: Vec<EigenEstimate>,
    pub total_scalar_iterations: usize,
    pub vector_iterations: usize,
    /// Length of the approximation vector actually iterated on.
    pub active_length: usize,
    pub config: SolverConfig,
    pub mobius: Option<MobiusTrace>,
    pub warnings: Vec<String>,
}

impl SpectrumResult {
    pub fn finite_values(&self) -> Vec<Complex64> {
        self.estimates.iter().filter_map(|e| e.value.finite()).collect()
    }

    pub fn values(&self) -> Vec<Eigenvalue> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn at_infinity_count(&self) -> usize {
        self.estimates.iter().filter(|e| e.value.is_infinite()).count()
    }

    pub fn count_status(&self, s: Status) -> usize {
        self.estimates.iter().filter(|e| e.status == s).count()
    }

    pub fn all_converged(&self) -> bool {
        self.count_status(Status::MaxIters) == 0
    }
}

/// `Σ_{ℓ≠j} 1/(y_j − y_ℓ)` where entries below `split` are taken from
/// `updated` (Gauss–Seidel) and the rest from `previous`.
pub fn aberth_sum(updated: &[Complex64], previous: &[Complex64], j: usize, split: usize) -> Result<Complex64> {
    if updated.len() != previous.len() {
        return Err(PepError::LengthMismatch(updated.len(), previous.len()));
    }
    let yj = if j < split { updated[j] } else { previous[j] };
    let mut s = ZERO;
    for l in 0..previous.len() {
        if l == j {
            continue;
        }
        let yl = if l < split { updated[l] } else { previous[l] };
        let d = yj - yl;
        if d == ZERO {
            return Err(PepError::CoincidentPoints(j, l));
        }
        s += ONE / d;
    }
    Ok(s)
}

/// The compound stop used near deflated zeros or infinities.
pub fn stricter_stop(correction: f64, y_abs: f64, rcond: f64, tau1: f64, tau2: f64) -> Option<Status> {
    if correction <= tau2 * y_abs {
        Some(Status::ConvergedCorrection)
    } else if correction <= tau2.sqrt() * y_abs && rcond < tau1 {
        Some(Status::ConvergedRcond)
    } else {
        None
    }
}

/// Lower bounds `(m_zero, m_inf)` on the number of zero and infinite
/// eigenvalues from the rank of `P_0` and `P_k` and shared zero rows/columns.
pub fn detect_deflation(p: &MatrixPolynomial, rank_tol: f64) -> (usize, usize) {
    let k = p.degree();
    if k == 0 {
        return (0, 0);
    }
    let m_zero = extremal_deficiency(p.coeff(0), p.coeff(1), rank_tol);
    let m_inf = extremal_deficiency(p.coeff(k), p.coeff(k - 1), rank_tol);
    (m_zero, m_inf)
}

fn extremal_deficiency(a: &CMatrix, next: &CMatrix, tol: f64) -> usize {
    let (_, nullity) = rank_lower_bound(a, tol);
    if nullity == 0 {
        return 0;
    }
    let n = a.n();
    let zero_row = |m: &CMatrix, i: usize| m.row(i).iter().all(|v| *v == ZERO);
    let zero_col = |m: &CMatrix, j: usize| (0..n).all(|i| m[(i, j)] == ZERO);
    // a row vanishing in both coefficients contributes a factor x^2 (or its reversal)
    let rows = (0..n).filter(|&i| zero_row(a, i) && zero_row(next, i)).count();
    let cols = (0..n).filter(|&j| zero_col(a, j) && zero_col(next, j)).count();
    nullity.max(2 * rows.max(cols))
}

/// Solves `P(x)`, dispatching on the declared structure.
pub fn solve(p: &MatrixPolynomial, config: &SolverConfig) -> Result<SpectrumResult> {
    check_problem(p, config)?;
    if config.structure.is_none() {
        solve_unstructured(p, config)
    } else {
        structured::solve_structured(p, config).map(|s| s.spectrum)
    }
}

pub(crate) fn check_problem(p: &MatrixPolynomial, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if p.degree() == 0 {
        return Err(PepError::DegreeZero);
    }
    if p.is_zero() {
        return Err(PepError::ZeroPolynomial);
    }
    Ok(())
}

/// Unstructured solve, ignoring `config.structure`.
pub fn solve_unstructured(p: &MatrixPolynomial, config: &SolverConfig) -> Result<SpectrumResult> {
    check_problem(p, config)?;
    let n = p.n();
    let k = p.degree();
    let nk = p.grade();
    let (m_zero, m_inf) = detect_deflation(p, config.rank_tol_for(n, k));
    let m_zero = m_zero.min(nk);
    let m_inf = m_inf.min(nk - m_zero);
    if m_inf > 0 && config.mobius_fallback {
        return solve_mobius(p, config, m_zero, m_inf);
    }
    let active = nk - m_zero - m_inf;
    let starts = match config.starting {
        Starting::NewtonPolygon => polygon_starts(p, m_zero, m_inf)?,
        Starting::SingleCircle(r) => circle_points(r, active, 0.4),
    };
    let segs = newton_polygon(&p.coeff_norms2())?;
    let (rmin, rmax) = radius_range(&segs);
    let settings = IterSettings::from_config(config, n)
        .with_stricter((m_zero > 0).then_some(rmin / 10.0), (m_inf > 0).then_some(rmax * 10.0));
    let eval = PlainEval::new(p, config);
    let knowns = if m_zero > 0 { vec![(ZERO, m_zero as f64)] } else { Vec::new() };
    let out = run_aberth(&eval, starts, &knowns, None, &settings)?;

    let mut estimates: Vec<EigenEstimate> = out.points.iter().map(PointState::estimate).collect();
    estimates.extend((0..m_zero).map(|_| EigenEstimate::deflated(Eigenvalue::Finite(ZERO), Status::DeflatedZero)));
    estimates.extend((0..m_inf).map(|_| EigenEstimate::deflated(Eigenvalue::Infinite, Status::DeflatedInfinity)));
    Ok(SpectrumResult {
        estimates,
        total_scalar_iterations: out.total_scalar,
        vector_iterations: out.vector_iterations,
        active_length: active,
        config: config.clone(),
        mobius: None,
        warnings: Vec::new(),
    })
}

/// Random rotation map `x = (cz + 1)/(z − c̄)` with `|c|` near the typical
/// eigenvalue modulus.
pub fn fallback_map(p: &MatrixPolynomial, seed: u64) -> Result<MobiusMap> {
    let segs = newton_polygon(&p.coeff_norms2())?;
    let total: usize = segs.iter().map(|s| s.count).sum();
    let log_mean = if total == 0 {
        0.0
    } else {
        segs.iter().map(|s| s.count as f64 * s.radius.ln()).sum::<f64>() / total as f64
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: f64 = rng.random_range(0.0..TAU);
    let c = Complex64::from_polar(log_mean.exp(), theta);
    MobiusMap::new(c, ONE, ONE, -c.conj())
}

fn solve_mobius(p: &MatrixPolynomial, config: &SolverConfig, m_zero: usize, m_inf: usize) -> Result<SpectrumResult> {
    let n = p.n();
    let nk = p.grade();
    let map = fallback_map(p, config.seed)?;
    let pole = map.pole().ok_or(PepError::DegenerateMobius)?;
    let zero_image = map.invert(ZERO).ok_or(PepError::DegenerateMobius)?;
    let active = nk - m_zero - m_inf;
    let starts: Vec<Complex64> = polygon_starts(p, m_zero, m_inf)?
        .into_iter()
        .map(|x| map.invert(x).unwrap_or(map.alpha * 1.01))
        .collect();
    let mut knowns = vec![(pole, m_inf as f64)];
    if m_zero > 0 {
        knowns.push((zero_image, m_zero as f64));
    }
    let eval = MobiusEval {
        inner: PlainEval::new(p, config),
        map,
        grade: nk as f64,
    };
    let settings = IterSettings::from_config(config, n);
    let out = run_aberth(&eval, starts, &knowns, None, &settings)?;

    let near_pole = f64::EPSILON.sqrt() * (1.0 + pole.norm());
    let mut estimates = Vec::with_capacity(nk);
    let mut z_values = Vec::with_capacity(nk);
    for pt in &out.points {
        let mut e = pt.estimate();
        if let Eigenvalue::Finite(z) = e.value {
            e.value = match map.apply(z) {
                Some(x) if (z - pole).norm() > near_pole => Eigenvalue::Finite(x),
                _ => Eigenvalue::Infinite,
            };
        }
        z_values.push(pt.value);
        estimates.push(e);
    }
    for _ in 0..m_zero {
        estimates.push(EigenEstimate::deflated(Eigenvalue::Finite(ZERO), Status::DeflatedZero));
        z_values.push(zero_image);
    }
    for _ in 0..m_inf {
        estimates.push(EigenEstimate::deflated(Eigenvalue::Infinite, Status::DeflatedInfinity));
        z_values.push(pole);
    }
    Ok(SpectrumResult {
        estimates,
        total_scalar_iterations: out.total_scalar,
        vector_iterations: out.vector_iterations,
        active_length: active,
        config: config.clone(),
        mobius: Some(MobiusTrace { map, z_values }),
        warnings: Vec::new(),
    })
}

pub(crate) fn circle_points(r: f64, m: usize, offset: f64) -> Vec<Complex64> {
    (0..m)
        .map(|j| Complex64::from_polar(r, TAU * j as f64 / m.max(1) as f64 + offset))
        .collect()
}

/// Polygon starting points spread over `m` values, used by callers that need a
/// count unrelated to `nk`.
pub(crate) fn polygon_points(p: &MatrixPolynomial, m: usize) -> Result<Vec<Complex64>> {
    let segs = newton_polygon(&p.coeff_norms2())?;
    Ok(initial_points(&segs, p.n(), m))
}

// ---------------------------------------------------------------------------
// generic driver

/// What the driver needs to know about the function whose roots it refines.
pub(crate) struct Sample {
    /// `f'(y)/f(y)` for the function being solved.
    pub log_derivative: Complex64,
    pub rcond: f64,
    pub log_abs_det: f64,
    pub exact_root: bool,
    pub backward_error: f64,
}

pub(crate) trait Evaluator: Sync {
    /// `None` when the evaluation overflowed.
    fn sample(&self, y: Complex64) -> Option<Sample>;
}

pub(crate) struct PlainEval<'a> {
    pub p: &'a MatrixPolynomial,
    norms: Vec<f64>,
    backward: Option<BackwardErrorMode>,
}

impl<'a> PlainEval<'a> {
    pub fn new(p: &'a MatrixPolynomial, config: &SolverConfig) -> Self {
        Self {
            p,
            norms: p.coeff_norms2(),
            backward: config.backward_tol.map(|_| config.backward_mode),
        }
    }
}

impl Evaluator for PlainEval<'_> {
    fn sample(&self, y: Complex64) -> Option<Sample> {
        let d = point_diagnostics(self.p, y).ok()?;
        let backward_error = match self.backward {
            Some(mode) => backward_error(&d, y, &self.norms, self.p.n(), mode),
            None => f64::NAN,
        };
        Some(Sample {
            log_derivative: d.log_derivative,
            rcond: d.rcond,
            log_abs_det: d.log_abs_det,
            exact_root: d.exact_root,
            backward_error,
        })
    }
}

/// `Q(z) = (γz+δ)^k P(x(z))`: `Q'/Q = nkγ/(γz+δ) + (p'/p)(x) · det/(γz+δ)²`.
struct MobiusEval<'a> {
    inner: PlainEval<'a>,
    map: MobiusMap,
    grade: f64,
}

impl Evaluator for MobiusEval<'_> {
    fn sample(&self, z: Complex64) -> Option<Sample> {
        let den = self.map.gamma * z + self.map.delta;
        if den == ZERO {
            return None;
        }
        let x = (self.map.alpha * z + self.map.beta) / den;
        let mut s = self.inner.sample(x)?;
        s.log_derivative =
            self.grade * self.map.gamma / den + s.log_derivative * self.map.determinant() / (den * den);
        s.log_abs_det += self.grade * den.norm().ln();
        Some(s)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct IterSettings {
    pub variant: Variant,
    pub tau1: f64,
    pub tau2: f64,
    pub backward_tol: Option<f64>,
    pub max_iters: usize,
    pub threads: usize,
    pub small_bound: Option<f64>,
    pub large_bound: Option<f64>,
}

impl IterSettings {
    pub fn from_config(config: &SolverConfig, n: usize) -> Self {
        Self {
            variant: config.variant,
            tau1: config.tau1_for(n).powi(config.defective_exponent as i32),
            tau2: config.tau2,
            backward_tol: config.backward_tol,
            max_iters: config.max_vector_iters,
            threads: config.threads,
            small_bound: None,
            large_bound: None,
        }
    }

    pub fn with_stricter(mut self, small: Option<f64>, large: Option<f64>) -> Self {
        self.small_bound = small;
        self.large_bound = large;
        self
    }

    fn stricter_applies(&self, y: f64) -> bool {
        self.small_bound.is_some_and(|b| y < b) || self.large_bound.is_some_and(|b| y > b)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PointState {
    pub value: Complex64,
    pub status: Option<Status>,
    pub iterations: usize,
    pub last_correction: f64,
    pub rcond: f64,
    pub log_abs_det: f64,
}

impl PointState {
    fn new(value: Complex64) -> Self {
        Self {
            value,
            status: None,
            iterations: 0,
            last_correction: f64::INFINITY,
            rcond: 0.0,
            log_abs_det: f64::NAN,
        }
    }

    pub fn diverged(&self) -> bool {
        self.status == Some(Status::DivergedInfinity)
    }

    pub fn estimate(&self) -> EigenEstimate {
        EigenEstimate {
            value: if self.diverged() {
                Eigenvalue::Infinite
            } else {
                Eigenvalue::Finite(self.value)
            },
            status: self.status.unwrap_or(Status::MaxIters),
            iterations: self.iterations,
            last_correction: self.last_correction,
            rcond: self.rcond,
            log_abs_det: self.log_abs_det,
        }
    }
}

pub(crate) struct DriverOutput {
    pub points: Vec<PointState>,
    pub vector_iterations: usize,
    pub total_scalar: usize,
}

/// Optional mirror `f` making the iteration act on the pairs `{y, f(y)}`.
pub(crate) type Mirror<'a> = Option<&'a (dyn Fn(Complex64) -> Complex64 + Sync)>;

struct StepOutcome {
    value: Complex64,
    halt: Option<Status>,
    correction: f64,
    rcond: f64,
    log_abs_det: f64,
}

fn scalar_update(
    eval: &dyn Evaluator,
    y: Complex64,
    repulsion: Complex64,
    previous: f64,
    st: &IterSettings,
) -> StepOutcome {
    let halted = |value, halt, correction, rcond, lad| StepOutcome {
        value,
        halt: Some(halt),
        correction,
        rcond,
        log_abs_det: lad,
    };
    let Some(s) = eval.sample(y) else {
        return halted(y, Status::DivergedInfinity, f64::INFINITY, 0.0, f64::INFINITY);
    };
    if s.exact_root {
        return halted(y, Status::ExactRoot, 0.0, 0.0, f64::NEG_INFINITY);
    }
    let denom = s.log_derivative - repulsion;
    let c = if denom != ZERO && denom.is_finite() {
        ONE / denom
    } else if s.log_derivative != ZERO {
        // plain Newton step when the Aberth denominator vanishes
        ONE / s.log_derivative
    } else {
        y * 1e-3 + 1e-3
    };
    let ca = c.norm();
    let ya = y.norm();
    if st.stricter_applies(ya) {
        if let Some(h) = stricter_stop(ca, ya, s.rcond, st.tau1, st.tau2) {
            let v = if h == Status::ConvergedCorrection { y - c } else { y };
            return halted(v, h, ca, s.rcond, s.log_abs_det);
        }
    } else {
        if s.rcond < st.tau1 {
            return halted(y, Status::ConvergedRcond, ca, s.rcond, s.log_abs_det);
        }
        if ca <= st.tau2 * ya {
            return halted(y - c, Status::ConvergedCorrection, ca, s.rcond, s.log_abs_det);
        }
        if st.backward_tol.is_some_and(|t| s.backward_error <= t) {
            return halted(y, Status::ConvergedBackward, ca, s.rcond, s.log_abs_det);
        }
        // rounding noise in the evaluation: the correction is already small
        // and has stopped decreasing
        if ca <= st.tau2.sqrt() * ya && ca >= previous {
            return halted(y, Status::ConvergedCorrection, ca, s.rcond, s.log_abs_det);
        }
    }
    let next = y - c;
    if !next.is_finite() || next.norm() > DIVERGENCE_MODULUS {
        return halted(next, Status::DivergedInfinity, ca, s.rcond, s.log_abs_det);
    }
    StepOutcome {
        value: next,
        halt: None,
        correction: ca,
        rcond: s.rcond,
        log_abs_det: s.log_abs_det,
    }
}

fn repulsion(
    y: &[Complex64],
    skip: &[bool],
    j: usize,
    knowns: &[(Complex64, f64)],
    mirror: Mirror<'_>,
) -> Complex64 {
    let yj = y[j];
    let mut s = ZERO;
    for (l, &yl) in y.iter().enumerate() {
        if l != j && !skip[l] {
            s += ONE / (yj - yl);
        }
    }
    for &(v, m) in knowns {
        if m > 0.0 {
            s += m / (yj - v);
        }
    }
    if let Some(f) = mirror {
        for (l, &yl) in y.iter().enumerate() {
            if !skip[l] {
                let d = yj - f(yl);
                if d != ZERO {
                    s += ONE / d;
                }
            }
        }
    }
    s
}

/// Separates active approximations that (nearly) coincide with another point.
fn separate(points: &mut [PointState]) {
    let eps = f64::EPSILON;
    let len = points.len();
    for i in 0..len {
        if points[i].diverged() {
            continue;
        }
        for j in i + 1..len {
            if points[j].diverged() {
                continue;
            }
            let (a, b) = (points[i].value, points[j].value);
            if (a - b).norm() > eps * (a.norm() + b.norm()) {
                continue;
            }
            let rot = Complex64::from_polar(1.0, 1e-3);
            let nudge = |z: Complex64, r: Complex64, sign: f64| {
                if z == ZERO {
                    Complex64::new(sign * 1e-3, 1e-3)
                } else {
                    z * r
                }
            };
            if points[i].status.is_none() {
                points[i].value = nudge(a, rot, 1.0);
            }
            if points[j].status.is_none() {
                points[j].value = nudge(b, rot.conj(), -1.0);
            }
        }
    }
}

pub(crate) fn run_aberth(
    eval: &dyn Evaluator,
    starts: Vec<Complex64>,
    knowns: &[(Complex64, f64)],
    mirror: Mirror<'_>,
    st: &IterSettings,
) -> Result<DriverOutput> {
    let mut points: Vec<PointState> = starts.into_iter().map(PointState::new).collect();
    let pool = if st.threads > 1 && st.variant == Variant::Jacobi {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(st.threads)
                .build()
                .map_err(|e| PepError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };
    let mut total_scalar = 0;
    let mut sweeps = 0;
    while sweeps < st.max_iters && points.iter().any(|p| p.status.is_none()) {
        separate(&mut points);
        sweeps += 1;
        match st.variant {
            Variant::GaussSeidel => {
                let mut y: Vec<Complex64> = points.iter().map(|p| p.value).collect();
                let mut skip: Vec<bool> = points.iter().map(PointState::diverged).collect();
                for j in 0..points.len() {
                    if points[j].status.is_some() {
                        continue;
                    }
                    let a = repulsion(&y, &skip, j, knowns, mirror);
                    let out = scalar_update(eval, y[j], a, points[j].last_correction, st);
                    total_scalar += 1;
                    apply(&mut points[j], &out);
                    y[j] = points[j].value;
                    skip[j] = points[j].diverged();
                }
            }
            Variant::Jacobi => {
                let y: Vec<Complex64> = points.iter().map(|p| p.value).collect();
                let skip: Vec<bool> = points.iter().map(PointState::diverged).collect();
                let last: Vec<f64> = points.iter().map(|p| p.last_correction).collect();
                let active: Vec<usize> = (0..points.len()).filter(|&j| points[j].status.is_none()).collect();
                let step = |&j: &usize| {
                    let a = repulsion(&y, &skip, j, knowns, mirror);
                    (j, scalar_update(eval, y[j], a, last[j], st))
                };
                let outs: Vec<(usize, StepOutcome)> = match &pool {
                    Some(pool) => pool.install(|| active.par_iter().map(step).collect()),
                    None => active.iter().map(step).collect(),
                };
                total_scalar += outs.len();
                for (j, out) in outs {
                    apply(&mut points[j], &out);
                }
            }
        }
    }
    Ok(DriverOutput {
        points,
        vector_iterations: sweeps,
        total_scalar,
    })
}

fn apply(p: &mut PointState, out: &StepOutcome) {
    p.value = out.value;
    p.status = out.halt;
    p.iterations += 1;
    p.last_correction = out.correction;
    p.rcond = out.rcond;
    p.log_abs_det = out.log_abs_det;
}
