//! Structured iteration for spectra closed under a self-inverse Möbius map
//! `f(x) = (ax + b)/(cx − a)`, and for polynomials whose determinant is a
//! perfect square.
//!
//! Pairs `{λ, f(λ)}` are represented by one value `z = x f(x)` (`a ≠ 0`) or
//! `z = x + f(x)` (`a = 0`). The iteration runs on a half-length vector in
//! `z`, and each pair is recovered from a quadratic, so the symmetry holds to
//! rounding.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eai::{
    check_problem, circle_points, detect_deflation, polygon_points, run_aberth, EigenEstimate,
    Eigenvalue, Evaluator, IterSettings, PlainEval, Sample, SolverConfig, SpectrumResult, Starting,
    Status,
};
use crate::error::{PepError, Result};
use crate::linalg::{lu_factor, point_diagnostics};
use crate::matpoly::MatrixPolynomial;
use crate::matrix::CMatrix;
use crate::starting::{initial_points, newton_polygon, radius_range};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A declared spectral symmetry.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureSpec {
    #[default]
    None,
    /// `f(x) = 1/x`, i.e. `(a, b, c) = (0, 1, 1)`.
    Palindromic,
    /// `f(x) = −x`, i.e. `(a, b, c) = (1, 0, 0)`.
    EvenOdd,
    /// `det P(x) = q(x)²` (skew-symmetric or skew-Hamiltonian coefficients).
    SkewSquare,
    Mobius {
        a: Complex64,
        b: Complex64,
        c: Complex64,
        /// Fixed points of `f` known to be eigenvalues, with multiplicity.
        #[serde(default)]
        exceptional: Vec<(Complex64, usize)>,
    },
}

impl StructureSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, StructureSpec::None)
    }

    pub fn name(&self) -> &'static str {
        match self {
            StructureSpec::None => "none",
            StructureSpec::Palindromic => "palindromic",
            StructureSpec::EvenOdd => "even_odd",
            StructureSpec::SkewSquare => "skew",
            StructureSpec::Mobius { .. } => "mobius",
        }
    }

    pub fn mobius(a: Complex64, b: Complex64, c: Complex64) -> Self {
        StructureSpec::Mobius {
            a,
            b,
            c,
            exceptional: Vec::new(),
        }
    }

    /// The self-inverse map, for the kinds that have one.
    pub fn symmetry(&self) -> Result<Option<SelfInverse>> {
        match self {
            StructureSpec::Palindromic => Ok(Some(SelfInverse { a: ZERO, b: ONE, c: ONE })),
            StructureSpec::EvenOdd => Ok(Some(SelfInverse { a: ONE, b: ZERO, c: ZERO })),
            StructureSpec::Mobius { a, b, c, .. } => SelfInverse::new(*a, *b, *c).map(Some),
            StructureSpec::None | StructureSpec::SkewSquare => Ok(None),
        }
    }
}

/// `f(x) = (ax + b)/(cx − a)` with `a² + bc ≠ 0`, an involution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfInverse {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl SelfInverse {
    pub fn new(a: Complex64, b: Complex64, c: Complex64) -> Result<Self> {
        if a * a + b * c == ZERO {
            return Err(PepError::DegenerateMobius);
        }
        Ok(Self { a, b, c })
    }

    /// `cx − a`, the denominator of `f`.
    #[inline]
    pub fn denom(&self, x: Complex64) -> Complex64 {
        self.c * x - self.a
    }

    /// `f(x)`; `None` at the pole.
    pub fn apply(&self, x: Complex64) -> Option<Complex64> {
        let d = self.denom(x);
        (d != ZERO).then(|| (self.a * x + self.b) / d)
    }

    fn pole_error<T>(&self) -> Result<T> {
        Err(PepError::MobiusPole)
    }

    /// `z = x f(x)` when `a ≠ 0`, `z = x + f(x)` when `a = 0`.
    pub fn z_of_x(&self, x: Complex64) -> Result<Complex64> {
        let d = self.denom(x);
        if d == ZERO {
            return self.pole_error();
        }
        let fx = (self.a * x + self.b) / d;
        Ok(if self.a != ZERO { x * fx } else { x + fx })
    }

    /// `dz/dx`.
    pub fn z_prime(&self, x: Complex64) -> Complex64 {
        if self.a != ZERO {
            let d = self.denom(x);
            self.a * (self.c * x * x - 2.0 * self.a * x - self.b) / (d * d)
        } else {
            ONE - self.b / (self.c * x * x)
        }
    }

    /// Quadratic `A x² + B x + C` whose roots are the two preimages of `z`.
    pub fn quadratic(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        if self.a != ZERO {
            (self.a, self.b - z * self.c, z * self.a)
        } else {
            (self.c, -z * self.c, self.b)
        }
    }

    /// The two preimages of `z`, computed without cancellation; the second is
    /// formed from the product of the roots.
    pub fn branches(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let (qa, qb, qc) = self.quadratic(z);
        if qa == ZERO {
            return Err(PepError::DegenerateQuadratic);
        }
        if qb == ZERO {
            let x1 = (-qc / qa).sqrt();
            return Ok((x1, -x1));
        }
        let mut s = (qb * qb - 4.0 * qa * qc).sqrt();
        if (qb.conj() * s).re < 0.0 {
            s = -s;
        }
        let q = -(qb + s) * 0.5;
        if q == ZERO {
            return Ok((ZERO, ZERO));
        }
        Ok((q / qa, qc / q))
    }

    /// Finite fixed points of `f`: roots of `cx² − 2ax − b`.
    pub fn fixed_points(&self) -> Vec<Complex64> {
        if self.c == ZERO {
            vec![-self.b / (2.0 * self.a)]
        } else {
            let s = (self.a * self.a + self.b * self.c).sqrt();
            vec![(self.a + s) / self.c, (self.a - s) / self.c]
        }
    }

    /// Whether `∞` is a fixed point (`c = 0`).
    pub fn fixes_infinity(&self) -> bool {
        self.c == ZERO
    }
}

/// `z(x)` under a declared structure.
pub fn z_of_x(spec: &StructureSpec, x: Complex64) -> Result<Complex64> {
    require_symmetry(spec)?.z_of_x(x)
}

/// The two preimages of `z` under a declared structure.
pub fn x_branches_of_z(spec: &StructureSpec, z: Complex64) -> Result<(Complex64, Complex64)> {
    require_symmetry(spec)?.branches(z)
}

fn require_symmetry(spec: &StructureSpec) -> Result<SelfInverse> {
    spec.symmetry()?
        .ok_or_else(|| PepError::Unsupported(format!("structure '{}' has no pairing map", spec.name())))
}

/// `q(z)/q'(z)` at `z = z(x)` for the full grade `nk`, no deflation.
/// For the squared-determinant kind this is `2 p(x)/p'(x)`.
pub fn q_newton_correction(p: &MatrixPolynomial, spec: &StructureSpec, x: Complex64) -> Result<Complex64> {
    let d = point_diagnostics(p, x)?;
    if d.exact_root {
        return Ok(ZERO);
    }
    if matches!(spec, StructureSpec::SkewSquare) {
        return Ok(2.0 / d.log_derivative);
    }
    let f = require_symmetry(spec)?;
    let half = p.grade() as f64 / 2.0;
    Ok(f.z_prime(x) / (d.log_derivative - half * f.c / f.denom(x)))
}

/// Outcome of a structured solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSpectrum {
    pub spectrum: SpectrumResult,
    /// Roots of the transformed polynomial (for the squared kind, roots of `q`).
    pub z_roots: Vec<Eigenvalue>,
    /// Recovered pairs, aligned with `z_roots`.
    pub pairs: Vec<(Eigenvalue, Eigenvalue)>,
    /// Eigenvalues fixed before the iteration.
    pub exceptional: Vec<EigenEstimate>,
    /// Degree `2·|z_roots|` of the part handled in pairs.
    pub paired_degree: usize,
}

/// How a declared structure was matched by the coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verified {
    /// `(cx − a)^k P(f(x)) = κ · P(x)ᵀ` (or without transpose).
    pub kappa: Complex64,
    pub transposed: bool,
    pub residual: f64,
}

/// Checks `(cx − a)^k P(f(x)) = κ P(x)` or `κ P(x)ᵀ` coefficientwise.
pub fn verify_symmetry(p: &MatrixPolynomial, f: &SelfInverse, tol: f64, name: &str) -> Result<Verified> {
    let k = p.degree();
    let n = p.n();
    let mut r = vec![CMatrix::zeros(n); k + 1];
    for j in 0..=k {
        let mut w = vec![ONE];
        for _ in 0..j {
            w = poly_mul(&w, &[f.b, f.a]);
        }
        for _ in j..k {
            w = poly_mul(&w, &[-f.a, f.c]);
        }
        for (i, &wi) in w.iter().enumerate() {
            if wi != ZERO {
                r[i].axpy(wi, p.coeff(j));
            }
        }
    }
    let rnorm: f64 = r.iter().map(|m| m.norm_fro().powi(2)).sum::<f64>().sqrt();
    let mut best: Option<Verified> = None;
    for transposed in [true, false] {
        let target: Vec<CMatrix> = p
            .coeffs()
            .iter()
            .map(|m| if transposed { m.transpose() } else { m.clone() })
            .collect();
        let mut num = ZERO;
        let mut den = 0.0;
        for (t, ri) in target.iter().zip(&r) {
            for (&tv, &rv) in t.as_slice().iter().zip(ri.as_slice()) {
                num += tv.conj() * rv;
                den += tv.norm_sqr();
            }
        }
        let kappa = num / den;
        let res: f64 = target
            .iter()
            .zip(&r)
            .map(|(t, ri)| ri.sub(&t.scale(kappa)).norm_fro().powi(2))
            .sum::<f64>()
            .sqrt()
            / rnorm.max(f64::MIN_POSITIVE);
        let cand = Verified {
            kappa,
            transposed,
            residual: res,
        };
        if best.is_none_or(|b| res < b.residual) {
            best = Some(cand);
        }
    }
    let best = best.expect("two candidates");
    if !(best.residual <= tol) || best.kappa == ZERO {
        return Err(PepError::StructureViolation {
            symmetry: name.to_string(),
            residual: best.residual,
        });
    }
    Ok(best)
}

/// The canonical skew form `J = [[0, I], [−I, 0]]` of even order.
pub fn j_matrix(n: usize) -> Result<CMatrix> {
    if n % 2 != 0 {
        return Err(PepError::Unsupported("J requires an even dimension".into()));
    }
    let m = n / 2;
    Ok(CMatrix::from_fn(n, |i, j| {
        if j == i + m {
            ONE
        } else if i == j + m {
            -ONE
        } else {
            ZERO
        }
    }))
}

/// Left-multiplies every coefficient by `J`, turning alternating
/// Hamiltonian/skew-Hamiltonian coefficients into symmetric/skew ones.
pub fn hamiltonian_to_even_odd(p: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let j = j_matrix(p.n())?;
    MatrixPolynomial::new(p.coeffs().iter().map(|c| j.matmul(c)).collect())
}

fn skew_residual(coeffs: impl Iterator<Item = CMatrix>, total: f64) -> f64 {
    let s: f64 = coeffs
        .map(|m| {
            let d = m.sub(&m.transpose().scale(-ONE));
            d.norm_fro().powi(2)
        })
        .sum::<f64>()
        .sqrt();
    s / total.max(f64::MIN_POSITIVE)
}

/// Skew-symmetric coefficients, or `J P_j` skew-symmetric for all `j`.
pub fn verify_skew(p: &MatrixPolynomial, tol: f64) -> Result<()> {
    let total: f64 = p.coeffs().iter().map(|m| m.norm_fro().powi(2)).sum::<f64>().sqrt();
    let direct = skew_residual(p.coeffs().iter().cloned(), total);
    if direct <= tol {
        return Ok(());
    }
    let j = j_matrix(p.n())?;
    let ham = skew_residual(p.coeffs().iter().map(|c| j.matmul(c)), total);
    if ham <= tol {
        return Ok(());
    }
    Err(PepError::StructureViolation {
        symmetry: "skew".into(),
        residual: direct.min(ham),
    })
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Known eigenvalue fixed before the iteration.
#[derive(Clone, Copy, Debug)]
struct Known {
    value: Complex64,
    mult: usize,
    status: Status,
}

/// Deflation bookkeeping for a pairing map.
#[derive(Clone, Debug)]
struct Plan {
    knowns: Vec<Known>,
    infinite: usize,
    /// Degree still to be handled in pairs.
    degree: usize,
}

impl Plan {
    fn finite_terms(&self) -> Vec<(Complex64, f64)> {
        self.knowns.iter().map(|k| (k.value, k.mult as f64)).collect()
    }

    fn push(&mut self, value: Complex64, mult: usize, status: Status) -> Result<()> {
        if mult == 0 {
            return Ok(());
        }
        self.degree = self.degree.checked_sub(mult).ok_or(PepError::OddPairedDegree(0))?;
        match self.knowns.iter_mut().find(|k| k.value == value && k.status == status) {
            Some(k) => k.mult += mult,
            None => self.knowns.push(Known { value, mult, status }),
        }
        Ok(())
    }

    fn push_infinite(&mut self, m: usize) -> Result<()> {
        self.degree = self.degree.checked_sub(m).ok_or(PepError::OddPairedDegree(0))?;
        self.infinite += m;
        Ok(())
    }
}

fn initial_plan(p: &MatrixPolynomial, f: &SelfInverse, spec: &StructureSpec, config: &SolverConfig) -> Result<Plan> {
    let (m_zero, m_inf) = detect_deflation(p, config.rank_tol_for(p.n(), p.degree()));
    let mut plan = Plan {
        knowns: Vec::new(),
        infinite: 0,
        degree: p.grade(),
    };
    if f.a == ZERO {
        // zero and infinity are partners
        let m = m_zero.max(m_inf);
        plan.push_infinite(m)?;
        plan.push(ZERO, m, Status::DeflatedZero)?;
    } else {
        plan.push_infinite(m_inf)?;
        if !f.fixes_infinity() {
            plan.push(f.a / f.c, m_inf, Status::DeflatedStructural)?;
        }
        plan.push(ZERO, m_zero, Status::DeflatedZero)?;
        if f.b != ZERO {
            plan.push(-f.b / f.a, m_zero, Status::DeflatedStructural)?;
        }
    }
    if let StructureSpec::Mobius { exceptional, .. } = spec {
        for &(e, m) in exceptional {
            let fe = f.apply(e);
            if fe.is_none_or(|v| (v - e).norm() > 1e-8 * (1.0 + e.norm())) {
                return Err(PepError::InvalidConfig(format!("declared exceptional value {e} is not a fixed point")));
            }
            plan.push(e, m, Status::DeflatedStructural)?;
        }
    }
    Ok(plan)
}

/// `ln σ` in `D(x)^G p̃(f(x)) = σ p̃(x)`, where `p̃` is `det P` with the
/// planned eigenvalues divided out and `G` its formal degree.
fn log_sigma(p: &MatrixPolynomial, f: &SelfInverse, plan: &Plan) -> Option<Complex64> {
    let segs = newton_polygon(&p.coeff_norms2()).ok()?;
    let total: usize = segs.iter().map(|s| s.count).sum();
    let log_r = segs.iter().map(|s| s.count as f64 * s.radius.ln()).sum::<f64>() / total.max(1) as f64;
    let radius = log_r.exp().clamp(1e-3, 1e3);
    let mut best: Option<(f64, Complex64)> = None;
    for theta in [0.7, 2.1, 4.3, 5.5] {
        let x = Complex64::from_polar(radius, theta);
        let fx = f.apply(x)?;
        let (Ok(l1), Ok(l2)) = (lu_factor(&p.eval(x)), lu_factor(&p.eval(fx))) else {
            continue;
        };
        if l1.is_singular() || l2.is_singular() {
            continue;
        }
        let quality = l1.rcond(p.eval(x).norm1()).min(l2.rcond(p.eval(fx).norm1()));
        let mut ls = plan.degree as f64 * f.denom(x).ln() + l2.log_det() - l1.log_det();
        for k in &plan.knowns {
            ls -= k.mult as f64 * ((fx - k.value).ln() - (x - k.value).ln());
        }
        if best.is_none_or(|b| quality > b.0) {
            best = Some((quality, ls));
        }
    }
    best.map(|b| b.1)
}

fn wrapped_distance(u: Complex64) -> f64 {
    let im = (u.im + PI).rem_euclid(TAU) - PI;
    Complex64::new(u.re, im).norm()
}

/// Adds the fixed-point eigenvalues forced by the determinant identity.
fn force_exceptional(p: &MatrixPolynomial, f: &SelfInverse, plan: &mut Plan) -> Result<()> {
    let Some(mut ls) = log_sigma(p, f, plan) else {
        return Ok(());
    };
    let fixed = f.fixed_points();
    let thresh = 1e-4;
    loop {
        let mut changed = false;
        for &e in &fixed {
            let de = f.denom(e);
            if plan.degree == 0 || de == ZERO {
                continue;
            }
            if wrapped_distance(ls - plan.degree as f64 * de.ln()) > thresh {
                plan.push(e, 1, Status::DeflatedStructural)?;
                ls = ls + Complex64::new(0.0, PI) - de.ln();
                changed = true;
            }
        }
        if f.fixes_infinity() && plan.degree > 0 && wrapped_distance(ls - plan.degree as f64 * f.a.ln()) > thresh {
            plan.push_infinite(1)?;
            ls -= (-f.a).ln();
            changed = true;
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

/// Evaluator for `q(z)` through one branch `x` of `z`.
struct ZEval<'a> {
    inner: PlainEval<'a>,
    f: SelfInverse,
    knowns: Vec<(Complex64, f64)>,
    half: f64,
}

impl ZEval<'_> {
    fn branch(&self, z: Complex64) -> Option<Complex64> {
        let (x1, x2) = self.f.branches(z).ok()?;
        let (d1, d2) = (self.f.denom(x1).norm(), self.f.denom(x2).norm());
        Some(if d2 > d1 || (d2 == d1 && x2.norm() > x1.norm()) { x2 } else { x1 })
    }
}

impl Evaluator for ZEval<'_> {
    fn sample(&self, z: Complex64) -> Option<Sample> {
        let x = self.branch(z)?;
        let mut s = self.inner.sample(x)?;
        if s.exact_root {
            return Some(s);
        }
        let mut t = s.log_derivative;
        let mut near_known = false;
        for &(e, m) in &self.knowns {
            t -= m / (x - e);
            near_known |= (x - e).norm() <= 1e-3 * (1.0 + e.norm());
        }
        t -= self.half * self.f.c / self.f.denom(x);
        s.log_derivative = t / self.f.z_prime(x);
        if !s.log_derivative.is_finite() {
            s.log_derivative = Complex64::new(f64::INFINITY, 0.0);
        }
        if near_known {
            // the conditioning of P(x) reflects the deflated eigenvalue, not q
            s.rcond = 1.0;
        }
        Some(s)
    }
}

/// `p'/(2p)`: the logarithmic derivative of `q` with `det P = q²`.
struct HalfEval<'a>(PlainEval<'a>);

impl Evaluator for HalfEval<'_> {
    fn sample(&self, x: Complex64) -> Option<Sample> {
        let mut s = self.0.sample(x)?;
        s.log_derivative *= 0.5;
        Some(s)
    }
}

/// Solves a problem with a declared structure.
pub fn solve_structured(p: &MatrixPolynomial, config: &SolverConfig) -> Result<PairedSpectrum> {
    check_problem(p, config)?;
    match &config.structure {
        StructureSpec::None => Err(PepError::InvalidConfig("no structure declared".into())),
        StructureSpec::SkewSquare => solve_square(p, config),
        spec => {
            let f = require_symmetry(spec)?;
            solve_paired(p, &f, spec, config)
        }
    }
}

fn z_starts(p: &MatrixPolynomial, f: &SelfInverse, m: usize, config: &SolverConfig) -> Result<Vec<Complex64>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    if let Starting::SingleCircle(r) = config.starting {
        return Ok(circle_points(r, m, 0.4));
    }
    let xs = polygon_points(p, p.grade())?;
    let mut moduli: Vec<f64> = xs
        .iter()
        .filter_map(|&x| f.z_of_x(x).ok())
        .map(|z| z.norm())
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    if moduli.is_empty() {
        return Ok(circle_points(1.0, m, 0.4));
    }
    moduli.sort_by(f64::total_cmp);
    let len = moduli.len();
    Ok((0..m)
        .map(|j| {
            let idx = ((2 * j + 1) * len / (2 * m)).min(len - 1);
            Complex64::from_polar(moduli[idx], TAU * j as f64 / m as f64 + 0.4)
        })
        .collect())
}

fn solve_paired(p: &MatrixPolynomial, f: &SelfInverse, spec: &StructureSpec, config: &SolverConfig) -> Result<PairedSpectrum> {
    verify_symmetry(p, f, config.structure_tol, spec.name())?;
    let mut plan = initial_plan(p, f, spec, config)?;
    force_exceptional(p, f, &mut plan)?;
    if plan.degree % 2 != 0 {
        return Err(PepError::OddPairedDegree(plan.degree));
    }
    let m = plan.degree / 2;
    let n = p.n();
    let settings = IterSettings::from_config(config, n);
    let knowns = plan.finite_terms();
    let starts = z_starts(p, f, m, config)?;

    let (mut pairs, z_points, out) = if config.naive_structured {
        let eval = PlainEval::new(p, config);
        let xs: Vec<Complex64> = starts
            .iter()
            .map(|&z| {
                let probe = ZEval {
                    inner: PlainEval::new(p, config),
                    f: *f,
                    knowns: Vec::new(),
                    half: 0.0,
                };
                probe.branch(z).unwrap_or(z)
            })
            .collect();
        let fm = *f;
        let mirror = move |x: Complex64| fm.apply(x).unwrap_or(Complex64::new(f64::INFINITY, 0.0));
        let out = run_aberth(&eval, xs, &knowns, Some(&mirror), &settings)?;
        let mut pairs = Vec::with_capacity(m);
        let mut zs = Vec::with_capacity(m);
        for pt in &out.points {
            if pt.diverged() {
                pairs.push(infinite_pair(f));
                zs.push(Eigenvalue::Infinite);
                continue;
            }
            match f.z_of_x(pt.value).and_then(|z| f.branches(z).map(|b| (z, b))) {
                Ok((z, (x1, x2))) => {
                    pairs.push((Eigenvalue::Finite(x1), Eigenvalue::Finite(x2)));
                    zs.push(Eigenvalue::Finite(z));
                }
                Err(_) => {
                    pairs.push(infinite_pair(f));
                    zs.push(Eigenvalue::Infinite);
                }
            }
        }
        (pairs, zs, out)
    } else {
        let eval = ZEval {
            inner: PlainEval::new(p, config),
            f: *f,
            knowns: knowns.clone(),
            half: m as f64,
        };
        let out = run_aberth(&eval, starts, &[], None, &settings)?;
        let mut pairs = Vec::with_capacity(m);
        let mut zs = Vec::with_capacity(m);
        for pt in &out.points {
            if pt.diverged() {
                pairs.push(infinite_pair(f));
                zs.push(Eigenvalue::Infinite);
                continue;
            }
            let (x1, x2) = f.branches(pt.value)?;
            pairs.push((Eigenvalue::Finite(x1), Eigenvalue::Finite(x2)));
            zs.push(Eigenvalue::Finite(pt.value));
        }
        (pairs, zs, out)
    };
    let z_roots = polish_near_fixed_points(p, f, &plan, &mut pairs, z_points);

    let mut estimates = Vec::with_capacity(p.grade());
    for (pt, (x1, x2)) in out.points.iter().zip(&pairs) {
        let base = pt.estimate();
        for v in [x1, x2] {
            let mut e = base;
            e.value = *v;
            estimates.push(e);
        }
    }
    let mut exceptional = Vec::new();
    for k in &plan.knowns {
        for _ in 0..k.mult {
            exceptional.push(EigenEstimate::deflated(Eigenvalue::Finite(k.value), k.status));
        }
    }
    for _ in 0..plan.infinite {
        exceptional.push(EigenEstimate::deflated(Eigenvalue::Infinite, Status::DeflatedInfinity));
    }
    estimates.extend(exceptional.iter().copied());
    debug_assert_eq!(estimates.len(), p.grade());
    Ok(PairedSpectrum {
        spectrum: SpectrumResult {
            estimates,
            total_scalar_iterations: out.total_scalar,
            vector_iterations: out.vector_iterations,
            active_length: m,
            config: config.clone(),
            mobius: None,
            warnings: Vec::new(),
        },
        z_roots,
        pairs,
        exceptional,
        paired_degree: plan.degree,
    })
}

/// `z = ∞` corresponds to the pole `a/c` and `∞` (or `∞` twice when `c = 0`).
fn infinite_pair(f: &SelfInverse) -> (Eigenvalue, Eigenvalue) {
    if f.fixes_infinity() {
        (Eigenvalue::Infinite, Eigenvalue::Infinite)
    } else {
        (Eigenvalue::Infinite, Eigenvalue::Finite(f.a / f.c))
    }
}

/// Pairs recovered next to a fixed point of `f` lose accuracy (`z'` vanishes
/// there); refine one member by a few Aberth steps on `det P` against every
/// other eigenvalue and recompute the pair from the quadratic.
fn polish_near_fixed_points(
    p: &MatrixPolynomial,
    f: &SelfInverse,
    plan: &Plan,
    pairs: &mut [(Eigenvalue, Eigenvalue)],
    z_points: Vec<Eigenvalue>,
) -> Vec<Eigenvalue> {
    let mut z_roots = z_points;
    for i in 0..pairs.len() {
        let (Eigenvalue::Finite(mut x1), Eigenvalue::Finite(_)) = pairs[i] else {
            continue;
        };
        if f.z_prime(x1).norm() >= 1e-6 * (1.0 + x1.norm()) {
            continue;
        }
        let mut others: Vec<Complex64> = Vec::new();
        for (j, &(u, v)) in pairs.iter().enumerate() {
            if j != i {
                others.extend([u, v].iter().filter_map(Eigenvalue::finite));
            }
        }
        for k in &plan.knowns {
            others.extend(std::iter::repeat_n(k.value, k.mult));
        }
        for _ in 0..3 {
            let Ok(d) = point_diagnostics(p, x1) else { break };
            if d.exact_root {
                break;
            }
            let mut a: Complex64 = others.iter().map(|&o| ONE / (x1 - o)).sum();
            if let Some(fx) = f.apply(x1) {
                if fx != x1 {
                    a += ONE / (x1 - fx);
                }
            }
            let den = d.log_derivative - a;
            if den == ZERO || !den.is_finite() {
                break;
            }
            let step = ONE / den;
            if !step.is_finite() {
                break;
            }
            x1 -= step;
        }
        if let Ok(z) = f.z_of_x(x1) {
            if let Ok((u, v)) = f.branches(z) {
                pairs[i] = (Eigenvalue::Finite(u), Eigenvalue::Finite(v));
                z_roots[i] = Eigenvalue::Finite(z);
            }
        }
    }
    z_roots
}

fn solve_square(p: &MatrixPolynomial, config: &SolverConfig) -> Result<PairedSpectrum> {
    let n = p.n();
    if n % 2 != 0 {
        return Err(PepError::Unsupported("a squared determinant needs even n".into()));
    }
    verify_skew(p, config.structure_tol)?;
    let k = p.degree();
    let half_grade = p.grade() / 2;
    let (m_zero, m_inf) = detect_deflation(p, config.rank_tol_for(n, k));
    let mz = m_zero.div_ceil(2).min(half_grade);
    let mi = m_inf.div_ceil(2).min(half_grade - mz);
    let active = half_grade - mz - mi;

    let segs = newton_polygon(&p.coeff_norms2())?;
    let (rmin, rmax) = radius_range(&segs);
    let starts = match config.starting {
        Starting::SingleCircle(r) => circle_points(r, active, 0.4),
        Starting::NewtonPolygon => {
            let mut pts = initial_points(&segs, n / 2, half_grade - mi);
            pts.drain(..pts.len() - active);
            pts
        }
    };
    let settings = IterSettings::from_config(config, n)
        .with_stricter((mz > 0).then_some(rmin / 10.0), (mi > 0).then_some(rmax * 10.0));
    let knowns = if mz > 0 { vec![(ZERO, mz as f64)] } else { Vec::new() };
    let eval = HalfEval(PlainEval::new(p, config));
    let out = run_aberth(&eval, starts, &knowns, None, &settings)?;

    let mut estimates = Vec::with_capacity(p.grade());
    let mut z_roots = Vec::with_capacity(active);
    let mut pairs = Vec::with_capacity(active);
    for pt in &out.points {
        let e = pt.estimate();
        estimates.push(e);
        estimates.push(e);
        z_roots.push(e.value);
        pairs.push((e.value, e.value));
    }
    let mut exceptional = Vec::new();
    exceptional.extend((0..2 * mz).map(|_| EigenEstimate::deflated(Eigenvalue::Finite(ZERO), Status::DeflatedZero)));
    exceptional.extend((0..2 * mi).map(|_| EigenEstimate::deflated(Eigenvalue::Infinite, Status::DeflatedInfinity)));
    estimates.extend(exceptional.iter().copied());
    Ok(PairedSpectrum {
        spectrum: SpectrumResult {
            estimates,
            total_scalar_iterations: out.total_scalar,
            vector_iterations: out.vector_iterations,
            active_length: active,
            config: config.clone(),
            mobius: None,
            warnings: Vec::new(),
        },
        z_roots,
        pairs,
        exceptional,
        paired_degree: 2 * active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn palindromic_map() {
        let s = StructureSpec::Palindromic;
        assert_eq!(z_of_x(&s, r(2.0)).unwrap(), r(2.5));
        let (x1, x2) = x_branches_of_z(&s, r(2.5)).unwrap();
        assert_eq!((x1, x2), (r(2.0), r(0.5)));
        assert_eq!(x1 * x2, ONE);
    }

    #[test]
    fn even_odd_map() {
        let s = StructureSpec::EvenOdd;
        let x = Complex64::new(0.0, 3.0);
        assert_eq!(z_of_x(&s, x).unwrap(), r(9.0));
        let (x1, x2) = x_branches_of_z(&s, r(9.0)).unwrap();
        assert_eq!(x1, -x2);
        assert!((x1.norm() - 3.0).abs() < 1e-15 && x1.re.abs() < 1e-15);
    }

    #[test]
    fn cayley_like_map() {
        let s = StructureSpec::mobius(ONE, ONE, ONE);
        assert_eq!(z_of_x(&s, r(3.0)).unwrap(), r(6.0));
        let (x1, x2) = x_branches_of_z(&s, r(6.0)).unwrap();
        let mut v = [x1.re, x2.re];
        v.sort_by(f64::total_cmp);
        assert!((v[0] - 2.0).abs() < 1e-15 && (v[1] - 3.0).abs() < 1e-15);
        assert!(z_of_x(&s, ONE).is_err());
    }

    #[test]
    fn newton_correction_examples() {
        // x^2 - 5/2 x + 1, q(z) = z - 5/2
        let p = MatrixPolynomial::scalar(&[ONE, r(-2.5), ONE]).unwrap();
        let c = q_newton_correction(&p, &StructureSpec::Palindromic, r(3.0)).unwrap();
        assert!((c - r(5.0 / 6.0)).norm() < 1e-15);

        // x^2 - 4 with z = -x^2 gives q(z) = z + 4
        let p = MatrixPolynomial::scalar(&[r(-4.0), ZERO, ONE]).unwrap();
        let c = q_newton_correction(&p, &StructureSpec::EvenOdd, ONE).unwrap();
        assert!((c - r(3.0)).norm() < 1e-15);

        // [[0, x^2 - 1], [1 - x^2, 0]] has det (x^2 - 1)^2
        let a = CMatrix::from_real(2, &[0.0, -1.0, 1.0, 0.0]);
        let b = CMatrix::from_real(2, &[0.0, 1.0, -1.0, 0.0]);
        let p = MatrixPolynomial::new(vec![a, CMatrix::zeros(2), b]).unwrap();
        let c = q_newton_correction(&p, &StructureSpec::SkewSquare, r(2.0)).unwrap();
        assert!((c - r(0.75)).norm() < 1e-15);
    }

    #[test]
    fn self_inverse_property() {
        let f = SelfInverse::new(Complex64::new(0.3, 1.0), Complex64::new(-2.0, 0.5), Complex64::new(1.5, -0.2)).unwrap();
        for t in 0..100 {
            let x = Complex64::from_polar(0.5 + t as f64 * 0.03, t as f64 * 0.7);
            let y = f.apply(f.apply(x).unwrap()).unwrap();
            assert!((y - x).norm() <= 1e-13 * x.norm());
        }
        assert!(SelfInverse::new(ONE, r(1.0), r(-1.0)).is_err());
    }

    #[test]
    fn j_maps_skew_hamiltonian_to_skew() {
        let j = j_matrix(4).unwrap();
        let jj = j.matmul(&j);
        assert_eq!(jj, CMatrix::identity(4).scale(-ONE));
        assert_eq!(j.transpose(), j.scale(-ONE));
        assert!(j_matrix(3).is_err());
    }

    #[test]
    fn scalar_palindromic_with_odd_grade() {
        // (x + 1)(x - 2)(x - 1/2): palindromic, -1 is forced
        let p = MatrixPolynomial::scalar(&[ONE, r(-1.5), r(-1.5), ONE]).unwrap();
        let cfg = SolverConfig {
            structure: StructureSpec::Palindromic,
            ..Default::default()
        };
        let res = solve_structured(&p, &cfg).unwrap();
        assert_eq!(res.spectrum.active_length, 1);
        assert_eq!(res.exceptional.len(), 1);
        assert_eq!(res.exceptional[0].value, Eigenvalue::Finite(r(-1.0)));
        let (a, b) = res.pairs[0];
        let (a, b) = (a.finite().unwrap(), b.finite().unwrap());
        assert!(((a - 2.0).norm() < 1e-14 && (b - 0.5).norm() < 1e-14) || ((a - 0.5).norm() < 1e-14 && (b - 2.0).norm() < 1e-14));
    }

    #[test]
    fn antipalindromic_deflates_plus_and_minus_one() {
        // (x - 1)(x + 1)(x - 3)(x - 1/3) = x^4 - (10/3)x^3 + (10/3)x - 1
        let p = MatrixPolynomial::scalar(&[r(-1.0), r(10.0 / 3.0), ZERO, r(-10.0 / 3.0), ONE]).unwrap();
        let cfg = SolverConfig {
            structure: StructureSpec::Palindromic,
            ..Default::default()
        };
        let res = solve_structured(&p, &cfg).unwrap();
        let mut ex: Vec<f64> = res.exceptional.iter().map(|e| e.value.finite().unwrap().re).collect();
        ex.sort_by(f64::total_cmp);
        assert_eq!(ex, vec![-1.0, 1.0]);
        let (a, b) = res.pairs[0];
        let prod = a.finite().unwrap() * b.finite().unwrap();
        assert!((prod - ONE).norm() < 1e-15);
        assert!((a.finite().unwrap().re.max(b.finite().unwrap().re) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn structure_violation_is_reported() {
        let p = MatrixPolynomial::scalar(&[ONE, r(3.0), r(2.0)]).unwrap();
        let cfg = SolverConfig {
            structure: StructureSpec::Palindromic,
            ..Default::default()
        };
        assert!(matches!(solve_structured(&p, &cfg), Err(PepError::StructureViolation { .. })));
    }
}
