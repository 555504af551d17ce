//! Starting approximations from the Newton polygon of the coefficient norms,
//! and annulus bounds that localize the whole spectrum.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PepError, Result};
use crate::linalg::{is_positive_definite, lu_factor, rank_lower_bound};
use crate::matpoly::MatrixPolynomial;
use crate::matrix::CMatrix;

/// One edge of the upper convex hull of `(i, ln ‖P_i‖)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonSegment {
    pub i_lo: usize,
    pub i_hi: usize,
    pub radius: f64,
    pub count: usize,
}

/// Upper convex hull of the points `(i, ln norms[i])`; zero norms are skipped.
pub fn newton_polygon(norms: &[f64]) -> Result<Vec<PolygonSegment>> {
    let pts: Vec<(usize, f64)> = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (i, v.ln()))
        .collect();
    if pts.is_empty() {
        return Err(PepError::ZeroPolynomial);
    }
    let mut hull: Vec<(usize, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let (i1, y1) = hull[hull.len() - 2];
            let (i2, y2) = hull[hull.len() - 1];
            // drop the middle point when it lies on or below the chord
            let cross = (i2 as f64 - i1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - i1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(hull
        .windows(2)
        .map(|w| {
            let ((lo, ylo), (hi, yhi)) = (w[0], w[1]);
            PolygonSegment {
                i_lo: lo,
                i_hi: hi,
                radius: ((ylo - yhi) / (hi - lo) as f64).exp(),
                count: hi - lo,
            }
        })
        .collect())
}

/// `n·count` points per segment on circles of the segment radii, with angles
/// `2πj/(n·count) + 0.4 + 0.3 s` for segment `s`. The result is trimmed to
/// `count_total` by dropping the largest moduli, or padded on the outermost
/// circle.
pub fn initial_points(segments: &[PolygonSegment], n: usize, count_total: usize) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = Vec::new();
    for (s, seg) in segments.iter().enumerate() {
        let m = n * seg.count;
        for j in 0..m {
            let theta = TAU * j as f64 / m as f64 + 0.4 + 0.3 * s as f64;
            pts.push(Complex64::from_polar(seg.radius, theta));
        }
    }
    if pts.len() > count_total {
        // segments are ordered by increasing radius
        pts.truncate(count_total);
    }
    if pts.len() < count_total {
        let r = segments.last().map_or(1.0, |s| s.radius);
        let extra = count_total - pts.len();
        for j in 0..extra {
            let theta = TAU * j as f64 / extra as f64 + 0.7 + 0.3 * segments.len() as f64;
            pts.push(Complex64::from_polar(r * 1.5, theta));
        }
    }
    pts
}

/// Starting points for the `nk - m_zero - m_inf` non-deflated eigenvalues:
/// the `m_inf` largest and `m_zero` smallest polygon points are dropped.
pub fn polygon_starts(p: &MatrixPolynomial, m_zero: usize, m_inf: usize) -> Result<Vec<Complex64>> {
    let segs = newton_polygon(&p.coeff_norms2())?;
    let total = p.grade();
    let keep = total.saturating_sub(m_zero + m_inf);
    let mut pts = initial_points(&segs, p.n(), total - m_inf.min(total));
    // points come out ordered by circle, smallest first
    pts.drain(..pts.len() - keep);
    Ok(pts)
}

/// Extreme polygon radii `(r_min, r_max)`.
pub fn radius_range(segments: &[PolygonSegment]) -> (f64, f64) {
    let lo = segments.iter().map(|s| s.radius).fold(f64::INFINITY, f64::min);
    let hi = segments.iter().map(|s| s.radius).fold(0.0, f64::max);
    if segments.is_empty() {
        (1.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Radii between which every finite eigenvalue lies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub r_lower: f64,
    pub r_upper: f64,
    /// The lower bound also satisfies the norm-based sufficient condition.
    pub certified_lower: bool,
    pub certified_upper: bool,
}

const GRID_STEPS: i32 = 480;
const GRID_PER_OCTAVE: f64 = 8.0;

/// Sampled annulus from positive definiteness of
/// `P_m* P_m − (Q(x)/x^m)* (Q(x)/x^m)` on `|x| = r`, `Q = P − P_m x^m`,
/// with `m = k` for the outer radius and `m = 0` for the inner one.
///
/// Candidate radii form the grid `anchor · 2^{t/8}`, `|t| ≤ 480`, with anchors
/// at the extreme polygon radii. The outer radius is the smallest accepted
/// grid point, the inner radius the largest.
pub fn rouche_annulus(p: &MatrixPolynomial, samples: usize) -> Result<Annulus> {
    if samples < 8 {
        return Err(PepError::InvalidConfig("annulus needs at least 8 samples".into()));
    }
    let k = p.degree();
    if k == 0 {
        return Err(PepError::DegreeZero);
    }
    let n = p.n();
    let segs = newton_polygon(&p.coeff_norms2())?;
    let (rmin, rmax) = radius_range(&segs);
    let tol = (n * k) as f64 * f64::EPSILON;
    let norms = norm_upper_bounds(p);

    let upper = if rank_lower_bound(p.leading(), tol).1 > 0 {
        None
    } else {
        grid(rmax)
            .find(|&r| accepted(p, k, r, samples))
            .map(|r| (r, upper_certified(p, &norms, r)))
    };
    let lower = if rank_lower_bound(p.coeff(0), tol).1 > 0 {
        None
    } else {
        grid(rmin)
            .rev()
            .find(|&r| accepted(p, 0, r, samples))
            .map(|r| (r, lower_certified(p, &norms, r)))
    };
    let (r_upper, certified_upper) = upper.unwrap_or((f64::INFINITY, false));
    let (mut r_lower, certified_lower) = lower.unwrap_or((0.0, false));
    if r_lower > r_upper {
        r_lower = 0.0;
    }
    Ok(Annulus {
        r_lower,
        r_upper,
        certified_lower,
        certified_upper,
    })
}

fn grid(anchor: f64) -> impl DoubleEndedIterator<Item = f64> {
    (-GRID_STEPS..=GRID_STEPS).map(move |t| anchor * (t as f64 / GRID_PER_OCTAVE).exp2())
}

/// Positive-definiteness test on `samples` points of the circle `|x| = r`.
fn accepted(p: &MatrixPolynomial, m: usize, r: f64, samples: usize) -> bool {
    let pm = p.coeff(m);
    let gram = pm.adjoint().matmul(pm);
    let scale = gram.norm_fro();
    (0..samples).all(|t| {
        let x = Complex64::from_polar(r, TAU * t as f64 / samples as f64);
        let q = p.eval_excluding(x, m);
        if !q.is_finite() {
            return false;
        }
        // (Q/x^m)*(Q/x^m) = Q*Q / r^{2m}
        let s = r.powi(-(m as i32));
        if !s.is_finite() {
            return false;
        }
        let qs = q.scale(Complex64::new(s, 0.0));
        let h = gram.sub(&qs.adjoint().matmul(&qs));
        is_positive_definite(&h, 10.0 * f64::EPSILON * scale.max(h.norm_fro()))
    })
}

/// Rigorous-in-exact-arithmetic upper bounds `√(‖P_j‖₁‖P_j‖∞) ≥ ‖P_j‖₂`.
fn norm_upper_bounds(p: &MatrixPolynomial) -> Vec<f64> {
    p.coeffs().iter().map(|c| (c.norm1() * c.norm_inf()).sqrt()).collect()
}

/// Lower bound on `σ_min(A)` from `‖A⁻¹‖₂ ≤ √(‖A⁻¹‖₁‖A⁻¹‖∞)`.
fn sigma_min_lower(a: &CMatrix) -> f64 {
    match lu_factor(a) {
        Ok(f) if !f.is_singular() => {
            let inv = f.inverse();
            1.0 / (inv.norm1() * inv.norm_inf()).sqrt()
        }
        _ => 0.0,
    }
}

// σ_min(P_k) r^k > Σ_{j<k} ‖P_j‖ r^j keeps x^k P_k dominant on the whole circle
fn upper_certified(p: &MatrixPolynomial, norms: &[f64], r: f64) -> bool {
    let k = p.degree();
    let lhs = sigma_min_lower(p.leading());
    let rhs: f64 = (0..k).map(|j| norms[j] * r.powi(j as i32 - k as i32)).sum();
    lhs > rhs
}

fn lower_certified(p: &MatrixPolynomial, norms: &[f64], r: f64) -> bool {
    let lhs = sigma_min_lower(p.coeff(0));
    let rhs: f64 = (1..=p.degree()).map(|j| norms[j] * r.powi(j as i32)).sum();
    lhs > rhs
}
