//! A-posteriori inclusion disks for computed eigenvalues.
//!
//! Radii are kept as natural logarithms: products of `nk` distances overflow
//! long before the radii themselves become meaningless.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eai::{Eigenvalue, SpectrumResult};
use crate::error::{PepError, Result};
use crate::linalg::{lu_factor, point_diagnostics, rank_lower_bound};
use crate::matpoly::{MatrixPolynomial, MobiusMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskKind {
    Smith,
    Henrici,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionDisk {
    pub center: Complex64,
    /// `ln r`; `-inf` for a point disk, `+inf` for a disk that is not bounded.
    pub log_radius: f64,
    pub kind: DiskKind,
    pub cluster_id: Option<usize>,
}

impl InclusionDisk {
    fn new(center: Complex64, log_radius: f64, kind: DiskKind) -> Self {
        Self {
            center,
            log_radius,
            kind,
            cluster_id: None,
        }
    }

    /// Linear radius, saturating at `f64::MAX`.
    pub fn radius(&self) -> f64 {
        self.log_radius.exp().min(f64::MAX)
    }

    /// Closed-disk test; the radius is allowed a few ulps of rounding, which
    /// matters for degree-one factors where the bound is attained.
    pub fn contains(&self, z: Complex64) -> bool {
        let d = (z - self.center).norm();
        d == 0.0 || d.ln() <= self.log_radius + 64.0 * f64::EPSILON
    }

    pub fn overlaps(&self, other: &InclusionDisk) -> bool {
        let d = (self.center - other.center).norm();
        if d == 0.0 {
            return true;
        }
        d.ln() <= log_add_exp(self.log_radius, other.log_radius)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi.is_infinite() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Smith log radii for the roots of `p̂(x) = p(x)/Π(x − e)^m` from values of
/// `p`: `ln|p(x_i)|` in `log_values`, `ln|lead p|` in `log_lead`, and the
/// divided-out roots in `knowns`.
pub fn smith_log_radii(xs: &[Complex64], log_values: &[f64], log_lead: f64, knowns: &[(Complex64, usize)]) -> Vec<f64> {
    let ln_deg = (xs.len() as f64).ln();
    xs.iter()
        .zip(log_values)
        .enumerate()
        .map(|(i, (&x, &lv))| {
            if lv == f64::NEG_INFINITY {
                return lv;
            }
            let mut s = ln_deg + lv - log_lead;
            for (j, &y) in xs.iter().enumerate() {
                if j != i {
                    s -= (x - y).norm().ln();
                }
            }
            for &(e, m) in knowns {
                s -= m as f64 * (x - e).norm().ln();
            }
            if s.is_nan() {
                f64::INFINITY
            } else {
                s
            }
        })
        .collect()
}

fn check_leading(p: &MatrixPolynomial) -> Result<f64> {
    let lead = p.leading();
    let (_, nullity) = rank_lower_bound(lead, p.n() as f64 * f64::EPSILON);
    let lu = lu_factor(lead)?;
    if nullity > 0 || lu.is_singular() {
        return Err(PepError::SingularLeading);
    }
    Ok(lu.log_abs_det())
}

fn log_abs_values(p: &MatrixPolynomial, xs: &[Complex64]) -> Result<Vec<f64>> {
    xs.iter()
        .map(|&x| point_diagnostics(p, x).map(|d| d.log_abs_det))
        .collect()
}

/// Smith disks around all `N = nk` approximations. Requires a nonsingular
/// leading coefficient; use [`henrici_disks`] or [`disks_for_result`]
/// otherwise.
pub fn smith_disks(p: &MatrixPolynomial, xs: &[Complex64]) -> Result<Vec<InclusionDisk>> {
    smith_disks_with_knowns(p, xs, &[])
}

/// As [`smith_disks`] when some roots are known exactly and excluded from
/// `xs`; `xs.len()` plus the known multiplicities must equal `nk`.
pub fn smith_disks_with_knowns(
    p: &MatrixPolynomial,
    xs: &[Complex64],
    knowns: &[(Complex64, usize)],
) -> Result<Vec<InclusionDisk>> {
    let known: usize = knowns.iter().map(|k| k.1).sum();
    if xs.len() + known != p.grade() {
        return Err(PepError::LengthMismatch(xs.len() + known, p.grade()));
    }
    let log_lead = check_leading(p)?;
    let lv = log_abs_values(p, xs)?;
    Ok(smith_log_radii(xs, &lv, log_lead, knowns)
        .into_iter()
        .zip(xs)
        .map(|(r, &x)| InclusionDisk::new(x, r, DiskKind::Smith))
        .collect())
}

/// Disks centered at `x_i` with radius `N·|p(x_i)/p'(x_i)|`.
pub fn henrici_disks(p: &MatrixPolynomial, xs: &[Complex64]) -> Result<Vec<InclusionDisk>> {
    let ln_n = (p.grade() as f64).ln();
    xs.iter()
        .map(|&x| {
            let d = point_diagnostics(p, x)?;
            let r = if d.exact_root {
                f64::NEG_INFINITY
            } else {
                ln_n + d.newton_correction.norm().ln()
            };
            Ok(InclusionDisk::new(x, r, DiskKind::Henrici))
        })
        .collect()
}

/// Image of the z-disk `|z − z0| ≤ ρ` under `x = m(z)`. Unbounded (radius
/// `+inf`) when the disk contains the pole of `m`.
pub fn map_disk(m: &MobiusMap, z0: Complex64, log_rho: f64) -> (Complex64, f64) {
    let rho = log_rho.exp();
    if m.gamma == Complex64::new(0.0, 0.0) {
        let s = m.alpha / m.delta;
        return (m.apply(z0).unwrap_or(z0), log_rho + s.norm().ln());
    }
    let pole = -m.delta / m.gamma;
    let d = (z0 - pole).norm();
    if d <= rho {
        return (m.alpha / m.gamma, f64::INFINITY);
    }
    if rho == 0.0 {
        return (m.apply(z0).unwrap_or(z0), f64::NEG_INFINITY);
    }
    let den = (d - rho) * (d + rho);
    let wc = (z0 - pole).conj() / den;
    let kfac = (m.beta * m.gamma - m.alpha * m.delta) / (m.gamma * m.gamma);
    let center = m.alpha / m.gamma + kfac * wc;
    (center, kfac.norm().ln() + rho.ln() - den.ln())
}

/// Disks for every non-deflated finite estimate of a solve, keyed by its
/// index in `result.estimates`. Deflated values are divided out as known
/// roots. If the solve went through the Möbius fallback the disks are
/// computed for the transformed polynomial and mapped back.
pub fn disks_for_result(
    p: &MatrixPolynomial,
    result: &SpectrumResult,
    kind: DiskKind,
) -> Result<Vec<(usize, InclusionDisk)>> {
    let active: Vec<usize> = (0..result.estimates.len())
        .filter(|&i| !result.estimates[i].status.is_deflated())
        .collect();
    if let Some(trace) = &result.mobius {
        return mobius_disks(p, result, &trace.map, &trace.z_values, &active, kind);
    }
    let idx: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| !result.estimates[i].value.is_infinite())
        .collect();
    let xs: Vec<Complex64> = idx.iter().filter_map(|&i| result.estimates[i].value.finite()).collect();
    let disks = match kind {
        DiskKind::Henrici => henrici_disks(p, &xs)?,
        DiskKind::Smith => {
            if idx.len() != active.len() {
                return Err(PepError::Unsupported(
                    "inclusion disks for estimates reported at infinity".into(),
                ));
            }
            smith_disks_with_knowns(p, &xs, &knowns_of(result, |i| result.estimates[i].value.finite()))?
        }
    };
    Ok(idx.into_iter().zip(disks).collect())
}

fn knowns_of(result: &SpectrumResult, value: impl Fn(usize) -> Option<Complex64>) -> Vec<(Complex64, usize)> {
    let mut knowns: Vec<(Complex64, usize)> = Vec::new();
    for (i, e) in result.estimates.iter().enumerate() {
        if !e.status.is_deflated() {
            continue;
        }
        if let Some(v) = value(i) {
            match knowns.iter_mut().find(|k| k.0 == v) {
                Some(k) => k.1 += 1,
                None => knowns.push((v, 1)),
            }
        }
    }
    knowns
}

fn mobius_disks(
    p: &MatrixPolynomial,
    result: &SpectrumResult,
    m: &MobiusMap,
    zs: &[Complex64],
    active: &[usize],
    kind: DiskKind,
) -> Result<Vec<(usize, InclusionDisk)>> {
    let nk = p.grade() as f64;
    let zero = Complex64::new(0.0, 0.0);
    let az: Vec<Complex64> = active.iter().map(|&i| zs[i]).collect();
    let mut logs = Vec::with_capacity(az.len());
    let mut newton = Vec::with_capacity(az.len());
    for &z in &az {
        let (x, w) = (m.apply(z), m.gamma * z + m.delta);
        let x = x.ok_or(PepError::MobiusPole)?;
        let d = point_diagnostics(p, x)?;
        logs.push(d.log_abs_det + nk * w.norm().ln());
        // q'/q = nkγ/w + (αδ − βγ)/w² · p'/p
        let det = m.determinant();
        let ld = if d.exact_root {
            Complex64::new(f64::INFINITY, 0.0)
        } else {
            m.gamma * nk / w + det / (w * w) * d.log_derivative
        };
        newton.push(if d.exact_root { zero } else { Complex64::new(1.0, 0.0) / ld });
    }
    let z_logs: Vec<f64> = match kind {
        DiskKind::Henrici => newton
            .iter()
            .map(|c| if *c == zero { f64::NEG_INFINITY } else { nk.ln() + c.norm().ln() })
            .collect(),
        DiskKind::Smith => {
            // leading coefficient of q is P(α/γ)γ^k, or α^k P_k when γ = 0
            let lead = if m.gamma == zero {
                p.leading().scale(m.alpha.powu(p.degree() as u32))
            } else {
                p.eval(m.alpha / m.gamma).scale(m.gamma.powu(p.degree() as u32))
            };
            let lu = lu_factor(&lead)?;
            if lu.is_singular() {
                return Err(PepError::SingularLeading);
            }
            let knowns = knowns_of(result, |i| Some(zs[i]));
            smith_log_radii(&az, &logs, lu.log_abs_det(), &knowns)
        }
    };
    Ok(active
        .iter()
        .zip(az.iter().zip(z_logs))
        .map(|(&i, (&z, lr))| {
            let (c, r) = map_disk(m, z, lr);
            let c = match result.estimates[i].value {
                Eigenvalue::Finite(_) if r == f64::NEG_INFINITY => result.estimates[i].value.finite().unwrap_or(c),
                _ => c,
            };
            (i, InclusionDisk::new(c, r, kind))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Connected components of the overlap graph, singletons included.
    pub clusters: Vec<Cluster>,
    /// Disks that overlap no other disk.
    pub isolated: Vec<usize>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Groups disks into connected components and writes each disk's component
/// index into `cluster_id`.
pub fn cluster_analysis(disks: &mut [InclusionDisk]) -> ClusterReport {
    let n = disks.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if disks[i].overlaps(&disks[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut root_id: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Cluster> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let id = *root_id[r].get_or_insert_with(|| {
            clusters.push(Cluster {
                members: Vec::new(),
                count: 0,
            });
            clusters.len() - 1
        });
        clusters[id].members.push(i);
        clusters[id].count += 1;
        disks[i].cluster_id = Some(id);
    }
    let isolated = clusters
        .iter()
        .filter(|c| c.count == 1)
        .map(|c| c.members[0])
        .collect();
    ClusterReport { clusters, isolated }
}
