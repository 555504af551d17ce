//! Result files. Numbers are written in shortest round-trip form, so reading
//! a file back reproduces every value bit for bit; non-finite reals are
//! written as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::io::Write;

use anyhow::Result;
use pep_core::bounds::InclusionDisk;
use pep_core::eai::EigenEstimate;
use pep_core::starting::Annulus;
use pep_core::{SolverConfig, SpectrumResult};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

mod ext {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            super::deserialize(d).map(Some)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueRecord {
    pub re: f64,
    pub im: f64,
    pub status: String,
    pub iterations: usize,
    #[serde(with = "ext")]
    pub rcond: f64,
    #[serde(with = "ext")]
    pub last_correction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ext::opt")]
    pub inclusion_log_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_id: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteRecord {
    pub status: String,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRecord {
    #[serde(with = "ext")]
    pub r_lower: f64,
    #[serde(with = "ext")]
    pub r_upper: f64,
    pub certified: bool,
    pub certified_lower: bool,
    pub certified_upper: bool,
}

impl From<Annulus> for AnnulusRecord {
    fn from(a: Annulus) -> Self {
        Self {
            r_lower: a.r_lower,
            r_upper: a.r_upper,
            certified: a.certified_lower && a.certified_upper,
            certified_lower: a.certified_lower,
            certified_upper: a.certified_upper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    /// Finite eigenvalues only.
    pub eigenvalues: Vec<EigenvalueRecord>,
    pub at_infinity_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub at_infinity: Vec<InfiniteRecord>,
    pub total_scalar_iterations: usize,
    pub vector_iterations: usize,
    pub config: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annulus: Option<AnnulusRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ext::opt")]
    pub oracle_max_rel_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "ext::opt")]
    pub oracle_avg_rel_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn record(e: &EigenEstimate, disk: Option<&InclusionDisk>) -> Option<EigenvalueRecord> {
    let z = e.value.finite()?;
    Some(EigenvalueRecord {
        re: z.re,
        im: z.im,
        status: e.status.as_str().to_string(),
        iterations: e.iterations,
        rcond: e.rcond,
        last_correction: e.last_correction,
        inclusion_log_radius: disk.map(|d| d.log_radius),
        cluster_id: disk.and_then(|d| d.cluster_id),
    })
}

impl ResultFile {
    /// `disks[i]` belongs to `result.estimates[i]`.
    pub fn new(result: &SpectrumResult, disks: &[Option<InclusionDisk>]) -> Self {
        let eigenvalues = result
            .estimates
            .iter()
            .enumerate()
            .filter_map(|(i, e)| record(e, disks.get(i).and_then(Option::as_ref)))
            .collect();
        let at_infinity = result
            .estimates
            .iter()
            .filter(|e| e.value.is_infinite())
            .map(|e| InfiniteRecord {
                status: e.status.as_str().to_string(),
                iterations: e.iterations,
            })
            .collect();
        Self {
            eigenvalues,
            at_infinity_count: result.at_infinity_count(),
            at_infinity,
            total_scalar_iterations: result.total_scalar_iterations,
            vector_iterations: result.vector_iterations,
            config: result.config.clone(),
            annulus: None,
            disk_kind: None,
            oracle_max_rel_err: None,
            oracle_avg_rel_err: None,
            warnings: result.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per eigenvalue; infinite ones have `re = im = inf`.
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "re,im,status,iterations,rcond,last_correction,inclusion_log_radius,cluster_id")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for e in &self.eigenvalues {
            writeln!(
                out,
                "{:?},{:?},{},{},{:?},{:?},{},{}",
                e.re,
                e.im,
                e.status,
                e.iterations,
                e.rcond,
                e.last_correction,
                opt(e.inclusion_log_radius),
                e.cluster_id.map(|c| c.to_string()).unwrap_or_default()
            )?;
        }
        for e in &self.at_infinity {
            writeln!(out, "inf,inf,{},{},,,,", e.status, e.iterations)?;
        }
        Ok(())
    }
}
