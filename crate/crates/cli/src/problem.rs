//! Problem files: `{"n", "k", "coefficients", "structure"?}` with every matrix
//! entry written as `[re, im]` and `coefficients[0] = P₀`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use pep_core::{CMatrix, MatrixPolynomial, StructureSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StructureField {
    Tag(String),
    Mobius { mobius: [f64; 6] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub k: usize,
    pub coefficients: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureField>,
}

/// A parsed and shape-checked problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub poly: MatrixPolynomial,
    pub structure: StructureSpec,
}

/// Parses a structure tag: `none`, `palindromic`, `even_odd`, `skew`, or
/// `mobius:a_re,a_im,b_re,b_im,c_re,c_im`.
pub fn parse_structure_tag(tag: &str) -> Result<StructureSpec> {
    let t = tag.trim().to_ascii_lowercase();
    if let Some(list) = t.strip_prefix("mobius:") {
        let v: Vec<f64> = list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("mobius parameter {s:?}: {e}")))
            .collect::<Result<_>>()?;
        let arr: [f64; 6] = v
            .try_into()
            .map_err(|_| anyhow!("mobius needs 6 numbers: a_re,a_im,b_re,b_im,c_re,c_im"))?;
        return mobius_spec(&arr);
    }
    Ok(match t.as_str() {
        "none" | "" => StructureSpec::None,
        "palindromic" | "t-palindromic" => StructureSpec::Palindromic,
        "even_odd" | "even-odd" | "evenodd" => StructureSpec::EvenOdd,
        "skew" | "skew_square" | "skew-hamiltonian" => StructureSpec::SkewSquare,
        other => bail!("unknown structure {other:?} (expected none, palindromic, even_odd, skew or mobius:...)"),
    })
}

fn mobius_spec(v: &[f64; 6]) -> Result<StructureSpec> {
    if v.iter().any(|x| !x.is_finite()) {
        bail!("mobius parameters must be finite");
    }
    Ok(StructureSpec::mobius(
        Complex64::new(v[0], v[1]),
        Complex64::new(v[2], v[3]),
        Complex64::new(v[4], v[5]),
    ))
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| anyhow!("line {}, column {}: {e}", e.line(), e.column()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_problem(p: &MatrixPolynomial, structure: &StructureSpec) -> Self {
        let coefficients = p
            .coeffs()
            .iter()
            .map(|m| {
                (0..m.n())
                    .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
                    .collect()
            })
            .collect();
        let structure = match structure {
            StructureSpec::None => None,
            StructureSpec::Mobius { a, b, c, .. } => Some(StructureField::Mobius {
                mobius: [a.re, a.im, b.re, b.im, c.re, c.im],
            }),
            s => Some(StructureField::Tag(s.name().to_string())),
        };
        Self {
            n: p.n(),
            k: p.degree(),
            coefficients,
            structure,
        }
    }

    /// Checks shapes and values, reporting the offending field.
    pub fn into_problem(self) -> Result<Problem> {
        let (n, k) = (self.n, self.k);
        if n == 0 {
            bail!("field n: must be at least 1");
        }
        if self.coefficients.len() != k + 1 {
            bail!(
                "field coefficients: expected k+1 = {} matrices, found {}",
                k + 1,
                self.coefficients.len()
            );
        }
        let mut mats = Vec::with_capacity(k + 1);
        for (j, m) in self.coefficients.iter().enumerate() {
            if m.len() != n {
                bail!("field coefficients[{j}]: expected {n} rows, found {}", m.len());
            }
            let mut rows = Vec::with_capacity(n);
            for (i, row) in m.iter().enumerate() {
                if row.len() != n {
                    bail!("field coefficients[{j}][{i}]: expected {n} entries, found {}", row.len());
                }
                let mut r = Vec::with_capacity(n);
                for (l, e) in row.iter().enumerate() {
                    if !e[0].is_finite() || !e[1].is_finite() {
                        bail!("field coefficients[{j}][{i}][{l}]: entries must be finite");
                    }
                    r.push(Complex64::new(e[0], e[1]));
                }
                rows.push(r);
            }
            mats.push(CMatrix::from_rows(&rows).ok_or_else(|| anyhow!("field coefficients[{j}]: not square"))?);
        }
        let structure = match &self.structure {
            None => StructureSpec::None,
            Some(StructureField::Tag(t)) => parse_structure_tag(t).context("field structure")?,
            Some(StructureField::Mobius { mobius }) => mobius_spec(mobius).context("field structure")?,
        };
        let poly = MatrixPolynomial::new(mats).map_err(|e| anyhow!("field coefficients: {e}"))?;
        Ok(Problem { poly, structure })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAG: &str = r#"{"n": 2, "k": 1,
        "coefficients": [[[[-1, 0], [0, 0]], [[0, 0], [-2, 0]]],
                         [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}"#;

    #[test]
    fn parses_a_pencil() {
        let p = ProblemFile::from_json(DIAG).unwrap().into_problem().unwrap();
        assert_eq!((p.poly.n(), p.poly.degree()), (2, 1));
        assert_eq!(p.structure, StructureSpec::None);
    }

    #[test]
    fn reports_bad_shapes() {
        let bad = DIAG.replace(r#"[[0, 0], [-2, 0]]],"#, r#"[[0, 0]]],"#);
        let err = ProblemFile::from_json(&bad).unwrap().into_problem().unwrap_err();
        assert!(err.to_string().contains("coefficients[0][1]"), "{err}");
        let err = ProblemFile::from_json("{\"n\": 2,\n \"k\": x}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn structure_tags() {
        assert_eq!(parse_structure_tag("even-odd").unwrap(), StructureSpec::EvenOdd);
        let m = parse_structure_tag("mobius:1,0,1,0,1,0").unwrap();
        assert_eq!(m.name(), "mobius");
        assert!(parse_structure_tag("mobius:1,2").is_err());
        assert!(parse_structure_tag("hermitian").is_err());
        let with = DIAG.replace(r#""k": 1,"#, r#""k": 1, "structure": {"mobius": [0, 0, 1, 0, 1, 0]},"#);
        let p = ProblemFile::from_json(&with).unwrap().into_problem().unwrap();
        assert_eq!(p.structure.name(), "mobius");
    }

    #[test]
    fn round_trips_through_json() {
        let p = ProblemFile::from_json(DIAG).unwrap().into_problem().unwrap();
        let f = ProblemFile::from_problem(&p.poly, &StructureSpec::Palindromic);
        let back = ProblemFile::from_json(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
