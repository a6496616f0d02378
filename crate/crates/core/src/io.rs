//! JSON operator files.
//!
//! ```json
//! {"dims": [2, 2], "re": [[...], ...], "im": [[...], ...]}
//! ```
//!
//! `dims` is `[d]` for a flat space, `[d_S, d_E]` for a bipartite one, or
//! `[d_S, d_B, d_C]` for a bipartite environment. Rows are listed in the
//! system-major computational basis. `im` may be omitted for real matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::operator::{
    density_violations, DensityOperator, HermitianOperator, Space, SpaceDims, UnitaryOperator,
};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

/// Matrix read from a file together with its declared factor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub matrix: CMatrix,
    pub dims: Vec<usize>,
}

impl LabeledMatrix {
    /// Space used for validation; tripartite files are viewed as `S | BC`.
    pub fn space(&self) -> Result<Space> {
        match self.dims.as_slice() {
            [d] => Ok(Space::Flat(*d)),
            [s, e] => Ok(SpaceDims::new(*s, *e)?.into()),
            [s, b, cc] => {
                SpaceDims::new(*b, *cc)?;
                Ok(SpaceDims::new(*s, b * cc)?.into())
            }
            _ => Err(Error::InvalidDims(format!(
                "expected 1 to 3 factor dimensions, got {}",
                self.dims.len()
            ))),
        }
    }

    pub fn density(self) -> Result<DensityOperator> {
        let space = self.space()?;
        DensityOperator::new(self.matrix, space)
    }

    pub fn density_with(self, tol: &Tolerances) -> Result<DensityOperator> {
        let space = self.space()?;
        DensityOperator::with_tolerances(self.matrix, space, tol)
    }

    pub fn hermitian(self) -> Result<HermitianOperator> {
        let space = self.space()?;
        HermitianOperator::new(self.matrix, space)
    }

    /// Every density-operator invariant the matrix violates.
    pub fn density_violations(&self, tol: &Tolerances) -> Result<Vec<Error>> {
        Ok(density_violations(&self.matrix, self.space()?, tol))
    }
}

impl OperatorFile {
    pub fn from_matrix(matrix: &CMatrix, dims: Vec<usize>) -> Self {
        let rows = |f: fn(&num_complex::Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..matrix.nrows())
                .map(|i| (0..matrix.ncols()).map(|j| f(&matrix[(i, j)])).collect())
                .collect()
        };
        let im = rows(|z| z.im);
        let any_imag = im.iter().flatten().any(|&v| v != 0.0);
        Self {
            dims,
            re: rows(|z| z.re),
            im: any_imag.then_some(im),
        }
    }

    pub fn from_density(rho: &DensityOperator) -> Self {
        Self::from_matrix(rho.matrix(), space_dims(rho.space()))
    }

    pub fn from_hermitian(h: &HermitianOperator) -> Self {
        Self::from_matrix(h.matrix(), space_dims(h.space()))
    }

    pub fn from_unitary(u: &UnitaryOperator, dims: Vec<usize>) -> Self {
        Self::from_matrix(u.matrix(), dims)
    }

    /// Shape checks only; physical invariants are left to the typed
    /// constructors.
    pub fn to_labeled(&self) -> Result<LabeledMatrix> {
        let n = self.re.len();
        if n == 0 {
            return Err(Error::Parse("matrix has no rows".into()));
        }
        let declared = self
            .dims
            .iter()
            .try_fold(1usize, |acc, &d| {
                if d == 0 {
                    None
                } else {
                    acc.checked_mul(d)
                }
            })
            .ok_or_else(|| Error::Parse("dims must be positive and not overflow".into()))?;
        if self.dims.is_empty() || self.dims.len() > 3 {
            return Err(Error::Parse(format!(
                "dims must list 1 to 3 factors, got {}",
                self.dims.len()
            )));
        }
        if declared != n {
            return Err(Error::DimensionMismatch {
                expected: declared,
                found: n,
            });
        }
        check_rows(&self.re, n, "re")?;
        if let Some(im) = &self.im {
            if im.len() != n {
                return Err(Error::Parse(format!("im has {} rows, expected {n}", im.len())));
            }
            check_rows(im, n, "im")?;
        }
        let matrix = CMatrix::from_fn(n, n, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |m| m[i][j]);
            c(self.re[i][j], im)
        });
        Ok(LabeledMatrix {
            matrix,
            dims: self.dims.clone(),
        })
    }
}

fn check_rows(rows: &[Vec<f64>], n: usize, name: &str) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parse(format!(
                "{name} row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    Ok(())
}

fn space_dims(space: Space) -> Vec<usize> {
    match space {
        Space::Flat(d) => vec![d],
        Space::Bipartite(dims) => vec![dims.system(), dims.environment()],
    }
}

pub fn parse_operator(text: &str) -> Result<LabeledMatrix> {
    let file: OperatorFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.to_labeled()
}

pub fn operator_to_json(file: &OperatorFile) -> String {
    serde_json::to_string_pretty(file).expect("operator files always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_density() {
        let rho = crate::random::random_state_with(
            4,
            2,
            SpaceDims::new(2, 2).unwrap().into(),
            &mut crate::random::rng_from_seed(9),
        )
        .unwrap();
        let text = operator_to_json(&OperatorFile::from_density(&rho));
        let back = parse_operator(&text).unwrap().density().unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        assert_eq!(back.space(), rho.space());
    }

    #[test]
    fn real_matrix_without_im() {
        let m = parse_operator(r#"{"dims":[2],"re":[[1,0],[0,0]]}"#).unwrap();
        assert_eq!(m.space().unwrap(), Space::Flat(2));
        assert!(m.clone().density().is_ok());
        assert!(OperatorFile::from_matrix(&m.matrix, vec![2]).im.is_none());
    }

    #[test]
    fn tripartite_dims() {
        let text = format!(
            r#"{{"dims":[2,2,2],"re":{:?}}}"#,
            (0..8).map(|i| (0..8).map(|j| if i == j { 0.125 } else { 0.0 }).collect::<Vec<_>>()).collect::<Vec<_>>()
        );
        let m = parse_operator(&text).unwrap();
        assert_eq!(m.space().unwrap(), Space::Bipartite(SpaceDims::new(2, 4).unwrap()));
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            r#"{"dims":[2],"re":[[1,0],[0,0]],"extra":1}"#,
            r#"{"dims":[3],"re":[[1,0],[0,0]]}"#,
            r#"{"dims":[2],"re":[[1,0],[0]]}"#,
            r#"{"dims":[2],"re":[[1,0],[0,0]],"im":[[0,0]]}"#,
            r#"{"dims":[],"re":[[1]]}"#,
            r#"{"dims":[0],"re":[]}"#,
            r#"not json"#,
        ] {
            assert!(parse_operator(text).is_err(), "{text}");
        }
    }

    #[test]
    fn one_dimensional_factor_rejected_as_space() {
        let m = parse_operator(r#"{"dims":[1,2],"re":[[1,0],[0,0]]}"#).unwrap();
        assert!(m.space().is_err());
    }

    #[test]
    fn violations_reported() {
        let m = parse_operator(r#"{"dims":[2],"re":[[0.5,0],[0,0.4]]}"#).unwrap();
        let v = m.density_violations(&Tolerances::default()).unwrap();
        assert!(matches!(v.as_slice(), [Error::TraceNotUnit { .. }]));
    }
}
