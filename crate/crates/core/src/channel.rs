//! Completely positive trace-preserving maps in Kraus form.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::operator::{DensityOperator, Space};
use crate::tolerance::Tolerances;

/// Kraus representation `rho -> sum_i E_i rho E_i^dagger` with
/// `sum_i E_i^dagger E_i = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausMap {
    operators: Vec<CMatrix>,
    d_in: usize,
    d_out: usize,
}

impl KrausMap {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerances(operators, &Tolerances::default())
    }

    pub fn with_tolerances(operators: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        let first = operators.first().ok_or(Error::EmptyKraus)?;
        let (d_out, d_in) = first.shape();
        for op in &operators {
            if op.shape() != (d_out, d_in) {
                return Err(Error::DimensionMismatch {
                    expected: d_out,
                    found: op.nrows(),
                });
            }
        }
        let mut completeness = CMatrix::zeros(d_in, d_in);
        for op in &operators {
            completeness += op.adjoint() * op;
        }
        let deviation = linalg::max_abs_diff(&completeness, &linalg::identity(d_in));
        if !(deviation <= tol.unitary) {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self {
            operators,
            d_in,
            d_out,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![linalg::identity(dim)],
            d_in: dim,
            d_out: dim,
        }
    }

    /// Constant channel `X -> Tr(X) target`, with Kraus operators
    /// `sqrt(p_i) |v_i><k|` from the spectral decomposition of `target`.
    pub fn replace_with(d_in: usize, target: &DensityOperator) -> Result<Self> {
        let eig = target.eig()?;
        let d_out = target.dim();
        let mut ops = Vec::new();
        for (i, &p) in eig.values.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let v = eig.vector(i) * c(p.sqrt(), 0.0);
            for k in 0..d_in {
                let mut e = CMatrix::zeros(d_out, d_in);
                e.column_mut(k).copy_from(&v);
                ops.push(e);
            }
        }
        Self::new(ops)
    }

    /// Projective measurement in an orthonormal basis given as matrix columns,
    /// with the outcome discarded.
    pub fn dephasing(basis: &CMatrix) -> Result<Self> {
        let ops = (0..basis.ncols())
            .map(|k| linalg::projector(&basis.column(k).into_owned()))
            .collect();
        Self::new(ops)
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn output_dim(&self) -> usize {
        self.d_out
    }

    /// `self . before`: apply `before` first.
    pub fn compose(&self, before: &KrausMap) -> Result<KrausMap> {
        if before.d_out != self.d_in {
            return Err(Error::DimensionMismatch {
                expected: self.d_in,
                found: before.d_out,
            });
        }
        let ops = self
            .operators
            .iter()
            .flat_map(|a| before.operators.iter().map(move |b| a * b))
            .filter(|m| linalg::max_abs(m) > 0.0)
            .collect();
        KrausMap::new(ops)
    }

    fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.d_out, self.d_out);
        for e in &self.operators {
            out += e * m * e.adjoint();
        }
        out
    }
}

/// `sum_i E_i rho E_i^dagger`.
pub fn apply_kraus(k: &KrausMap, rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.dim() != k.d_in {
        return Err(Error::DimensionMismatch {
            expected: k.d_in,
            found: rho.dim(),
        });
    }
    Ok(DensityOperator::new_unchecked(
        k.apply_matrix(rho.matrix()),
        Space::Flat(k.d_out),
    ))
}

/// `(F_S (x) id_E)(rho_SE)` for a map acting on the system factor only.
pub fn apply_kraus_local(k: &KrausMap, rho_se: &DensityOperator) -> Result<DensityOperator> {
    let dims = rho_se.dims()?;
    if k.d_in != dims.system() || k.d_out != dims.system() {
        return Err(Error::DimensionMismatch {
            expected: dims.system(),
            found: k.d_in,
        });
    }
    let id_e = linalg::identity(dims.environment());
    let mut out = CMatrix::zeros(dims.total(), dims.total());
    for e in &k.operators {
        let lifted = linalg::kron(e, &id_e);
        out += &lifted * rho_se.matrix() * lifted.adjoint();
    }
    Ok(DensityOperator::new_unchecked(out, dims))
}
