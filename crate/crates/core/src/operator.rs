//! Typed operators: density operators, Hermitian observables and unitaries.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Eigen};
use crate::tolerance::Tolerances;

/// Dimensions of a bipartite system-environment space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceDims {
    system: usize,
    environment: usize,
}

impl SpaceDims {
    /// Both factors must be at least two-dimensional.
    pub fn new(system: usize, environment: usize) -> Result<Self> {
        if system < 2 || environment < 2 {
            return Err(Error::InvalidDims(format!(
                "bipartite factors must have dimension >= 2, got {system}x{environment}"
            )));
        }
        Ok(Self {
            system,
            environment,
        })
    }

    pub fn system(&self) -> usize {
        self.system
    }

    pub fn environment(&self) -> usize {
        self.environment
    }

    pub fn total(&self) -> usize {
        self.system * self.environment
    }
}

impl fmt::Display for SpaceDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.system, self.environment)
    }
}

/// Label attached to an operator: either a plain space or a bipartite one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Flat(usize),
    Bipartite(SpaceDims),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Flat(d) => *d,
            Space::Bipartite(dims) => dims.total(),
        }
    }

    pub fn bipartite(&self) -> Result<SpaceDims> {
        match self {
            Space::Bipartite(dims) => Ok(*dims),
            Space::Flat(d) => Err(Error::InvalidDims(format!(
                "operator on a flat {d}-dimensional space has no system/environment split"
            ))),
        }
    }
}

impl From<SpaceDims> for Space {
    fn from(dims: SpaceDims) -> Self {
        Space::Bipartite(dims)
    }
}

fn check_shape(matrix: &CMatrix, space: Space) -> Result<()> {
    let n = linalg::is_square(matrix)?;
    if n != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: n,
        });
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Every density-operator invariant the matrix violates, in a fixed order:
/// shape, finiteness, Hermiticity, unit trace, positivity.
pub fn density_violations(matrix: &CMatrix, space: Space, tol: &Tolerances) -> Vec<Error> {
    if let Err(e) = check_shape(matrix, space) {
        return vec![e];
    }
    let mut out = Vec::new();
    let deviation = linalg::hermiticity_deviation(matrix);
    if deviation > tol.hermitian {
        out.push(Error::NotHermitian { deviation });
    }
    let trace = matrix.trace();
    if (trace.re - 1.0).abs() > tol.trace || trace.im.abs() > tol.trace {
        out.push(Error::TraceNotUnit { trace: trace.re });
    }
    if deviation <= tol.hermitian {
        match linalg::hermitian_eig_tol(matrix, tol.hermitian) {
            Ok(eig) => {
                let min = eig.values.last().copied().unwrap_or(0.0);
                if min < -tol.psd {
                    out.push(Error::NotPositive {
                        min_eigenvalue: min,
                    });
                }
            }
            Err(e) => out.push(e),
        }
    }
    out
}

/// Every Hermitian-operator invariant the matrix violates.
pub fn hermitian_violations(matrix: &CMatrix, space: Space, tol: &Tolerances) -> Vec<Error> {
    if let Err(e) = check_shape(matrix, space) {
        return vec![e];
    }
    let deviation = linalg::hermiticity_deviation(matrix);
    if deviation > tol.hermitian {
        vec![Error::NotHermitian { deviation }]
    } else {
        Vec::new()
    }
}

/// Positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    space: Space,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, space: impl Into<Space>) -> Result<Self> {
        Self::with_tolerances(matrix, space, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, space: impl Into<Space>, tol: &Tolerances) -> Result<Self> {
        let space = space.into();
        if let Some(err) = density_violations(&matrix, space, tol).into_iter().next() {
            return Err(err);
        }
        Ok(Self { matrix, space })
    }

    /// Skips validation. Intended for intermediate results of maps that are
    /// known to preserve states.
    pub fn new_unchecked(matrix: CMatrix, space: impl Into<Space>) -> Self {
        Self {
            matrix,
            space: space.into(),
        }
    }

    /// `|psi><psi|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &nalgebra::DVector<num_complex::Complex64>, space: impl Into<Space>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        let v = psi / linalg::c(norm, 0.0);
        Self::new(linalg::projector(&v), space)
    }

    /// `|k><k|` in the computational basis.
    pub fn basis(dim: usize, k: usize) -> Self {
        Self::new_unchecked(linalg::ket_bra(dim, k, k), Space::Flat(dim))
    }

    pub fn maximally_mixed(space: impl Into<Space>) -> Self {
        let space = space.into();
        let d = space.dim();
        Self::new_unchecked(linalg::identity(d) * linalg::c(1.0 / d as f64, 0.0), space)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn dims(&self) -> Result<SpaceDims> {
        self.space.bipartite()
    }

    pub fn with_space(self, space: impl Into<Space>) -> Result<Self> {
        let space = space.into();
        check_shape(&self.matrix, space)?;
        Ok(Self {
            matrix: self.matrix,
            space,
        })
    }

    /// `Tr_E` of a bipartite state.
    pub fn reduced_system(&self) -> Result<DensityOperator> {
        let dims = self.dims()?;
        let m = linalg::partial_trace_env(&self.matrix, dims.system(), dims.environment())?;
        Ok(Self::new_unchecked(m, Space::Flat(dims.system())))
    }

    /// `Tr_S` of a bipartite state.
    pub fn reduced_environment(&self) -> Result<DensityOperator> {
        let dims = self.dims()?;
        let m = linalg::partial_trace_sys(&self.matrix, dims.system(), dims.environment())?;
        Ok(Self::new_unchecked(m, Space::Flat(dims.environment())))
    }

    /// `self (x) other`, labelled as a bipartite state when both factors are
    /// at least two-dimensional.
    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let m = linalg::kron(&self.matrix, &other.matrix);
        let space = match SpaceDims::new(self.dim(), other.dim()) {
            Ok(dims) => Space::Bipartite(dims),
            Err(_) => Space::Flat(self.dim() * other.dim()),
        };
        Self::new_unchecked(m, space)
    }

    /// `rho_S (x) rho_E` built from this state's own marginals.
    pub fn product_of_marginals(&self) -> Result<DensityOperator> {
        let dims = self.dims()?;
        let m = linalg::kron(self.reduced_system()?.matrix(), self.reduced_environment()?.matrix());
        Ok(Self::new_unchecked(m, dims))
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eig(&self) -> Result<Eigen> {
        linalg::hermitian_eig(&self.matrix)
    }
}

/// Self-adjoint operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
    space: Space,
}

impl HermitianOperator {
    pub fn new(matrix: CMatrix, space: impl Into<Space>) -> Result<Self> {
        Self::with_tolerances(matrix, space, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, space: impl Into<Space>, tol: &Tolerances) -> Result<Self> {
        let space = space.into();
        if let Some(err) = hermitian_violations(&matrix, space, tol).into_iter().next() {
            return Err(err);
        }
        Ok(Self { matrix, space })
    }

    pub fn new_unchecked(matrix: CMatrix, space: impl Into<Space>) -> Self {
        Self {
            matrix,
            space: space.into(),
        }
    }

    pub fn zero(space: impl Into<Space>) -> Self {
        let space = space.into();
        let d = space.dim();
        Self::new_unchecked(CMatrix::zeros(d, d), space)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn dims(&self) -> Result<SpaceDims> {
        self.space.bipartite()
    }

    pub fn partial_trace_env(&self) -> Result<HermitianOperator> {
        let dims = self.dims()?;
        let m = linalg::partial_trace_env(&self.matrix, dims.system(), dims.environment())?;
        Ok(Self::new_unchecked(m, Space::Flat(dims.system())))
    }

    pub fn partial_trace_sys(&self) -> Result<HermitianOperator> {
        let dims = self.dims()?;
        let m = linalg::partial_trace_sys(&self.matrix, dims.system(), dims.environment())?;
        Ok(Self::new_unchecked(m, Space::Flat(dims.environment())))
    }

    pub fn eig(&self) -> Result<Eigen> {
        linalg::hermitian_eig(&self.matrix)
    }

    /// `(1/2) Tr|M|`.
    pub fn half_trace_norm(&self) -> Result<f64> {
        linalg::half_trace_norm(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    /// Difference `a - b` of two states on the same space.
    pub fn difference(a: &DensityOperator, b: &DensityOperator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Ok(Self::new_unchecked(a.matrix() - b.matrix(), a.space()))
    }
}

/// Unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        let n = linalg::is_square(&matrix)?;
        check_shape(&matrix, Space::Flat(n))?;
        let deviation = linalg::unitarity_deviation(&matrix);
        if deviation > tol.unitary {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn new_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new_unchecked(linalg::identity(dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self::new_unchecked(self.matrix.adjoint())
    }

    pub fn compose(&self, other: &UnitaryOperator) -> Self {
        Self::new_unchecked(&self.matrix * &other.matrix)
    }

    /// `U_a (x) U_b`.
    pub fn tensor(&self, other: &UnitaryOperator) -> Self {
        Self::new_unchecked(linalg::kron(&self.matrix, &other.matrix))
    }

    /// `U M U^dagger`.
    pub fn conjugate(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(&self.matrix * m * self.matrix.adjoint())
    }

    /// Number of non-negligible operator-Schmidt coefficients across the
    /// given bipartition. Rank 1 means `U = U_S (x) U_E`.
    pub fn operator_schmidt_rank(&self, dims: SpaceDims, rel_tol: f64) -> Result<usize> {
        let (ds, de) = (dims.system(), dims.environment());
        if self.dim() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: self.dim(),
            });
        }
        // Realignment: M[(i,j),(k,l)] = U[(i,k),(j,l)].
        let realigned = CMatrix::from_fn(ds * ds, de * de, |row, col| {
            let (i, j) = (row / ds, row % ds);
            let (k, l) = (col / de, col % de);
            self.matrix[(i * de + k, j * de + l)]
        });
        let sv = realigned.singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        Ok(sv.iter().filter(|&&s| s > rel_tol * top).count())
    }
}

/// `D(rho, sigma) = (1/2) sum |lambda_k|` over the spectrum of `rho - sigma`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    linalg::half_trace_norm(&(rho.matrix() - sigma.matrix()))
}

/// `U m U^dagger` for a state, preserving its space label.
pub fn apply_unitary(u: &UnitaryOperator, rho: &DensityOperator) -> Result<DensityOperator> {
    Ok(DensityOperator::new_unchecked(u.conjugate(rho.matrix())?, rho.space()))
}

/// `U m U^dagger` for a Hermitian operator.
pub fn apply_unitary_hermitian(u: &UnitaryOperator, m: &HermitianOperator) -> Result<HermitianOperator> {
    Ok(HermitianOperator::new_unchecked(u.conjugate(m.matrix())?, m.space()))
}
