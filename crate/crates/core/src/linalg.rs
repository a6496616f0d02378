//! Dense complex matrix helpers shared by every module.
//!
//! Bipartite layout: the basis state `|j_S>|l_E>` sits at row `j * d_E + l`,
//! system index major.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const EIG_MAX_ITERATIONS: usize = 10_000;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Kronecker product with `a` as the leftmost (most significant) factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `|i><j|` on a `dim`-dimensional space.
pub fn ket_bra(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = c(1.0, 0.0);
    m
}

pub fn projector(v: &nalgebra::DVector<Complex64>) -> CMatrix {
    v * v.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

/// `(m + m^dagger) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn is_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_bipartite(m: &CMatrix, d_s: usize, d_e: usize) -> Result<()> {
    let n = is_square(m)?;
    if n != d_s * d_e {
        return Err(Error::DimensionMismatch {
            expected: d_s * d_e,
            found: n,
        });
    }
    Ok(())
}

/// `Tr_E(m)` for `m` on `C^{d_s} (x) C^{d_e}`.
pub fn partial_trace_env(m: &CMatrix, d_s: usize, d_e: usize) -> Result<CMatrix> {
    check_bipartite(m, d_s, d_e)?;
    Ok(CMatrix::from_fn(d_s, d_s, |i, j| {
        (0..d_e).map(|l| m[(i * d_e + l, j * d_e + l)]).sum()
    }))
}

/// `Tr_S(m)` for `m` on `C^{d_s} (x) C^{d_e}`.
pub fn partial_trace_sys(m: &CMatrix, d_s: usize, d_e: usize) -> Result<CMatrix> {
    check_bipartite(m, d_s, d_e)?;
    Ok(CMatrix::from_fn(d_e, d_e, |k, l| {
        (0..d_s).map(|i| m[(i * d_e + k, i * d_e + l)]).sum()
    }))
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order and `vectors` holds the
/// matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> nalgebra::DVector<Complex64> {
        self.vectors.column(k).into_owned()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_values<F: Fn(f64) -> Complex64>(&self, f: F) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let w = f(self.values[k]);
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_values(|l| c(l, 0.0))
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is checked against
/// `herm_tol` and symmetrized before factorization.
pub fn hermitian_eig_tol(m: &CMatrix, herm_tol: f64) -> Result<Eigen> {
    is_square(m)?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let deviation = hermiticity_deviation(m);
    if deviation > herm_tol {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::try_new(hermitian_part(m), f64::EPSILON, EIG_MAX_ITERATIONS)
        .ok_or(Error::NoConvergence {
            max_iterations: EIG_MAX_ITERATIONS,
        })?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(Eigen { values, vectors })
}

pub fn hermitian_eig(m: &CMatrix) -> Result<Eigen> {
    hermitian_eig_tol(m, crate::Tolerances::default().hermitian)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eig(m)?.values.iter().map(|l| l.abs()).sum())
}

/// `(1/2) Tr|m|` for Hermitian `m`.
pub fn half_trace_norm(m: &CMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    #[test]
    fn kron_of_identities() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
    }

    #[test]
    fn kron_basis_bookkeeping() {
        let m = kron(&ket_bra(2, 0, 0), &ket_bra(2, 1, 1));
        let mut expected = CMatrix::zeros(4, 4);
        expected[(1, 1)] = c(1., 0.);
        assert_eq!(m, expected);
    }

    #[test]
    fn kron_mixed_product() {
        let x = pauli_x();
        let i2 = identity(2);
        let lhs = kron(&x, &i2) * kron(&i2, &x);
        // X (x) X is the anti-diagonal of ones.
        let expected = CMatrix::from_fn(4, 4, |i, j| if i + j == 3 { c(1., 0.) } else { c(0., 0.) });
        assert_eq!(lhs, expected);
        assert_eq!(kron(&x, &x), expected);
    }

    #[test]
    fn partial_traces_of_bell_state() {
        let mut bell = CMatrix::zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            bell[(i, j)] = c(0.5, 0.);
        }
        let half = identity(2) * c(0.5, 0.);
        assert!(max_abs_diff(&partial_trace_env(&bell, 2, 2).unwrap(), &half) < 1e-15);
        assert!(max_abs_diff(&partial_trace_sys(&bell, 2, 2).unwrap(), &half) < 1e-15);
    }

    #[test]
    fn partial_trace_dimension_error() {
        let m = identity(6);
        assert_eq!(
            partial_trace_env(&m, 2, 2),
            Err(Error::DimensionMismatch { expected: 4, found: 6 })
        );
    }

    #[test]
    fn diagonal_eigendecomposition() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(3., 0.),
            c(1., 0.),
            c(2., 0.),
        ]));
        let eig = hermitian_eig(&m).unwrap();
        assert_eq!(eig.values.len(), 3);
        for (got, want) in eig.values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        // Eigenvectors are (up to phase) e_0, e_2, e_1.
        for (k, row) in [0usize, 2, 1].into_iter().enumerate() {
            assert!((eig.vectors[(row, k)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_x_eigenpairs() {
        let eig = hermitian_eig(&pauli_x()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = eig.vector(0);
        // Overlap with (|0> + |1>)/sqrt 2 has unit modulus.
        let overlap = (plus[0] + plus[1]) * s;
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        let minus = eig.vector(1);
        let overlap = (minus[0] - minus[1]) * s;
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ket_bra(2, 0, 1);
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = identity(2);
        m[(0, 0)] = c(f64::NAN, 0.);
        assert_eq!(hermitian_eig(&m).unwrap_err(), Error::NonFinite);
    }
}
