//! Time evolution `U(t) = exp(-iHt)` through the spectral decomposition of `H`.

use crate::error::Result;
use crate::linalg::{c, Eigen};
use crate::operator::{HermitianOperator, UnitaryOperator};

/// Cached eigendecomposition of a time-independent Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator {
    eig: Eigen,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Result<Self> {
        Ok(Self { eig: h.eig()? })
    }

    /// `V exp(-i Lambda t) V^dagger`.
    pub fn at(&self, t: f64) -> UnitaryOperator {
        UnitaryOperator::new_unchecked(self.eig.map_values(|l| {
            let phase = -l * t;
            c(phase.cos(), phase.sin())
        }))
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.eig.values
    }
}

pub fn expm_hermitian(h: &HermitianOperator, t: f64) -> Result<UnitaryOperator> {
    Ok(Propagator::new(h)?.at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, CMatrix};
    use crate::operator::Space;

    fn pauli_z() -> HermitianOperator {
        HermitianOperator::new(
            CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
            Space::Flat(2),
        )
        .unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let u = expm_hermitian(&pauli_z(), 0.0).unwrap();
        assert!(linalg::max_abs_diff(u.matrix(), &linalg::identity(2)) < 1e-15);
    }

    #[test]
    fn z_rotation_by_pi() {
        let u = expm_hermitian(&pauli_z(), std::f64::consts::PI).unwrap();
        // exp(-i pi Z) = diag(e^{-i pi}, e^{i pi}) = -I.
        assert!(linalg::max_abs_diff(u.matrix(), &(linalg::identity(2) * c(-1., 0.))) < 1e-14);
        let p0 = linalg::ket_bra(2, 0, 0);
        assert!(linalg::max_abs_diff(&u.conjugate(&p0).unwrap(), &p0) < 1e-14);
    }

    #[test]
    fn group_law() {
        let h = HermitianOperator::new(
            CMatrix::from_row_slice(2, 2, &[c(0.3, 0.), c(0.5, -0.2), c(0.5, 0.2), c(-1.1, 0.)]),
            Space::Flat(2),
        )
        .unwrap();
        let p = Propagator::new(&h).unwrap();
        let lhs = p.at(0.4).compose(&p.at(1.3));
        assert!(linalg::max_abs_diff(lhs.matrix(), p.at(1.7).matrix()) < 1e-10);
        assert!(linalg::unitarity_deviation(p.at(5.0).matrix()) < 1e-12);
    }
}
