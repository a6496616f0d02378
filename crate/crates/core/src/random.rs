//! Seeded random states, unitaries, channels and Hamiltonians.
//!
//! All generators draw from `ChaCha8Rng`, so a seed fixes the output
//! bit-for-bit on every platform.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::KrausMap;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::operator::{DensityOperator, HermitianOperator, Space, UnitaryOperator};

pub type InstanceRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard complex Gaussians (real and imaginary parts
/// each `N(0, 1)`).
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c(re, im);
        }
    }
    m
}

/// `G G^dagger / Tr(G G^dagger)` with `G` a `dim x rank` Ginibre matrix.
pub fn random_state_with<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    space: Space,
    rng: &mut R,
) -> Result<DensityOperator> {
    if rank == 0 || rank > dim || space.dim() != dim {
        return Err(Error::InvalidRank { rank, dim });
    }
    let g = ginibre(dim, rank, rng);
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    let m = linalg::hermitian_part(&(w * c(1.0 / tr, 0.0)));
    Ok(DensityOperator::new_unchecked(m, space))
}

pub fn random_state(dim: usize, rank: usize, seed: u64) -> Result<DensityOperator> {
    random_state_with(dim, rank, Space::Flat(dim), &mut rng_from_seed(seed))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` absorbed into `Q`.
pub fn random_unitary_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOperator {
    let g = ginibre(dim, dim, rng);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    UnitaryOperator::new_unchecked(q)
}

pub fn random_unitary(dim: usize, seed: u64) -> UnitaryOperator {
    random_unitary_with(dim, &mut rng_from_seed(seed))
}

/// Random CPTP map on `dim` with `n_kraus` operators, obtained from the first
/// `dim` columns of a Haar unitary on `dim * n_kraus`.
pub fn random_kraus_with<R: Rng + ?Sized>(dim: usize, n_kraus: usize, rng: &mut R) -> KrausMap {
    let big = random_unitary_with(dim * n_kraus, rng);
    let v = big.matrix();
    let ops: Vec<CMatrix> = (0..n_kraus)
        .map(|i| CMatrix::from_fn(dim, dim, |a, b| v[(a * n_kraus + i, b)]))
        .collect();
    KrausMap::new(ops).expect("isometry blocks form a complete Kraus set")
}

/// GUE-like Hermitian matrix `(G + G^dagger) / 2`.
pub fn random_hermitian_with<R: Rng + ?Sized>(dim: usize, space: Space, rng: &mut R) -> HermitianOperator {
    let g = ginibre(dim, dim, rng);
    HermitianOperator::new_unchecked(linalg::hermitian_part(&g), space)
}

/// Uniformly distributed pure state vector.
pub fn random_ket_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<num_complex::Complex64> {
    let g = ginibre(dim, 1, rng);
    let n = g.norm();
    DVector::from_iterator(dim, g.iter().map(|z| z / n))
}
