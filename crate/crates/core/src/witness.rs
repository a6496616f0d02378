//! Witness unitaries that make a correlation operator visible on the system,
//! and the saturating construction that transfers the full distinguishability.
//!
//! Given a traceless Hermitian `R` on `C^{d_S} (x) C^{d_E}` with `n`
//! non-negative eigenvalues, write `n = m d_E + r`. When `m >= 1` the first
//! `m d_E` positive eigenvectors are rotated onto the product states
//! `|j>|l>` with `j < m`, and every remaining eigenvector onto the rows
//! `j >= m`. Tracing out the environment then leaves a strictly positive
//! block on the first `m` system levels, so `Tr_E(U R U^dagger) != 0`.
//! When `m = 0`, the negative eigenvectors play the same role.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{
    trace_distance, DensityOperator, HermitianOperator, SpaceDims, UnitaryOperator,
};
use crate::tolerance::{Tolerances, DETECTION_THRESHOLD};

/// Relative threshold (against `max |R_ij|`) below which an eigenvalue of
/// `R` is treated as zero.
pub const ZERO_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: nalgebra::DVector<num_complex::Complex64>,
}

/// How zero eigenvalues were distributed between the two sign classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ZeroAssignment {
    pub zeros: usize,
    pub to_plus: usize,
}

/// Spectrum of `R` partitioned into a non-negative and a non-positive set.
///
/// Both lists are ordered by descending `|lambda|`; zeros assigned to a set
/// sit at its tail.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    pub mu_plus: Vec<EigenPair>,
    pub mu_minus: Vec<EigenPair>,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub zero_assignment: ZeroAssignment,
    pub system_dim: usize,
    pub env_dim: usize,
}

impl EigenSplit {
    pub fn total_dim(&self) -> usize {
        self.system_dim * self.env_dim
    }

    /// `sum mu_i^(+)`, equal to `(1/2) Tr|R|` for traceless `R`.
    pub fn positive_mass(&self) -> f64 {
        self.mu_plus.iter().map(|p| p.value).sum()
    }

    /// Zero assignment that reaches `n = m d_E` with `0 < m < d_S`.
    pub fn is_saturable(&self) -> bool {
        self.r == 0 && self.m > 0 && self.m < self.system_dim
    }
}

/// Optional unitaries applied inside the two image blocks of the witness
/// construction: `leading` acts on the span of `|j>|l>` with `j < m`,
/// `trailing` on the rest. Any choice keeps the witness property.
#[derive(Debug, Clone, Default)]
pub struct BlockFreedom {
    pub leading: Option<CMatrix>,
    pub trailing: Option<CMatrix>,
}

/// Outcome of a detection attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    /// Right-hand side of the inequality in use.
    pub bound: f64,
    /// Left-hand side reached by the constructed unitary.
    pub achieved: f64,
    pub detectable: bool,
    /// `(1/2) Tr|R'_S|`.
    pub witness_norm: f64,
    pub unitary_id: String,
}

/// `R = rho_S (x) rho_E - rho_SE`.
pub fn build_r(rho_se: &DensityOperator) -> Result<HermitianOperator> {
    let dims = rho_se.dims()?;
    let product = rho_se.product_of_marginals()?;
    Ok(HermitianOperator::new_unchecked(
        product.matrix() - rho_se.matrix(),
        dims,
    ))
}

/// `(1/2) Tr|Tr_E(U X U^dagger)|`.
pub fn reduced_witness_norm(u: &UnitaryOperator, x: &HermitianOperator) -> Result<f64> {
    let dims = x.dims()?;
    let evolved = u.conjugate(x.matrix())?;
    let reduced = linalg::partial_trace_env(&evolved, dims.system(), dims.environment())?;
    linalg::half_trace_norm(&reduced)
}

/// Smallest `k` in `0..=zeros` minimizing `(n0 + k) mod d_E`.
fn best_zero_count(n0: usize, zeros: usize, d_e: usize) -> usize {
    (0..=zeros)
        .min_by_key(|&k| ((n0 + k) % d_e, k))
        .unwrap_or(0)
}

/// Partition the spectrum of `R`, distributing zero eigenvalues so that
/// `r = n mod d_E` is as small as possible (ties: smaller `n`).
pub fn split_spectrum(r: &HermitianOperator, d_e: usize) -> Result<EigenSplit> {
    let total = r.dim();
    if d_e < 2 || total % d_e != 0 || total / d_e < 2 {
        return Err(Error::InvalidDims(format!(
            "cannot split a {total}-dimensional operator with d_E = {d_e}"
        )));
    }
    let scale = r.max_abs();
    if scale == 0.0 {
        return Err(Error::Uncorrelated);
    }
    let eig = r.eig()?;
    let tol = Tolerances::default();
    let trace: f64 = eig.values.iter().sum();
    if trace.abs() > tol.eig(total) * scale.max(1.0) {
        return Err(Error::Internal(format!("R is not traceless (trace {trace:e})")));
    }
    let zero_tol = ZERO_REL_TOL * scale;

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let mut zeros = Vec::new();
    for (k, &value) in eig.values.iter().enumerate() {
        let pair = EigenPair {
            value,
            vector: eig.vector(k),
        };
        if value > zero_tol {
            positives.push(pair);
        } else if value < -zero_tol {
            negatives.push(pair);
        } else {
            zeros.push(pair);
        }
    }
    // eig.values is descending, so positives are already ordered by |lambda|.
    negatives.reverse();

    let zero_count = zeros.len();
    let to_plus = best_zero_count(positives.len(), zero_count, d_e);
    let mut rest = zeros.split_off(to_plus);
    let mut mu_plus = positives;
    mu_plus.append(&mut zeros);
    let mut mu_minus = negatives;
    mu_minus.append(&mut rest);

    let n = mu_plus.len();
    Ok(EigenSplit {
        n,
        m: n / d_e,
        r: n % d_e,
        mu_plus,
        mu_minus,
        zero_assignment: ZeroAssignment {
            zeros: zero_count,
            to_plus,
        },
        system_dim: total / d_e,
        env_dim: d_e,
    })
}

/// Which eigenvector set fills the leading block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

fn check_split_dims(split: &EigenSplit, dims: SpaceDims) -> Result<()> {
    if split.system_dim != dims.system() || split.env_dim != dims.environment() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: split.total_dim(),
        });
    }
    Ok(())
}

fn check_block(block: &Option<CMatrix>, size: usize) -> Result<()> {
    if let Some(w) = block {
        if w.shape() != (size, size) {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: w.nrows(),
            });
        }
        UnitaryOperator::new(w.clone())?;
    }
    Ok(())
}

/// The branch and leading-block size the construction uses for `split`.
pub fn witness_branch(split: &EigenSplit) -> Result<(Branch, usize)> {
    if split.m >= 1 {
        return Ok((Branch::Plus, split.m));
    }
    let m_minus = split.mu_minus.len() / split.env_dim;
    if m_minus == 0 {
        return Err(Error::Internal(
            "neither eigenvalue set fills a system level".into(),
        ));
    }
    Ok((Branch::Minus, m_minus))
}

/// Witness unitary with the default (identity) block freedom.
pub fn witness_unitary(split: &EigenSplit, dims: SpaceDims) -> Result<UnitaryOperator> {
    witness_unitary_with(split, dims, &BlockFreedom::default())
}

pub fn witness_unitary_with(
    split: &EigenSplit,
    dims: SpaceDims,
    freedom: &BlockFreedom,
) -> Result<UnitaryOperator> {
    check_split_dims(split, dims)?;
    let (branch, m) = witness_branch(split)?;
    let (chosen, other) = match branch {
        Branch::Plus => (&split.mu_plus, &split.mu_minus),
        Branch::Minus => (&split.mu_minus, &split.mu_plus),
    };
    let total = dims.total();
    let lead = m * dims.environment();
    check_block(&freedom.leading, lead)?;
    check_block(&freedom.trailing, total - lead)?;

    // Row k of U is the k-th ordered eigenvector, conjugated: U|v_k> = |e_k>,
    // and e_k = |j>|l> with k = j d_E + l.
    let mut u = CMatrix::zeros(total, total);
    for (k, pair) in chosen.iter().chain(other.iter()).enumerate() {
        for col in 0..total {
            u[(k, col)] = pair.vector[col].conj();
        }
    }
    if freedom.leading.is_some() || freedom.trailing.is_some() {
        let mut w = linalg::identity(total);
        if let Some(a) = &freedom.leading {
            w.view_mut((0, 0), (lead, lead)).copy_from(a);
        }
        if let Some(b) = &freedom.trailing {
            w.view_mut((lead, lead), (total - lead, total - lead)).copy_from(b);
        }
        u = w * u;
    }
    Ok(UnitaryOperator::new_unchecked(u))
}

/// Saturating unitary; requires `n = m d_E` with `0 < m < d_S`.
pub fn optimal_unitary(split: &EigenSplit, dims: SpaceDims) -> Result<UnitaryOperator> {
    if !split.is_saturable() {
        return Err(Error::NotSaturable {
            n: split.n,
            env_dim: split.env_dim,
        });
    }
    witness_unitary(split, dims)
}

fn unitary_label(kind: &str, split: &EigenSplit) -> String {
    let branch = match witness_branch(split) {
        Ok((Branch::Plus, _)) => "plus",
        Ok((Branch::Minus, _)) => "minus",
        Err(_) => "none",
    };
    format!("{kind}/{branch}/n{}-m{}-r{}", split.n, split.m, split.r)
}

/// Full result of the witness construction on a single state.
#[derive(Debug, Clone)]
pub struct WitnessOutcome {
    pub r: HermitianOperator,
    pub split: EigenSplit,
    pub unitary: UnitaryOperator,
    pub report: DetectionReport,
}

/// Build `R`, split its spectrum and construct the witness unitary for the
/// pair `(rho_SE, rho_S (x) rho_E)`.
pub fn detect_correlation(rho_se: &DensityOperator, tol_det: f64) -> Result<WitnessOutcome> {
    let dims = rho_se.dims()?;
    let r = build_r(rho_se)?;
    if r.max_abs() <= Tolerances::default().eig(dims.total()) {
        return Err(Error::Uncorrelated);
    }
    let split = split_spectrum(&r, dims.environment())?;
    let unitary = witness_unitary(&split, dims)?;
    let product = rho_se.product_of_marginals()?;
    let report = evaluate(rho_se, &product, &r, &unitary, tol_det, unitary_label("witness", &split))?;
    Ok(WitnessOutcome {
        r,
        split,
        unitary,
        report,
    })
}

fn evaluate(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    r: &HermitianOperator,
    u: &UnitaryOperator,
    tol_det: f64,
    unitary_id: String,
) -> Result<DetectionReport> {
    let bound = trace_distance(rho, sigma)?;
    let rho_s = crate::apply_unitary(u, rho)?.reduced_system()?;
    let sigma_s = crate::apply_unitary(u, sigma)?.reduced_system()?;
    let achieved = trace_distance(&rho_s, &sigma_s)?;
    let witness_norm = reduced_witness_norm(u, r)?;
    Ok(DetectionReport {
        bound,
        achieved,
        detectable: witness_norm > tol_det,
        witness_norm,
        unitary_id,
    })
}

/// Saturation attempt on an arbitrary pair, using `R = sigma_SE - rho_SE`.
///
/// The bound is `D(rho_SE, sigma_SE)`; it is reached exactly when the split
/// of `R` is saturable, otherwise the witness unitary is returned.
pub fn saturate_pair(
    rho_se: &DensityOperator,
    sigma_se: &DensityOperator,
) -> Result<(UnitaryOperator, DetectionReport)> {
    saturate_pair_with(rho_se, sigma_se, DETECTION_THRESHOLD)
}

pub fn saturate_pair_with(
    rho_se: &DensityOperator,
    sigma_se: &DensityOperator,
    tol_det: f64,
) -> Result<(UnitaryOperator, DetectionReport)> {
    let dims = rho_se.dims()?;
    if sigma_se.dims()? != dims {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: sigma_se.dim(),
        });
    }
    let r = HermitianOperator::difference(sigma_se, rho_se)?;
    if r.max_abs() <= Tolerances::default().eig(dims.total()) {
        return Err(Error::IdenticalStates);
    }
    let split = split_spectrum(&r, dims.environment())?;
    let (u, kind) = if split.is_saturable() {
        (optimal_unitary(&split, dims)?, "optimal")
    } else {
        (witness_unitary(&split, dims)?, "witness")
    };
    let report = evaluate(rho_se, sigma_se, &r, &u, tol_det, unitary_label(kind, &split))?;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::random;
    use nalgebra::DVector;

    fn dims22() -> SpaceDims {
        SpaceDims::new(2, 2).unwrap()
    }

    fn bell() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]);
        DensityOperator::pure(&psi, dims22()).unwrap()
    }

    fn classical() -> DensityOperator {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c(0.5, 0.);
        m[(3, 3)] = c(0.5, 0.);
        DensityOperator::new(m, dims22()).unwrap()
    }

    /// Hermitian operator with a prescribed spectrum in a random basis.
    fn with_spectrum(values: &[f64], seed: u64) -> HermitianOperator {
        let n = values.len();
        let u = random::random_unitary(n, seed);
        let d = CMatrix::from_diagonal(&DVector::from_iterator(n, values.iter().map(|&v| c(v, 0.))));
        HermitianOperator::new_unchecked(u.conjugate(&d).unwrap(), dims22())
    }

    #[test]
    fn product_state_gives_zero_r() {
        let rho = DensityOperator::basis(2, 0).tensor(&DensityOperator::maximally_mixed(crate::Space::Flat(2)));
        assert_eq!(build_r(&rho).unwrap().max_abs(), 0.0);
        assert_eq!(detect_correlation(&rho, 1e-9).unwrap_err(), Error::Uncorrelated);
    }

    #[test]
    fn bell_r_spectrum() {
        let r = build_r(&bell()).unwrap();
        let eig = r.eig().unwrap();
        for (got, want) in eig.values.iter().zip([0.25, 0.25, 0.25, -0.75]) {
            assert!((got - want).abs() < 1e-14);
        }
        let rs = r.partial_trace_env().unwrap();
        let re = r.partial_trace_sys().unwrap();
        assert!(rs.max_abs() < 1e-15 && re.max_abs() < 1e-15);
    }

    #[test]
    fn classical_state_distance_to_product() {
        let rho = classical();
        // R = diag(-1/4, 1/4, 1/4, -1/4), so D = sum of positive eigenvalues = 1/2.
        let d = trace_distance(&rho, &rho.product_of_marginals().unwrap()).unwrap();
        assert!((d - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bell_split_bookkeeping() {
        let split = split_spectrum(&build_r(&bell()).unwrap(), 2).unwrap();
        assert_eq!((split.n, split.m, split.r), (3, 1, 1));
        assert_eq!(split.zero_assignment, ZeroAssignment { zeros: 0, to_plus: 0 });
        assert!(!split.is_saturable());
    }

    #[test]
    fn zero_eigenvalue_joins_plus_set() {
        let split = split_spectrum(&with_spectrum(&[0.5, 0.0, -0.5, 0.0], 3), 2).unwrap();
        assert_eq!((split.n, split.m, split.r), (2, 1, 0));
        assert_eq!(split.zero_assignment, ZeroAssignment { zeros: 2, to_plus: 1 });
        assert!(split.is_saturable());
    }

    #[test]
    fn zero_operator_is_refused() {
        assert_eq!(
            split_spectrum(&HermitianOperator::zero(dims22()), 2).unwrap_err(),
            Error::Uncorrelated
        );
    }

    #[test]
    fn classical_state_is_saturable() {
        let split = split_spectrum(&build_r(&classical()).unwrap(), 2).unwrap();
        assert_eq!((split.n, split.m, split.r), (2, 1, 0));
        assert!(split.is_saturable());
        let u = optimal_unitary(&split, dims22()).unwrap();
        let outcome = detect_correlation(&classical(), 1e-9).unwrap();
        assert!((reduced_witness_norm(&u, &outcome.r).unwrap() - 0.5).abs() < 1e-12);
        assert!((outcome.report.achieved - 0.5).abs() < 1e-12);
        assert!((outcome.report.bound - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bell_witness_leading_block() {
        let outcome = detect_correlation(&bell(), 1e-9).unwrap();
        let u = &outcome.unitary;
        let rs = linalg::partial_trace_env(&u.conjugate(outcome.r.matrix()).unwrap(), 2, 2).unwrap();
        // Two of the three 1/4 eigenvectors fill system level 0; the third
        // shares level 1 with the -3/4 eigenvector.
        assert!((rs[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((rs[(1, 1)].re + 0.5).abs() < 1e-12);
        assert!(rs[(0, 1)].norm() < 1e-12);
        assert!(outcome.report.detectable);
        assert!((outcome.report.witness_norm - 0.5).abs() < 1e-12);
        assert!(outcome.report.achieved < 0.75 - 1e-12);
        assert!((outcome.report.bound - 0.75).abs() < 1e-12);
        assert_eq!(
            optimal_unitary(&outcome.split, dims22()).unwrap_err(),
            Error::NotSaturable { n: 3, env_dim: 2 }
        );
    }

    #[test]
    fn mirrored_branch_for_single_positive_eigenvalue() {
        // -R for the Bell state: one positive eigenvalue, so m = 0 on the plus set.
        let r = build_r(&bell()).unwrap();
        let neg = HermitianOperator::new_unchecked(-r.matrix().clone(), dims22());
        let split = split_spectrum(&neg, 2).unwrap();
        assert_eq!((split.n, split.m), (1, 0));
        assert_eq!(witness_branch(&split).unwrap(), (Branch::Minus, 1));
        let u = witness_unitary(&split, dims22()).unwrap();
        assert!((reduced_witness_norm(&u, &neg).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn block_freedom_keeps_witness() {
        let outcome = detect_correlation(&bell(), 1e-9).unwrap();
        let freedom = BlockFreedom {
            leading: Some(random::random_unitary(2, 5).into_matrix()),
            trailing: Some(random::random_unitary(2, 6).into_matrix()),
        };
        let u = witness_unitary_with(&outcome.split, dims22(), &freedom).unwrap();
        assert!(linalg::unitarity_deviation(u.matrix()) < 1e-12);
        assert!(reduced_witness_norm(&u, &outcome.r).unwrap() > 1e-3);
        let bad = BlockFreedom {
            leading: Some(random::random_unitary(3, 5).into_matrix()),
            trailing: None,
        };
        assert!(witness_unitary_with(&outcome.split, dims22(), &bad).is_err());
    }

    #[test]
    fn orthogonal_pure_pair_saturates() {
        let rho = DensityOperator::new(linalg::ket_bra(4, 0, 0), dims22()).unwrap();
        let sigma = DensityOperator::new(linalg::ket_bra(4, 2, 2), dims22()).unwrap();
        let (u, report) = saturate_pair(&rho, &sigma).unwrap();
        assert!(linalg::unitarity_deviation(u.matrix()) < 1e-12);
        assert!((report.bound - 1.0).abs() < 1e-12);
        assert!((report.achieved - 1.0).abs() < 1e-12);
        assert!(report.unitary_id.starts_with("optimal/"));
    }

    #[test]
    fn identical_pair_is_refused() {
        assert_eq!(saturate_pair(&bell(), &bell()).unwrap_err(), Error::IdenticalStates);
    }

    #[test]
    fn zero_assignment_matches_subset_enumeration() {
        // Oracle: try every subset of zero eigenvalues, keep the smallest r,
        // then the smallest n among those.
        fn oracle(n0: usize, zeros: usize, d_e: usize) -> (usize, usize) {
            (0u32..(1 << zeros))
                .map(|mask| {
                    let n = n0 + mask.count_ones() as usize;
                    (n % d_e, n)
                })
                .min()
                .unwrap()
        }
        for d_e in 2..=4 {
            for n0 in 1..=6 {
                for zeros in 0..=6 {
                    let k = best_zero_count(n0, zeros, d_e);
                    let (r, n) = oracle(n0, zeros, d_e);
                    assert_eq!(((n0 + k) % d_e, n0 + k), (r, n), "d_e={d_e} n0={n0} z={zeros}");
                }
            }
        }
    }

    #[test]
    fn split_with_many_zeros_on_random_instances() {
        // Rank-deficient pair on 3x4, so R has a large zero eigenspace.
        let dims = SpaceDims::new(3, 4).unwrap();
        for seed in 0..20 {
            let mut rng = random::rng_from_seed(seed);
            let a = random::random_state_with(12, 1, dims.into(), &mut rng).unwrap();
            let b = random::random_state_with(12, 2, dims.into(), &mut rng).unwrap();
            let r = HermitianOperator::difference(&b, &a).unwrap();
            let split = split_spectrum(&r, 4).unwrap();
            assert_eq!(split.mu_plus.len() + split.mu_minus.len(), 12);
            let z = split.zero_assignment.zeros;
            assert!(z >= 8, "expected a large null space, found {z}");
            let n0 = split.n - split.zero_assignment.to_plus;
            let best = (0..=z).map(|k| (n0 + k) % 4).min().unwrap();
            assert_eq!(split.r, best);
        }
    }
}
