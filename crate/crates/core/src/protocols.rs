//! State-preparation schemes and trace-distance detection inequalities.
//!
//! A scenario is a pair `(rho_SE, sigma_SE)`. The experimenter prepares
//! `sigma_SE` with local operations on the system, lets both evolve under a
//! global unitary and compares the reduced states.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{apply_kraus_local, KrausMap};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{
    apply_unitary, trace_distance, DensityOperator, HermitianOperator, Space, SpaceDims,
    UnitaryOperator,
};
use crate::tolerance::Tolerances;
use crate::witness::{self, reduced_witness_norm, DetectionReport};

/// Eigenvalues of `rho_S` closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

const PRODUCT_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// `sigma = (F_S (x) id_E)(rho)` for some local map.
    LocalMap,
    /// `sigma = rho_S (x) rho_E`, prepared locally.
    ProductReplacement,
    /// `sigma = sigma_S (x) rho_B (x) rho_C` for a bipartite environment.
    EnvFactorized,
    Arbitrary,
}

#[derive(Debug, Clone)]
pub struct ScenarioPair {
    pub rho_se: DensityOperator,
    pub sigma_se: DensityOperator,
    pub provenance: Provenance,
}

impl ScenarioPair {
    pub fn new(rho_se: DensityOperator, sigma_se: DensityOperator, provenance: Provenance) -> Result<Self> {
        let dims = rho_se.dims()?;
        if sigma_se.dims()? != dims {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: sigma_se.dim(),
            });
        }
        let pair = Self {
            rho_se,
            sigma_se,
            provenance,
        };
        if matches!(provenance, Provenance::LocalMap | Provenance::ProductReplacement) {
            pair.check_equal_env_marginals()?;
        }
        Ok(pair)
    }

    pub fn dims(&self) -> SpaceDims {
        self.rho_se.dims().expect("validated at construction")
    }

    fn check_equal_env_marginals(&self) -> Result<()> {
        let a = self.rho_se.reduced_environment()?;
        let b = self.sigma_se.reduced_environment()?;
        let deviation = linalg::max_abs_diff(a.matrix(), b.matrix());
        if deviation > Tolerances::default().eig(self.dims().total()) {
            return Err(Error::MarginalMismatch { deviation });
        }
        Ok(())
    }

    /// `D(rho'_S, sigma'_S)` after the global unitary.
    pub fn evolved_distance(&self, u: &UnitaryOperator) -> Result<f64> {
        let a = apply_unitary(u, &self.rho_se)?.reduced_system()?;
        let b = apply_unitary(u, &self.sigma_se)?.reduced_system()?;
        trace_distance(&a, &b)
    }

    /// `D(rho_S, sigma_S)` before evolution.
    pub fn initial_distance(&self) -> Result<f64> {
        trace_distance(&self.rho_se.reduced_system()?, &self.sigma_se.reduced_system()?)
    }

    /// `D(rho'_S, sigma'_S) - D(rho_S, sigma_S)`.
    pub fn detection_gain(&self, u: &UnitaryOperator) -> Result<f64> {
        Ok(self.evolved_distance(u)? - self.initial_distance()?)
    }
}

/// Local preparation map `F_S = Lambda_S . (|0><0| Tr_S)`: reset the system,
/// then prepare `target` with a constant channel.
pub fn product_replacement_map(target: &DensityOperator) -> Result<KrausMap> {
    let d = target.dim();
    let reset = KrausMap::new((0..d).map(|k| linalg::ket_bra(d, 0, k)).collect())?;
    let prepare = KrausMap::replace_with(d, target)?;
    prepare.compose(&reset)
}

/// `sigma_SE = (F_S (x) id_E)(rho_SE) = rho_S (x) rho_E`, realized through the
/// local channel and checked against the direct tensor product.
pub fn prepare_product_replacement(rho_se: &DensityOperator) -> Result<ScenarioPair> {
    let map = product_replacement_map(&rho_se.reduced_system()?)?;
    let sigma = apply_kraus_local(&map, rho_se)?;
    let assembled = rho_se.product_of_marginals()?;
    let deviation = trace_distance(&sigma, &assembled)?;
    if deviation > PRODUCT_CHECK_TOL {
        return Err(Error::Internal(format!(
            "local replacement differs from rho_S (x) rho_E by {deviation:e}"
        )));
    }
    ScenarioPair::new(rho_se.clone(), sigma, Provenance::ProductReplacement)
}

/// `sigma_SE = (F_S (x) id_E)(rho_SE)` for an arbitrary local map.
pub fn local_map_pair(rho_se: &DensityOperator, map: &KrausMap) -> Result<ScenarioPair> {
    let sigma = apply_kraus_local(map, rho_se)?;
    ScenarioPair::new(rho_se.clone(), sigma, Provenance::LocalMap)
}

/// Orthonormal eigenbasis of `rho_S` used by the dephasing witness.
#[derive(Debug, Clone)]
pub struct MeasurementBasis {
    /// Basis vectors as columns, grouped by descending eigenvalue.
    pub vectors: CMatrix,
    pub eigenvalues: Vec<f64>,
    /// True when `rho_S` has a repeated eigenvalue, so the basis (and the
    /// witness verdict) depends on the tie-breaking rule.
    pub degenerate: bool,
}

/// Orthonormal basis of the span of `cluster`, preferring computational
/// basis vectors in lexicographic order.
fn canonical_basis(cluster: &[DVector<Complex64>], dim: usize) -> Vec<DVector<Complex64>> {
    if cluster.len() == 1 {
        return cluster.to_vec();
    }
    let span = cluster.iter().fold(CMatrix::zeros(dim, dim), |acc, v| acc + linalg::projector(v));
    let mut chosen: Vec<DVector<Complex64>> = Vec::new();
    for k in 0..dim {
        if chosen.len() == cluster.len() {
            break;
        }
        let mut v = span.column(k).into_owned();
        for w in &chosen {
            let overlap = w.dotc(&v);
            v -= w * overlap;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            chosen.push(v / Complex64::new(norm, 0.0));
        }
    }
    chosen
}

pub fn eigenbasis_of(rho_s: &DensityOperator) -> Result<MeasurementBasis> {
    let eig = rho_s.eig()?;
    let dim = rho_s.dim();
    let mut vectors = Vec::with_capacity(dim);
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut degenerate = false;
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && (eig.values[start] - eig.values[end]).abs() <= DEGENERACY_TOL {
            end += 1;
        }
        degenerate |= end - start > 1;
        let cluster: Vec<_> = (start..end).map(|k| eig.vector(k)).collect();
        for v in canonical_basis(&cluster, dim) {
            vectors.push(v);
        }
        eigenvalues.extend_from_slice(&eig.values[start..end]);
        start = end;
    }
    Ok(MeasurementBasis {
        vectors: CMatrix::from_columns(&vectors),
        eigenvalues,
        degenerate,
    })
}

/// Measurement of the system in the eigenbasis of `rho_S`:
/// `sigma_SE = sum_k (P_k (x) I) rho_SE (P_k (x) I)`.
pub fn dephase_in_eigenbasis(rho_se: &DensityOperator) -> Result<(ScenarioPair, MeasurementBasis)> {
    let basis = eigenbasis_of(&rho_se.reduced_system()?)?;
    let map = KrausMap::dephasing(&basis.vectors)?;
    Ok((local_map_pair(rho_se, &map)?, basis))
}

fn distance_to_product(rho: &DensityOperator) -> Result<f64> {
    trace_distance(rho, &rho.product_of_marginals()?)
}

/// `D(rho_SE, rho_S (x) rho_E) + D(sigma_SE, sigma_S (x) sigma_E) + D(rho_E, sigma_E)`.
pub fn bound_rhs_full(pair: &ScenarioPair) -> Result<f64> {
    Ok(distance_to_product(&pair.rho_se)?
        + distance_to_product(&pair.sigma_se)?
        + trace_distance(
            &pair.rho_se.reduced_environment()?,
            &pair.sigma_se.reduced_environment()?,
        )?)
}

/// Correlation operators of a pair with equal environment marginals:
/// `R = rho_S (x) rho_E - rho_SE`, `R_bar = sigma_S (x) sigma_E - sigma_SE`
/// and `Q = rho_S (x) rho_E - sigma_S (x) rho_E`, which satisfy
/// `rho_SE - sigma_SE = R_bar - R + Q`.
#[derive(Debug, Clone)]
pub struct CorrelationOperators {
    pub r: HermitianOperator,
    pub r_bar: HermitianOperator,
    pub q: HermitianOperator,
}

pub fn correlation_operators(pair: &ScenarioPair) -> Result<CorrelationOperators> {
    pair.check_equal_env_marginals()?;
    let dims = pair.dims();
    let rho_e = pair.rho_se.reduced_environment()?;
    let sigma_s = pair.sigma_se.reduced_system()?;
    let q = pair.rho_se.product_of_marginals()?.matrix() - linalg::kron(sigma_s.matrix(), rho_e.matrix());
    Ok(CorrelationOperators {
        r: witness::build_r(&pair.rho_se)?,
        r_bar: witness::build_r(&pair.sigma_se)?,
        q: HermitianOperator::new_unchecked(q, dims),
    })
}

/// `((1/2) Tr|R'_S|, (1/2) Tr|R_bar'_S|)` for a pair with `sigma_E = rho_E`.
pub fn bound_rhs_r(pair: &ScenarioPair, u: &UnitaryOperator) -> Result<(f64, f64)> {
    let ops = correlation_operators(pair)?;
    Ok((reduced_witness_norm(u, &ops.r)?, reduced_witness_norm(u, &ops.r_bar)?))
}

/// State on `S (x) B (x) C`, ordered S-major, then B, then C.
#[derive(Debug, Clone)]
pub struct TripartiteState {
    rho: DensityOperator,
    d_s: usize,
    d_b: usize,
    d_c: usize,
}

impl TripartiteState {
    pub fn new(rho: DensityOperator, d_s: usize, d_b: usize, d_c: usize) -> Result<Self> {
        let se = SpaceDims::new(d_s, d_b * d_c)?;
        SpaceDims::new(d_b, d_c)?;
        let rho = rho.with_space(se)?;
        Ok(Self { rho, d_s, d_b, d_c })
    }

    /// `rho_S (x) rho_BC`.
    pub fn from_factors(rho_s: &DensityOperator, rho_bc: &DensityOperator, d_b: usize) -> Result<Self> {
        let d_c = rho_bc.dim() / d_b.max(1);
        if d_b * d_c != rho_bc.dim() {
            return Err(Error::InvalidDims(format!(
                "environment of dimension {} does not split with d_B = {d_b}",
                rho_bc.dim()
            )));
        }
        Self::new(rho_s.tensor(rho_bc), rho_s.dim(), d_b, d_c)
    }

    /// The state viewed as bipartite `S | BC`.
    pub fn state(&self) -> &DensityOperator {
        &self.rho
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d_s, self.d_b, self.d_c)
    }

    pub fn se_dims(&self) -> SpaceDims {
        self.rho.dims().expect("validated at construction")
    }

    pub fn rho_s(&self) -> Result<DensityOperator> {
        self.rho.reduced_system()
    }

    pub fn rho_bc(&self) -> Result<DensityOperator> {
        let bc = self.rho.reduced_environment()?;
        bc.with_space(SpaceDims::new(self.d_b, self.d_c)?)
    }

    pub fn rho_b(&self) -> Result<DensityOperator> {
        self.rho_bc()?.reduced_system()
    }

    pub fn rho_c(&self) -> Result<DensityOperator> {
        self.rho_bc()?.reduced_environment()
    }

    /// `rho_B (x) rho_C`.
    pub fn env_product(&self) -> Result<DensityOperator> {
        self.rho_bc()?.product_of_marginals()
    }

    /// `D(rho_SBC, rho_S (x) rho_BC)`; zero when the system is factorized.
    pub fn system_correlation(&self) -> Result<f64> {
        distance_to_product(&self.rho)
    }

    fn require_factorized_system(&self) -> Result<()> {
        let deviation = self.system_correlation()?;
        if deviation > PRODUCT_CHECK_TOL {
            return Err(Error::SystemNotFactorized { deviation });
        }
        Ok(())
    }

    /// `sigma_S (x) rho_B (x) rho_C`.
    pub fn env_factorized(&self, sigma_s: &DensityOperator) -> Result<DensityOperator> {
        if sigma_s.dim() != self.d_s {
            return Err(Error::DimensionMismatch {
                expected: self.d_s,
                found: sigma_s.dim(),
            });
        }
        let m = linalg::kron(sigma_s.matrix(), self.env_product()?.matrix());
        Ok(DensityOperator::new_unchecked(m, self.se_dims()))
    }

    /// `R = rho_S (x) rho_B (x) rho_C - rho_S (x) rho_BC`.
    pub fn env_correlation_operator(&self) -> Result<HermitianOperator> {
        let sigma = self.env_factorized(&self.rho_s()?)?;
        HermitianOperator::difference(&sigma, &self.rho)
    }
}

/// Pair `(rho_S (x) rho_BC, sigma_S (x) rho_B (x) rho_C)`.
pub fn env_factorized_pair(tri: &TripartiteState, sigma_s: &DensityOperator) -> Result<ScenarioPair> {
    tri.require_factorized_system()?;
    ScenarioPair::new(tri.state().clone(), tri.env_factorized(sigma_s)?, Provenance::EnvFactorized)
}

/// Witness unitary for environment-internal correlations, treating `B (x) C`
/// as the environment.
pub fn env_witness_unitary(tri: &TripartiteState) -> Result<UnitaryOperator> {
    tri.require_factorized_system()?;
    let r = tri.env_correlation_operator()?;
    if r.max_abs() <= Tolerances::default().eig(r.dim()) {
        return Err(Error::Uncorrelated);
    }
    let split = witness::split_spectrum(&r, tri.se_dims().environment())?;
    witness::witness_unitary(&split, tri.se_dims())
}

/// Compare `rho_S (x) rho_BC` with `rho_S (x) rho_B (x) rho_C` after `u`.
///
/// The bound is `D(rho_BC, rho_B (x) rho_C)`; the achieved value is
/// `D(rho'_S, sigma'_S)`.
pub fn detect_env_correlation(
    tri: &TripartiteState,
    u: &UnitaryOperator,
    tol_det: f64,
) -> Result<DetectionReport> {
    let pair = env_factorized_pair(tri, &tri.rho_s()?)?;
    let bound = trace_distance(&tri.rho_bc()?, &tri.env_product()?)?;
    let achieved = pair.evolved_distance(u)?;
    let witness_norm = reduced_witness_norm(u, &tri.env_correlation_operator()?)?;
    Ok(DetectionReport {
        bound,
        achieved,
        detectable: witness_norm > tol_det,
        witness_norm,
        unitary_id: "env".into(),
    })
}

/// Convenience for building a flat system state from its matrix.
pub fn system_state(matrix: CMatrix) -> Result<DensityOperator> {
    let d = matrix.nrows();
    DensityOperator::new(matrix, Space::Flat(d))
}
