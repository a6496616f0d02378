//! Linear process tomography and its breakdown for correlated inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{apply_kraus, apply_kraus_local, KrausMap};
use crate::error::{Error, Result};
use crate::io::OperatorFile;
use crate::linalg::{self, c, CMatrix};
use crate::operator::{
    apply_unitary, DensityOperator, HermitianOperator, Space, SpaceDims, UnitaryOperator,
};
use crate::tolerance::{Tolerances, DETECTION_THRESHOLD};
use crate::witness::reduced_witness_norm;

pub const MAX_CONDITION: f64 = 1e8;

const PREPARATION_TOL: f64 = 1e-10;

/// Informationally complete family of system states with its Gram matrix.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    states: Vec<DensityOperator>,
    gram: DMatrix<f64>,
    condition: f64,
}

/// `|i><i|` for every `i`, then `|+_ij>` and `|+i_ij>` for every `i < j`.
pub fn build_basis(d: usize) -> Result<OperatorBasis> {
    if d < 2 {
        return Err(Error::InvalidDims(format!("system dimension {d} must be at least 2")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut states: Vec<DensityOperator> = (0..d).map(|i| DensityOperator::basis(d, i)).collect();
    for i in 0..d {
        for j in i + 1..d {
            for phase in [c(s, 0.0), c(0.0, s)] {
                let mut v = DVector::zeros(d);
                v[i] = c(s, 0.0);
                v[j] = phase;
                states.push(DensityOperator::new_unchecked(linalg::projector(&v), Space::Flat(d)));
            }
        }
    }
    OperatorBasis::new(states)
}

impl OperatorBasis {
    pub fn new(states: Vec<DensityOperator>) -> Result<Self> {
        let d = states.first().map(|s| s.dim()).ok_or_else(|| Error::InvalidDims("empty basis".into()))?;
        if states.len() != d * d {
            return Err(Error::InvalidDims(format!(
                "{} states cannot span operators on dimension {d}",
                states.len()
            )));
        }
        if let Some(bad) = states.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let n = states.len();
        let gram = DMatrix::from_fn(n, n, |i, j| hs_inner(states[i].matrix(), states[j].matrix()));
        let eig = SymmetricEigen::try_new(gram.clone(), f64::EPSILON, 10_000)
            .ok_or(Error::NoConvergence { max_iterations: 10_000 })?;
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        Ok(Self {
            states,
            gram,
            condition,
        })
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn system_dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Constant channels `F^(i)(X) = Tr(X) rho^(i)`.
    pub fn replace_maps(&self) -> Result<Vec<KrausMap>> {
        let d = self.system_dim();
        self.states.iter().map(|s| KrausMap::replace_with(d, s)).collect()
    }
}

/// `Re Tr(A^dagger B)`, real for Hermitian arguments.
fn hs_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Real coefficients `a` with `x = sum_i a_i rho^(i)` for Hermitian `x`.
pub fn expand_in_basis(x: &CMatrix, basis: &OperatorBasis) -> Result<Vec<f64>> {
    let d = basis.system_dim();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.nrows(),
        });
    }
    if basis.condition > MAX_CONDITION {
        return Err(Error::IllConditioned {
            condition: basis.condition,
        });
    }
    if let Some(k) = basis.states.iter().position(|s| s.matrix() == x) {
        let mut a = vec![0.0; basis.len()];
        a[k] = 1.0;
        return Ok(a);
    }
    let rhs = DVector::from_iterator(basis.len(), basis.states.iter().map(|s| hs_inner(s.matrix(), x)));
    let a = basis
        .gram
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
    Ok(a.iter().copied().collect())
}

/// `sum_i a_i M_i`, built from the nonzero coefficients only so that a unit
/// coefficient vector returns its operator unchanged.
fn combine(a: &[f64], ops: &[CMatrix]) -> CMatrix {
    let mut acc: Option<CMatrix> = None;
    for (&ai, m) in a.iter().zip(ops) {
        if ai == 0.0 {
            continue;
        }
        let term = if ai == 1.0 { m.clone() } else { m * c(ai, 0.0) };
        acc = Some(match acc {
            None => term,
            Some(sum) => sum + term,
        });
    }
    acc.unwrap_or_else(|| CMatrix::zeros(ops[0].nrows(), ops[0].ncols()))
}

/// Prepared states `rho_SE^(i)` and their evolved reduced states.
#[derive(Debug, Clone)]
pub struct TomographyRecord {
    basis: OperatorBasis,
    prepared: Vec<DensityOperator>,
    outputs: Vec<DensityOperator>,
    unitary: UnitaryOperator,
    dims: SpaceDims,
}

/// Prepare `rho_SE^(i) = (F^(i) (x) id)(rho_SE^(1))`, check that each map
/// realizes its basis state and evolve everything under `u`.
pub fn run_tomography(
    rho_se1: &DensityOperator,
    u: &UnitaryOperator,
    maps: &[KrausMap],
    basis: &OperatorBasis,
) -> Result<TomographyRecord> {
    let dims = rho_se1.dims()?;
    if basis.system_dim() != dims.system() {
        return Err(Error::DimensionMismatch {
            expected: dims.system(),
            found: basis.system_dim(),
        });
    }
    if maps.len() != basis.len() {
        return Err(Error::InvalidDims(format!(
            "{} preparation maps for {} basis states",
            maps.len(),
            basis.len()
        )));
    }
    if u.dim() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: u.dim(),
        });
    }
    let rho_s1 = rho_se1.reduced_system()?;
    for (index, (map, target)) in maps.iter().zip(&basis.states).enumerate() {
        let produced = apply_kraus(map, &rho_s1)?;
        let deviation = linalg::max_abs_diff(produced.matrix(), target.matrix());
        if deviation > PREPARATION_TOL {
            return Err(Error::PreparationMismatch { index, deviation });
        }
    }
    let prepared = maps
        .iter()
        .map(|m| apply_kraus_local(m, rho_se1))
        .collect::<Result<Vec<_>>>()?;
    let outputs = prepared
        .par_iter()
        .map(|p| apply_unitary(u, p)?.reduced_system())
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyRecord {
        basis: basis.clone(),
        prepared,
        outputs,
        unitary: u.clone(),
        dims,
    })
}

/// Linear prediction, returned without a positivity check.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub matrix: HermitianOperator,
    /// Whether the prediction is a valid density operator.
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub query: DensityOperator,
    pub prediction: Prediction,
    pub truth: DensityOperator,
    pub trace_distance_error: f64,
    /// `Y = rho_SE - sum_i a_i rho_SE^(i)`.
    pub y: HermitianOperator,
    /// `(1/2) Tr|Tr_E(U Y U^dagger)|`.
    pub y_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryReport {
    pub query: OperatorFile,
    pub prediction: OperatorFile,
    pub truth: OperatorFile,
    pub trace_distance_error: f64,
    pub positivity_flag: bool,
    #[serde(rename = "Y_norm")]
    pub y_norm: f64,
}

impl QueryOutcome {
    pub fn report(&self) -> QueryReport {
        QueryReport {
            query: OperatorFile::from_density(&self.query),
            prediction: OperatorFile::from_hermitian(&self.prediction.matrix),
            truth: OperatorFile::from_density(&self.truth),
            trace_distance_error: self.trace_distance_error,
            positivity_flag: self.prediction.valid,
            y_norm: self.y_norm,
        }
    }
}

impl TomographyRecord {
    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn prepared(&self) -> &[DensityOperator] {
        &self.prepared
    }

    pub fn outputs(&self) -> &[DensityOperator] {
        &self.outputs
    }

    pub fn unitary(&self) -> &UnitaryOperator {
        &self.unitary
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    /// `Y` for a system-environment state, expanded against the prepared
    /// states.
    pub fn y_operator(&self, rho_se: &DensityOperator) -> Result<HermitianOperator> {
        let a = expand_in_basis(rho_se.reduced_system()?.matrix(), &self.basis)?;
        let prepared: Vec<CMatrix> = self.prepared.iter().map(|p| p.matrix().clone()).collect();
        let y = rho_se.matrix() - combine(&a, &prepared);
        Ok(HermitianOperator::new_unchecked(y, self.dims))
    }

    pub fn y_norm(&self, rho_se: &DensityOperator) -> Result<f64> {
        reduced_witness_norm(&self.unitary, &self.y_operator(rho_se)?)
    }

    /// Evolve the query exactly and compare with the linear prediction.
    pub fn evaluate(&self, query: &DensityOperator) -> Result<QueryOutcome> {
        if query.dims()? != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.total(),
                found: query.dim(),
            });
        }
        let prediction = predict_linear(self, &query.reduced_system()?)?;
        let truth = apply_unitary(&self.unitary, query)?.reduced_system()?;
        let diff = prediction.matrix.matrix() - truth.matrix();
        let trace_distance_error = linalg::half_trace_norm(&linalg::hermitian_part(&diff))?;
        let y = self.y_operator(query)?;
        let y_norm = reduced_witness_norm(&self.unitary, &y)?;
        Ok(QueryOutcome {
            query: query.clone(),
            prediction,
            truth,
            trace_distance_error,
            y,
            y_norm,
        })
    }
}

/// `rho'_S = sum_i a_i rho'^(i)_S`.
pub fn predict_linear(record: &TomographyRecord, rho_s: &DensityOperator) -> Result<Prediction> {
    let a = expand_in_basis(rho_s.matrix(), &record.basis)?;
    let outputs: Vec<CMatrix> = record.outputs.iter().map(|o| o.matrix().clone()).collect();
    let m = combine(&a, &outputs);
    let d = m.nrows();
    let tol = Tolerances::default();
    let valid = crate::operator::density_violations(&m, Space::Flat(d), &tol).is_empty();
    Ok(Prediction {
        matrix: HermitianOperator::new_unchecked(m, Space::Flat(d)),
        valid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearityVerdict {
    pub linear: bool,
    pub y_norms: Vec<f64>,
    pub max_y_norm: f64,
}

/// True when `Tr_E(U Y U^dagger)` vanishes for every member of the set.
pub fn linearity_criterion(record: &TomographyRecord, states: &[DensityOperator]) -> Result<LinearityVerdict> {
    linearity_criterion_with(record, states, DETECTION_THRESHOLD)
}

pub fn linearity_criterion_with(
    record: &TomographyRecord,
    states: &[DensityOperator],
    tol_det: f64,
) -> Result<LinearityVerdict> {
    let y_norms = states
        .iter()
        .map(|s| record.y_norm(s))
        .collect::<Result<Vec<_>>>()?;
    let max_y_norm = y_norms.iter().copied().fold(0.0, f64::max);
    Ok(LinearityVerdict {
        linear: max_y_norm <= tol_det,
        y_norms,
        max_y_norm,
    })
}

/// The set `{(F (x) id)(rho_SE^(1))}` for the given local maps.
pub fn locally_prepared(rho_se1: &DensityOperator, maps: &[KrausMap]) -> Result<Vec<DensityOperator>> {
    maps.iter().map(|m| apply_kraus_local(m, rho_se1)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    pub condition: f64,
    pub queries: Vec<QueryReport>,
    pub linear: bool,
    pub max_y_norm: f64,
}

pub fn tomography_report(record: &TomographyRecord, outcomes: &[QueryOutcome], tol_det: f64) -> TomographyReport {
    let max_y_norm = outcomes.iter().map(|o| o.y_norm).fold(0.0, f64::max);
    TomographyReport {
        condition: record.basis.condition(),
        queries: outcomes.iter().map(QueryOutcome::report).collect(),
        linear: max_y_norm <= tol_det,
        max_y_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, rng_from_seed};
    use crate::witness;

    fn dims22() -> SpaceDims {
        SpaceDims::new(2, 2).unwrap()
    }

    fn bell() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]);
        DensityOperator::pure(&psi, dims22()).unwrap()
    }

    #[test]
    fn qubit_basis() {
        let b = build_basis(2).unwrap();
        assert_eq!(b.len(), 4);
        let plus = CMatrix::from_element(2, 2, c(0.5, 0.));
        assert!(linalg::max_abs_diff(b.states()[2].matrix(), &plus) < 1e-15);
        let plus_i = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0., -0.5), c(0., 0.5), c(0.5, 0.)]);
        assert!(linalg::max_abs_diff(b.states()[3].matrix(), &plus_i) < 1e-15);
        for s in b.states() {
            assert!(DensityOperator::new(s.matrix().clone(), Space::Flat(2)).is_ok());
        }
    }

    #[test]
    fn gram_conditioning() {
        for d in 2..=4 {
            let b = build_basis(d).unwrap();
            assert!(b.condition().is_finite() && b.condition() < MAX_CONDITION);
        }
        assert!(build_basis(1).is_err());
    }

    #[test]
    fn expansion_examples() {
        let b = build_basis(2).unwrap();
        assert_eq!(expand_in_basis(DensityOperator::basis(2, 0).matrix(), &b).unwrap(), vec![1., 0., 0., 0.]);
        let half = linalg::identity(2) / c(2., 0.);
        let a = expand_in_basis(&half, &b).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let states: Vec<CMatrix> = b.states().iter().map(|s| s.matrix().clone()).collect();
        assert!(linalg::max_abs_diff(&combine(&a, &states), &half) < 1e-12);
    }

    #[test]
    fn expansion_of_random_states() {
        let mut rng = rng_from_seed(5);
        for d in 2..=4 {
            let b = build_basis(d).unwrap();
            let states: Vec<CMatrix> = b.states().iter().map(|s| s.matrix().clone()).collect();
            for _ in 0..5 {
                let rho = random::random_state_with(d, d, Space::Flat(d), &mut rng).unwrap();
                let a = expand_in_basis(rho.matrix(), &b).unwrap();
                assert!(linalg::max_abs_diff(&combine(&a, &states), rho.matrix()) < 1e-10);
                assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn wrong_maps_rejected() {
        let b = build_basis(2).unwrap();
        let maps = vec![KrausMap::identity(2); 4];
        let rho = DensityOperator::basis(2, 0).tensor(&DensityOperator::basis(2, 1));
        assert!(matches!(
            run_tomography(&rho, &UnitaryOperator::identity(4), &maps, &b),
            Err(Error::PreparationMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn factorized_prediction_is_exact() {
        let mut rng = rng_from_seed(21);
        let b = build_basis(2).unwrap();
        let omega = random::random_state_with(2, 2, Space::Flat(2), &mut rng).unwrap();
        let rho1 = random::random_state_with(2, 2, Space::Flat(2), &mut rng).unwrap().tensor(&omega);
        let u = random::random_unitary_with(4, &mut rng);
        let record = run_tomography(&rho1, &u, &b.replace_maps().unwrap(), &b).unwrap();
        for _ in 0..10 {
            let map = random::random_kraus_with(2, 2, &mut rng);
            let query = apply_kraus_local(&map, &rho1).unwrap();
            let out = record.evaluate(&query).unwrap();
            assert!(out.trace_distance_error <= 1e-10);
            assert!(out.y_norm <= 1e-10);
            assert!((linalg::trace_re(out.prediction.matrix.matrix()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_queries_reproduce_outputs_bitwise() {
        let mut rng = rng_from_seed(22);
        let b = build_basis(2).unwrap();
        let rho1 = random::random_state_with(4, 4, dims22().into(), &mut rng).unwrap();
        let record = run_tomography(&rho1, &random::random_unitary_with(4, &mut rng), &b.replace_maps().unwrap(), &b)
            .unwrap();
        for (state, out) in b.states().iter().zip(record.outputs()) {
            let p = predict_linear(&record, state).unwrap();
            assert_eq!(p.matrix.matrix(), out.matrix());
        }
    }

    #[test]
    fn bell_setting_fails_linearity() {
        let rho1 = bell();
        let b = build_basis(2).unwrap();
        let outcome = witness::detect_correlation(&rho1, 1e-9).unwrap();
        let record = run_tomography(&rho1, &outcome.unitary, &b.replace_maps().unwrap(), &b).unwrap();
        let out = record.evaluate(&rho1).unwrap();
        assert!(out.trace_distance_error > 1e-6);
        assert!(out.y_norm > 1e-9);
        assert!((out.trace_distance_error - out.y_norm).abs() < 1e-12);
        let verdict = linearity_criterion(&record, &[rho1.clone()]).unwrap();
        assert!(!verdict.linear);
        // Y is minus the correlation operator of the Bell state.
        let r = witness::build_r(&rho1).unwrap();
        assert!(linalg::max_abs_diff(&(out.y.matrix() + r.matrix()), &CMatrix::zeros(4, 4)) < 1e-12);
    }

    #[test]
    fn factorized_set_is_linear() {
        let mut rng = rng_from_seed(23);
        let b = build_basis(2).unwrap();
        let rho1 = DensityOperator::basis(2, 0).tensor(&random::random_state(2, 2, 3).unwrap());
        let record = run_tomography(&rho1, &random::random_unitary_with(4, &mut rng), &b.replace_maps().unwrap(), &b)
            .unwrap();
        let maps: Vec<_> = (0..5).map(|_| random::random_kraus_with(2, 3, &mut rng)).collect();
        let set = locally_prepared(&rho1, &maps).unwrap();
        assert!(linearity_criterion(&record, &set).unwrap().linear);
    }
}
