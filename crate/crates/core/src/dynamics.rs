//! Detection under time-independent Hamiltonians and the ZZ spin chain.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::apply_kraus_local;
use crate::error::{Error, Result};
use crate::evolution::Propagator;
use crate::linalg::{self, c, CMatrix};
use crate::operator::{
    trace_distance, DensityOperator, HermitianOperator, Space, SpaceDims, UnitaryOperator,
};
use crate::random;
use crate::tolerance::{Tolerances, DETECTION_THRESHOLD};
use crate::witness::{build_r, reduced_witness_norm};

pub const MAX_CHAIN_SPINS: usize = 12;
pub const MAX_BCH_ORDER: usize = 12;

/// Relative singular-value cutoff used for the operator-Schmidt rank.
const SCHMIDT_REL_TOL: f64 = 1e-10;

/// Uniform grid `t_i = t_max * i / steps` for `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t_max: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be positive".into()));
        }
        Ok(Self { t_max, steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The fraction `i / steps` is formed first so that refined grids hit
    /// shared points with identical bits.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            return self.t_max;
        }
        self.t_max * (i as f64 / self.steps as f64)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.time(i)).collect()
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub times: Vec<f64>,
    /// `(1/2) Tr|Tr_E(U R U^dagger)|` with `R = sigma_SE - rho_SE`.
    pub witness_norms: Vec<f64>,
    /// `D(rho_S(t), sigma_S(t))`.
    pub trace_distances: Vec<f64>,
    /// Finite-difference time derivative of the trace distance.
    pub td_rates: Vec<f64>,
    /// Fraction of the times `t > 0` at which the witness norm exceeds the
    /// detection threshold.
    pub detected_fraction: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub detected_fraction: f64,
    pub first_detection_time: Option<f64>,
    pub max_norm: f64,
}

impl SweepResult {
    pub fn first_detection_time(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.witness_norms)
            .find(|(_, &w)| w > self.threshold)
            .map(|(&t, _)| t)
    }

    pub fn max_norm(&self) -> f64 {
        self.witness_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn summary(&self) -> SweepSummary {
        SweepSummary {
            detected_fraction: self.detected_fraction,
            first_detection_time: self.first_detection_time(),
            max_norm: self.max_norm(),
        }
    }

    /// Columns `t, witness_norm, trace_distance, td_rate` with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,witness_norm,trace_distance,td_rate")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.witness_norms[i], self.trace_distances[i], self.td_rates[i]
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

fn finite_difference(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (values[b] - values[a]) / (times[b] - times[a])
        })
        .collect()
}

pub fn sweep(
    h: &HermitianOperator,
    rho_se: &DensityOperator,
    sigma_se: &DensityOperator,
    grid: &TimeGrid,
) -> Result<SweepResult> {
    sweep_with(h, rho_se, sigma_se, grid, DETECTION_THRESHOLD)
}

/// Evolve both states under `exp(-i H t)` on every grid time.
///
/// Requires `Tr_E(sigma_SE - rho_SE) = 0`, so that the witness norm
/// vanishes at `t = 0`.
pub fn sweep_with(
    h: &HermitianOperator,
    rho_se: &DensityOperator,
    sigma_se: &DensityOperator,
    grid: &TimeGrid,
    tol_det: f64,
) -> Result<SweepResult> {
    let dims = rho_se.dims()?;
    if sigma_se.dims()? != dims {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: sigma_se.dim(),
        });
    }
    if h.dim() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: h.dim(),
        });
    }
    let r = HermitianOperator::difference(sigma_se, rho_se)?;
    let r_s = r.partial_trace_env()?;
    if r_s.max_abs() > Tolerances::default().eig(dims.total()) {
        return Err(Error::MarginalMismatch {
            deviation: r_s.max_abs(),
        });
    }
    let propagator = Propagator::new(h)?;
    let times = grid.times();
    let samples: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let u = propagator.at(t);
            let norm = reduced_witness_norm(&u, &r)?;
            let a = crate::apply_unitary(&u, rho_se)?.reduced_system()?;
            let b = crate::apply_unitary(&u, sigma_se)?.reduced_system()?;
            Ok((norm, trace_distance(&a, &b)?))
        })
        .collect::<Result<_>>()?;
    let (witness_norms, trace_distances): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    let td_rates = finite_difference(&times, &trace_distances);
    let positive = witness_norms.len() - 1;
    let detected = witness_norms[1..].iter().filter(|&&w| w > tol_det).count();
    Ok(SweepResult {
        times,
        witness_norms,
        trace_distances,
        td_rates,
        detected_fraction: detected as f64 / positive as f64,
        threshold: tol_det,
    })
}

/// `(1/2) Tr|Tr_E(S_K)|` for the truncated series
/// `S_K = sum_{k <= K} ad^k(R) / k!` with `ad(X) = [X, T]` and `T = i H t`.
pub fn bch_norm(h: &HermitianOperator, r: &HermitianOperator, t: f64, order: usize) -> Result<f64> {
    if order > MAX_BCH_ORDER {
        return Err(Error::OrderTooLarge {
            order,
            max: MAX_BCH_ORDER,
        });
    }
    let dims = r.dims()?;
    if h.dim() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: h.dim(),
        });
    }
    let generator = h.matrix() * c(0.0, t);
    let mut term = r.matrix().clone();
    let mut total = term.clone();
    for k in 1..=order {
        term = linalg::commutator(&term, &generator) / c(k as f64, 0.0);
        total += &term;
    }
    let reduced = linalg::partial_trace_env(&linalg::hermitian_part(&total), dims.system(), dims.environment())?;
    linalg::half_trace_norm(&reduced)
}

/// `H = sum_j J_j Z_j Z_{j+1}`; spin 1 is the most significant qubit and
/// every coupling defaults to 1.
pub fn build_zz_chain(spins: usize, couplings: Option<&[f64]>) -> Result<HermitianOperator> {
    if !(2..=MAX_CHAIN_SPINS).contains(&spins) {
        return Err(Error::ChainTooLarge {
            spins,
            max: MAX_CHAIN_SPINS,
        });
    }
    let ones = vec![1.0; spins - 1];
    let couplings = couplings.unwrap_or(&ones);
    if couplings.len() != spins - 1 {
        return Err(Error::InvalidDims(format!(
            "{} couplings given for {} bonds",
            couplings.len(),
            spins - 1
        )));
    }
    if couplings.iter().any(|j| !j.is_finite()) {
        return Err(Error::NonFinite);
    }
    let dim = 1usize << spins;
    let diag = (0..dim).map(|b| {
        let z = |j: usize| if (b >> (spins - 1 - j)) & 1 == 0 { 1.0 } else { -1.0 };
        let e: f64 = (0..spins - 1).map(|j| couplings[j] * z(j) * z(j + 1)).sum();
        c(e, 0.0)
    });
    let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(dim, diag));
    Ok(HermitianOperator::new_unchecked(m, Space::Flat(dim)))
}

/// System = spins `1..env_start`, environment = spins `env_start..=spins`.
pub fn chain_dims(spins: usize, env_start: usize) -> Result<SpaceDims> {
    if !(2..=MAX_CHAIN_SPINS).contains(&spins) {
        return Err(Error::ChainTooLarge {
            spins,
            max: MAX_CHAIN_SPINS,
        });
    }
    if env_start < 2 || env_start > spins {
        return Err(Error::InvalidSplit {
            split: env_start,
            spins,
        });
    }
    SpaceDims::new(1 << (env_start - 1), 1 << (spins - env_start + 1))
}

/// Index in the `(rest, spin)` ordering of the chain basis state `b`, where
/// `spin` (1-based) has been moved to the least significant position.
fn moved_index(b: usize, spins: usize, spin: usize) -> usize {
    let shift = spins - spin;
    let bit = (b >> shift) & 1;
    let high = b >> (shift + 1);
    let low = b & ((1 << shift) - 1);
    (((high << shift) | low) << 1) | bit
}

/// Permute an operator given in `(rest, spin)` order into chain order.
pub fn embed_spin_order(m: &CMatrix, spins: usize, spin: usize) -> CMatrix {
    let dim = 1 << spins;
    let p: Vec<usize> = (0..dim).map(|b| moved_index(b, spins, spin)).collect();
    CMatrix::from_fn(dim, dim, |i, j| m[(p[i], p[j])])
}

/// Inverse of [`embed_spin_order`].
pub fn extract_spin_order(m: &CMatrix, spins: usize, spin: usize) -> CMatrix {
    let dim = 1 << spins;
    let mut out = CMatrix::zeros(dim, dim);
    let p: Vec<usize> = (0..dim).map(|b| moved_index(b, spins, spin)).collect();
    for i in 0..dim {
        for j in 0..dim {
            out[(p[i], p[j])] = m[(i, j)];
        }
    }
    out
}

/// `(I + x X + y Y + z Z) / 2`.
pub fn bloch_state(x: f64, y: f64, z: f64) -> Result<DensityOperator> {
    if !(x.is_finite() && y.is_finite() && z.is_finite()) || x * x + y * y + z * z > 1.0 + 1e-12 {
        return Err(Error::InvalidBloch { x, y, z });
    }
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[c(0.5 * (1.0 + z), 0.0), c(0.5 * x, -0.5 * y), c(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z), 0.0)],
    );
    Ok(DensityOperator::new_unchecked(m, Space::Flat(2)))
}

/// Place `rho_spin` at chain position `env_start` next to a state on the
/// remaining spins, listed in chain order.
pub fn embed_environment_spin(
    spins: usize,
    env_start: usize,
    rest: &DensityOperator,
    rho_spin: &DensityOperator,
) -> Result<DensityOperator> {
    let dims = chain_dims(spins, env_start)?;
    if rest.dim() != 1 << (spins - 1) {
        return Err(Error::DimensionMismatch {
            expected: 1 << (spins - 1),
            found: rest.dim(),
        });
    }
    if rho_spin.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho_spin.dim(),
        });
    }
    let joint = linalg::kron(rest.matrix(), rho_spin.matrix());
    Ok(DensityOperator::new_unchecked(embed_spin_order(&joint, spins, env_start), dims))
}

/// `rho_SE = rho_{S E~} (x) rho_nbar` with `rho_nbar` in the xy plane of the
/// Bloch sphere.
pub fn build_undetectable_family(
    spins: usize,
    env_start: usize,
    rho_rest: &DensityOperator,
    r_x: f64,
    r_y: f64,
) -> Result<DensityOperator> {
    if r_x * r_x + r_y * r_y > 1.0 + 1e-12 {
        return Err(Error::InvalidBloch { x: r_x, y: r_y, z: 0.0 });
    }
    embed_environment_spin(spins, env_start, rho_rest, &bloch_state(r_x, r_y, 0.0)?)
}

/// Components `A_a` of `M = sum_a A_a (x) sigma_a` on chain spin `spin`,
/// ordered `I, X, Y, Z`; each `A_a` acts on the remaining spins in chain
/// order.
pub fn pauli_components(m: &CMatrix, spins: usize, spin: usize) -> [CMatrix; 4] {
    let moved = extract_spin_order(m, spins, spin);
    let rest = 1 << (spins - 1);
    let paulis = [
        [c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)],
        [c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
        [c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
        [c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
    ];
    paulis.map(|p| {
        let sigma = CMatrix::from_row_slice(2, 2, &p);
        let weighted = &moved * linalg::kron(&linalg::identity(rest), &sigma);
        linalg::partial_trace_env(&weighted, rest, 2).expect("dimensions agree") / c(2.0, 0.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UndetectabilityReport {
    pub spins: usize,
    pub env_start: usize,
    pub trials: usize,
    pub grid_points: usize,
    /// Largest `(1/2) Tr|R'_S|` over trials and times.
    pub max_witness_norm: f64,
    /// Largest `(1/2) Tr|R_bar'_S|`.
    pub max_witness_norm_bar: f64,
    /// Largest `D(rho'_S, sigma'_S) - D(rho_S, sigma_S)`.
    pub max_gain: f64,
    /// Largest Z component of `R` on spin `env_start`.
    pub max_z_component: f64,
    /// Operator-Schmidt rank of `exp(-i H t)` at `t = 0.7`.
    pub schmidt_rank: usize,
}

impl UndetectabilityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_witness_norm <= tol && self.max_witness_norm_bar <= tol && self.max_gain <= tol
    }
}

struct ChainTrial {
    rho: DensityOperator,
    sigma: DensityOperator,
}

fn random_rest<R: Rng + ?Sized>(spins: usize, rng: &mut R) -> Result<DensityOperator> {
    let dim = 1 << (spins - 1);
    let rank = rng.random_range(1..=dim);
    random::random_state_with(dim, rank, Space::Flat(dim), rng)
}

fn random_disk_point<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let radius = rng.random::<f64>().sqrt();
    let angle = rng.random::<f64>() * std::f64::consts::TAU;
    (radius * angle.cos(), radius * angle.sin())
}

fn schmidt_rank_at(h: &HermitianOperator, dims: SpaceDims, t: f64) -> Result<usize> {
    Propagator::new(h)?.at(t).operator_schmidt_rank(dims, SCHMIDT_REL_TOL)
}

/// Maximum over grid times of the two witness norms and the detection gain.
fn chain_trial_maxima(
    propagator: &Propagator,
    grid: &TimeGrid,
    trial: &ChainTrial,
) -> Result<(f64, f64, f64)> {
    let r = build_r(&trial.rho)?;
    let r_bar = build_r(&trial.sigma)?;
    let initial = trace_distance(&trial.rho.reduced_system()?, &trial.sigma.reduced_system()?)?;
    let mut maxima = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for t in grid.times() {
        let u = propagator.at(t);
        let a = crate::apply_unitary(&u, &trial.rho)?.reduced_system()?;
        let b = crate::apply_unitary(&u, &trial.sigma)?.reduced_system()?;
        maxima.0 = maxima.0.max(reduced_witness_norm(&u, &r)?);
        maxima.1 = maxima.1.max(reduced_witness_norm(&u, &r_bar)?);
        maxima.2 = maxima.2.max(trace_distance(&a, &b)? - initial);
    }
    Ok(maxima)
}

/// Random members of the xy-plane family with random local maps, swept under
/// the uniform ZZ chain.
pub fn verify_undetectable(
    spins: usize,
    env_start: usize,
    trials: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<UndetectabilityReport> {
    verify_undetectable_with(spins, env_start, None, trials, grid, seed)
}

/// As [`verify_undetectable`], with per-bond couplings.
pub fn verify_undetectable_with(
    spins: usize,
    env_start: usize,
    couplings: Option<&[f64]>,
    trials: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<UndetectabilityReport> {
    let dims = chain_dims(spins, env_start)?;
    let h = build_zz_chain(spins, couplings)?;
    let mut rng = random::rng_from_seed(seed);
    let mut drawn = Vec::with_capacity(trials);
    let mut max_z = 0.0f64;
    for _ in 0..trials {
        let rest = random_rest(spins, &mut rng)?;
        let (r_x, r_y) = random_disk_point(&mut rng);
        let rho = build_undetectable_family(spins, env_start, &rest, r_x, r_y)?;
        let n_kraus = rng.random_range(1..=3);
        let map = random::random_kraus_with(dims.system(), n_kraus, &mut rng);
        let sigma = apply_kraus_local(&map, &rho)?;
        let z = &pauli_components(build_r(&rho)?.matrix(), spins, env_start)[3];
        max_z = max_z.max(linalg::max_abs(z));
        drawn.push(ChainTrial { rho, sigma });
    }
    let propagator = Propagator::new(&h)?;
    let maxima = drawn
        .par_iter()
        .map(|trial| chain_trial_maxima(&propagator, grid, trial))
        .collect::<Result<Vec<_>>>()?;
    let fold = |f: fn(&(f64, f64, f64)) -> f64, init: f64| maxima.iter().map(f).fold(init, f64::max);
    Ok(UndetectabilityReport {
        spins,
        env_start,
        trials,
        grid_points: grid.len(),
        max_witness_norm: fold(|m| m.0, 0.0),
        max_witness_norm_bar: fold(|m| m.1, 0.0),
        max_gain: fold(|m| m.2, f64::NEG_INFINITY),
        max_z_component: max_z,
        schmidt_rank: schmidt_rank_at(&h, dims, 0.7)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeControlReport {
    pub spins: usize,
    pub env_start: usize,
    pub trials: usize,
    /// Trials in which some grid time has a witness norm above threshold.
    pub detections: usize,
    pub max_witness_norm: f64,
    /// Smallest Z component of `R` on spin `env_start` across trials.
    pub min_z_component: f64,
}

/// Draw a state outside the xy-plane family: spin `env_start` carries a Z
/// polarization that is classically correlated with the rest of the chain,
/// `p rho_0 (x) |0><0| + (1 - p) rho_1 (x) |1><1|`.
pub fn correlated_z_state<R: Rng + ?Sized>(
    spins: usize,
    env_start: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    let dims = chain_dims(spins, env_start)?;
    let p = 0.2 + 0.6 * rng.random::<f64>();
    let up = random_rest(spins, rng)?;
    let down = random_rest(spins, rng)?;
    let joint = linalg::kron(up.matrix(), DensityOperator::basis(2, 0).matrix()) * c(p, 0.0)
        + linalg::kron(down.matrix(), DensityOperator::basis(2, 1).matrix()) * c(1.0 - p, 0.0);
    Ok(DensityOperator::new_unchecked(embed_spin_order(&joint, spins, env_start), dims))
}

/// Sweep the product-replacement pair of [`correlated_z_state`] draws.
pub fn negative_control(
    spins: usize,
    env_start: usize,
    trials: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<NegativeControlReport> {
    negative_control_with(spins, env_start, None, trials, grid, seed)
}

pub fn negative_control_with(
    spins: usize,
    env_start: usize,
    couplings: Option<&[f64]>,
    trials: usize,
    grid: &TimeGrid,
    seed: u64,
) -> Result<NegativeControlReport> {
    let h = build_zz_chain(spins, couplings)?;
    let mut rng = random::rng_from_seed(seed);
    let states = (0..trials)
        .map(|_| correlated_z_state(spins, env_start, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut min_z = f64::INFINITY;
    let mut detections = 0;
    let mut max_norm = 0.0f64;
    for rho in &states {
        let z = &pauli_components(build_r(rho)?.matrix(), spins, env_start)[3];
        min_z = min_z.min(linalg::max_abs(z));
        let sigma = rho.product_of_marginals()?;
        let result = sweep(&h, rho, &sigma, grid)?;
        max_norm = max_norm.max(result.max_norm());
        if result.first_detection_time().is_some() {
            detections += 1;
        }
    }
    Ok(NegativeControlReport {
        spins,
        env_start,
        trials,
        detections,
        max_witness_norm: max_norm,
        min_z_component: if trials == 0 { 0.0 } else { min_z },
    })
}

/// `H_S (x) I + I (x) H_E`.
pub fn local_hamiltonian(h_s: &HermitianOperator, h_e: &HermitianOperator) -> Result<HermitianOperator> {
    let dims = SpaceDims::new(h_s.dim(), h_e.dim())?;
    let m = linalg::kron(h_s.matrix(), &linalg::identity(h_e.dim()))
        + linalg::kron(&linalg::identity(h_s.dim()), h_e.matrix());
    Ok(HermitianOperator::new_unchecked(m, dims))
}

/// Random Hamiltonian with `max |H_ij| <= bound`.
pub fn random_bounded_hamiltonian<R: Rng + ?Sized>(
    dims: SpaceDims,
    bound: f64,
    rng: &mut R,
) -> HermitianOperator {
    let h = random::random_hermitian_with(dims.total(), dims.into(), rng);
    let scale = bound / h.max_abs().max(f64::MIN_POSITIVE);
    HermitianOperator::new_unchecked(h.matrix() * c(scale.min(1.0), 0.0), dims)
}

/// Unitary at a single time, for reports.
pub fn propagator_at(h: &HermitianOperator, t: f64) -> Result<UnitaryOperator> {
    Ok(Propagator::new(h)?.at(t))
}
