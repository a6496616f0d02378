use std::path::Path;

use corrwitness::dynamics::{self, TimeGrid};
use corrwitness::io::{parse_operator, LabeledMatrix, OperatorFile};
use corrwitness::linalg::{c, CMatrix};
use corrwitness::protocols::{self, TripartiteState};
use corrwitness::random::{self, InstanceRng};
use corrwitness::tomography::{self, build_basis};
use corrwitness::witness::{self, EigenSplit};
use corrwitness::{
    apply_kraus_local, DensityOperator, Error, HermitianOperator, Space, SpaceDims, Tolerances, UnitaryOperator,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CommandKind, Format, OperatorKind, RunConfig};
use crate::CliError;

pub fn run(config: &RunConfig) -> Result<String, CliError> {
    let command = config
        .command
        .ok_or_else(|| CliError::Input("no command given (use a subcommand or \"command\" in --config)".into()))?;
    if config.format() == Format::Csv && command != CommandKind::Sweep {
        return Err(CliError::Input("--format csv is only available for sweep".into()));
    }
    match command {
        CommandKind::Witness => cmd_witness(config),
        CommandKind::Saturate => cmd_saturate(config),
        CommandKind::Sweep => cmd_sweep(config),
        CommandKind::ChainDemo => cmd_chain_demo(config),
        CommandKind::EnvCorr => cmd_env_corr(config),
        CommandKind::TomographyDemo => cmd_tomography_demo(config),
        CommandKind::Validate => cmd_validate(config),
    }
}

fn read_labeled(path: &Path) -> Result<LabeledMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_operator(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_density(path: &Path, tol: &Tolerances) -> Result<DensityOperator, CliError> {
    read_labeled(path)?
        .density_with(tol)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_hamiltonian(path: &Path, tol: &Tolerances) -> Result<HermitianOperator, CliError> {
    let labeled = read_labeled(path)?;
    let space = labeled.space()?;
    HermitianOperator::with_tolerances(labeled.matrix, space, tol)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn bipartite_dims(config: &RunConfig) -> Result<SpaceDims, CliError> {
    match config.dims.as_deref() {
        None => Ok(SpaceDims::new(2, 2)?),
        Some([s, e]) => Ok(SpaceDims::new(*s, *e)?),
        Some(other) => Err(CliError::Input(format!("--dims needs two factors, got {other:?}"))),
    }
}

/// The `--input` state, or a seeded full-rank random state.
fn input_state(config: &RunConfig, rng: &mut InstanceRng) -> Result<DensityOperator, CliError> {
    let tol = config.tolerances()?;
    let rho = match &config.input {
        Some(path) => read_density(path, &tol)?,
        None => {
            let dims = bipartite_dims(config)?;
            random::random_state_with(dims.total(), dims.total(), dims.into(), rng)?
        }
    };
    rho.dims()
        .map_err(|_| CliError::Input("input must be a bipartite state (dims [d_S, d_E])".into()))?;
    Ok(rho)
}

fn sigma_state(config: &RunConfig, rho: &DensityOperator) -> Result<DensityOperator, CliError> {
    match &config.sigma {
        Some(path) => {
            let sigma = read_density(path, &config.tolerances()?)?;
            if sigma.space() != rho.space() {
                return Err(CliError::Input("sigma and input have different dimensions".into()));
            }
            Ok(sigma)
        }
        None => Ok(protocols::prepare_product_replacement(rho)?.sigma_se),
    }
}

fn grid(config: &RunConfig) -> Result<TimeGrid, CliError> {
    let defaults = TimeGrid::default();
    Ok(TimeGrid::new(
        config.t_max.unwrap_or(defaults.t_max()),
        config.steps.unwrap_or(defaults.steps()),
    )?)
}

fn dims_vec(dims: SpaceDims) -> Vec<usize> {
    vec![dims.system(), dims.environment()]
}

fn emit(config: &RunConfig, value: &impl Serialize) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    match &config.out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn split_json(split: &EigenSplit) -> Value {
    json!({
        "n": split.n,
        "m": split.m,
        "r": split.r,
        "saturable": split.is_saturable(),
        "zero_assignment": split.zero_assignment,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

fn cmd_witness(config: &RunConfig) -> Result<String, CliError> {
    let mut rng = random::rng_from_seed(config.seed());
    let rho = input_state(config, &mut rng)?;
    let outcome = witness::detect_correlation(&rho, config.tol_det()?)?;
    let dims = rho.dims()?;
    let report = merge(
        split_json(&outcome.split),
        json!({
            "bound": outcome.report.bound,
            "achieved": outcome.report.achieved,
            "detectable": outcome.report.detectable,
            "witness_norm": outcome.report.witness_norm,
            "unitary_id": outcome.report.unitary_id,
            "U": OperatorFile::from_unitary(&outcome.unitary, dims_vec(dims)),
        }),
    );
    emit(config, &report)
}

fn cmd_saturate(config: &RunConfig) -> Result<String, CliError> {
    let mut rng = random::rng_from_seed(config.seed());
    let rho = input_state(config, &mut rng)?;
    let sigma = sigma_state(config, &rho)?;
    let dims = rho.dims()?;
    let (u, report) = witness::saturate_pair_with(&rho, &sigma, config.tol_det()?)?;
    let r = HermitianOperator::difference(&sigma, &rho)?;
    let split = witness::split_spectrum(&r, dims.environment())?;
    let out = merge(
        split_json(&split),
        json!({
            "bound": report.bound,
            "achieved": report.achieved,
            "saturated": (report.achieved - report.bound).abs() <= 1e-10,
            "detectable": report.detectable,
            "witness_norm": report.witness_norm,
            "unitary_id": report.unitary_id,
            "U": OperatorFile::from_unitary(&u, dims_vec(dims)),
        }),
    );
    emit(config, &out)
}

fn cmd_sweep(config: &RunConfig) -> Result<String, CliError> {
    let grid = grid(config)?;
    let mut rng = random::rng_from_seed(config.seed());
    let rho = input_state(config, &mut rng)?;
    let sigma = sigma_state(config, &rho)?;
    let dims = rho.dims()?;
    let h = match &config.hamiltonian {
        Some(path) => read_hamiltonian(path, &config.tolerances()?)?,
        None => random::random_hermitian_with(dims.total(), dims.into(), &mut rng),
    };
    if h.dim() != dims.total() {
        return Err(CliError::Input(format!(
            "Hamiltonian has dimension {}, states have {}",
            h.dim(),
            dims.total()
        )));
    }
    let h = HermitianOperator::new_unchecked(h.into_matrix(), dims);
    let result = dynamics::sweep_with(&h, &rho, &sigma, &grid, config.tol_det()?)?;
    let summary = result.summary();
    match (config.format(), &config.out) {
        (Format::Csv, Some(path)) => {
            write_file(path, &result.to_csv())?;
            emit(&RunConfig::default(), &summary)
        }
        (Format::Csv, None) => Ok(result.to_csv()),
        (Format::Json, _) => emit(config, &json!({"summary": summary, "series": result})),
    }
}

fn cmd_chain_demo(config: &RunConfig) -> Result<String, CliError> {
    let grid = grid(config)?;
    let spins = config.spins.unwrap_or(3);
    let env_start = config.env_start.unwrap_or(spins);
    let trials = config.trials.unwrap_or(50);
    let couplings = config.couplings.as_deref();
    let seed = config.seed();
    let family = dynamics::verify_undetectable_with(spins, env_start, couplings, trials, &grid, seed)?;
    let control = dynamics::negative_control_with(spins, env_start, couplings, trials, &grid, seed.wrapping_add(1))?;
    let tol = config.tol_det()?;
    emit(
        config,
        &json!({
            "family": family,
            "family_undetectable": family.holds(tol),
            "control": control,
            "control_detected": control.detections > 0,
        }),
    )
}

fn cmd_env_corr(config: &RunConfig) -> Result<String, CliError> {
    let mut rng = random::rng_from_seed(config.seed());
    let tol = config.tolerances()?;
    let tri = match &config.input {
        Some(path) => {
            let labeled = read_labeled(path)?;
            let [ds, db, dc] = labeled.dims.as_slice() else {
                return Err(CliError::Input(format!(
                    "{}: env-corr needs dims [d_S, d_B, d_C]",
                    path.display()
                )));
            };
            let (ds, db, dc) = (*ds, *db, *dc);
            let rho = labeled.density_with(&tol).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            TripartiteState::new(rho, ds, db, dc)?
        }
        None => {
            let (ds, db, dc) = match config.dims.as_deref() {
                None => (2, 2, 2),
                Some(&[s, b, c]) => (s, b, c),
                Some(other) => return Err(CliError::Input(format!("--dims needs three factors, got {other:?}"))),
            };
            let rho_s = random::random_state_with(ds, ds, Space::Flat(ds), &mut rng)?;
            let bc = SpaceDims::new(db, dc)?;
            let rho_bc = random::random_state_with(bc.total(), bc.total(), bc.into(), &mut rng)?;
            TripartiteState::from_factors(&rho_s, &rho_bc, db)?
        }
    };
    let u = protocols::env_witness_unitary(&tri)?;
    let report = protocols::detect_env_correlation(&tri, &u, config.tol_det()?)?;
    let (ds, db, dc) = tri.dims();
    emit(
        config,
        &json!({
            "dims": [ds, db, dc],
            "bound": report.bound,
            "achieved": report.achieved,
            "detectable": report.detectable,
            "witness_norm": report.witness_norm,
            "unitary_id": report.unitary_id,
            "U": OperatorFile::from_unitary(&u, vec![ds, db, dc]),
        }),
    )
}

fn bell_state() -> DensityOperator {
    let mut m = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(i, j)] = c(0.5, 0.0);
    }
    DensityOperator::new(m, SpaceDims::new(2, 2).expect("valid dims")).expect("valid state")
}

fn cmd_tomography_demo(config: &RunConfig) -> Result<String, CliError> {
    let mut rng = random::rng_from_seed(config.seed());
    let tol_det = config.tol_det()?;
    let rho1 = match &config.input {
        Some(path) => read_density(path, &config.tolerances()?)?,
        None => bell_state(),
    };
    let dims = rho1
        .dims()
        .map_err(|_| CliError::Input("input must be a bipartite state (dims [d_S, d_E])".into()))?;
    let (u, unitary_id) = match witness::detect_correlation(&rho1, tol_det) {
        Ok(outcome) => (outcome.unitary, outcome.report.unitary_id),
        Err(Error::Uncorrelated) => (random::random_unitary_with(dims.total(), &mut rng), "haar".to_string()),
        Err(e) => return Err(e.into()),
    };
    let basis = build_basis(dims.system())?;
    let record = tomography::run_tomography(&rho1, &u, &basis.replace_maps()?, &basis)?;
    let mut queries = vec![rho1.clone()];
    for _ in 1..config.queries.unwrap_or(10).max(1) {
        let map = random::random_kraus_with(dims.system(), 2, &mut rng);
        queries.push(apply_kraus_local(&map, &rho1)?);
    }
    let outcomes = queries
        .iter()
        .map(|q| record.evaluate(q))
        .collect::<corrwitness::Result<Vec<_>>>()?;
    let verdict = tomography::linearity_criterion_with(&record, &queries, tol_det)?;
    let report = tomography::tomography_report(&record, &outcomes, tol_det);
    emit(
        config,
        &json!({
            "unitary_id": unitary_id,
            "linearity": verdict,
            "report": report,
        }),
    )
}

#[derive(Serialize)]
struct Violation {
    invariant: &'static str,
    message: String,
}

fn invariant_name(e: &Error) -> &'static str {
    match e {
        Error::NotSquare { .. } => "square",
        Error::NonFinite => "finite",
        Error::NotHermitian { .. } => "hermitian",
        Error::TraceNotUnit { .. } => "unit_trace",
        Error::NotPositive { .. } => "positive_semidefinite",
        Error::NotUnitary { .. } => "unitary",
        Error::DimensionMismatch { .. } | Error::InvalidDims(_) => "dimensions",
        _ => "other",
    }
}

fn cmd_validate(config: &RunConfig) -> Result<String, CliError> {
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| CliError::Input("validate needs --input".into()))?;
    let labeled = read_labeled(path)?;
    let tol = config.tolerances()?;
    let kind = config.kind.unwrap_or_default();
    let violations: Vec<Error> = match labeled.space() {
        Err(e) => vec![e],
        Ok(space) => match kind {
            OperatorKind::Density => corrwitness::operator::density_violations(&labeled.matrix, space, &tol),
            OperatorKind::Hermitian => corrwitness::operator::hermitian_violations(&labeled.matrix, space, &tol),
            OperatorKind::Unitary => UnitaryOperator::with_tolerances(labeled.matrix.clone(), &tol)
                .err()
                .into_iter()
                .collect(),
        },
    };
    let listed: Vec<Violation> = violations
        .iter()
        .map(|e| Violation {
            invariant: invariant_name(e),
            message: e.to_string(),
        })
        .collect();
    if listed.is_empty() {
        return emit(config, &json!({"valid": true, "kind": kind, "violations": []}));
    }
    let names: Vec<&str> = listed.iter().map(|v| v.invariant).collect();
    let details: Vec<String> = listed.iter().map(|v| v.message.clone()).collect();
    Err(CliError::Input(format!(
        "{} violates {}: {}",
        path.display(),
        names.join(", "),
        details.join("; ")
    )))
}
