use std::path::{Path, PathBuf};
use std::process::Command;

use corrwitness_cli::{execute, EXIT_DOMAIN, EXIT_INPUT, EXIT_OK};
use serde_json::Value;

const BELL: &str = r#"{"dims":[2,2],"re":[[0.5,0,0,0.5],[0,0,0,0],[0,0,0,0],[0.5,0,0,0.5]]}"#;
const PRODUCT: &str = r#"{"dims":[2,2],"re":[[0,0,0,0],[0,1,0,0],[0,0,0,0],[0,0,0,0]]}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> corrwitness_cli::Outcome {
    execute(std::iter::once("corrwitness").chain(args.iter().copied()))
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn error_message(outcome: &corrwitness_cli::Outcome) -> String {
    json(&outcome.stderr)["error"]["message"].as_str().unwrap().to_string()
}

#[test]
fn witness_on_bell_state() {
    let dir = tempfile::tempdir().unwrap();
    let bell = write(dir.path(), "bell.json", BELL);
    let out = run(&["witness", "--input", bell.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report = json(&out.stdout);
    assert_eq!(report["detectable"], true);
    assert!((report["bound"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!((report["n"].as_u64(), report["m"].as_u64(), report["r"].as_u64()), (Some(3), Some(1), Some(1)));
    assert!(report["achieved"].as_f64().unwrap() <= 0.75);
    assert_eq!(report["U"]["dims"], serde_json::json!([2, 2]));
}

#[test]
fn witness_refuses_product_state() {
    let dir = tempfile::tempdir().unwrap();
    let product = write(dir.path(), "product.json", PRODUCT);
    let out = run(&["witness", "--input", product.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_DOMAIN);
    assert_eq!(error_message(&out), "state is uncorrelated");
}

#[test]
fn witness_reports_are_deterministic() {
    let a = run(&["witness", "--seed", "17", "--dims", "3,2"]);
    let b = run(&["witness", "--seed", "17", "--dims", "3,2"]);
    assert_eq!(a.code, EXIT_OK);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["witness", "--seed", "18", "--dims", "3,2"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn invalid_operator_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"dims":[2,2],"re":[[1]]}"#);
    let out = run(&["witness", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_INPUT);
    let missing = run(&["witness", "--input", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.code, EXIT_INPUT);
}

#[test]
fn saturate_orthogonal_pair() {
    let dir = tempfile::tempdir().unwrap();
    let zero = r#"{"dims":[2,2],"re":[[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#;
    let two = r#"{"dims":[2,2],"re":[[0,0,0,0],[0,0,0,0],[0,0,1,0],[0,0,0,0]]}"#;
    let a = write(dir.path(), "a.json", zero);
    let b = write(dir.path(), "b.json", two);
    let out = run(&["saturate", "--input", a.to_str().unwrap(), "--sigma", b.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report = json(&out.stdout);
    assert_eq!(report["saturated"], true);
    assert!((report["achieved"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let same = run(&["saturate", "--input", a.to_str().unwrap(), "--sigma", a.to_str().unwrap()]);
    assert_eq!(same.code, EXIT_DOMAIN);
}

#[test]
fn sweep_rejects_zero_t_max() {
    let out = run(&["sweep", "--t-max", "0"]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(error_message(&out).contains("t_max"));
}

#[test]
fn sweep_bell_with_random_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let bell = write(dir.path(), "bell.json", BELL);
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--input",
        bell.to_str().unwrap(),
        "--seed",
        "3",
        "--steps",
        "1000",
        "--format",
        "csv",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let summary = json(&out.stdout);
    assert!(summary["detected_fraction"].as_f64().unwrap() >= 0.99);
    assert!(summary["first_detection_time"].as_f64().unwrap() > 0.0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,witness_norm,trace_distance,td_rate");
    assert_eq!(text.lines().count(), 1002);
}

#[test]
fn sweep_zz_chain_family_is_undetected() {
    use corrwitness::dynamics::{build_undetectable_family, build_zz_chain};
    use corrwitness::io::{operator_to_json, OperatorFile};
    use corrwitness::operator::Space;
    use corrwitness::random::{random_state_with, rng_from_seed};

    let dir = tempfile::tempdir().unwrap();
    let rest = random_state_with(4, 4, Space::Flat(4), &mut rng_from_seed(11)).unwrap();
    let rho = build_undetectable_family(3, 2, &rest, 0.5, -0.4).unwrap();
    let h = build_zz_chain(3, None).unwrap();
    let rho_path = write(dir.path(), "rho.json", &operator_to_json(&OperatorFile::from_density(&rho)));
    let h_path = write(dir.path(), "h.json", &operator_to_json(&OperatorFile::from_hermitian(&h)));
    let out = run(&["sweep", "--input", rho_path.to_str().unwrap(), "--hamiltonian", h_path.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report = json(&out.stdout);
    assert_eq!(report["summary"]["detected_fraction"], 0.0);
    // rho is correlated, so silence comes from the dynamics
    let witness = run(&["witness", "--input", rho_path.to_str().unwrap()]);
    assert_eq!(json(&witness.stdout)["detectable"], true);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", BELL);
    let trace = write(dir.path(), "trace.json", r#"{"dims":[2],"re":[[0.5,0],[0,0.4]]}"#);
    let non_herm = write(dir.path(), "herm.json", r#"{"dims":[2],"re":[[0.5,0.3],[0,0.5]]}"#);
    assert_eq!(run(&["validate", "--input", good.to_str().unwrap()]).code, EXIT_OK);
    let out = run(&["validate", "--input", trace.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(error_message(&out).contains("unit_trace"));
    let out = run(&["validate", "--input", non_herm.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_INPUT);
    assert!(error_message(&out).contains("hermitian"));
    let out = run(&["validate", "--input", non_herm.to_str().unwrap(), "--kind", "unitary"]);
    assert_eq!(out.code, EXIT_INPUT);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bell.json", BELL);
    let config = write(
        dir.path(),
        "run.json",
        r#"{"command": "sweep", "input": "bell.json", "seed": 5, "t_max": 2.0, "steps": 8}"#,
    );
    let from_file = run(&["--config", config.to_str().unwrap()]);
    assert_eq!(from_file.code, EXIT_OK, "{}", from_file.stderr);
    let series = &json(&from_file.stdout)["series"];
    assert_eq!(series["times"].as_array().unwrap().len(), 9);
    let overridden = run(&["--config", config.to_str().unwrap(), "--steps", "4"]);
    assert_eq!(json(&overridden.stdout)["series"]["times"].as_array().unwrap().len(), 5);

    let unknown = write(dir.path(), "bad.json", r#"{"command": "sweep", "stpes": 3}"#);
    assert_eq!(run(&["--config", unknown.to_str().unwrap()]).code, EXIT_INPUT);
}

#[test]
fn chain_demo_and_env_corr() {
    let out = run(&["chain-demo", "--spins", "4", "--env-start", "3", "--trials", "3", "--steps", "40"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report = json(&out.stdout);
    assert_eq!(report["family_undetectable"], true);
    assert_eq!(report["control_detected"], true);
    assert!(report["family"]["schmidt_rank"].as_u64().unwrap() > 1);

    let out = run(&["env-corr", "--seed", "4"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report = json(&out.stdout);
    assert_eq!(report["detectable"], true);
    assert!(report["achieved"].as_f64().unwrap() <= report["bound"].as_f64().unwrap() + 1e-10);
}

#[test]
fn tomography_demo_flags_nonlinearity() {
    let out = run(&["tomography-demo", "--queries", "3"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let report = json(&out.stdout);
    assert_eq!(report["linearity"]["linear"], false);
    let first = &report["report"]["queries"][0];
    assert!(first["trace_distance_error"].as_f64().unwrap() > 1e-6);
    assert!(first["Y_norm"].as_f64().unwrap() > 1e-9);
}

#[test]
fn csv_only_for_sweep() {
    assert_eq!(run(&["witness", "--format", "csv"]).code, EXIT_INPUT);
}

#[test]
fn binary_exit_codes_and_threads() {
    let bin = env!("CARGO_BIN_EXE_corrwitness");
    let dir = tempfile::tempdir().unwrap();
    let product = write(dir.path(), "product.json", PRODUCT);
    let out = Command::new(bin)
        .args(["witness", "--input", product.to_str().unwrap()])
        .env("CORRWITNESS_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DOMAIN));
    let body: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(body["error"]["message"], "state is uncorrelated");

    let out = Command::new(bin).arg("witness").env("CORRWITNESS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INPUT));

    let a = Command::new(bin).args(["sweep", "--seed", "9", "--steps", "50"]).env("CORRWITNESS_THREADS", "1").output().unwrap();
    let b = Command::new(bin).args(["sweep", "--seed", "9", "--steps", "50"]).env("CORRWITNESS_THREADS", "4").output().unwrap();
    assert_eq!(a.status.code(), Some(EXIT_OK));
    assert_eq!(a.stdout, b.stdout);
}
