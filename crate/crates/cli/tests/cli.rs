use std::path::Path;
use std::process::{Command, Output};
use wplab::hodge::spectral::{random_model, RandomModelSpec};
use wplab::C64;

fn wplab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wplab")).args(args).current_dir(dir).env_remove("WPLAB_THREADS").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn ke_solve_on_the_fixture_passes_and_writes_a_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = wplab(&["ke-solve", "--mesh", "fixture:2", "--out", "ke.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "ke.json");
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["tolerance"].is_number() && c["oracle"].is_string()));
    let csv = std::fs::read_to_string(dir.path().join("ke.history.csv")).unwrap();
    assert!(csv.starts_with("iteration,residual,step\n") && csv.lines().count() > 2);
}

#[test]
fn missing_mesh_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = wplab(&["ke-solve", "--mesh", "no/such.mesh", "--out", "ke.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such.mesh"));
    assert!(!dir.path().join("ke.json").exists());
}

#[test]
fn iteration_limit_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = wplab(&["ke-solve", "--mesh", "fixture:2", "--tol", "1e-14", "--max-iter", "1", "--out", "ke.json"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn broken_spectral_model_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = random_model(4, &RandomModelSpec::default());
    model.cup.raise[0][0][0] += C64::new(0.0, 1e-3);
    std::fs::write(dir.path().join("model.json"), serde_json::to_string(&model).unwrap()).unwrap();
    let o = wplab(&["curvature", "--backend", "spectral", "--input", "model.json", "--report", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("adjoint"), "{}", stderr(&o));

    let intact = random_model(4, &RandomModelSpec::default());
    std::fs::write(dir.path().join("model.json"), serde_json::to_string(&intact).unwrap()).unwrap();
    let o = wplab(&["curvature", "--backend", "spectral", "--input", "model.json", "--report", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(dir.path(), "c.json")["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wplab"))
        .args(["schwarz", "--metric", "poincare:1", "--report", "s.json"])
        .current_dir(dir.path())
        .env("WPLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("WPLAB_THREADS"));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"n": 2, "c": 0.1, "trials": 500, "report": "from-config.json"}"#).unwrap();
    let o = wplab(&["finsler", "--config", "run.json", "--n", "1"], dir.path());
    // one seminorm: min γ / n is the sharp constant and every check holds
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "from-config.json");
    assert_eq!(r["config"]["n"], 1);
    assert_eq!(r["config"]["trials"], 500);
    let csv = std::fs::read_to_string(dir.path().join("from-config.profile.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("p,alpha,gamma"));
}

#[test]
fn finsler_literal_constant_is_reported_as_a_verdict_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = wplab(&["finsler", "--n", "3", "--c", "0.1", "--trials", "2000", "--report", "f.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let r = report(dir.path(), "f.json");
    let failed: Vec<&str> =
        r["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(failed, ["certificate_min_gamma"]);
}

#[test]
fn schwarz_shorthands() {
    let dir = tempfile::tempdir().unwrap();
    for (metric, name) in [("poincare:2", "p.json"), ("vanishing:1", "v.json")] {
        let o = wplab(&["schwarz", "--metric", metric, "--report", name], dir.path());
        assert_eq!(o.status.code(), Some(0), "{metric}: {}", stderr(&o));
    }
    let o = wplab(&["schwarz", "--metric", "poincare:x", "--report", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["curvature", "--backend", "spectral", "--input", "random:20:3", "--seed", "5", "--report"];
    let a = wplab(&[&args[..], &["a.json"]].concat(), dir.path());
    let b = wplab(&[&args[..], &["b.json"]].concat(), dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn wp_rejects_points_without_a_stencil() {
    let dir = tempfile::tempdir().unwrap();
    let o = wplab(&["wp", "--family", "schiffer:1", "--at", "0,0", "--report", "w.json"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
