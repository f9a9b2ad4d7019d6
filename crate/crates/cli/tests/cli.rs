use std::fs;
use std::path::Path;
use std::process::Command;

const SMOKE: &str = include_str!("../../../configs/smoke.toml");

fn run(dir: &Path, config: &str, args: &[&str]) -> i32 {
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_isaacs-lab"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
        .status;
    status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), SMOKE, &["schedule"]), 0);
    assert!(dir.path().join("out/schedule.csv").exists());
    assert!(dir.path().join("out/manifest.toml").exists());

    assert_eq!(run(dir.path(), SMOKE, &["nonsense"]), 2);
    assert_eq!(run(dir.path(), SMOKE, &["pde", "--levels", "x"]), 2);
    assert_eq!(run(dir.path(), &SMOKE.replace("seed = 7", ""), &["pde"]), 3);
    assert_eq!(
        run(
            dir.path(),
            &SMOKE.replace("policy = \"cfl\", fraction = 1.0", "policy = \"fixed\", dt = 0.5"),
            &["pde"]
        ),
        4
    );
    assert_eq!(
        run(
            dir.path(),
            &SMOKE.replace("levels = [5, 10]", "levels = [5, 10]\nepsilon = 0.01"),
            &["schedule"]
        ),
        5
    );
    let blowup = SMOKE.replace(
        "amplitude = 1.0\nfrequency = 1.0",
        "amplitude = 1e308\nfrequency = 40.0",
    );
    assert_eq!(run(dir.path(), &blowup, &["pde"]), 6);
}

#[test]
fn seed_and_levels_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(dir.path(), SMOKE, &["converge", "--seed", "99", "--levels", "4,8"]),
        0
    );
    let manifest = fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 99"));
    assert!(manifest.contains("levels = [4, 8]") || manifest.contains("levels = [\n    4,\n    8,\n]"));
    let table = fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    let levels: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(levels, ["4", "4", "8", "8"]);
}

#[test]
fn zero_horizon_returns_the_payoff() {
    let mut config = isaacs_cli::ExperimentConfig::from_toml(SMOKE).unwrap();
    config.problem.horizon = 0.0;
    config.problem.start_state = vec![0.3];
    let table = isaacs_cli::run_converge(&config).unwrap();
    let g = 0.3f64.cos();
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        assert_eq!(row.value_at_start, g);
        assert_eq!(row.mc_mean, g);
        assert_eq!(row.v_minus_at_start, g);
        assert_eq!(row.v_plus_at_start, g);
        assert!(row.gap < 1e-12);
    }
}

#[test]
fn converge_needs_two_levels() {
    let mut config = isaacs_cli::ExperimentConfig::from_toml(SMOKE).unwrap();
    config.run.levels = vec![10];
    assert_eq!(isaacs_cli::run_converge(&config).unwrap_err().exit_code(), 3);
}

#[test]
fn tampered_manifest_is_rejected() {
    let config = isaacs_cli::ExperimentConfig::from_toml(SMOKE).unwrap();
    let dir = tempfile::tempdir().unwrap();
    isaacs_cli::execute(isaacs_cli::Command::Static, &config, dir.path()).unwrap();
    let path = dir.path().join(isaacs_cli::MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .unwrap()
        .replace("samples = 100", "samples = 101");
    fs::write(&path, text).unwrap();
    assert!(isaacs_cli::replay(&path, &dir.path().join("again")).is_err());
}
