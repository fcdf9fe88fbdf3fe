use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mfglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfglab"))
        .args(args)
        .output()
        .expect("spawn mfglab")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = mfglab(&["solve", "--fixture", "mfg2", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["manifest.json", "events.jsonl", "summary.csv", "solve.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("mode=Solve"), "{stdout}");
}

#[test]
fn unknown_fixture_is_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let res = mfglab(&[
        "solve",
        "--fixture",
        "nonexistent",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn missing_output_dir_is_exit_code_2() {
    let res = mfglab(&["solve", "--fixture", "mfg2"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn quantization_guardrail_is_exit_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
mode = "solve"
fixture = "mfg2"

[quantization]
m = 40
xi_soft = 0.01
"#,
    );
    let res = mfglab(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn empty_equilibrium_is_exit_code_4() {
    let dir = tempfile::tempdir().unwrap();
    // ε below every profile gap on this fixture → no equilibrium profile.
    let cfg = write_config(
        dir.path(),
        r#"
mode = "oracle-dynamics"
fixture = "mfg2"
eps = 0.001
revision_probs = [0.2, 0.2]
max_steps = 10
n_seeds = 1

[quantization]
m = 2
xi_soft = 0.05
support = [1]
"#,
    );
    let res = mfglab(&[
        "oracle-dynamics",
        "--config",
        &cfg,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn oracle_dynamics_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
mode = "oracle-dynamics"
fixture = "mfg2"
eps = 1.4
revision_probs = [0.25, 0.25]
max_steps = 500
n_seeds = 5

[quantization]
m = 2
xi_soft = 0.05
support = [1]
"#,
    );
    let out = dir.path().join("out");
    let res = mfglab(&[
        "oracle-dynamics",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("success_frequency,1.000000000000"), "{summary}");

    // Same seed reproduces the artifacts byte for byte.
    let out2 = dir.path().join("out2");
    let res2 = mfglab(&[
        "oracle-dynamics",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(res2.status.success());
    for f in ["events.jsonl", "summary.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(out2.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn game_file_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    // A 1-player game written as a standalone TOML game file.
    let game = dir.path().join("game.toml");
    fs::write(
        &game,
        r#"
n_players = 1
n_local_states = 2
n_actions = 2
discount = 0.5
channel = { variant = "global" }
cost_table = [[[0.0, 1.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 0.0]]]
transition_table = [
  [[[0.8, 0.2], [0.3, 0.7]], [[0.8, 0.2], [0.3, 0.7]]],
  [[[0.5, 0.5], [0.9, 0.1]], [[0.5, 0.5], [0.9, 0.1]]],
]
initial_dist = { kind = "uniform" }
"#,
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"
mode = "solve"
game_file = "{}"
"#,
            game.display()
        ),
    );
    let out = dir.path().join("out");
    let res = mfglab(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("solve.csv").exists());
}
