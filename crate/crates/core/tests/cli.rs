use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdris-est")).args(args).output().expect("binary runs")
}

fn desk_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml").to_string_lossy().into_owned()
}

#[test]
fn snr_sweep_writes_one_row_per_value_and_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snr.csv");
    let o = cli(&[
        "sweep-snr",
        "--config",
        &desk_config(),
        "--trials",
        "2",
        "--values",
        "-5,5",
        "--estimators",
        "proposed,direct_omp",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn sweeps_are_reproducible_on_stdout() {
    let args = ["sweep-pilot", "--config", &desk_config(), "--trials", "2", "--values", "1,2", "--seed", "9"];
    let a = cli(&args);
    let b = cli(&args);
    assert!(a.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn errors_carry_kind_and_exit_code() {
    let o = cli(&["sweep-snr", "--config", &desk_config(), "--estimators", "bogus"]);
    assert_eq!(o.status.code(), Some(8));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=parse code=8"));

    let o = cli(&["sweep-snr", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(9));

    let o = cli(&["sweep-groups", "--config", &desk_config(), "--values", "5", "--trials", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
