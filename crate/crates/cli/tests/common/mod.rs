#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_raildelay"));
    cmd.env_remove("RAILDELAY_OUT").env("RUST_LOG", "error");
    cmd
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Runs the binary and panics with its stderr unless it exits with `code`.
pub fn run_expect(args: &[&str], out: &Path, code: i32) -> Output {
    let output = bin().arg("--out").arg(out).args(args).output().expect("binary runs");
    assert_eq!(
        output.status.code(),
        Some(code),
        "raildelay {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

pub fn run_ok(args: &[&str], out: &Path) -> Output {
    run_expect(args, out, 0)
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// simulate → derive → fit-cox → fit-markov → validate on the fixture
/// config, with boundaries taken from the fit-cox suggestion.
pub fn golden_pipeline(out: &Path) {
    let config = golden_dir().join("config.txt");
    let f = |name: &str| out.join(name).to_str().unwrap().to_string();
    run_ok(&["simulate", "--config", path_str(&config)], out);
    run_ok(
        &["derive", "--runs", &f("runs.csv"), "--weather", &f("weather.csv")],
        out,
    );
    run_ok(&["fit-cox", "--dataset", &f("dataset.csv")], out);
    run_ok(
        &[
            "fit-markov",
            "--dataset",
            &f("dataset.csv"),
            "--boundaries-file",
            &f("boundaries.txt"),
        ],
        out,
    );
    run_ok(
        &[
            "validate",
            "--dataset",
            &f("dataset.csv"),
            "--boundaries-file",
            &f("boundaries.txt"),
            "--window-days",
            "4",
        ],
        out,
    );
}
