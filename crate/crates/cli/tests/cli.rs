use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symphony-sim"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_compare_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let out = run(&["run", s(&scenario("lockstep.toml")), "-o", s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "summary.csv",
        "overlap.csv",
        "steps.csv",
        "manifest.json",
        "config.toml",
    ] {
        assert!(a.join(f).is_file(), "{f} missing");
    }

    let out = run(&["compare", s(&a), s(&a)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("cct"), "{text}");

    let out = run(&["compare", s(&a), s(&a), "--json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).trim_start().starts_with('{'));

    let out = run(&["plot", s(&a)]);
    assert!(out.status.success());
    for f in ["overlap.svg", "max_overlap_cdf.svg", "cct_cdf.svg"] {
        assert!(a.join("plots").join(f).is_file(), "{f} missing");
    }
}

#[test]
fn sweep_prints_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        s(&scenario("lockstep.toml")),
        "--param",
        "chunk_bytes",
        "--values",
        "64K,128K",
        "-o",
        s(tmp.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(tmp.path().join("sweep.csv").is_file());
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seeds = [1]\nno_such_key = 3\n").unwrap();
    let o = tmp.path().join("o");

    assert_eq!(run(&["run", s(&bad), "-o", s(&o)]).status.code(), Some(1));
    assert_eq!(
        run(&["run", s(&tmp.path().join("missing.toml")), "-o", s(&o)])
            .status
            .code(),
        Some(1)
    );
    let lock = scenario("lockstep.toml");
    let unknown = run(&["sweep", s(&lock), "--param", "gain", "--values", "1", "-o", s(&o)]);
    assert_eq!(unknown.status.code(), Some(1));
    let bad_value = run(&["sweep", s(&lock), "--param", "k", "--values", "x", "-o", s(&o)]);
    assert_eq!(bad_value.status.code(), Some(1));
}

#[test]
fn truncated_run_exits_2_after_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("short.toml");
    let text = std::fs::read_to_string(scenario("lockstep.toml"))
        .unwrap()
        .replace("t_end_ms = 1000.0", "t_end_ms = 0.5");
    std::fs::write(&cfg, text).unwrap();
    let o = tmp.path().join("o");
    let out = run(&["run", s(&cfg), "-o", s(&o)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(o.join("manifest.json").is_file());
}
