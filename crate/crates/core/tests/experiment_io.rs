//! Run directories, comparisons and sweeps on small scenarios.

use std::fs;
use std::path::Path;

use symphony_sim::config::ScenarioConfig;
use symphony_sim::experiment::{self, ExperimentError, Manifest, SweepParam};

fn small(seeds: &[u64]) -> ScenarioConfig {
    let text = format!(
        "name = \"small\"\nseeds = {seeds:?}\nt_end_ms = 500.0\n\
         [[workload.jobs]]\nranks = 8\nrings = 1\nchunk_bytes = 65536\npasses = 2\n"
    );
    ScenarioConfig::from_toml_str(&text).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_config_and_seeds_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(&[3, 4]);
    experiment::run_scenario(&cfg, &tmp.path().join("a")).unwrap();
    experiment::run_scenario(&cfg, &tmp.path().join("b")).unwrap();
    let a = files(&tmp.path().join("a"));
    assert_eq!(a, files(&tmp.path().join("b")));
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "config.toml",
            "manifest.json",
            "overlap.csv",
            "steps.csv",
            "summary.csv",
            "throughput.csv"
        ]
    );
}

#[test]
fn manifest_maps_runs_to_seeds_and_hashes_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(&[9, 2]);
    let m = experiment::run_scenario(&cfg, tmp.path()).unwrap();
    assert_eq!(m, Manifest::load(tmp.path()).unwrap());
    assert_eq!(m.seeds(), vec![9, 2]);
    let text = fs::read(tmp.path().join("config.toml")).unwrap();
    assert_eq!(m.config_sha256, experiment::sha256_hex(&text));
    let reparsed = ScenarioConfig::from_toml_str(std::str::from_utf8(&text).unwrap()).unwrap();
    assert_eq!(reparsed, cfg);
}

#[test]
fn self_comparison_is_zero_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    experiment::run_scenario(&small(&[1, 2, 3]), tmp.path()).unwrap();
    let r = experiment::compare(tmp.path(), tmp.path()).unwrap();
    assert_eq!(r.seeds, vec![1, 2, 3]);
    for m in &r.metrics {
        assert!(m.improvements.iter().all(|&x| x == 0.0), "{}", m.metric);
        assert_eq!(m.median_improvement, Some(0.0));
    }
    assert_eq!(r.baseline_max_overlap_cdf, r.treatment_max_overlap_cdf);
    assert!(r.render_text().contains("max overlap CDF"));
}

#[test]
fn seed_mismatch_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    experiment::run_scenario(&small(&[1, 2]), &tmp.path().join("a")).unwrap();
    experiment::run_scenario(&small(&[1, 3]), &tmp.path().join("b")).unwrap();
    let e = experiment::compare(&tmp.path().join("a"), &tmp.path().join("b")).unwrap_err();
    assert!(matches!(e, ExperimentError::SeedMismatch { .. }), "{e}");
}

#[test]
fn truncated_run_fails_but_leaves_flagged_telemetry() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&[1]);
    cfg.t_end_ms = 0.5;
    let e = experiment::run_scenario(&cfg, tmp.path()).unwrap_err();
    assert!(
        matches!(&e, ExperimentError::Truncated { seeds, .. } if seeds == &vec![1]),
        "{e}"
    );
    assert!(!e.is_config_error());
    let m = Manifest::load(tmp.path()).unwrap();
    assert!(m.truncated && m.runs[0].truncated);
    let summary = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    // no completion time for an unfinished job
    assert!(summary.lines().nth(1).unwrap().starts_with("0,0,,,"), "{summary}");
    assert!(
        fs::read_to_string(tmp.path().join("overlap.csv"))
            .unwrap()
            .lines()
            .count()
            > 1
    );
}

#[test]
fn sweep_runs_once_per_value_and_joins_results() {
    let tmp = tempfile::tempdir().unwrap();
    let values = experiment::parse_values(SweepParam::ChunkBytes, "32K,64K").unwrap();
    let rows = experiment::sweep(&small(&[1, 2]), SweepParam::ChunkBytes, &values, tmp.path()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(tmp.path().join("chunk_bytes_0/summary.csv").exists());
    assert!(tmp.path().join("chunk_bytes_1/summary.csv").exists());
    let med = experiment::sweep_medians(&rows);
    assert_eq!(med.len(), 2);
    assert!(med[0].1.unwrap() < med[1].1.unwrap());
    let joined: Vec<experiment::SweepRow> = experiment::read_rows(&tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(joined, rows);
}

#[test]
fn recorded_decisions_go_to_one_file_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&[1, 2]);
    cfg.record.decisions = true;
    experiment::run_scenario(&cfg, tmp.path()).unwrap();
    for id in 0..2 {
        let text = fs::read_to_string(tmp.path().join(format!("decisions_{id}.csv"))).unwrap();
        assert!(text.starts_with("t_ns,switch_id,job_id,step,psn,step_min,psn_rec,alpha,delta,p,marked"));
    }
}
