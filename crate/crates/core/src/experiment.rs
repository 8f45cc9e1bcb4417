//! Seed sweeps over a scenario, CSV output, paired comparisons and
//! one-parameter sweeps.
//!
//! A run directory holds `summary.csv`, `overlap.csv`, `steps.csv`,
//! `throughput.csv`, optionally `decisions_<run_id>.csv`, the fully resolved
//! `config.toml`, and `manifest.json` mapping each `run_id` to its seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ImbalanceConfig, ScenarioConfig};
use crate::metrics::{self, cdf, median, percentile, MetricsError, OverlapRow, StepRow, SummaryRow, ThroughputRow};
use crate::simulation::{RunOutput, SimError, Simulation};

/// Environment variable overriding the number of worker threads.
pub const WORKERS_ENV: &str = "SYMPHONY_WORKERS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("seed {seed}: {source}")]
    Sim { seed: u64, source: SimError },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: {source}")]
    Csv { path: String, source: MetricsError },
    #[error("{path}: bad manifest: {msg}")]
    Manifest { path: String, msg: String },
    #[error("runs for seeds {seeds:?} hit t_end before finishing; partial telemetry written to {dir}")]
    Truncated { seeds: Vec<u64>, dir: String },
    #[error("seed sets differ: {a:?} vs {b:?}")]
    SeedMismatch { a: Vec<u64>, b: Vec<u64> },
    #[error("seed {seed}: job sets differ between the two directories")]
    JobMismatch { seed: u64 },
    #[error("unknown sweep parameter `{0}`; valid names: k, chunk_bytes, imbalance_ratio, t_win, n_warmup")]
    UnknownParam(String),
    #[error("bad sweep value `{value}` for {param}: {msg}")]
    BadValue { param: String, value: String, msg: String },
}

impl ExperimentError {
    /// True for problems with the user's input rather than the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_) | ExperimentError::UnknownParam(_) | ExperimentError::BadValue { .. }
        )
    }
}

fn io_err(path: &Path, e: impl ToString) -> ExperimentError {
    ExperimentError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Runs one seed of a scenario to completion or `t_end`.
pub fn run_seed(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput, ExperimentError> {
    let setup = cfg.to_setup(seed)?;
    let sim = Simulation::new(setup, seed).map_err(|source| ExperimentError::Sim { seed, source })?;
    Ok(sim.run())
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every seed, in parallel, and returns outputs in seed-list order.
pub fn run_all(cfg: &ScenarioConfig) -> Result<Vec<RunOutput>, ExperimentError> {
    let go = || {
        cfg.seeds
            .par_iter()
            .map(|&s| run_seed(cfg, s))
            .collect::<Result<Vec<_>, _>>()
    };
    match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| io_err(Path::new("thread pool"), e))?
            .install(go),
        None => go(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub run_id: u32,
    pub seed: u64,
    pub truncated: bool,
    pub end_time_ns: u64,
    pub events: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    /// SHA-256 of `config.toml` as written next to the manifest.
    pub config_sha256: String,
    pub runs: Vec<ManifestRun>,
    pub truncated: bool,
}

impl Manifest {
    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    pub fn load(dir: &Path) -> Result<Self, ExperimentError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Manifest {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_rows<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), ExperimentError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    metrics::write_csv(BufWriter::new(f), rows).map_err(|source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>, ExperimentError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    metrics::read_csv(f).map_err(|source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the telemetry of finished runs. Returns the manifest.
pub fn write_outputs(cfg: &ScenarioConfig, outputs: &[RunOutput], dir: &Path) -> Result<Manifest, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let config_text = cfg.to_toml_string();
    let config_path = dir.join("config.toml");
    fs::write(&config_path, &config_text).map_err(|e| io_err(&config_path, e))?;

    let mut summary = Vec::new();
    let mut overlap = Vec::new();
    let mut steps = Vec::new();
    let mut throughput = Vec::new();
    let mut runs = Vec::new();
    for (i, out) in outputs.iter().enumerate() {
        let run_id = i as u32;
        for job in &out.jobs {
            summary.push(job.summary_row(run_id));
            overlap.extend(job.overlap.samples.iter().map(|&(t, v)| OverlapRow {
                run_id,
                job_id: job.job_id,
                t_ns: t.0,
                overlap: v as u32,
            }));
            for (step, done) in job.step_complete.iter().enumerate() {
                if let Some(t) = done {
                    let step = step as u32;
                    steps.push(StepRow {
                        run_id,
                        job_id: job.job_id,
                        pass: step / job.steps_per_pass,
                        step: step % job.steps_per_pass,
                        complete_t_ns: t.0,
                    });
                }
            }
            throughput.extend(job.throughput.samples.iter().map(|&(t, v)| ThroughputRow {
                run_id,
                job_id: job.job_id,
                t_ns: t.0,
                gbps: v,
            }));
        }
        if cfg.record.decisions {
            write_rows(&dir.join(format!("decisions_{run_id}.csv")), &out.decisions)?;
        }
        runs.push(ManifestRun {
            run_id,
            seed: cfg.seeds[i],
            truncated: out.truncated,
            end_time_ns: out.end_time.0,
            events: out.events,
        });
    }
    write_rows(&dir.join("summary.csv"), &summary)?;
    write_rows(&dir.join("overlap.csv"), &overlap)?;
    write_rows(&dir.join("steps.csv"), &steps)?;
    write_rows(&dir.join("throughput.csv"), &throughput)?;

    let manifest = Manifest {
        name: cfg.name.clone(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        truncated: runs.iter().any(|r| r.truncated),
        runs,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Runs every seed and writes the run directory. A run that hits `t_end`
/// still gets its telemetry written, then the whole call fails with
/// [`ExperimentError::Truncated`].
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<Manifest, ExperimentError> {
    cfg.validate()?;
    let outputs = run_all(cfg)?;
    let manifest = write_outputs(cfg, &outputs, dir)?;
    if manifest.truncated {
        return Err(ExperimentError::Truncated {
            seeds: manifest.runs.iter().filter(|r| r.truncated).map(|r| r.seed).collect(),
            dir: dir.display().to_string(),
        });
    }
    Ok(manifest)
}

/// Distribution summary of one metric in one arm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stats {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: &[f64]) -> Option<Self> {
        Some(Stats {
            median: median(values)?,
            p10: percentile(values, 0.1)?,
            p90: percentile(values, 0.9)?,
            min: percentile(values, 0.0)?,
            max: percentile(values, 1.0)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricComparison {
    pub metric: String,
    pub baseline: Option<Stats>,
    pub treatment: Option<Stats>,
    /// `(baseline - treatment) / baseline` for each paired (seed, job).
    pub improvements: Vec<f64>,
    pub median_improvement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub metrics: Vec<MetricComparison>,
    pub baseline_max_overlap_cdf: Vec<(f64, f64)>,
    pub treatment_max_overlap_cdf: Vec<(f64, f64)>,
    pub baseline_cct_cdf: Vec<(f64, f64)>,
    pub treatment_cct_cdf: Vec<(f64, f64)>,
}

/// Summary rows keyed by (seed, job_id).
type SummaryBySeed = BTreeMap<(u64, u32), SummaryRow>;

fn load_summary(dir: &Path) -> Result<(Manifest, SummaryBySeed), ExperimentError> {
    let manifest = Manifest::load(dir)?;
    let seed_of: BTreeMap<u32, u64> = manifest.runs.iter().map(|r| (r.run_id, r.seed)).collect();
    let path = dir.join("summary.csv");
    let mut rows = BTreeMap::new();
    for row in read_rows::<SummaryRow>(&path)? {
        let seed = *seed_of.get(&row.run_id).ok_or_else(|| ExperimentError::Manifest {
            path: path.display().to_string(),
            msg: format!("run_id {} missing from manifest", row.run_id),
        })?;
        rows.insert((seed, row.job_id), row);
    }
    Ok((manifest, rows))
}

/// Pairs the runs of two directories by seed and job.
pub fn compare(baseline: &Path, treatment: &Path) -> Result<ComparisonReport, ExperimentError> {
    let (ma, a) = load_summary(baseline)?;
    let (mb, b) = load_summary(treatment)?;
    let (mut sa, mut sb) = (ma.seeds(), mb.seeds());
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return Err(ExperimentError::SeedMismatch { a: sa, b: sb });
    }
    for &seed in &sa {
        let ja: Vec<u32> = a.keys().filter(|k| k.0 == seed).map(|k| k.1).collect();
        let jb: Vec<u32> = b.keys().filter(|k| k.0 == seed).map(|k| k.1).collect();
        if ja != jb {
            return Err(ExperimentError::JobMismatch { seed });
        }
    }

    type Getter = fn(&SummaryRow) -> Option<f64>;
    let getters: [(&str, Getter); 4] = [
        ("cct_ns", |r| r.cct_ns.map(|v| v as f64)),
        ("jct_ns", |r| r.jct_ns.map(|v| v as f64)),
        ("max_overlap", |r| Some(r.max_overlap as f64)),
        ("final_step_span_ns", |r| r.final_step_span_ns.map(|v| v as f64)),
    ];
    let mut metrics = Vec::new();
    for (name, get) in getters {
        let base: Vec<f64> = a.values().filter_map(get).collect();
        let treat: Vec<f64> = b.values().filter_map(get).collect();
        let improvements: Vec<f64> = a
            .iter()
            .filter_map(|(k, ra)| {
                let (x, y) = (get(ra)?, get(&b[k])?);
                if x == y {
                    Some(0.0)
                } else if x > 0.0 {
                    Some((x - y) / x)
                } else {
                    None
                }
            })
            .collect();
        metrics.push(MetricComparison {
            metric: name.to_string(),
            baseline: Stats::of(&base),
            treatment: Stats::of(&treat),
            median_improvement: median(&improvements),
            improvements,
        });
    }
    let col = |m: &BTreeMap<(u64, u32), SummaryRow>, get: Getter| m.values().filter_map(get).collect::<Vec<_>>();
    Ok(ComparisonReport {
        seeds: sa,
        baseline_max_overlap_cdf: cdf(&col(&a, getters[2].1)),
        treatment_max_overlap_cdf: cdf(&col(&b, getters[2].1)),
        baseline_cct_cdf: cdf(&col(&a, getters[0].1)),
        treatment_cct_cdf: cdf(&col(&b, getters[0].1)),
        metrics,
    })
}

impl ComparisonReport {
    pub fn metric(&self, name: &str) -> Option<&MetricComparison> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "paired seeds: {}", self.seeds.len());
        let _ = writeln!(
            s,
            "{:<20} {:>14} {:>14} {:>14} {:>14} {:>12}",
            "metric", "base median", "base p90", "treat median", "treat p90", "improvement"
        );
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.0}"));
        for m in &self.metrics {
            let _ = writeln!(
                s,
                "{:<20} {:>14} {:>14} {:>14} {:>14} {:>12}",
                m.metric,
                f(m.baseline.as_ref().map(|x| x.median)),
                f(m.baseline.as_ref().map(|x| x.p90)),
                f(m.treatment.as_ref().map(|x| x.median)),
                f(m.treatment.as_ref().map(|x| x.p90)),
                m.median_improvement
                    .map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x)),
            );
        }
        let _ = writeln!(s, "\nmax overlap CDF (value: baseline fraction / treatment fraction)");
        let mut xs: Vec<f64> = self
            .baseline_max_overlap_cdf
            .iter()
            .chain(&self.treatment_max_overlap_cdf)
            .map(|p| p.0)
            .collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let at = |c: &[(f64, f64)], x: f64| c.iter().take_while(|p| p.0 <= x).last().map_or(0.0, |p| p.1);
        for x in xs {
            let _ = writeln!(
                s,
                "{:>6} {:>6.2} / {:.2}",
                x,
                at(&self.baseline_max_overlap_cdf, x),
                at(&self.treatment_max_overlap_cdf, x)
            );
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    K,
    ChunkBytes,
    ImbalanceRatio,
    TWin,
    NWarmup,
}

impl FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "k" => SweepParam::K,
            "chunk_bytes" => SweepParam::ChunkBytes,
            "imbalance_ratio" => SweepParam::ImbalanceRatio,
            "t_win" => SweepParam::TWin,
            "n_warmup" => SweepParam::NWarmup,
            _ => return Err(ExperimentError::UnknownParam(s.to_string())),
        })
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::ChunkBytes => "chunk_bytes",
            SweepParam::ImbalanceRatio => "imbalance_ratio",
            SweepParam::TWin => "t_win",
            SweepParam::NWarmup => "n_warmup",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepParam::ChunkBytes | SweepParam::NWarmup)
    }

    /// Returns a copy of `cfg` with the parameter set. `t_win` is in
    /// microseconds.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = cfg.clone();
        match self {
            SweepParam::K => c.symphony.k = value,
            SweepParam::ChunkBytes => {
                for j in &mut c.workload.jobs {
                    j.chunk_bytes = value as u64;
                }
                if let Some(s) = &mut c.workload.stream {
                    s.chunk_sizes_bytes = vec![value as u64];
                }
            }
            SweepParam::ImbalanceRatio => {
                c.imbalance.get_or_insert_with(ImbalanceConfig::default).ratio = value;
            }
            SweepParam::TWin => c.symphony.t_win_us = value,
            SweepParam::NWarmup => c.symphony.n_warmup = value as u32,
        }
        c
    }
}

fn parse_one(param: SweepParam, raw: &str) -> Result<f64, ExperimentError> {
    let bad = |msg: &str| ExperimentError::BadValue {
        param: param.name().to_string(),
        value: raw.to_string(),
        msg: msg.to_string(),
    };
    let t = raw.trim();
    let (num, scale) = if param == SweepParam::ChunkBytes {
        let upper = t.to_ascii_uppercase();
        let split = upper.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(upper.len());
        let scale = match upper[split..].trim() {
            "" | "B" => 1.0,
            "K" | "KB" | "KIB" => 1024.0,
            "M" | "MB" | "MIB" => 1024.0 * 1024.0,
            _ => return Err(bad("unknown size suffix")),
        };
        (&t[..split], scale)
    } else {
        (t, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| bad("not a number"))?;
    let v = v * scale;
    if !v.is_finite() || v < 0.0 {
        return Err(bad("must be finite and non-negative"));
    }
    let limit = match param {
        SweepParam::ChunkBytes => (1u64 << 40) as f64,
        _ => u32::MAX as f64,
    };
    if param.integral() && (v.fract() != 0.0 || v > limit) {
        return Err(bad("must be a whole number in range"));
    }
    Ok(v)
}

/// Parses a comma-separated value list. Chunk sizes accept `K`/`M` suffixes
/// (binary multiples).
pub fn parse_values(param: SweepParam, list: &str) -> Result<Vec<f64>, ExperimentError> {
    let vals: Vec<f64> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(param, s))
        .collect::<Result<_, _>>()?;
    if vals.is_empty() {
        return Err(ExperimentError::BadValue {
            param: param.name().to_string(),
            value: list.to_string(),
            msg: "empty list".into(),
        });
    }
    Ok(vals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub run_id: u32,
    pub seed: u64,
    pub job_id: u32,
    pub cct_ns: Option<u64>,
    pub jct_ns: Option<u64>,
    pub max_overlap: u32,
}

/// One scenario execution per value, each in `dir/<param>_<index>`, plus a
/// joined `sweep.csv`.
pub fn sweep(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
    dir: &Path,
) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut rows = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let c = param.apply(cfg, v);
        c.validate()?;
        let sub: PathBuf = dir.join(format!("{}_{i}", param.name()));
        let manifest = run_scenario(&c, &sub)?;
        for r in read_rows::<SummaryRow>(&sub.join("summary.csv"))? {
            rows.push(SweepRow {
                value: v,
                run_id: r.run_id,
                seed: manifest.runs[r.run_id as usize].seed,
                job_id: r.job_id,
                cct_ns: r.cct_ns,
                jct_ns: r.jct_ns,
                max_overlap: r.max_overlap,
            });
        }
    }
    write_rows(&dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}

/// Median CCT per swept value, in value order.
pub fn sweep_medians(rows: &[SweepRow]) -> Vec<(f64, Option<f64>)> {
    let mut values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let c: Vec<f64> = rows
                .iter()
                .filter(|r| r.value == v)
                .filter_map(|r| r.cct_ns.map(|x| x as f64))
                .collect();
            (v, median(&c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_param_lists_valid_names() {
        let e = "alpha".parse::<SweepParam>().unwrap_err();
        let msg = e.to_string();
        for n in ["k", "chunk_bytes", "imbalance_ratio", "t_win", "n_warmup"] {
            assert!(msg.contains(n));
        }
        assert!(e.is_config_error());
    }

    #[test]
    fn value_lists_parse_with_suffixes() {
        assert_eq!(
            parse_values(SweepParam::K, "1e-4, 1e-3,0.01").unwrap(),
            vec![1e-4, 1e-3, 0.01]
        );
        assert_eq!(
            parse_values(SweepParam::ChunkBytes, "128KB,8MB,4096").unwrap(),
            vec![131072.0, 8388608.0, 4096.0]
        );
        assert!(parse_values(SweepParam::NWarmup, "1.5").is_err());
        assert!(parse_values(SweepParam::K, "").is_err());
        assert!(parse_values(SweepParam::K, "-1").is_err());
        assert!(parse_values(SweepParam::ChunkBytes, "3GB").is_err());
    }

    #[test]
    fn apply_touches_only_its_key() {
        let base = ScenarioConfig::default();
        let c = SweepParam::ImbalanceRatio.apply(&base, 1.5);
        assert_eq!(c.imbalance.as_ref().unwrap().ratio, 1.5);
        assert_eq!(c.symphony, base.symphony);
        let c = SweepParam::ChunkBytes.apply(&base, 131072.0);
        assert_eq!(c.workload.jobs[0].chunk_bytes, 131072);
        assert_eq!(SweepParam::TWin.apply(&base, 50.0).symphony.t_win_us, 50.0);
        assert_eq!(SweepParam::NWarmup.apply(&base, 7.0).symphony.n_warmup, 7);
    }

    #[test]
    fn hex_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
