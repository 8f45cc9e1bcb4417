//! TOML scenario files.
//!
//! Keys carry their unit in the name (`_us`, `_ms`, `_gbps`, `_bytes`).
//! Every table is optional and falls back to [`ScenarioConfig::default`],
//! which matches the bundled `scenarios/defaults.toml`. Serializing a parsed
//! config writes every key back out, so the result is self-contained.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::{build_fabric, FabricSpec, NodeKind, RedParams, Routing, Scheduling};
use crate::sim::{SimRng, SimTime};
use crate::simulation::{
    BackgroundSetup, DropRule, NamedPerturbation, Placement, RateScope, RecordOptions, Reliability, SendMode, SimSetup,
    StateScope, SymphonySetup, TransportSetup,
};
use crate::symphony::{HwMode, SymphonyParams, Tau};
use crate::transport::{DcqcnParams, HostId};
use crate::workload::{
    generate_2d_ring, generate_channel_rings, generate_job_stream, generate_multi_1d_rings, round_robin_placement,
    JobSpec, JobStreamSpec,
};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, msg: impl ToString) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            msg: msg.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub t_end_ms: f64,
    pub sample_interval_us: f64,
    pub fabric: FabricConfig,
    pub red: RedConfig,
    pub symphony: SymphonyConfig,
    pub cc: CcConfig,
    pub transport: TransportConfig,
    pub workload: WorkloadConfig,
    pub imbalance: Option<ImbalanceConfig>,
    pub perturbations: Vec<PerturbationConfig>,
    pub background: Option<BackgroundConfig>,
    pub faults: Vec<FaultConfig>,
    pub record: RecordConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "defaults".into(),
            seeds: vec![1],
            t_end_ms: 10_000.0,
            sample_interval_us: 100.0,
            fabric: FabricConfig::default(),
            red: RedConfig::default(),
            symphony: SymphonyConfig::default(),
            cc: CcConfig::default(),
            transport: TransportConfig::default(),
            workload: WorkloadConfig::default(),
            imbalance: None,
            perturbations: Vec::new(),
            background: None,
            faults: Vec::new(),
            record: RecordConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricConfig {
    pub tors: u32,
    pub spines: u32,
    pub cores: u32,
    pub pods: u32,
    pub hosts_per_tor: u32,
    pub link_rate_gbps: f64,
    pub link_latency_us: f64,
    pub oversubscription: f64,
    pub scheduling: Scheduling,
    pub routing: Routing,
    pub buffer_bytes: u64,
}

impl Default for FabricConfig {
    fn default() -> Self {
        let d = FabricSpec::default();
        FabricConfig {
            tors: d.tors,
            spines: d.spines,
            cores: d.cores,
            pods: d.pods,
            hosts_per_tor: d.hosts_per_tor,
            link_rate_gbps: d.link_rate_bps / 1e9,
            link_latency_us: d.link_latency.as_micros_f64(),
            oversubscription: d.oversubscription,
            scheduling: d.scheduling,
            routing: d.routing,
            buffer_bytes: d.buffer_bytes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RedConfig {
    pub k_min_bytes: u64,
    pub k_max_bytes: u64,
    pub p_max: f64,
}

impl Default for RedConfig {
    fn default() -> Self {
        let d = RedParams::default();
        RedConfig {
            k_min_bytes: d.k_min_bytes,
            k_max_bytes: d.k_max_bytes,
            p_max: d.p_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymphonyConfig {
    pub enabled: bool,
    pub k: f64,
    pub tau: f64,
    pub t_win_us: f64,
    pub n_warmup: u32,
    pub n_sample: u32,
    pub hw_mode: HwMode,
    pub placement: Placement,
    pub scope: StateScope,
    /// Engine starts off and switches on at this time.
    pub activation_ms: Option<f64>,
    pub deactivation_ms: Option<f64>,
}

impl Default for SymphonyConfig {
    fn default() -> Self {
        let d = SymphonyParams::default();
        SymphonyConfig {
            enabled: true,
            k: d.k,
            tau: d.tau.as_f64(),
            t_win_us: d.t_win.as_micros_f64(),
            n_warmup: d.n_warmup,
            n_sample: d.n_sample,
            hw_mode: d.hw_mode,
            placement: Placement::default(),
            scope: StateScope::default(),
            activation_ms: None,
            deactivation_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcConfig {
    pub enabled: bool,
    pub g: f64,
    pub initial_alpha: f64,
    pub cnp_interval_us: f64,
    pub alpha_timer_us: f64,
    pub rate_timer_us: f64,
    pub fast_recovery_steps: u32,
    pub rate_ai_mbps: f64,
    pub rate_min_mbps: f64,
    pub byte_counter_bytes: u64,
}

impl Default for CcConfig {
    fn default() -> Self {
        let d = DcqcnParams::default();
        CcConfig {
            enabled: true,
            g: d.g,
            initial_alpha: d.initial_alpha,
            cnp_interval_us: d.cnp_interval.as_micros_f64(),
            alpha_timer_us: d.alpha_timer.as_micros_f64(),
            rate_timer_us: d.rate_timer.as_micros_f64(),
            fast_recovery_steps: d.fast_recovery_steps,
            rate_ai_mbps: d.rate_ai_bps / 1e6,
            rate_min_mbps: d.rate_min_bps / 1e6,
            byte_counter_bytes: d.byte_counter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub mtu_bytes: u32,
    pub send_mode: SendMode,
    pub rate_scope: RateScope,
    pub reliability: Reliability,
    pub rto_us: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        let d = TransportSetup::default();
        TransportConfig {
            mtu_bytes: d.mtu,
            send_mode: d.send_mode,
            rate_scope: d.rate_scope,
            reliability: d.reliability,
            rto_us: d.rto.as_micros_f64(),
        }
    }
}

/// Either a fixed job list or a random arrival stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Admission cap on simultaneously running jobs; 0 means unlimited.
    pub max_concurrency: u32,
    pub jobs: Vec<JobConfig>,
    pub stream: Option<StreamConfig>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            max_concurrency: 0,
            jobs: vec![JobConfig::default()],
            stream: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Disjoint rings over consecutive groups of ranks.
    #[default]
    #[serde(rename = "multi-1d")]
    Multi1d,
    /// Parallel rings that all span every rank.
    Channels,
    /// Row rings then column rings.
    #[serde(rename = "2d")]
    TwoD,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HostOrder {
    /// Consecutive ranks under different ToRs.
    #[default]
    RoundRobin,
    /// Ranks fill one ToR before the next.
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    /// Defaults to the job's position in the list.
    pub job_id: Option<u32>,
    pub layout: Layout,
    pub ranks: u32,
    /// Offset into the rank order, for jobs sharing a fabric.
    pub first_rank: u32,
    pub host_order: HostOrder,
    /// Ring count for `multi-1d`, channel count for `channels`.
    pub rings: u32,
    pub dim_a: u32,
    pub dim_b: u32,
    pub chunk_bytes: u64,
    pub passes: u32,
    pub start_ms: f64,
    pub compute_gap_us: f64,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            job_id: None,
            layout: Layout::Multi1d,
            ranks: 32,
            first_rank: 0,
            host_order: HostOrder::RoundRobin,
            rings: 4,
            dim_a: 8,
            dim_b: 4,
            chunk_bytes: 8 << 20,
            passes: 1,
            start_ms: 0.0,
            compute_gap_us: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub jobs: u32,
    pub first_arrival_ms: f64,
    pub mean_interarrival_ms: f64,
    pub scales: Vec<u32>,
    pub chunk_sizes_bytes: Vec<u64>,
    pub passes_min: u32,
    pub passes_max: u32,
    pub host_order: HostOrder,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            jobs: 4,
            first_arrival_ms: 0.0,
            mean_interarrival_ms: 5.0,
            scales: vec![8, 16],
            chunk_sizes_bytes: vec![256 << 10, 1 << 20],
            passes_min: 1,
            passes_max: 4,
            host_order: HostOrder::RoundRobin,
        }
    }
}

/// Capacity multiplier `1 / ratio` on one hop for the whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImbalanceConfig {
    pub ratio: f64,
    pub from: String,
    pub to: String,
}

impl Default for ImbalanceConfig {
    fn default() -> Self {
        ImbalanceConfig {
            ratio: 1.13,
            from: "spine0".into(),
            to: "tor2".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub from: String,
    pub to: String,
    pub multiplier: f64,
    #[serde(default)]
    pub start_ms: f64,
    /// Open-ended when absent.
    pub end_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    /// `[src, dst]` host pairs, one on/off flow each.
    pub pairs: Vec<[HostId; 2]>,
    /// Sending rate while on, as a fraction of the link rate.
    pub load_fraction: f64,
    pub mean_on_ms: f64,
    pub mean_off_ms: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            pairs: vec![[1, 10], [3, 20]],
            load_fraction: 0.15,
            mean_on_ms: 1.0,
            mean_off_ms: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub switch: String,
    pub job_id: u32,
    pub step: u32,
    #[serde(default = "default_true")]
    pub last_only: bool,
    #[serde(default = "default_one")]
    pub count: u32,
}

fn default_true() -> bool {
    true
}

fn default_one() -> u32 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordConfig {
    pub decisions: bool,
    pub marks: bool,
}

fn time_us(key: &str, v: f64) -> Result<SimTime, ConfigError> {
    if !v.is_finite() || v < 0.0 {
        return Err(ConfigError::invalid(
            key,
            format!("must be a finite non-negative duration, got {v}"),
        ));
    }
    Ok(SimTime::from_micros_f64(v))
}

fn time_ms(key: &str, v: f64) -> Result<SimTime, ConfigError> {
    time_us(key, v * 1e3)
        .map_err(|_| ConfigError::invalid(key, format!("must be a finite non-negative duration, got {v}")))
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Full text with every key written out.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    /// Checks everything that does not depend on the seed, and builds one
    /// setup to catch the rest.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("seeds", "at least one seed is required"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::invalid("seeds", "seeds must be distinct"));
        }
        self.to_setup(self.seeds[0]).map(|_| ())
    }

    fn fabric_spec(&self) -> Result<FabricSpec, ConfigError> {
        let f = &self.fabric;
        let spec = FabricSpec {
            tors: f.tors,
            spines: f.spines,
            cores: f.cores,
            pods: f.pods,
            hosts_per_tor: f.hosts_per_tor,
            link_rate_bps: positive("fabric.link_rate_gbps", f.link_rate_gbps)? * 1e9,
            link_latency: time_us("fabric.link_latency_us", f.link_latency_us)?,
            oversubscription: f.oversubscription,
            scheduling: f.scheduling,
            routing: f.routing,
            buffer_bytes: f.buffer_bytes,
        };
        Ok(spec)
    }

    fn host_order(&self, order: HostOrder, key: &str) -> Result<Vec<HostId>, ConfigError> {
        let f = &self.fabric;
        let all = f.tors * f.hosts_per_tor;
        match order {
            HostOrder::RoundRobin => {
                round_robin_placement(f.tors, f.hosts_per_tor, all).map_err(|e| ConfigError::invalid(key, e))
            }
            HostOrder::Sequential => Ok((0..all).collect()),
        }
    }

    fn build_job(&self, idx: usize, j: &JobConfig) -> Result<JobSpec, ConfigError> {
        let key = |k: &str| format!("workload.jobs[{idx}].{k}");
        if j.chunk_bytes == 0 {
            return Err(ConfigError::invalid(key("chunk_bytes"), "must be positive"));
        }
        if j.passes == 0 {
            return Err(ConfigError::invalid(key("passes"), "must be at least 1"));
        }
        let order = self.host_order(j.host_order, &key("host_order"))?;
        let end = j.first_rank as usize + j.ranks as usize;
        if end > order.len() {
            return Err(ConfigError::invalid(
                key("ranks"),
                format!(
                    "ranks {}..{} exceed the {} hosts of the fabric",
                    j.first_rank,
                    end,
                    order.len()
                ),
            ));
        }
        let hosts = &order[j.first_rank as usize..end];
        let mut job = match j.layout {
            Layout::Multi1d => generate_multi_1d_rings(hosts, j.rings, j.chunk_bytes, j.passes),
            Layout::Channels => generate_channel_rings(hosts, j.rings, j.chunk_bytes, j.passes),
            Layout::TwoD => generate_2d_ring(hosts, j.dim_a, j.dim_b, j.chunk_bytes, j.passes),
        }
        .map_err(|e| ConfigError::invalid(key("layout"), e))?;
        job.job_id = j.job_id.unwrap_or(idx as u32);
        job.start_at = time_ms(&key("start_ms"), j.start_ms)?;
        job.compute_gap = time_us(&key("compute_gap_us"), j.compute_gap_us)?;
        Ok(job)
    }

    fn build_jobs(&self, seed: u64) -> Result<Vec<JobSpec>, ConfigError> {
        let w = &self.workload;
        let mut jobs = Vec::new();
        for (i, j) in w.jobs.iter().enumerate() {
            jobs.push(self.build_job(i, j)?);
        }
        if let Some(s) = &w.stream {
            let spec = JobStreamSpec {
                jobs: s.jobs,
                first_arrival: time_ms("workload.stream.first_arrival_ms", s.first_arrival_ms)?,
                mean_interarrival: time_ms("workload.stream.mean_interarrival_ms", s.mean_interarrival_ms)?,
                scales: s.scales.clone(),
                chunk_sizes: s.chunk_sizes_bytes.clone(),
                passes_min: s.passes_min,
                passes_max: s.passes_max,
                max_concurrency: if w.max_concurrency == 0 {
                    u32::MAX
                } else {
                    w.max_concurrency
                },
            };
            let order = self.host_order(s.host_order, "workload.stream.host_order")?;
            let first_id = jobs.iter().map(|j| j.job_id + 1).max().unwrap_or(0);
            let mut rng = SimRng::stream(seed, "jobs");
            let drawn = generate_job_stream(&spec, &order, first_id, &mut rng)
                .map_err(|e| ConfigError::invalid("workload.stream", e))?;
            jobs.extend(drawn);
        }
        if jobs.is_empty() {
            return Err(ConfigError::invalid("workload", "no jobs and no stream"));
        }
        let mut ids: Vec<u32> = jobs.iter().map(|j| j.job_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::invalid("workload.jobs", "job ids must be distinct"));
        }
        Ok(jobs)
    }

    /// Resolves the scenario into one run's setup. The seed only matters for
    /// drawing a job stream.
    pub fn to_setup(&self, seed: u64) -> Result<SimSetup, ConfigError> {
        let fabric = self.fabric_spec()?;
        let built = build_fabric(&fabric).map_err(|e| ConfigError::invalid("fabric", e))?;

        let red = RedParams {
            k_min_bytes: self.red.k_min_bytes,
            k_max_bytes: self.red.k_max_bytes,
            p_max: self.red.p_max,
        };
        red.validate().map_err(|e| ConfigError::invalid("red", e))?;

        let s = &self.symphony;
        if !Tau::is_exact(s.tau) {
            return Err(ConfigError::invalid(
                "symphony.tau",
                format!("{} is not representable as a 16-bit fraction", s.tau),
            ));
        }
        let params = SymphonyParams {
            k: s.k,
            tau: Tau::from_f64(s.tau),
            t_win: time_us("symphony.t_win_us", s.t_win_us)?,
            n_warmup: s.n_warmup,
            n_sample: s.n_sample,
            hw_mode: s.hw_mode,
        };
        params.validate().map_err(|e| {
            let key = match e {
                crate::symphony::ParamError::K(_) => "symphony.k",
                crate::symphony::ParamError::Tau(_) => "symphony.tau",
                crate::symphony::ParamError::Window => "symphony.t_win_us",
            };
            ConfigError::invalid(key, e)
        })?;
        let activation = s
            .activation_ms
            .map(|v| time_ms("symphony.activation_ms", v))
            .transpose()?;
        let deactivation = s
            .deactivation_ms
            .map(|v| time_ms("symphony.deactivation_ms", v))
            .transpose()?;
        if let (Some(a), Some(d)) = (activation, deactivation) {
            if d <= a {
                return Err(ConfigError::invalid(
                    "symphony.deactivation_ms",
                    "must come after activation_ms",
                ));
            }
        }
        let symphony = SymphonySetup {
            enabled: s.enabled,
            params,
            placement: s.placement,
            scope: s.scope,
            activation,
            deactivation,
        };

        let c = &self.cc;
        if !(c.g > 0.0 && c.g <= 1.0) {
            return Err(ConfigError::invalid("cc.g", format!("must lie in (0, 1], got {}", c.g)));
        }
        if !(0.0..=1.0).contains(&c.initial_alpha) {
            return Err(ConfigError::invalid(
                "cc.initial_alpha",
                format!("must lie in [0, 1], got {}", c.initial_alpha),
            ));
        }
        let cc = DcqcnParams {
            g: c.g,
            initial_alpha: c.initial_alpha,
            cnp_interval: time_us("cc.cnp_interval_us", c.cnp_interval_us)?,
            alpha_timer: time_us("cc.alpha_timer_us", positive("cc.alpha_timer_us", c.alpha_timer_us)?)?,
            rate_timer: time_us("cc.rate_timer_us", positive("cc.rate_timer_us", c.rate_timer_us)?)?,
            fast_recovery_steps: c.fast_recovery_steps,
            rate_ai_bps: positive("cc.rate_ai_mbps", c.rate_ai_mbps)? * 1e6,
            rate_min_bps: positive("cc.rate_min_mbps", c.rate_min_mbps)? * 1e6,
            byte_counter: c.byte_counter_bytes,
            link_rate_bps: fabric.link_rate_bps,
        };
        if cc.rate_min_bps > cc.link_rate_bps {
            return Err(ConfigError::invalid("cc.rate_min_mbps", "exceeds the link rate"));
        }
        if cc.byte_counter == 0 {
            return Err(ConfigError::invalid("cc.byte_counter_bytes", "must be positive"));
        }

        let t = &self.transport;
        if t.mtu_bytes == 0 {
            return Err(ConfigError::invalid("transport.mtu_bytes", "must be positive"));
        }
        let transport = TransportSetup {
            mtu: t.mtu_bytes,
            send_mode: t.send_mode,
            reliability: t.reliability,
            rate_scope: t.rate_scope,
            rto: time_us("transport.rto_us", positive("transport.rto_us", t.rto_us)?)?,
        };

        let mut perturbations = Vec::new();
        if let Some(im) = &self.imbalance {
            if !(im.ratio.is_finite() && im.ratio >= 1.0) {
                return Err(ConfigError::invalid(
                    "imbalance.ratio",
                    format!("must be >= 1, got {}", im.ratio),
                ));
            }
            built
                .find_link(&im.from, &im.to)
                .map_err(|e| ConfigError::invalid("imbalance", e))?;
            perturbations.push(NamedPerturbation {
                from: im.from.clone(),
                to: im.to.clone(),
                multiplier: 1.0 / im.ratio,
                start: SimTime::ZERO,
                end: SimTime::MAX,
            });
        }
        for (i, p) in self.perturbations.iter().enumerate() {
            let key = |k: &str| format!("perturbations[{i}].{k}");
            built
                .find_link(&p.from, &p.to)
                .map_err(|e| ConfigError::invalid(key("to"), e))?;
            if !(p.multiplier.is_finite() && p.multiplier > 0.0) {
                return Err(ConfigError::invalid(
                    key("multiplier"),
                    format!("must be positive, got {}", p.multiplier),
                ));
            }
            let start = time_ms(&key("start_ms"), p.start_ms)?;
            let end = match p.end_ms {
                Some(v) => time_ms(&key("end_ms"), v)?,
                None => SimTime::MAX,
            };
            if end <= start {
                return Err(ConfigError::invalid(key("end_ms"), "must come after start_ms"));
            }
            perturbations.push(NamedPerturbation {
                from: p.from.clone(),
                to: p.to.clone(),
                multiplier: p.multiplier,
                start,
                end,
            });
        }

        let hosts = built.hosts();
        let background = match &self.background {
            None => None,
            Some(b) => {
                if b.pairs.iter().any(|&[s, d]| s >= hosts || d >= hosts || s == d) {
                    return Err(ConfigError::invalid(
                        "background.pairs",
                        "pairs must name two distinct existing hosts",
                    ));
                }
                if !(b.load_fraction > 0.0 && b.load_fraction <= 1.0) {
                    return Err(ConfigError::invalid("background.load_fraction", "must lie in (0, 1]"));
                }
                Some(BackgroundSetup {
                    pairs: b.pairs.iter().map(|&[s, d]| (s, d)).collect(),
                    rate_bps: b.load_fraction * fabric.link_rate_bps,
                    mean_on: time_ms(
                        "background.mean_on_ms",
                        positive("background.mean_on_ms", b.mean_on_ms)?,
                    )?,
                    mean_off: time_ms(
                        "background.mean_off_ms",
                        positive("background.mean_off_ms", b.mean_off_ms)?,
                    )?,
                })
            }
        };

        let mut faults = Vec::new();
        for (i, f) in self.faults.iter().enumerate() {
            let is_switch = built
                .node_by_name(&f.switch)
                .is_some_and(|n| built.nodes[n as usize].kind != NodeKind::Host);
            if !is_switch {
                return Err(ConfigError::invalid(
                    format!("faults[{i}].switch"),
                    format!("no switch named {}", f.switch),
                ));
            }
            faults.push(DropRule {
                switch: f.switch.clone(),
                job: f.job_id,
                step: f.step,
                last_only: f.last_only,
                count: f.count,
            });
        }

        let jobs = self.build_jobs(seed)?;
        if let Some(j) = jobs
            .iter()
            .find(|j| j.chunk_bytes.div_ceil(t.mtu_bytes as u64) > u32::MAX as u64)
        {
            return Err(ConfigError::invalid(
                "chunk_bytes",
                format!(
                    "job {}: {} bytes is more packets than a PSN can count",
                    j.job_id, j.chunk_bytes
                ),
            ));
        }
        let t_end = time_ms("t_end_ms", positive("t_end_ms", self.t_end_ms)?)?;
        let sample_interval = time_us(
            "sample_interval_us",
            positive("sample_interval_us", self.sample_interval_us)?,
        )?;
        if sample_interval == SimTime::ZERO {
            return Err(ConfigError::invalid("sample_interval_us", "rounds to zero"));
        }

        Ok(SimSetup {
            fabric,
            red,
            symphony,
            cc_enabled: c.enabled,
            cc,
            transport,
            jobs,
            max_concurrency: (self.workload.max_concurrency > 0).then_some(self.workload.max_concurrency),
            perturbations,
            background,
            faults,
            t_end,
            sample_interval,
            record: RecordOptions {
                decisions: self.record.decisions,
                marks: self.record.marks,
                packet_log: false,
                engine_trace: None,
            },
        })
    }
}
