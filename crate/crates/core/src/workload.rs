//! Ring-collective job descriptions: parallel 1D rings, 2D rings, repeated
//! passes and randomized multi-tenant job streams.
//!
//! A job runs a sequence of phases per pass. Each phase is a set of rings of
//! equal size `n`, and a phase takes `2(n - 1)` steps (reduce-scatter then
//! all-gather). Steps are numbered globally across phases and passes.
//!
//! Each host belongs to the same number of rings in every phase; its `k`-th
//! ring in a phase is its slot `k`. A host's send at global step `g` in slot
//! `k` waits for the message it receives in slot `k` at step `g - 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{SimRng, SimTime};
use crate::symphony::JobId;
use crate::transport::{FlowSpec, HostId};

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("{hosts} hosts cannot be split into {rings} rings")]
    Partition { hosts: usize, rings: u32 },
    #[error("rings need at least 2 members, got {0}")]
    RingTooSmall(usize),
    #[error("dimensions {dim_a}x{dim_b} do not match {hosts} hosts")]
    Dimensions { dim_a: u32, dim_b: u32, hosts: usize },
    #[error("rings within a phase must have equal size")]
    UnequalRings,
    #[error("host {0} appears twice in one ring")]
    DuplicateMember(HostId),
    #[error("host {host} belongs to {got} rings in phase {phase}, expected {expected}")]
    SlotMismatch {
        host: HostId,
        phase: usize,
        got: usize,
        expected: usize,
    },
    #[error("job needs at least one pass and a positive chunk size")]
    Empty,
    #[error("placement needs {wanted} hosts but the fabric has {available}")]
    NotEnoughHosts { wanted: u32, available: u32 },
    #[error("{steps_per_pass} steps x {passes} passes overflows the step counter")]
    TooManySteps { steps_per_pass: u32, passes: u32 },
    #[error("invalid job stream: {0}")]
    Stream(String),
}

/// One phase of a pass: rings that run their steps side by side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingPhase {
    pub rings: Vec<Vec<HostId>>,
}

impl RingPhase {
    pub fn ring_size(&self) -> usize {
        self.rings[0].len()
    }

    pub fn steps(&self) -> u32 {
        2 * (self.ring_size() as u32 - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: JobId,
    pub phases: Vec<RingPhase>,
    pub chunk_bytes: u64,
    pub passes: u32,
    pub start_at: SimTime,
    /// Delay between receiving step `g` and sending step `g + 1` at a node.
    pub compute_gap: SimTime,
}

/// Where a global step falls inside the job.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepLocation {
    pub pass: u32,
    pub phase: usize,
    pub local_step: u32,
}

impl JobSpec {
    fn with_phases(phases: Vec<RingPhase>, chunk_bytes: u64, passes: u32) -> Result<Self, WorkloadError> {
        let job = JobSpec {
            job_id: 0,
            phases,
            chunk_bytes,
            passes,
            start_at: SimTime::ZERO,
            compute_gap: SimTime::ZERO,
        };
        job.validate()?;
        Ok(job)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.passes == 0 || self.chunk_bytes == 0 || self.phases.is_empty() {
            return Err(WorkloadError::Empty);
        }
        let mut expected: Option<Vec<usize>> = None;
        for (pi, phase) in self.phases.iter().enumerate() {
            if phase.rings.is_empty() {
                return Err(WorkloadError::Empty);
            }
            let n = phase.ring_size();
            if n < 2 {
                return Err(WorkloadError::RingTooSmall(n));
            }
            for ring in &phase.rings {
                if ring.len() != n {
                    return Err(WorkloadError::UnequalRings);
                }
                let mut seen = ring.clone();
                seen.sort_unstable();
                if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
                    return Err(WorkloadError::DuplicateMember(w[0]));
                }
            }
            let counts = self.slot_counts(pi);
            match &expected {
                None => expected = Some(counts),
                Some(e) => {
                    for (h, (&got, &exp)) in counts.iter().zip(e).enumerate() {
                        if got != exp {
                            return Err(WorkloadError::SlotMismatch {
                                host: h as HostId,
                                phase: pi,
                                got,
                                expected: exp,
                            });
                        }
                    }
                }
            }
        }
        let per_pass = self.steps_per_pass();
        if per_pass as u64 * self.passes as u64 > u32::MAX as u64 {
            return Err(WorkloadError::TooManySteps {
                steps_per_pass: per_pass,
                passes: self.passes,
            });
        }
        Ok(())
    }

    fn slot_counts(&self, phase: usize) -> Vec<usize> {
        let max = self.max_host() as usize + 1;
        let mut counts = vec![0usize; max];
        for ring in &self.phases[phase].rings {
            for &h in ring {
                counts[h as usize] += 1;
            }
        }
        counts
    }

    fn max_host(&self) -> HostId {
        self.phases
            .iter()
            .flat_map(|p| p.rings.iter().flatten())
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Distinct participating hosts, ascending.
    pub fn hosts(&self) -> Vec<HostId> {
        let mut h: Vec<HostId> = self
            .phases
            .iter()
            .flat_map(|p| p.rings.iter().flatten())
            .copied()
            .collect();
        h.sort_unstable();
        h.dedup();
        h
    }

    pub fn steps_per_pass(&self) -> u32 {
        self.phases.iter().map(RingPhase::steps).sum()
    }

    pub fn total_steps(&self) -> u32 {
        self.steps_per_pass() * self.passes
    }

    pub fn locate(&self, step: u32) -> StepLocation {
        let per_pass = self.steps_per_pass();
        let pass = step / per_pass;
        let mut rem = step % per_pass;
        for (phase, p) in self.phases.iter().enumerate() {
            if rem < p.steps() {
                return StepLocation {
                    pass,
                    phase,
                    local_step: rem,
                };
            }
            rem -= p.steps();
        }
        unreachable!("step within pass")
    }

    /// Flows that carry one global step.
    pub fn flows_per_step(&self, step: u32) -> u32 {
        let phase = &self.phases[self.locate(step).phase];
        (phase.rings.len() * phase.ring_size()) as u32
    }

    /// Rings of `phase` containing `host`, in slot order.
    pub fn slot_rings(&self, phase: usize, host: HostId) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (ri, ring) in self.phases[phase].rings.iter().enumerate() {
            if let Some(pos) = ring.iter().position(|&h| h == host) {
                out.push((ri, pos));
            }
        }
        out
    }

    /// Slot `slot` of `host` at global step `step`: the ring it sends on and
    /// its neighbour there.
    pub fn send_target(&self, host: HostId, slot: usize, step: u32) -> (usize, HostId) {
        let phase = &self.phases[self.locate(step).phase];
        let mut k = 0;
        for (ri, ring) in phase.rings.iter().enumerate() {
            if let Some(pos) = ring.iter().position(|&h| h == host) {
                if k == slot {
                    return (ri, ring[(pos + 1) % ring.len()]);
                }
                k += 1;
            }
        }
        panic!("host {host} has no slot {slot} at step {step}");
    }

    /// Slot number of `ring` at `host` within `phase`.
    pub fn slot_of(&self, phase: usize, ring: usize, host: HostId) -> usize {
        self.phases[phase].rings[..ring]
            .iter()
            .filter(|r| r.contains(&host))
            .count()
    }

    /// Every flow of the job, ordered by global step, with explicit
    /// dependencies. Flow ids are positions in the returned vector.
    pub fn flows(&self) -> Vec<FlowSpec> {
        let mut out: Vec<FlowSpec> = Vec::new();
        // (host, slot) -> flow id received at the previous step
        let mut last_recv: std::collections::HashMap<(HostId, usize), u32> = Default::default();
        for step in 0..self.total_steps() {
            let loc = self.locate(step);
            let phase = &self.phases[loc.phase];
            let mut recv_now = Vec::new();
            for (ri, ring) in phase.rings.iter().enumerate() {
                for (pos, &src) in ring.iter().enumerate() {
                    let dst = ring[(pos + 1) % ring.len()];
                    let src_slot = self.slot_of(loc.phase, ri, src);
                    let depends_on = match last_recv.get(&(src, src_slot)) {
                        Some(&f) if step > 0 => vec![f],
                        _ => Vec::new(),
                    };
                    let id = out.len() as u32;
                    out.push(FlowSpec {
                        job_id: self.job_id,
                        ring_id: ri as u32,
                        step,
                        src,
                        dst,
                        bytes: self.chunk_bytes,
                        depends_on,
                    });
                    recv_now.push(((dst, self.slot_of(loc.phase, ri, dst)), id));
                }
            }
            last_recv.extend(recv_now);
        }
        out
    }
}

/// Rank `j` goes to ToR `j mod tors`, next free slot there, so consecutive
/// ranks always sit under different ToRs.
pub fn round_robin_placement(tors: u32, hosts_per_tor: u32, count: u32) -> Result<Vec<HostId>, WorkloadError> {
    let available = tors * hosts_per_tor;
    if count > available {
        return Err(WorkloadError::NotEnoughHosts {
            wanted: count,
            available,
        });
    }
    Ok((0..count).map(|j| (j % tors) * hosts_per_tor + j / tors).collect())
}

/// `rings_count` disjoint rings over consecutive groups of `hosts` (given in
/// rank order).
pub fn generate_multi_1d_rings(
    hosts: &[HostId],
    rings_count: u32,
    chunk_bytes: u64,
    passes: u32,
) -> Result<JobSpec, WorkloadError> {
    if rings_count == 0 || !hosts.len().is_multiple_of(rings_count as usize) {
        return Err(WorkloadError::Partition {
            hosts: hosts.len(),
            rings: rings_count,
        });
    }
    let n = hosts.len() / rings_count as usize;
    if n < 2 {
        return Err(WorkloadError::RingTooSmall(n));
    }
    let rings = hosts.chunks(n).map(<[HostId]>::to_vec).collect();
    JobSpec::with_phases(vec![RingPhase { rings }], chunk_bytes, passes)
}

/// `channels` rings, each spanning all `hosts` in rank order and moving its
/// own chunk.
pub fn generate_channel_rings(
    hosts: &[HostId],
    channels: u32,
    chunk_bytes: u64,
    passes: u32,
) -> Result<JobSpec, WorkloadError> {
    if channels == 0 {
        return Err(WorkloadError::Partition {
            hosts: hosts.len(),
            rings: 0,
        });
    }
    if hosts.len() < 2 {
        return Err(WorkloadError::RingTooSmall(hosts.len()));
    }
    let rings = (0..channels).map(|_| hosts.to_vec()).collect();
    JobSpec::with_phases(vec![RingPhase { rings }], chunk_bytes, passes)
}

/// Row rings of `dim_a` consecutive ranks, then column rings of `dim_b`
/// ranks at stride `dim_a`. A dimension of 1 contributes no phase.
pub fn generate_2d_ring(
    hosts: &[HostId],
    dim_a: u32,
    dim_b: u32,
    chunk_bytes: u64,
    passes: u32,
) -> Result<JobSpec, WorkloadError> {
    let (a, b) = (dim_a as usize, dim_b as usize);
    if a * b != hosts.len() || a == 0 || b == 0 {
        return Err(WorkloadError::Dimensions {
            dim_a,
            dim_b,
            hosts: hosts.len(),
        });
    }
    let mut phases = Vec::new();
    if a > 1 {
        phases.push(RingPhase {
            rings: (0..b).map(|row| hosts[row * a..(row + 1) * a].to_vec()).collect(),
        });
    }
    if b > 1 {
        phases.push(RingPhase {
            rings: (0..a)
                .map(|col| (0..b).map(|row| hosts[row * a + col]).collect())
                .collect(),
        });
    }
    if phases.is_empty() {
        return Err(WorkloadError::RingTooSmall(1));
    }
    JobSpec::with_phases(phases, chunk_bytes, passes)
}

/// Lockstep lower bound on one pass: `2(n - 1)` chunk serializations.
pub fn theoretical_cct(n_ring: u32, chunk_bytes: u64, link_rate_bps: f64) -> SimTime {
    assert!(n_ring >= 2);
    let step = 8.0 * chunk_bytes as f64 / link_rate_bps;
    SimTime::from_secs_f64(2.0 * (n_ring - 1) as f64 * step)
}

/// Randomized multi-tenant arrival process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobStreamSpec {
    pub jobs: u32,
    pub first_arrival: SimTime,
    pub mean_interarrival: SimTime,
    /// Ring sizes to draw from.
    pub scales: Vec<u32>,
    /// Per-step message sizes to draw from.
    pub chunk_sizes: Vec<u64>,
    pub passes_min: u32,
    pub passes_max: u32,
    pub max_concurrency: u32,
}

impl JobStreamSpec {
    pub fn validate(&self, available_hosts: u32) -> Result<(), WorkloadError> {
        let err = |m: &str| Err(WorkloadError::Stream(m.to_string()));
        if self.max_concurrency == 0 {
            return err("max_concurrency must be >= 1");
        }
        if self.scales.is_empty() || self.chunk_sizes.is_empty() {
            return err("scales and chunk sizes must be non-empty");
        }
        if self.scales.iter().any(|&s| s < 2 || s > available_hosts) {
            return err("every scale must lie between 2 and the host count");
        }
        if self.chunk_sizes.contains(&0) {
            return err("chunk sizes must be positive");
        }
        if self.passes_min == 0 || self.passes_min > self.passes_max {
            return err("passes range must satisfy 1 <= min <= max");
        }
        if self.jobs > MAX_STREAM_JOBS {
            return err("too many jobs in one stream");
        }
        Ok(())
    }
}

pub const MAX_STREAM_JOBS: u32 = 1 << 16;

/// Draws a job stream. Jobs use the first `scale` hosts of `placement`; the
/// concurrency cap is enforced at admission time by the simulator.
pub fn generate_job_stream(
    spec: &JobStreamSpec,
    placement: &[HostId],
    first_job_id: JobId,
    rng: &mut SimRng,
) -> Result<Vec<JobSpec>, WorkloadError> {
    spec.validate(placement.len() as u32)?;
    let mut t = spec.first_arrival;
    let mut jobs = Vec::with_capacity(spec.jobs as usize);
    for i in 0..spec.jobs {
        if i > 0 {
            t += SimTime::from_secs_f64(rng.exponential(spec.mean_interarrival.as_secs_f64()));
        }
        let scale = spec.scales[rng.below(spec.scales.len() as u64) as usize];
        let chunk = spec.chunk_sizes[rng.below(spec.chunk_sizes.len() as u64) as usize];
        let span = (spec.passes_max - spec.passes_min) as u64 + 1;
        let passes = spec.passes_min + rng.below(span) as u32;
        let mut job = generate_multi_1d_rings(&placement[..scale as usize], 1, chunk, passes)?;
        job.job_id = first_job_id + i;
        job.start_at = t;
        jobs.push(job);
    }
    Ok(jobs)
}
