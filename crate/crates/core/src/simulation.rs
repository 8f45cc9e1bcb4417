//! The packet-level simulator: hosts, switches and the progress tracker wired
//! to one event queue.
//!
//! Hosts transmit packets of their active flows round-robin, each flow paced
//! by its DCQCN rate limiter (one per flow or one per ring connection).
//! Switches forward store-and-forward through FIFO (or two-class strict
//! priority) egress queues. RED draws its coin at enqueue;
//! the progress tracker runs on every dequeued collective packet, and the
//! packet's CE bit is the OR of both decisions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::{
    build_fabric, ecmp_select, red_mark_probability, Fabric, FabricError, FabricSpec, FiveTuple, LinkId,
    LinkPerturbation, NodeId, NodeKind, Perturbations, PortQueue, RedParams, Routing, Scheduling, ROCE_PORT,
};
use crate::metrics::{DecisionRow, JobTelemetry, OverlapTracker, PacketLogEntry};
use crate::sim::{EventQueue, SimRng, SimTime};
use crate::symphony::{JobId, JobTable, PerJobStateBlock, SymphonyParams};
use crate::transport::{
    packet_count, packet_size, CnpPacer, DcqcnParams, FlowId, HostId, Packet, PacketKind, Priority, RateState,
    BACKGROUND_JOB,
};
use crate::workload::JobSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    #[default]
    AllSwitches,
    TorOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateScope {
    #[default]
    PerSwitch,
    PerPort,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SendMode {
    /// A node starts its next step as soon as it has received the previous
    /// one, even while its own previous send is still draining; the NIC
    /// round-robins among all active flows.
    Concurrent,
    /// A node's next send also waits for its previous send on the same ring
    /// slot to leave the NIC.
    #[default]
    Serialized,
}

/// Granularity of the sender rate limiter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateScope {
    /// Every step message starts at line rate with fresh DCQCN state.
    PerFlow,
    /// One limiter per (job, host, ring slot), kept across steps like a
    /// long-lived queue pair.
    #[default]
    PerConnection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reliability {
    /// No losses, no acknowledgements.
    #[default]
    Lossless,
    /// Cumulative ACKs, NAK on a sequence gap, retransmission timeout.
    GoBackN,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymphonySetup {
    pub enabled: bool,
    pub params: SymphonyParams,
    pub placement: Placement,
    pub scope: StateScope,
    /// Engine starts disabled and switches on at this time.
    pub activation: Option<SimTime>,
    pub deactivation: Option<SimTime>,
}

impl Default for SymphonySetup {
    fn default() -> Self {
        SymphonySetup {
            enabled: true,
            params: SymphonyParams::default(),
            placement: Placement::AllSwitches,
            scope: StateScope::PerSwitch,
            activation: None,
            deactivation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSetup {
    pub mtu: u32,
    pub send_mode: SendMode,
    pub reliability: Reliability,
    pub rate_scope: RateScope,
    pub rto: SimTime,
}

impl Default for TransportSetup {
    fn default() -> Self {
        TransportSetup {
            mtu: 1024,
            send_mode: SendMode::default(),
            reliability: Reliability::Lossless,
            rate_scope: RateScope::default(),
            rto: SimTime::from_micros(500),
        }
    }
}

/// Perturbation given by node names, resolved against the built fabric.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedPerturbation {
    pub from: String,
    pub to: String,
    pub multiplier: f64,
    pub start: SimTime,
    pub end: SimTime,
}

/// Drops matching packets on arrival at a switch.
#[derive(Clone, Debug, PartialEq)]
pub struct DropRule {
    pub switch: String,
    pub job: JobId,
    pub step: u32,
    pub last_only: bool,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundSetup {
    pub pairs: Vec<(HostId, HostId)>,
    pub rate_bps: f64,
    pub mean_on: SimTime,
    pub mean_off: SimTime,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub decisions: bool,
    pub marks: bool,
    pub packet_log: bool,
    /// Records every state-block transition of this table (the switch node
    /// id under per-switch scope, the link id under per-port scope).
    pub engine_trace: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EngineEvent {
    Register,
    Packet {
        step: u32,
        psn: u32,
        last: bool,
        probability: f64,
    },
    Tick,
    Unregister,
}

/// One transition of a traced table, with the job's block after it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineTraceEntry {
    pub t: SimTime,
    pub job_id: JobId,
    pub event: EngineEvent,
    pub block: PerJobStateBlock,
}

/// Everything one run needs, with all defaults resolved.
#[derive(Clone, Debug)]
pub struct SimSetup {
    pub fabric: FabricSpec,
    pub red: RedParams,
    pub symphony: SymphonySetup,
    pub cc_enabled: bool,
    pub cc: DcqcnParams,
    pub transport: TransportSetup,
    pub jobs: Vec<JobSpec>,
    pub max_concurrency: Option<u32>,
    pub perturbations: Vec<NamedPerturbation>,
    pub background: Option<BackgroundSetup>,
    pub faults: Vec<DropRule>,
    pub t_end: SimTime,
    pub sample_interval: SimTime,
    pub record: RecordOptions,
}

impl Default for SimSetup {
    fn default() -> Self {
        SimSetup {
            fabric: FabricSpec::default(),
            red: RedParams::default(),
            symphony: SymphonySetup::default(),
            cc_enabled: true,
            cc: DcqcnParams::default(),
            transport: TransportSetup::default(),
            jobs: Vec::new(),
            max_concurrency: None,
            perturbations: Vec::new(),
            background: None,
            faults: Vec::new(),
            t_end: SimTime::from_secs_f64(1.0),
            sample_interval: SimTime::from_micros(100),
            record: RecordOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("job {job}: {msg}")]
    Job { job: JobId, msg: String },
    #[error("fault rule names unknown switch {0}")]
    UnknownSwitch(String),
    #[error("{0}")]
    Invalid(String),
}

/// One CE decision taken at a switch egress.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkRecord {
    pub t: SimTime,
    pub node: NodeId,
    pub job_id: JobId,
    pub flow_id: FlowId,
    pub step: u32,
    pub psn: u32,
    pub red: bool,
    pub symphony: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub t: SimTime,
    pub node: NodeId,
    pub job_id: JobId,
    pub step: u32,
    pub psn: u32,
    pub last: bool,
}

/// Per-flow record kept after the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub job_id: JobId,
    pub ring_id: u32,
    pub step: u32,
    pub src: HostId,
    pub dst: HostId,
    pub started: SimTime,
    pub completed: Option<SimTime>,
    pub last_sent: Option<SimTime>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub jobs: Vec<JobTelemetry>,
    pub flows: Vec<FlowRecord>,
    pub decisions: Vec<DecisionRow>,
    pub marks: Vec<MarkRecord>,
    pub drops: Vec<DropRecord>,
    pub packet_log: Vec<PacketLogEntry>,
    pub engine_trace: Vec<EngineTraceEntry>,
    pub events: u64,
    pub end_time: SimTime,
    pub truncated: bool,
    pub packets_injected: u64,
    pub packets_delivered: u64,
    pub cnps: u64,
}

#[derive(Clone, Debug)]
enum Ev {
    Arrive {
        node: NodeId,
        pkt: Packet,
    },
    PortFree {
        link: LinkId,
    },
    NicReady {
        host: HostId,
        gen: u32,
    },
    WindowTick,
    Cnp {
        flow: FlowId,
    },
    RateTimer {
        conn: u32,
        gen: u32,
    },
    FlowStart {
        job: u32,
        host: HostId,
        slot: u32,
        step: u32,
    },
    JobArrival {
        job: u32,
    },
    Tracker {
        on: bool,
    },
    Ack {
        flow: FlowId,
        cum: u32,
    },
    Nak {
        flow: FlowId,
        expected: u32,
    },
    Rto {
        flow: FlowId,
        gen: u32,
    },
    Sample,
    Background {
        idx: u32,
        on: bool,
    },
}

#[derive(Clone, Debug)]
struct FlowRt {
    kind: PacketKind,
    job: u32,
    ring: u32,
    step: u32,
    src: HostId,
    dst: HostId,
    recv_slot: u32,
    send_slot: u32,
    bytes: u64,
    n_pkts: u32,
    path: u32,
    hops: u32,
    next_psn: u32,
    in_nic: bool,
    conn: u32,
    pacer: CnpPacer,
    // receiver side; `expected` is the next in-order PSN under go-back-N
    // and one past the arrival count on a lossless fabric
    expected: u32,
    nak_sent_for: u32,
    done: bool,
    // go-back-n sender
    acked: u32,
    rto_gen: u32,
    rto_armed: bool,
    started: SimTime,
    completed: Option<SimTime>,
    last_sent: Option<SimTime>,
    /// Background flows: fixed pacing rate.
    fixed_rate: f64,
}

/// Sender rate limiter and pacing clock.
#[derive(Clone, Debug)]
struct Conn {
    rate: RateState,
    next_send: SimTime,
    timer_gen: u32,
    timer_armed: bool,
    /// Flows on this limiter that still have packets to send.
    sending: u32,
}

#[derive(Clone, Debug, Default)]
struct Nic {
    busy_until: SimTime,
    active: Vec<FlowId>,
    rr: usize,
    wake_at: Option<SimTime>,
    gen: u32,
}

#[derive(Clone, Debug)]
struct Port {
    queue: PortQueue,
    busy_until: SimTime,
    free_pending: bool,
}

/// Serialized-mode send gating for one (host, slot).
#[derive(Clone, Copy, Debug, Default)]
struct NodeSlot {
    /// Steps whose send fully left the NIC; sends run in step order.
    sent: u32,
    /// Next step this node will start sending.
    next: u32,
}

#[derive(Clone, Debug)]
struct JobRt {
    spec: JobSpec,
    slots: u32,
    nodes: Vec<NodeSlot>,
    /// `received[(host * slots + slot) * steps + step]`
    received: Vec<bool>,
    step_remaining: Vec<u32>,
    overlap: OverlapTracker,
    admitted: bool,
    done: bool,
    delivered_bytes_window: u64,
    telemetry: JobTelemetry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TrackerMode {
    Off,
    Mark,
    PriorityOnly,
}

#[derive(Clone, Debug)]
struct BackgroundRt {
    flow: FlowId,
}

/// A single simulation run. Cloning snapshots the full state, which allows
/// branching a run at any instant.
#[derive(Clone)]
pub struct Simulation {
    setup: SimSetup,
    fabric: Fabric,
    queue: EventQueue<Ev>,
    ports: Vec<Port>,
    nics: Vec<Nic>,
    flows: Vec<FlowRt>,
    conns: Vec<Conn>,
    conn_of: std::collections::HashMap<(u32, HostId, u32), u32>,
    jobs: Vec<JobRt>,
    waiting_jobs: std::collections::VecDeque<u32>,
    active_jobs: u32,
    finished_jobs: u32,
    tracker_mode: TrackerMode,
    tracker_live: bool,
    tables: Vec<JobTable>,
    tracker_at_node: Vec<bool>,
    perturb: Perturbations,
    faults: Vec<(NodeId, DropRule)>,
    ecmp_salt: u64,
    rng_red: SimRng,
    rng_symphony: SimRng,
    rng_background: SimRng,
    background: Vec<BackgroundRt>,
    decisions: Vec<DecisionRow>,
    engine_trace: Vec<EngineTraceEntry>,
    marks: Vec<MarkRecord>,
    drops: Vec<DropRecord>,
    packet_log: Vec<PacketLogEntry>,
    packets_injected: u64,
    packets_delivered: u64,
    cnps: u64,
    job_by_id: std::collections::HashMap<JobId, u32>,
}

fn roce_src_port(job: JobId, ring: u32, slot: u32, step: u32) -> u16 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in [job, ring, slot, step] {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    // ephemeral range
    49152 + (h % 16384) as u16
}

impl Simulation {
    pub fn new(setup: SimSetup, seed: u64) -> Result<Self, SimError> {
        let fabric = build_fabric(&setup.fabric)?;
        let hosts = fabric.hosts();
        setup.red.validate().map_err(SimError::Invalid)?;
        setup
            .symphony
            .params
            .validate()
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        if setup.transport.mtu == 0 {
            return Err(SimError::Invalid("mtu must be positive".into()));
        }
        if setup.sample_interval == SimTime::ZERO {
            return Err(SimError::Invalid("sample interval must be positive".into()));
        }
        if let Some(0) = setup.max_concurrency {
            return Err(SimError::Invalid("max concurrency must be >= 1".into()));
        }

        let mut perturb = Perturbations::new(fabric.links.len());
        for p in &setup.perturbations {
            let link = fabric.find_link(&p.from, &p.to)?;
            if !(p.multiplier > 0.0 && p.multiplier <= 1.0) {
                return Err(SimError::Invalid(format!(
                    "capacity multiplier {} on {}->{} must lie in (0, 1]",
                    p.multiplier, p.from, p.to
                )));
            }
            perturb.apply(LinkPerturbation {
                link,
                capacity_multiplier: p.multiplier,
                from: p.start,
                until: p.end,
            });
        }
        let mut faults = Vec::new();
        for f in &setup.faults {
            let node = fabric
                .node_by_name(&f.switch)
                .filter(|&n| !fabric.is_host(n))
                .ok_or_else(|| SimError::UnknownSwitch(f.switch.clone()))?;
            faults.push((node, f.clone()));
        }

        let mut jobs = Vec::new();
        let mut job_by_id = std::collections::HashMap::new();
        for (i, spec) in setup.jobs.iter().enumerate() {
            spec.validate().map_err(|e| SimError::Job {
                job: spec.job_id,
                msg: e.to_string(),
            })?;
            if let Some(&h) = spec.hosts().iter().find(|&&h| h >= hosts) {
                return Err(SimError::Job {
                    job: spec.job_id,
                    msg: format!("host {h} does not exist in a {hosts}-host fabric"),
                });
            }
            if spec.job_id == BACKGROUND_JOB || job_by_id.insert(spec.job_id, i as u32).is_some() {
                return Err(SimError::Job {
                    job: spec.job_id,
                    msg: "duplicate or reserved job id".into(),
                });
            }
            let slots = spec.slot_rings(0, spec.phases[0].rings[0][0]).len() as u32;
            let total = spec.total_steps();
            jobs.push(JobRt {
                slots,
                nodes: vec![NodeSlot::default(); (hosts * slots) as usize],
                received: vec![false; (hosts * slots * total) as usize],
                step_remaining: (0..total).map(|s| spec.flows_per_step(s)).collect(),
                overlap: OverlapTracker::new(total),
                admitted: false,
                done: false,
                delivered_bytes_window: 0,
                telemetry: JobTelemetry::new(spec.job_id, spec.start_at, spec.passes, spec.steps_per_pass()),
                spec: spec.clone(),
            });
        }

        let tracker_mode = if setup.fabric.scheduling == Scheduling::PqBaseline {
            TrackerMode::PriorityOnly
        } else if setup.symphony.enabled {
            TrackerMode::Mark
        } else {
            TrackerMode::Off
        };
        let tracker_at_node: Vec<bool> = fabric
            .nodes
            .iter()
            .map(|n| match n.kind {
                NodeKind::Host => false,
                NodeKind::Tor => true,
                _ => setup.symphony.placement == Placement::AllSwitches,
            })
            .collect();
        let table_count = match setup.symphony.scope {
            StateScope::PerSwitch => fabric.nodes.len(),
            StateScope::PerPort => fabric.links.len(),
        };

        let ports = fabric
            .links
            .iter()
            .map(|_| Port {
                queue: PortQueue::new(setup.fabric.buffer_bytes),
                busy_until: SimTime::ZERO,
                free_pending: false,
            })
            .collect();

        let mut sim = Simulation {
            nics: vec![Nic::default(); hosts as usize],
            ports,
            queue: EventQueue::new(),
            flows: Vec::new(),
            conns: Vec::new(),
            conn_of: std::collections::HashMap::new(),
            jobs,
            waiting_jobs: Default::default(),
            active_jobs: 0,
            finished_jobs: 0,
            tracker_mode,
            tracker_live: false,
            tables: vec![JobTable::new(); table_count],
            tracker_at_node,
            perturb,
            faults,
            ecmp_salt: SimRng::stream(seed, "ecmp").next_u64(),
            rng_red: SimRng::stream(seed, "red"),
            rng_symphony: SimRng::stream(seed, "symphony"),
            rng_background: SimRng::stream(seed, "background"),
            background: Vec::new(),
            decisions: Vec::new(),
            engine_trace: Vec::new(),
            marks: Vec::new(),
            drops: Vec::new(),
            packet_log: Vec::new(),
            packets_injected: 0,
            packets_delivered: 0,
            cnps: 0,
            job_by_id,
            fabric,
            setup,
        };
        sim.schedule_initial();
        Ok(sim)
    }

    fn schedule_initial(&mut self) {
        for i in 0..self.jobs.len() {
            let at = self.jobs[i].spec.start_at;
            self.queue.schedule(at, Ev::JobArrival { job: i as u32 });
        }
        match self.tracker_mode {
            TrackerMode::Off => {}
            TrackerMode::PriorityOnly => self.tracker_live = true,
            TrackerMode::Mark => match self.setup.symphony.activation {
                Some(t) if t > SimTime::ZERO => {
                    self.queue.schedule(t, Ev::Tracker { on: true });
                }
                _ => self.tracker_live = true,
            },
        }
        if self.tracker_mode != TrackerMode::Off {
            if let Some(t) = self.setup.symphony.deactivation {
                self.queue.schedule(t, Ev::Tracker { on: false });
            }
            let w = self.setup.symphony.params.t_win;
            self.queue.schedule(w, Ev::WindowTick);
        }
        self.queue.schedule(self.setup.sample_interval, Ev::Sample);
        if let Some(bg) = self.setup.background.clone() {
            for (i, &(src, dst)) in bg.pairs.iter().enumerate() {
                let flow = self.new_background_flow(src, dst, i as u32, bg.rate_bps);
                self.background.push(BackgroundRt { flow });
                let off = self.rng_background.exponential(bg.mean_off.as_secs_f64());
                self.queue.schedule(
                    SimTime::from_secs_f64(off),
                    Ev::Background {
                        idx: i as u32,
                        on: true,
                    },
                );
            }
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn all_jobs_done(&self) -> bool {
        self.finished_jobs as usize == self.jobs.len()
    }

    /// Turns the marking engine off from now on, keeping all other state.
    pub fn disable_symphony(&mut self) {
        if self.tracker_mode == TrackerMode::Mark {
            self.tracker_live = false;
        }
    }

    /// Removes the engine entirely, as if the run had been configured
    /// without it.
    pub fn remove_symphony(&mut self) {
        if self.tracker_mode == TrackerMode::Mark {
            self.tracker_mode = TrackerMode::Off;
            self.tracker_live = false;
        }
    }

    /// State block of `job` at switch node `node` (per-switch scope).
    pub fn state_block(&self, node: NodeId, job: JobId) -> Option<&PerJobStateBlock> {
        self.tables.get(node as usize).and_then(|t| t.get(job))
    }

    /// Dispatches events up to `t` (or until every job finished).
    pub fn run_until(&mut self, t: SimTime) {
        while !self.all_jobs_done() {
            let Some((now, _, ev)) = self.queue.pop_until(t) else {
                self.queue.advance_to(t.max(self.queue.now()));
                return;
            };
            self.dispatch(now, ev);
        }
    }

    pub fn run(mut self) -> RunOutput {
        let t_end = self.setup.t_end;
        self.run_until(t_end);
        self.finish()
    }

    pub fn finish(self) -> RunOutput {
        let truncated = !self.all_jobs_done();
        let flows = self
            .flows
            .iter()
            .filter(|f| f.kind == PacketKind::Data)
            .map(|f| FlowRecord {
                job_id: self.jobs[f.job as usize].spec.job_id,
                ring_id: f.ring,
                step: f.step,
                src: f.src,
                dst: f.dst,
                started: f.started,
                completed: f.completed,
                last_sent: f.last_sent,
            })
            .collect();
        RunOutput {
            jobs: self.jobs.into_iter().map(|j| j.telemetry).collect(),
            flows,
            decisions: self.decisions,
            marks: self.marks,
            drops: self.drops,
            packet_log: self.packet_log,
            engine_trace: self.engine_trace,
            events: self.queue.dispatched(),
            end_time: self.queue.now(),
            truncated,
            packets_injected: self.packets_injected,
            packets_delivered: self.packets_delivered,
            cnps: self.cnps,
        }
    }

    fn dispatch(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::Arrive { node, pkt } => {
                if self.fabric.is_host(node) {
                    self.deliver(now, node, pkt);
                } else {
                    self.switch_arrival(now, node, pkt);
                }
            }
            Ev::PortFree { link } => {
                self.ports[link as usize].free_pending = false;
                if !self.ports[link as usize].queue.is_empty() {
                    self.transmit(now, link);
                }
            }
            Ev::NicReady { host, gen } => {
                let nic = &mut self.nics[host as usize];
                if nic.gen == gen {
                    nic.wake_at = None;
                    self.nic_send(now, host);
                }
            }
            Ev::WindowTick => {
                if self.tracker_live {
                    let params = &self.setup.symphony.params;
                    for t in &mut self.tables {
                        t.tick_all(params, now);
                    }
                    if let Some(idx) = self.setup.record.engine_trace {
                        if let Some(t) = self.tables.get_mut(idx as usize) {
                            for (job_id, block) in t.iter_mut() {
                                self.engine_trace.push(EngineTraceEntry {
                                    t: now,
                                    job_id,
                                    event: EngineEvent::Tick,
                                    block: *block,
                                });
                            }
                        }
                    }
                }
                if !self.all_jobs_done() {
                    self.queue
                        .schedule(now + self.setup.symphony.params.t_win, Ev::WindowTick);
                }
            }
            Ev::Cnp { flow } => self.on_cnp(now, flow),
            Ev::RateTimer { conn, gen } => self.on_rate_timer(now, conn, gen),
            Ev::FlowStart { job, host, slot, step } => self.start_flow(now, job, host, slot, step),
            Ev::JobArrival { job } => self.job_arrival(now, job),
            Ev::Tracker { on } => {
                if self.tracker_mode == TrackerMode::Mark {
                    if on && !self.tracker_live {
                        self.tracker_live = true;
                        // Blocks registered now know nothing about steps in
                        // flight; the first packet seen resynchronizes them.
                        for j in 0..self.jobs.len() {
                            if self.jobs[j].admitted && !self.jobs[j].done {
                                let id = self.jobs[j].spec.job_id;
                                for t in &mut self.tables {
                                    t.register_block(id, PerJobStateBlock::unsynchronized(now));
                                }
                                self.trace_registration(now, id, EngineEvent::Register);
                            }
                        }
                    } else if !on {
                        self.tracker_live = false;
                    }
                }
            }
            Ev::Ack { flow, cum } => self.on_ack(now, flow, cum),
            Ev::Nak { flow, expected } => self.on_nak(now, flow, expected),
            Ev::Rto { flow, gen } => self.on_rto(now, flow, gen),
            Ev::Sample => self.sample(now),
            Ev::Background { idx, on } => self.background_toggle(now, idx, on),
        }
    }

    // -- jobs and flows ------------------------------------------------------

    fn job_arrival(&mut self, now: SimTime, job: u32) {
        let cap = self.setup.max_concurrency.unwrap_or(u32::MAX);
        if self.active_jobs >= cap {
            self.waiting_jobs.push_back(job);
            return;
        }
        self.admit(now, job);
    }

    fn admit(&mut self, now: SimTime, job: u32) {
        self.active_jobs += 1;
        let j = &mut self.jobs[job as usize];
        j.admitted = true;
        j.telemetry.start = Some(now);
        let id = j.spec.job_id;
        let hosts = j.spec.hosts();
        let slots = j.slots;
        if self.tracker_mode != TrackerMode::Off {
            for t in &mut self.tables {
                t.register(id, now);
            }
            self.trace_registration(now, id, EngineEvent::Register);
        }
        for h in hosts {
            for s in 0..slots {
                self.node_slot(job, h, s).next = 1;
                self.start_flow(now, job, h, s, 0);
            }
        }
    }

    fn job_done(&mut self, now: SimTime, job: u32) {
        let j = &mut self.jobs[job as usize];
        j.done = true;
        let id = j.spec.job_id;
        // one last sample so the series ends at completion
        if j.telemetry.overlap.samples.last().is_none_or(|s| s.0 < now) {
            j.telemetry.overlap.push(now, j.overlap.distinct() as f64);
        }
        self.finished_jobs += 1;
        self.active_jobs -= 1;
        self.trace_registration(now, id, EngineEvent::Unregister);
        for t in &mut self.tables {
            t.unregister(id);
        }
        if let Some(next) = self.waiting_jobs.pop_front() {
            self.admit(now, next);
        }
    }

    fn trace_registration(&mut self, now: SimTime, job_id: JobId, event: EngineEvent) {
        let Some(idx) = self.setup.record.engine_trace else {
            return;
        };
        if let Some(block) = self.tables.get(idx as usize).and_then(|t| t.get(job_id)) {
            self.engine_trace.push(EngineTraceEntry {
                t: now,
                job_id,
                event,
                block: *block,
            });
        }
    }

    fn node_slot(&mut self, job: u32, host: HostId, slot: u32) -> &mut NodeSlot {
        let j = &mut self.jobs[job as usize];
        &mut j.nodes[(host * j.slots + slot) as usize]
    }

    fn start_flow(&mut self, now: SimTime, job: u32, host: HostId, slot: u32, step: u32) {
        let j = &self.jobs[job as usize];
        let spec = &j.spec;
        let (ring, dst) = spec.send_target(host, slot as usize, step);
        let phase = spec.locate(step).phase;
        let recv_slot = spec.slot_of(phase, ring, dst) as u32;
        let bytes = spec.chunk_bytes;
        let job_id = spec.job_id;
        let n_pkts = packet_count(bytes, self.setup.transport.mtu);
        let path_count = self.fabric.path_count(host, dst);
        let path = match self.fabric.spec.routing {
            Routing::Ecmp => {
                let tuple = FiveTuple {
                    src_ip: host,
                    dst_ip: dst,
                    src_port: roce_src_port(job_id, ring as u32, slot, step),
                    dst_port: ROCE_PORT,
                    protocol: 17,
                };
                ecmp_select(&tuple, self.ecmp_salt, path_count)
            }
            Routing::Balanced => (self.fabric.slot_of(host) + ring as u32) % path_count,
        };
        let hops = self.hop_count(host, dst);
        let conn = match self.setup.transport.rate_scope {
            RateScope::PerFlow => self.new_conn(now),
            RateScope::PerConnection => match self.conn_of.get(&(job, host, slot)) {
                Some(&c) => c,
                None => {
                    let c = self.new_conn(now);
                    self.conn_of.insert((job, host, slot), c);
                    c
                }
            },
        };
        let c = &mut self.conns[conn as usize];
        c.sending += 1;
        c.next_send = c.next_send.max(now);
        let id = self.flows.len() as FlowId;
        self.flows.push(FlowRt {
            kind: PacketKind::Data,
            job,
            ring: ring as u32,
            step,
            src: host,
            dst,
            recv_slot,
            send_slot: slot,
            bytes,
            n_pkts,
            path,
            hops,
            next_psn: 1,
            in_nic: false,
            conn,
            pacer: CnpPacer::default(),
            expected: 1,
            nak_sent_for: 0,
            done: false,
            acked: 0,
            rto_gen: 0,
            rto_armed: false,
            started: now,
            completed: None,
            last_sent: None,
            fixed_rate: 0.0,
        });
        let first = &mut self.jobs[job as usize].telemetry.step_first_start[step as usize];
        if first.is_none() {
            *first = Some(now);
        }
        self.activate(now, id);
    }

    fn new_conn(&mut self, now: SimTime) -> u32 {
        self.conns.push(Conn {
            rate: RateState::new(&self.setup.cc, now),
            next_send: now,
            timer_gen: 0,
            timer_armed: false,
            sending: 0,
        });
        (self.conns.len() - 1) as u32
    }

    fn new_background_flow(&mut self, src: HostId, dst: HostId, idx: u32, rate: f64) -> FlowId {
        let path_count = self.fabric.path_count(src, dst);
        let tuple = FiveTuple {
            src_ip: src,
            dst_ip: dst,
            src_port: 1024 + idx as u16,
            dst_port: ROCE_PORT,
            protocol: 17,
        };
        let path = ecmp_select(&tuple, self.ecmp_salt, path_count);
        let hops = self.hop_count(src, dst);
        let conn = self.new_conn(SimTime::ZERO);
        let id = self.flows.len() as FlowId;
        self.flows.push(FlowRt {
            kind: PacketKind::Background,
            job: u32::MAX,
            ring: idx,
            step: 0,
            src,
            dst,
            recv_slot: 0,
            send_slot: 0,
            bytes: 0,
            n_pkts: 0,
            path,
            hops,
            next_psn: 1,
            in_nic: false,
            conn,
            pacer: CnpPacer::default(),
            expected: 1,
            nak_sent_for: 0,
            done: false,
            acked: 0,
            rto_gen: 0,
            rto_armed: false,
            started: SimTime::ZERO,
            completed: None,
            last_sent: None,
            fixed_rate: rate,
        });
        id
    }

    fn background_toggle(&mut self, now: SimTime, idx: u32, on: bool) {
        let Some(bg) = self.setup.background.clone() else {
            return;
        };
        let flow = self.background[idx as usize].flow;
        let f = &mut self.flows[flow as usize];
        let mean = if on {
            f.done = false;
            let c = f.conn;
            self.conns[c as usize].next_send = now;
            bg.mean_on
        } else {
            f.done = true;
            bg.mean_off
        };
        if on {
            self.activate(now, flow);
        }
        if !self.all_jobs_done() {
            let d = SimTime::from_secs_f64(self.rng_background.exponential(mean.as_secs_f64()));
            self.queue.schedule(now + d, Ev::Background { idx, on: !on });
        }
    }

    fn hop_count(&self, src: HostId, dst: HostId) -> u32 {
        let f = &self.fabric;
        let (ts, td) = (f.tor_of(src), f.tor_of(dst));
        if ts == td {
            2
        } else if f.pod_of_tor(ts) == f.pod_of_tor(td) {
            4
        } else {
            6
        }
    }

    fn control_delay(&self, flow: FlowId) -> SimTime {
        SimTime(self.setup.fabric.link_latency.0 * self.flows[flow as usize].hops as u64)
    }

    // -- host NIC ------------------------------------------------------------

    fn activate(&mut self, now: SimTime, flow: FlowId) {
        let f = &mut self.flows[flow as usize];
        if f.in_nic {
            return;
        }
        f.in_nic = true;
        let host = f.src;
        self.nics[host as usize].active.push(flow);
        self.kick(now, host);
    }

    fn kick(&mut self, now: SimTime, host: HostId) {
        let busy = self.nics[host as usize].busy_until;
        if busy > now {
            self.wake_nic(host, busy);
        } else {
            self.nic_send(now, host);
        }
    }

    fn wake_nic(&mut self, host: HostId, at: SimTime) {
        let nic = &mut self.nics[host as usize];
        if nic.wake_at.is_some_and(|w| w <= at) {
            return;
        }
        nic.gen = nic.gen.wrapping_add(1);
        nic.wake_at = Some(at);
        let gen = nic.gen;
        self.queue.schedule(at, Ev::NicReady { host, gen });
    }

    fn flow_has_data(f: &FlowRt) -> bool {
        match f.kind {
            PacketKind::Data => f.next_psn <= f.n_pkts,
            PacketKind::Background => !f.done,
        }
    }

    fn nic_send(&mut self, now: SimTime, host: HostId) {
        let nic = &mut self.nics[host as usize];
        if nic.busy_until > now {
            let b = nic.busy_until;
            self.wake_nic(host, b);
            return;
        }
        // drop flows that have nothing left
        let flows = &mut self.flows;
        nic.active.retain(|&id| {
            let f = &mut flows[id as usize];
            let keep = Self::flow_has_data(f);
            if !keep {
                f.in_nic = false;
            }
            keep
        });
        let n = nic.active.len();
        if n == 0 {
            return;
        }
        let mut chosen = None;
        let mut earliest = SimTime::MAX;
        for k in 0..n {
            let idx = (nic.rr + k) % n;
            let id = nic.active[idx];
            let t = self.conns[flows[id as usize].conn as usize].next_send;
            if t <= now {
                chosen = Some((idx, id));
                break;
            }
            earliest = earliest.min(t);
        }
        let Some((idx, id)) = chosen else {
            self.wake_nic(host, earliest);
            return;
        };
        nic.rr = idx + 1;
        let link = self.fabric.host_uplink(host);
        let link_rate = self.fabric.links[link as usize].rate_bps * self.perturb.multiplier(link, now);
        let mtu = self.setup.transport.mtu;
        let f = &mut self.flows[id as usize];
        let (size, pkt) = match f.kind {
            PacketKind::Data => {
                let psn = f.next_psn;
                let size = packet_size(f.bytes, mtu, psn);
                let j = &self.jobs[f.job as usize];
                let pkt = Packet {
                    kind: PacketKind::Data,
                    job_id: j.spec.job_id,
                    flow_id: id,
                    ring_id: f.ring,
                    step: f.step,
                    psn,
                    size,
                    last: psn == f.n_pkts,
                    ecn_ce: false,
                    priority: Priority::Low,
                    src: f.src,
                    dst: f.dst,
                    path: f.path,
                    red_mark: false,
                };
                (size, pkt)
            }
            PacketKind::Background => {
                let pkt = Packet {
                    kind: PacketKind::Background,
                    job_id: BACKGROUND_JOB,
                    flow_id: id,
                    ring_id: f.ring,
                    step: 0,
                    psn: f.next_psn,
                    size: mtu,
                    last: false,
                    ecn_ce: false,
                    priority: Priority::Low,
                    src: f.src,
                    dst: f.dst,
                    path: f.path,
                    red_mark: false,
                };
                (mtu, pkt)
            }
        };
        f.next_psn += 1;
        let c = &mut self.conns[f.conn as usize];
        let pace_rate = match f.kind {
            PacketKind::Data => c.rate.current_rate,
            PacketKind::Background => f.fixed_rate,
        };
        let ser = SimTime::serialization(size as u64, link_rate);
        c.next_send = now + SimTime::serialization(size as u64, pace_rate).max(ser);
        let mut fired = false;
        if f.kind == PacketKind::Data && self.setup.cc_enabled {
            fired = c.rate.on_bytes_sent(&self.setup.cc, size as u64);
        }
        let finished_sending = f.kind == PacketKind::Data && f.next_psn > f.n_pkts && f.last_sent.is_none();
        if finished_sending {
            f.last_sent = Some(now);
            c.sending -= 1;
        }
        let conn = f.conn;
        let gbn_arm = f.kind == PacketKind::Data && self.setup.transport.reliability == Reliability::GoBackN;
        let done_tx = now + ser;
        self.nics[host as usize].busy_until = done_tx;
        let to = self.fabric.links[link as usize].to;
        let latency = self.fabric.links[link as usize].latency;
        if pkt.kind == PacketKind::Data {
            let j = &mut self.jobs[self.flows[id as usize].job as usize];
            j.overlap.enter(pkt.step);
            if self.setup.record.packet_log {
                self.packet_log.push(PacketLogEntry {
                    t: now,
                    job_id: pkt.job_id,
                    step: pkt.step,
                    delta: 1,
                });
            }
        }
        self.packets_injected += 1;
        self.queue.schedule(done_tx + latency, Ev::Arrive { node: to, pkt });
        if fired {
            self.ensure_rate_timer(now, conn);
        }
        if gbn_arm {
            self.arm_rto(now, id, false);
        }
        if finished_sending {
            self.on_send_finished(now, id);
        }
        self.wake_nic(host, done_tx);
    }

    fn on_send_finished(&mut self, now: SimTime, flow: FlowId) {
        let f = &self.flows[flow as usize];
        let (job, host, slot, step) = (f.job, f.src, f.send_slot, f.step);
        let ns = self.node_slot(job, host, slot);
        ns.sent = ns.sent.max(step + 1);
        if self.setup.transport.send_mode == SendMode::Serialized {
            self.try_start_serialized(now, job, host, slot);
        }
    }

    // -- switches ------------------------------------------------------------

    fn switch_arrival(&mut self, now: SimTime, node: NodeId, mut pkt: Packet) {
        if !self.faults.is_empty() && self.try_drop(now, node, &pkt) {
            return;
        }
        let link = self.fabric.next_link(node, pkt.dst, pkt.path);
        pkt.priority = Priority::Low;
        if self.tracker_mode == TrackerMode::PriorityOnly && pkt.kind == PacketKind::Data {
            if let Some(b) = self.tables[self.table_index(node, link)].get(pkt.job_id) {
                if pkt.step <= b.step_min {
                    pkt.priority = Priority::High;
                }
            }
        }
        let port = &mut self.ports[link as usize];
        let depth_after = port.queue.depth_bytes() + pkt.size as u64;
        let p = red_mark_probability(depth_after, &self.setup.red);
        pkt.red_mark = if p >= 1.0 {
            true
        } else if p > 0.0 {
            crate::sim::uniform01(&mut self.rng_red) < p
        } else {
            false
        };
        port.queue.enqueue(pkt);
        if port.busy_until <= now && !port.free_pending {
            self.transmit(now, link);
        } else if !port.free_pending {
            port.free_pending = true;
            let at = port.busy_until;
            self.queue.schedule(at, Ev::PortFree { link });
        }
    }

    fn table_index(&self, node: NodeId, link: LinkId) -> usize {
        match self.setup.symphony.scope {
            StateScope::PerSwitch => node as usize,
            StateScope::PerPort => link as usize,
        }
    }

    fn try_drop(&mut self, now: SimTime, node: NodeId, pkt: &Packet) -> bool {
        if pkt.kind != PacketKind::Data {
            return false;
        }
        let Some((_, rule)) = self.faults.iter_mut().find(|(n, r)| {
            *n == node && r.count > 0 && r.job == pkt.job_id && r.step == pkt.step && (!r.last_only || pkt.last)
        }) else {
            return false;
        };
        rule.count -= 1;
        self.drops.push(DropRecord {
            t: now,
            node,
            job_id: pkt.job_id,
            step: pkt.step,
            psn: pkt.psn,
            last: pkt.last,
        });
        self.leave_network(now, pkt);
        true
    }

    fn transmit(&mut self, now: SimTime, link: LinkId) {
        let from = self.fabric.links[link as usize].from;
        let tidx = self.table_index(from, link);
        let port = &mut self.ports[link as usize];
        let Some(mut pkt) = port.queue.dequeue() else { return };
        let mut sym = false;
        if self.tracker_live && pkt.kind == PacketKind::Data && self.tracker_at_node[from as usize] {
            let params = &self.setup.symphony.params;
            let table = &mut self.tables[tidx];
            let d = table.process(pkt.job_id, pkt.step, pkt.psn, pkt.last, params, &mut self.rng_symphony);
            if self.setup.record.engine_trace == Some(tidx as u32) {
                if let Some(b) = table.get(pkt.job_id) {
                    self.engine_trace.push(EngineTraceEntry {
                        t: now,
                        job_id: pkt.job_id,
                        event: EngineEvent::Packet {
                            step: pkt.step,
                            psn: pkt.psn,
                            last: pkt.last,
                            probability: d.probability,
                        },
                        block: *b,
                    });
                }
            }
            if self.tracker_mode == TrackerMode::Mark {
                sym = d.mark;
                if self.setup.record.decisions {
                    if let Some(b) = table.get(pkt.job_id) {
                        self.decisions.push(DecisionRow {
                            t_ns: now.0,
                            switch_id: from,
                            job_id: pkt.job_id,
                            step: pkt.step,
                            psn: pkt.psn,
                            step_min: b.step_min,
                            psn_rec: b.psn_rec,
                            alpha: b.alpha,
                            delta: d.delta,
                            p: d.probability,
                            marked: d.mark,
                        });
                    }
                }
            }
        }
        let red = pkt.red_mark;
        if red || sym {
            pkt.ecn_ce = true;
            if pkt.kind == PacketKind::Data {
                if let Some(&j) = self.job_by_id.get(&pkt.job_id) {
                    let t = &mut self.jobs[j as usize].telemetry;
                    t.red_marks += red as u64;
                    t.symphony_marks += sym as u64;
                }
            }
            if self.setup.record.marks {
                self.marks.push(MarkRecord {
                    t: now,
                    node: from,
                    job_id: pkt.job_id,
                    flow_id: pkt.flow_id,
                    step: pkt.step,
                    psn: pkt.psn,
                    red,
                    symphony: sym,
                });
            }
        }
        pkt.red_mark = false;
        let l = &self.fabric.links[link as usize];
        let rate = l.rate_bps * self.perturb.multiplier(link, now);
        let done = now + SimTime::serialization(pkt.size as u64, rate);
        let (to, latency) = (l.to, l.latency);
        let port = &mut self.ports[link as usize];
        port.busy_until = done;
        if !port.queue.is_empty() {
            port.free_pending = true;
            self.queue.schedule(done, Ev::PortFree { link });
        }
        self.queue.schedule(done + latency, Ev::Arrive { node: to, pkt });
    }

    // -- receivers -------------------------------------------------------------

    fn leave_network(&mut self, now: SimTime, pkt: &Packet) {
        if pkt.kind != PacketKind::Data {
            return;
        }
        let job = self.flows[pkt.flow_id as usize].job;
        self.jobs[job as usize].overlap.leave(pkt.step);
        if self.setup.record.packet_log {
            self.packet_log.push(PacketLogEntry {
                t: now,
                job_id: pkt.job_id,
                step: pkt.step,
                delta: -1,
            });
        }
    }

    fn deliver(&mut self, now: SimTime, host: HostId, pkt: Packet) {
        debug_assert_eq!(host, pkt.dst);
        self.packets_delivered += 1;
        if pkt.kind == PacketKind::Background {
            return;
        }
        self.leave_network(now, &pkt);
        let fid = pkt.flow_id;
        if pkt.ecn_ce {
            let job = self.flows[fid as usize].job;
            self.jobs[job as usize].telemetry.ce_deliveries += 1;
            if self.setup.cc_enabled {
                let interval = self.setup.cc.cnp_interval;
                if self.flows[fid as usize].pacer.on_marked(now, interval) {
                    self.cnps += 1;
                    let d = self.control_delay(fid);
                    self.queue.schedule(now + d, Ev::Cnp { flow: fid });
                }
            }
        }
        let gbn = self.setup.transport.reliability == Reliability::GoBackN;
        let f = &mut self.flows[fid as usize];
        let job = f.job;
        {
            let t = &mut self.jobs[job as usize];
            t.telemetry.delivered_packets += 1;
            t.delivered_bytes_window += pkt.size as u64;
        }
        if f.done {
            if gbn {
                let cum = f.expected - 1;
                let d = self.control_delay(fid);
                self.queue.schedule(now + d, Ev::Ack { flow: fid, cum });
            }
            return;
        }
        if gbn {
            if pkt.psn == f.expected {
                f.expected += 1;
                let cum = f.expected - 1;
                let complete = f.expected > f.n_pkts;
                let d = self.control_delay(fid);
                self.queue.schedule(now + d, Ev::Ack { flow: fid, cum });
                if complete {
                    self.flow_complete(now, fid);
                }
            } else if pkt.psn > f.expected {
                if f.nak_sent_for != f.expected {
                    f.nak_sent_for = f.expected;
                    let expected = f.expected;
                    let d = self.control_delay(fid);
                    self.queue.schedule(now + d, Ev::Nak { flow: fid, expected });
                }
            } else {
                let cum = f.expected - 1;
                let d = self.control_delay(fid);
                self.queue.schedule(now + d, Ev::Ack { flow: fid, cum });
            }
        } else {
            // The priority arm can reorder a flow, so count arrivals rather
            // than trusting the LAST bit.
            f.expected += 1;
            if f.expected > f.n_pkts {
                self.flow_complete(now, fid);
            }
        }
    }

    fn flow_complete(&mut self, now: SimTime, fid: FlowId) {
        let f = &mut self.flows[fid as usize];
        f.done = true;
        f.completed = Some(now);
        let (job, step, dst, slot) = (f.job, f.step, f.dst, f.recv_slot);
        let j = &mut self.jobs[job as usize];
        let total = j.spec.total_steps();
        if step + 1 == total {
            j.telemetry.final_step_flows.push(now);
        }
        let rem = &mut j.step_remaining[step as usize];
        *rem -= 1;
        if *rem == 0 {
            j.telemetry.step_complete[step as usize] = Some(now);
        }
        let idx = ((dst * j.slots + slot) * total + step) as usize;
        j.received[idx] = true;
        if step + 1 < total {
            match self.setup.transport.send_mode {
                SendMode::Concurrent => self.schedule_next_send(now, job, dst, slot, step + 1),
                SendMode::Serialized => self.try_start_serialized(now, job, dst, slot),
            }
        }
        let j = &self.jobs[job as usize];
        if j.step_remaining[total as usize - 1] == 0 && !j.done {
            self.job_done(now, job);
        }
    }

    /// Starts the node's next step if its input arrived and its previous
    /// send has left the NIC.
    fn try_start_serialized(&mut self, now: SimTime, job: u32, host: HostId, slot: u32) {
        let j = &mut self.jobs[job as usize];
        let total = j.spec.total_steps();
        let base = ((host * j.slots + slot) * total) as usize;
        let ns = &mut j.nodes[(host * j.slots + slot) as usize];
        let g = ns.next;
        if g == 0 || g >= total || ns.sent < g || !j.received[base + g as usize - 1] {
            return;
        }
        ns.next = g + 1;
        self.schedule_next_send(now, job, host, slot, g);
    }

    fn schedule_next_send(&mut self, now: SimTime, job: u32, host: HostId, slot: u32, step: u32) {
        let gap = self.jobs[job as usize].spec.compute_gap;
        if gap == SimTime::ZERO {
            self.start_flow(now, job, host, slot, step);
        } else {
            self.queue.schedule(now + gap, Ev::FlowStart { job, host, slot, step });
        }
    }

    // -- congestion control ------------------------------------------------------

    fn on_cnp(&mut self, now: SimTime, flow: FlowId) {
        let f = &self.flows[flow as usize];
        if f.done && self.setup.transport.rate_scope == RateScope::PerFlow {
            return;
        }
        let c = &mut self.conns[f.conn as usize];
        c.rate.on_cnp(&self.setup.cc, now);
        // restart the increase timer from this CNP
        c.timer_gen = c.timer_gen.wrapping_add(1);
        c.timer_armed = true;
        let (conn, gen) = (f.conn, c.timer_gen);
        self.queue
            .schedule(now + self.setup.cc.rate_timer, Ev::RateTimer { conn, gen });
    }

    fn ensure_rate_timer(&mut self, now: SimTime, conn: u32) {
        let c = &mut self.conns[conn as usize];
        if c.timer_armed || c.rate.at_line_rate(&self.setup.cc) {
            return;
        }
        c.timer_armed = true;
        let gen = c.timer_gen;
        self.queue
            .schedule(now + self.setup.cc.rate_timer, Ev::RateTimer { conn, gen });
    }

    fn on_rate_timer(&mut self, now: SimTime, conn: u32, gen: u32) {
        let cc = &self.setup.cc;
        let c = &mut self.conns[conn as usize];
        if c.timer_gen != gen {
            return;
        }
        c.timer_armed = false;
        // a per-flow limiter dies with its flow; a connection keeps recovering
        let idle = c.sending == 0
            && self.setup.transport.rate_scope == RateScope::PerFlow
            && self.setup.transport.reliability == Reliability::Lossless;
        if idle {
            return;
        }
        c.rate.on_rate_timer(cc);
        if !c.rate.at_line_rate(cc) {
            c.timer_armed = true;
            self.queue.schedule(now + cc.rate_timer, Ev::RateTimer { conn, gen });
        }
    }

    // -- go-back-n ----------------------------------------------------------------

    fn arm_rto(&mut self, now: SimTime, flow: FlowId, restart: bool) {
        let f = &mut self.flows[flow as usize];
        if !restart && f.rto_armed {
            return;
        }
        f.rto_armed = true;
        f.rto_gen = f.rto_gen.wrapping_add(1);
        let gen = f.rto_gen;
        self.queue
            .schedule(now + self.setup.transport.rto, Ev::Rto { flow, gen });
    }

    fn on_ack(&mut self, now: SimTime, flow: FlowId, cum: u32) {
        let f = &mut self.flows[flow as usize];
        if cum > f.acked {
            f.acked = cum;
            if f.acked >= f.n_pkts {
                f.rto_armed = false;
                f.rto_gen = f.rto_gen.wrapping_add(1);
            } else {
                self.arm_rto(now, flow, true);
            }
        }
    }

    fn on_nak(&mut self, now: SimTime, flow: FlowId, expected: u32) {
        let f = &mut self.flows[flow as usize];
        if expected > f.acked {
            f.acked = expected - 1;
        }
        if f.next_psn > expected {
            f.next_psn = expected;
            let job = f.job;
            self.jobs[job as usize].telemetry.retransmissions += 1;
            self.activate(now, flow);
        }
    }

    fn on_rto(&mut self, now: SimTime, flow: FlowId, gen: u32) {
        let f = &mut self.flows[flow as usize];
        if f.rto_gen != gen || !f.rto_armed || f.acked >= f.n_pkts {
            return;
        }
        f.rto_armed = false;
        if f.next_psn > f.acked + 1 {
            f.next_psn = f.acked + 1;
            let job = f.job;
            self.jobs[job as usize].telemetry.retransmissions += 1;
        }
        self.activate(now, flow);
        self.arm_rto(now, flow, true);
    }

    // -- sampling -------------------------------------------------------------------

    fn sample(&mut self, now: SimTime) {
        let interval = self.setup.sample_interval;
        for j in &mut self.jobs {
            if j.admitted && !j.done {
                j.telemetry.overlap.push(now, j.overlap.distinct() as f64);
                let gbps = j.delivered_bytes_window as f64 * 8.0 / interval.as_secs_f64() / 1e9;
                j.telemetry.throughput.push(now, gbps);
            }
            j.delivered_bytes_window = 0;
        }
        if !self.all_jobs_done() {
            self.queue.schedule(now + interval, Ev::Sample);
        }
    }
}
