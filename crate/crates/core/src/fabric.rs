//! Leaf-spine(-core) topology, routing, output queues and RED marking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;
use crate::transport::{HostId, Packet, Priority};

pub type NodeId = u32;
pub type LinkId = u32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduling {
    #[default]
    Fifo,
    /// Two strict classes per port; packets of the lagging step go first.
    PqBaseline,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Routing {
    /// Per-flow hash over the 5-tuple.
    #[default]
    Ecmp,
    /// Path picked from the source host's slot under its ToR, which spreads a
    /// ToR's hosts evenly over its uplinks.
    Balanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FabricSpec {
    pub tors: u32,
    pub spines: u32,
    pub cores: u32,
    pub pods: u32,
    pub hosts_per_tor: u32,
    pub link_rate_bps: f64,
    pub link_latency: SimTime,
    /// Downlink-to-uplink capacity ratio at the topmost switching tier.
    pub oversubscription: f64,
    pub scheduling: Scheduling,
    pub routing: Routing,
    /// Per-port buffer size; only accounted, never enforced.
    pub buffer_bytes: u64,
}

impl Default for FabricSpec {
    fn default() -> Self {
        FabricSpec {
            tors: 4,
            spines: 4,
            cores: 0,
            pods: 1,
            hosts_per_tor: 8,
            link_rate_bps: 10e9,
            link_latency: SimTime::from_micros(1),
            oversubscription: 1.0,
            scheduling: Scheduling::Fifo,
            routing: Routing::Ecmp,
            buffer_bytes: 32 << 20,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FabricError {
    #[error("fabric needs at least one ToR and one host per ToR")]
    Empty,
    #[error("{tors} ToRs cannot reach each other without spines")]
    NoSpines { tors: u32 },
    #[error("{what} ({count}) is not divisible by pods ({pods})")]
    PodSplit { what: &'static str, count: u32, pods: u32 },
    #[error("multi-pod fabric needs at least one core switch")]
    NoCores,
    #[error("link rate must be positive")]
    LinkRate,
    #[error("oversubscription must be >= 1, got {0}")]
    Oversubscription(f64),
    #[error("fabric of {nodes} nodes and {links} links exceeds the {max_nodes}-node / {max_links}-link limit")]
    TooLarge {
        nodes: u64,
        links: u64,
        max_nodes: u64,
        max_links: u64,
    },
    #[error("no link from {from} to {to}")]
    UnknownLink { from: String, to: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Host,
    Tor,
    Spine,
    Core,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    /// Index among nodes of the same kind.
    pub index: u32,
    pub pod: u32,
    pub name: String,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub rate_bps: f64,
    pub latency: SimTime,
}

/// Built topology with routing tables.
///
/// Node ids: hosts first (`0..hosts`), then ToRs, spines and cores.
#[derive(Clone, Debug)]
pub struct Fabric {
    pub spec: FabricSpec,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    host_up: Vec<LinkId>,
    /// ToR -> host links, indexed by host.
    host_down: Vec<LinkId>,
    /// ToR -> spine, `[tor][spine_in_pod]`.
    tor_up: Vec<Vec<LinkId>>,
    /// spine -> ToR, `[spine][tor_in_pod]`.
    spine_down: Vec<Vec<LinkId>>,
    /// spine -> core, `[spine][core]`.
    spine_up: Vec<Vec<LinkId>>,
    /// core -> spine, `[core][spine]`.
    core_down: Vec<Vec<LinkId>>,
}

impl Fabric {
    pub fn hosts(&self) -> u32 {
        self.spec.tors * self.spec.hosts_per_tor
    }

    pub fn tor_node(&self, tor: u32) -> NodeId {
        self.hosts() + tor
    }

    pub fn spine_node(&self, spine: u32) -> NodeId {
        self.hosts() + self.spec.tors + spine
    }

    pub fn core_node(&self, core: u32) -> NodeId {
        self.hosts() + self.spec.tors + self.spec.spines + core
    }

    pub fn is_host(&self, node: NodeId) -> bool {
        node < self.hosts()
    }

    pub fn switch_count(&self) -> u32 {
        self.nodes.len() as u32 - self.hosts()
    }

    pub fn tor_of(&self, host: HostId) -> u32 {
        host / self.spec.hosts_per_tor
    }

    pub fn slot_of(&self, host: HostId) -> u32 {
        host % self.spec.hosts_per_tor
    }

    fn tors_per_pod(&self) -> u32 {
        self.spec.tors / self.spec.pods
    }

    fn spines_per_pod(&self) -> u32 {
        self.spec.spines / self.spec.pods
    }

    pub fn pod_of_tor(&self, tor: u32) -> u32 {
        tor / self.tors_per_pod()
    }

    pub fn host_uplink(&self, host: HostId) -> LinkId {
        self.host_up[host as usize]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(|i| i as NodeId)
    }

    pub fn find_link(&self, from: &str, to: &str) -> Result<LinkId, FabricError> {
        let err = || FabricError::UnknownLink {
            from: from.to_string(),
            to: to.to_string(),
        };
        let f = self.node_by_name(from).ok_or_else(err)?;
        let t = self.node_by_name(to).ok_or_else(err)?;
        self.links
            .iter()
            .position(|l| l.from == f && l.to == t)
            .map(|i| i as LinkId)
            .ok_or_else(err)
    }

    /// Number of equal-cost paths between two hosts.
    pub fn path_count(&self, src: HostId, dst: HostId) -> u32 {
        let (ts, td) = (self.tor_of(src), self.tor_of(dst));
        if ts == td {
            1
        } else if self.pod_of_tor(ts) == self.pod_of_tor(td) {
            self.spines_per_pod()
        } else {
            let s = self.spines_per_pod();
            s * self.spec.cores * s
        }
    }

    /// Egress link at `node` for a packet to `dst` that follows path `path`.
    ///
    /// A path index decomposes into (source-pod spine, core, destination-pod
    /// spine) choices, so every switch derives its hop from the index alone.
    pub fn next_link(&self, node: NodeId, dst: HostId, path: u32) -> LinkId {
        let node_ref = &self.nodes[node as usize];
        let dst_tor = self.tor_of(dst);
        let dst_pod = self.pod_of_tor(dst_tor);
        let s = self.spines_per_pod();
        match node_ref.kind {
            NodeKind::Host => self.host_up[node as usize],
            NodeKind::Tor => {
                if node_ref.index == dst_tor {
                    self.host_down[dst as usize]
                } else {
                    self.tor_up[node_ref.index as usize][(path % s) as usize]
                }
            }
            NodeKind::Spine => {
                if node_ref.pod == dst_pod {
                    let local = dst_tor % self.tors_per_pod();
                    self.spine_down[node_ref.index as usize][local as usize]
                } else {
                    let core = (path / s) % self.spec.cores;
                    self.spine_up[node_ref.index as usize][core as usize]
                }
            }
            NodeKind::Core => {
                let spine_local = (path / (s * self.spec.cores)) % s;
                let spine = dst_pod * s + spine_local;
                self.core_down[node_ref.index as usize][spine as usize]
            }
        }
    }

    /// Sum of link rates from `from_kind` nodes to `to_kind` nodes.
    pub fn aggregate_rate(&self, from_kind: NodeKind, to_kind: NodeKind) -> f64 {
        self.links
            .iter()
            .filter(|l| self.nodes[l.from as usize].kind == from_kind && self.nodes[l.to as usize].kind == to_kind)
            .map(|l| l.rate_bps)
            .sum()
    }
}

pub const MAX_NODES: u64 = 1 << 16;
pub const MAX_LINKS: u64 = 1 << 22;

/// Builds the topology. Host links run at `link_rate_bps`; the ToR-spine tier
/// is sized non-blocking for the hosts below it, and the oversubscription
/// ratio is applied at the topmost tier (ToR uplinks in a single pod, spine
/// uplinks when there are several pods).
pub fn build_fabric(spec: &FabricSpec) -> Result<Fabric, FabricError> {
    if spec.tors == 0 || spec.hosts_per_tor == 0 || spec.pods == 0 {
        return Err(FabricError::Empty);
    }
    if spec.link_rate_bps.is_nan() || spec.link_rate_bps <= 0.0 {
        return Err(FabricError::LinkRate);
    }
    if spec.oversubscription.is_nan() || spec.oversubscription < 1.0 {
        return Err(FabricError::Oversubscription(spec.oversubscription));
    }
    if !spec.tors.is_multiple_of(spec.pods) {
        return Err(FabricError::PodSplit {
            what: "tors",
            count: spec.tors,
            pods: spec.pods,
        });
    }
    if spec.spines == 0 && spec.tors > 1 {
        return Err(FabricError::NoSpines { tors: spec.tors });
    }
    if !spec.spines.is_multiple_of(spec.pods) {
        return Err(FabricError::PodSplit {
            what: "spines",
            count: spec.spines,
            pods: spec.pods,
        });
    }
    if spec.pods > 1 && spec.cores == 0 {
        return Err(FabricError::NoCores);
    }
    let multi_pod = spec.pods > 1;
    let cores = if multi_pod { spec.cores } else { 0 };
    let (t, sp, c) = (spec.tors as u64, spec.spines as u64, cores as u64);
    let host_count = t * spec.hosts_per_tor as u64;
    let nodes = host_count.saturating_add(t + sp + c);
    let links = host_count
        .saturating_add(t * (sp / spec.pods as u64))
        .saturating_add(sp * c)
        .saturating_mul(2);
    if nodes > MAX_NODES || links > MAX_LINKS {
        return Err(FabricError::TooLarge {
            nodes,
            links,
            max_nodes: MAX_NODES,
            max_links: MAX_LINKS,
        });
    }
    let hosts = spec.tors * spec.hosts_per_tor;
    let tors_per_pod = spec.tors / spec.pods;
    let spines_per_pod = spec.spines / spec.pods;

    let mut nodes = Vec::new();
    for h in 0..hosts {
        nodes.push(Node {
            kind: NodeKind::Host,
            index: h,
            pod: (h / spec.hosts_per_tor) / tors_per_pod,
            name: format!("host{h}"),
        });
    }
    for t in 0..spec.tors {
        nodes.push(Node {
            kind: NodeKind::Tor,
            index: t,
            pod: t / tors_per_pod,
            name: format!("tor{t}"),
        });
    }
    for s in 0..spec.spines {
        nodes.push(Node {
            kind: NodeKind::Spine,
            index: s,
            pod: s / spines_per_pod.max(1),
            name: format!("spine{s}"),
        });
    }
    for c in 0..cores {
        nodes.push(Node {
            kind: NodeKind::Core,
            index: c,
            pod: 0,
            name: format!("core{c}"),
        });
    }

    let r = spec.link_rate_bps;
    let tor_spine_rate = if spines_per_pod == 0 {
        0.0
    } else {
        let full = r * spec.hosts_per_tor as f64 / spines_per_pod as f64;
        if multi_pod {
            full
        } else {
            full / spec.oversubscription
        }
    };
    let spine_core_rate = if multi_pod {
        tors_per_pod as f64 * tor_spine_rate / (cores as f64 * spec.oversubscription)
    } else {
        0.0
    };

    let mut links = Vec::new();
    let mut add = |from: NodeId, to: NodeId, rate: f64| -> LinkId {
        links.push(Link {
            from,
            to,
            rate_bps: rate,
            latency: spec.link_latency,
        });
        (links.len() - 1) as LinkId
    };
    let tor_id = |t: u32| hosts + t;
    let spine_id = |s: u32| hosts + spec.tors + s;
    let core_id = |c: u32| hosts + spec.tors + spec.spines + c;

    let mut host_up = Vec::with_capacity(hosts as usize);
    let mut host_down = Vec::with_capacity(hosts as usize);
    for h in 0..hosts {
        let t = h / spec.hosts_per_tor;
        host_up.push(add(h, tor_id(t), r));
        host_down.push(add(tor_id(t), h, r));
    }
    let mut tor_up = vec![Vec::new(); spec.tors as usize];
    let mut spine_down = vec![Vec::new(); spec.spines as usize];
    for t in 0..spec.tors {
        let pod = t / tors_per_pod;
        for sl in 0..spines_per_pod {
            let s = pod * spines_per_pod + sl;
            tor_up[t as usize].push(add(tor_id(t), spine_id(s), tor_spine_rate));
        }
    }
    for s in 0..spec.spines {
        let pod = s / spines_per_pod;
        for tl in 0..tors_per_pod {
            let t = pod * tors_per_pod + tl;
            spine_down[s as usize].push(add(spine_id(s), tor_id(t), tor_spine_rate));
        }
    }
    let mut spine_up = vec![Vec::new(); spec.spines as usize];
    let mut core_down = vec![Vec::new(); cores as usize];
    for s in 0..spec.spines {
        for c in 0..cores {
            spine_up[s as usize].push(add(spine_id(s), core_id(c), spine_core_rate));
        }
    }
    for c in 0..cores {
        for s in 0..spec.spines {
            core_down[c as usize].push(add(core_id(c), spine_id(s), spine_core_rate));
        }
    }

    Ok(Fabric {
        spec: FabricSpec { cores, ..spec.clone() },
        nodes,
        links,
        host_up,
        host_down,
        tor_up,
        spine_down,
        spine_up,
        core_down,
    })
}

/// Header fields hashed for path selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FiveTuple {
    pub src_ip: u32,
    pub dst_ip: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

/// RoCEv2 UDP destination port.
pub const ROCE_PORT: u16 = 4791;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash-based path choice. `salt` is drawn once per run, so a tuple maps to
/// the same path for the whole run.
pub fn ecmp_select(tuple: &FiveTuple, salt: u64, path_count: u32) -> u32 {
    assert!(path_count >= 1);
    let a = ((tuple.src_ip as u64) << 32) | tuple.dst_ip as u64;
    let b = ((tuple.src_port as u64) << 24) | ((tuple.dst_port as u64) << 8) | tuple.protocol as u64;
    let h = mix64(mix64(a ^ salt) ^ b);
    (h % path_count as u64) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedParams {
    pub k_min_bytes: u64,
    pub k_max_bytes: u64,
    pub p_max: f64,
}

impl Default for RedParams {
    fn default() -> Self {
        RedParams {
            k_min_bytes: 50 * 1024,
            k_max_bytes: 100 * 1024,
            p_max: 0.2,
        }
    }
}

impl RedParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.k_min_bytes >= self.k_max_bytes {
            return Err(format!(
                "k_min ({}) must be below k_max ({})",
                self.k_min_bytes, self.k_max_bytes
            ));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(format!("p_max must lie in (0, 1], got {}", self.p_max));
        }
        Ok(())
    }
}

/// Instantaneous-depth RED: 0 below `k_min`, linear to `p_max` at `k_max`,
/// 1 above.
pub fn red_mark_probability(depth_bytes: u64, red: &RedParams) -> f64 {
    if depth_bytes <= red.k_min_bytes {
        0.0
    } else if depth_bytes <= red.k_max_bytes {
        red.p_max * (depth_bytes - red.k_min_bytes) as f64 / (red.k_max_bytes - red.k_min_bytes) as f64
    } else {
        1.0
    }
}

/// Egress queue of one switch port.
#[derive(Clone, Debug)]
pub struct PortQueue {
    classes: [VecDeque<Packet>; 2],
    depth_bytes: u64,
    pub capacity_bytes: u64,
    pub enqueued_bytes: u64,
    pub dequeued_bytes: u64,
    pub max_depth_bytes: u64,
}

impl PortQueue {
    pub fn new(capacity_bytes: u64) -> Self {
        PortQueue {
            classes: [VecDeque::new(), VecDeque::new()],
            depth_bytes: 0,
            capacity_bytes,
            enqueued_bytes: 0,
            dequeued_bytes: 0,
            max_depth_bytes: 0,
        }
    }

    pub fn depth_bytes(&self) -> u64 {
        self.depth_bytes
    }

    pub fn is_empty(&self) -> bool {
        self.classes[0].is_empty() && self.classes[1].is_empty()
    }

    pub fn len(&self) -> usize {
        self.classes[0].len() + self.classes[1].len()
    }

    /// Appends the packet to its class and returns the post-enqueue depth.
    pub fn enqueue(&mut self, pkt: Packet) -> u64 {
        self.depth_bytes += pkt.size as u64;
        self.enqueued_bytes += pkt.size as u64;
        self.max_depth_bytes = self.max_depth_bytes.max(self.depth_bytes);
        self.classes[pkt.priority as usize].push_back(pkt);
        self.depth_bytes
    }

    /// Head of the highest non-empty class.
    pub fn dequeue(&mut self) -> Option<Packet> {
        let pkt = match self.classes[Priority::High as usize].pop_front() {
            Some(p) => p,
            None => self.classes[Priority::Low as usize].pop_front()?,
        };
        self.depth_bytes -= pkt.size as u64;
        self.dequeued_bytes += pkt.size as u64;
        Some(pkt)
    }
}

/// Capacity scaling of one link over a time window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPerturbation {
    pub link: LinkId,
    pub capacity_multiplier: f64,
    pub from: SimTime,
    pub until: SimTime,
}

impl LinkPerturbation {
    pub fn active_at(&self, t: SimTime) -> bool {
        self.from <= t && t < self.until
    }
}

/// Per-link multiplier lookup. Overlapping perturbations multiply.
#[derive(Clone, Debug, Default)]
pub struct Perturbations {
    by_link: Vec<Vec<LinkPerturbation>>,
}

impl Perturbations {
    pub fn new(links: usize) -> Self {
        Perturbations {
            by_link: vec![Vec::new(); links],
        }
    }

    pub fn apply(&mut self, p: LinkPerturbation) {
        assert!(
            p.capacity_multiplier > 0.0 && p.capacity_multiplier <= 1.0,
            "capacity multiplier must lie in (0, 1]"
        );
        self.by_link[p.link as usize].push(p);
    }

    pub fn multiplier(&self, link: LinkId, t: SimTime) -> f64 {
        self.by_link[link as usize]
            .iter()
            .filter(|p| p.active_at(t))
            .map(|p| p.capacity_multiplier)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.by_link.iter().all(|v| v.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::PacketKind;

    fn pkt(size: u32, priority: Priority, psn: u32) -> Packet {
        Packet {
            kind: PacketKind::Data,
            job_id: 0,
            flow_id: 0,
            ring_id: 0,
            step: 0,
            psn,
            size,
            last: false,
            ecn_ce: false,
            priority,
            src: 0,
            dst: 1,
            path: 0,
            red_mark: false,
        }
    }

    #[test]
    fn table1_fabric_has_four_paths_between_tors() {
        let f = build_fabric(&FabricSpec::default()).unwrap();
        assert_eq!(f.hosts(), 32);
        assert_eq!(f.path_count(0, 8), 4);
        assert_eq!(f.path_count(0, 1), 1);
        // every path actually leads to the destination
        for path in 0..4 {
            let mut node = 0;
            let mut hops = 0;
            while node != 9 {
                node = f.links[f.next_link(node, 9, path) as usize].to;
                hops += 1;
            }
            assert_eq!(hops, 4);
        }
    }

    #[test]
    fn single_tor_without_spines() {
        let f = build_fabric(&FabricSpec {
            tors: 1,
            spines: 0,
            hosts_per_tor: 8,
            ..FabricSpec::default()
        })
        .unwrap();
        assert_eq!(f.path_count(0, 7), 1);
        let l = f.next_link(f.tor_node(0), 7, 0);
        assert_eq!(f.links[l as usize].to, 7);
    }

    #[test]
    fn spineless_multi_tor_is_rejected() {
        let e = build_fabric(&FabricSpec {
            spines: 0,
            ..FabricSpec::default()
        });
        assert_eq!(e.unwrap_err(), FabricError::NoSpines { tors: 4 });
    }

    #[test]
    fn two_pod_oversubscribed_core_tier() {
        let f = build_fabric(&FabricSpec {
            tors: 4,
            spines: 4,
            cores: 4,
            pods: 2,
            oversubscription: 2.0,
            ..FabricSpec::default()
        })
        .unwrap();
        let up = f.aggregate_rate(NodeKind::Spine, NodeKind::Core);
        let down = f.aggregate_rate(NodeKind::Spine, NodeKind::Tor);
        assert!((up / down - 0.5).abs() < 1e-12);
        assert_eq!(f.path_count(0, 31), 2 * 4 * 2);
        for path in 0..16 {
            let mut node = 0;
            let mut hops = 0;
            while node != 31 {
                node = f.links[f.next_link(node, 31, path) as usize].to;
                hops += 1;
                assert!(hops <= 6);
            }
            assert_eq!(hops, 6);
        }
    }

    #[test]
    fn ecmp_is_stable_and_bounded() {
        let t = FiveTuple {
            src_ip: 1,
            dst_ip: 2,
            src_port: 1000,
            dst_port: ROCE_PORT,
            protocol: 17,
        };
        assert_eq!(ecmp_select(&t, 7, 4), ecmp_select(&t, 7, 4));
        assert_eq!(ecmp_select(&t, 7, 1), 0);
    }

    #[test]
    fn ecmp_spreads_random_tuples_evenly() {
        let mut rng = crate::sim::SimRng::new(5);
        let mut counts = [0u32; 4];
        for _ in 0..10_000 {
            let v = rng.next_u64();
            let t = FiveTuple {
                src_ip: v as u32,
                dst_ip: (v >> 32) as u32,
                src_port: (v >> 16) as u16,
                dst_port: ROCE_PORT,
                protocol: 17,
            };
            counts[ecmp_select(&t, 99, 4) as usize] += 1;
        }
        for c in counts {
            assert!((2200..=2800).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn red_examples() {
        let red = RedParams::default();
        assert_eq!(red_mark_probability(40 * 1024, &red), 0.0);
        assert!((red_mark_probability(75 * 1024, &red) - 0.1).abs() < 1e-12);
        assert_eq!(red_mark_probability(120 * 1024, &red), 1.0);
        assert_eq!(red_mark_probability(103 * 1024, &red), 1.0);
    }

    #[test]
    fn red_is_monotone() {
        let red = RedParams::default();
        let mut prev = 0.0;
        for d in (0..200 * 1024).step_by(97) {
            let p = red_mark_probability(d, &red);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn enqueue_reports_post_enqueue_depth() {
        let mut q = PortQueue::new(1 << 20);
        assert_eq!(q.enqueue(pkt(1024, Priority::Low, 1)), 1024);
        assert_eq!(q.dequeue().unwrap().psn, 1);
        assert_eq!(q.depth_bytes(), 0);
        assert_eq!(q.enqueued_bytes - q.dequeued_bytes, q.depth_bytes());
    }

    #[test]
    fn strict_priority_jumps_queued_low_packets() {
        let mut q = PortQueue::new(1 << 20);
        q.enqueue(pkt(1024, Priority::Low, 1));
        q.enqueue(pkt(1024, Priority::Low, 2));
        q.enqueue(pkt(1024, Priority::High, 3));
        assert_eq!(q.dequeue().unwrap().psn, 3);
        assert_eq!(q.dequeue().unwrap().psn, 1);
    }

    #[test]
    fn perturbations_compose_and_respect_windows() {
        let mut p = Perturbations::new(2);
        assert_eq!(p.multiplier(0, SimTime::ZERO), 1.0);
        p.apply(LinkPerturbation {
            link: 0,
            capacity_multiplier: 0.5,
            from: SimTime::from_micros(10),
            until: SimTime::from_micros(20),
        });
        p.apply(LinkPerturbation {
            link: 0,
            capacity_multiplier: 0.5,
            from: SimTime::from_micros(15),
            until: SimTime::from_micros(30),
        });
        assert_eq!(p.multiplier(0, SimTime::from_micros(5)), 1.0);
        assert_eq!(p.multiplier(0, SimTime::from_micros(12)), 0.5);
        assert_eq!(p.multiplier(0, SimTime::from_micros(16)), 0.25);
        assert_eq!(p.multiplier(0, SimTime::from_micros(30)), 1.0);
        p.apply(LinkPerturbation {
            link: 1,
            capacity_multiplier: 0.5,
            from: SimTime::ZERO,
            until: SimTime::ZERO,
        });
        assert_eq!(p.multiplier(1, SimTime::ZERO), 1.0);
    }
}
