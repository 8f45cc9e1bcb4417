//! Packets, flow descriptions and the DCQCN-style sender rate controller.

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;
use crate::symphony::JobId;

/// Index of a host in the fabric.
pub type HostId = u32;
/// Index of a runtime flow.
pub type FlowId = u32;

/// Job id carried by background cross traffic; never registered with any
/// switch, so the progress tracker ignores it.
pub const BACKGROUND_JOB: JobId = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketKind {
    Data,
    Background,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Priority {
    High = 0,
    Low = 1,
}

/// One simulated data packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub kind: PacketKind,
    pub job_id: JobId,
    pub flow_id: FlowId,
    pub ring_id: u32,
    pub step: u32,
    /// 1-based sequence number within the flow.
    pub psn: u32,
    pub size: u32,
    pub last: bool,
    pub ecn_ce: bool,
    pub priority: Priority,
    pub src: HostId,
    pub dst: HostId,
    /// Path index chosen at the source.
    pub path: u32,
    /// RED coin recorded at enqueue on the current hop.
    pub red_mark: bool,
}

/// Number of MTU-sized packets needed for `bytes` of payload.
pub fn packet_count(bytes: u64, mtu: u32) -> u32 {
    assert!(mtu > 0);
    bytes.div_ceil(mtu as u64) as u32
}

/// Payload size of packet `psn` (1-based) of an `n`-packet message.
pub fn packet_size(bytes: u64, mtu: u32, psn: u32) -> u32 {
    let n = packet_count(bytes, mtu);
    debug_assert!(psn >= 1 && psn <= n);
    if psn < n {
        mtu
    } else {
        (bytes - (n as u64 - 1) * mtu as u64) as u32
    }
}

/// One step transfer between ring neighbours.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub job_id: JobId,
    pub ring_id: u32,
    pub step: u32,
    pub src: HostId,
    pub dst: HostId,
    pub bytes: u64,
    /// Flows that must be received at `src` before this one may start.
    pub depends_on: Vec<FlowId>,
}

/// DCQCN constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcqcnParams {
    pub g: f64,
    pub initial_alpha: f64,
    pub cnp_interval: SimTime,
    pub alpha_timer: SimTime,
    pub rate_timer: SimTime,
    pub fast_recovery_steps: u32,
    pub rate_ai_bps: f64,
    pub rate_min_bps: f64,
    pub byte_counter: u64,
    pub link_rate_bps: f64,
}

impl Default for DcqcnParams {
    fn default() -> Self {
        DcqcnParams {
            g: 1.0 / 256.0,
            initial_alpha: 1.0,
            cnp_interval: SimTime::from_micros(50),
            alpha_timer: SimTime::from_micros(55),
            rate_timer: SimTime::from_micros(55),
            fast_recovery_steps: 5,
            rate_ai_bps: 40e6,
            rate_min_bps: 10e6,
            byte_counter: 10 * 1024 * 1024,
            link_rate_bps: 10e9,
        }
    }
}

/// Per-flow sender rate state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateState {
    pub current_rate: f64,
    pub target_rate: f64,
    pub cc_alpha: f64,
    /// Bytes sent since the last byte-counter increase event.
    pub byte_counter: u64,
    /// Increase events since the last CNP, from the timer and the byte
    /// counter respectively.
    pub timer_stage: u32,
    pub byte_stage: u32,
    /// When cc_alpha was last decayed or bumped.
    pub alpha_updated_at: SimTime,
}

impl RateState {
    pub fn new(params: &DcqcnParams, now: SimTime) -> Self {
        RateState {
            current_rate: params.link_rate_bps,
            target_rate: params.link_rate_bps,
            cc_alpha: params.initial_alpha,
            byte_counter: 0,
            timer_stage: 0,
            byte_stage: 0,
            alpha_updated_at: now,
        }
    }

    pub fn at_line_rate(&self, params: &DcqcnParams) -> bool {
        self.current_rate >= params.link_rate_bps
    }

    /// Multiplicative decrease on a congestion notification.
    pub fn on_cnp(&mut self, params: &DcqcnParams, now: SimTime) {
        self.decay_alpha(params, now);
        self.cc_alpha = (1.0 - params.g) * self.cc_alpha + params.g;
        self.alpha_updated_at = now;
        self.target_rate = self.current_rate;
        self.current_rate = (self.current_rate * (1.0 - self.cc_alpha / 2.0)).max(params.rate_min_bps);
        self.byte_counter = 0;
        self.timer_stage = 0;
        self.byte_stage = 0;
    }

    /// Applies the cc_alpha decay owed for every full alpha period since the
    /// last update.
    pub fn decay_alpha(&mut self, params: &DcqcnParams, now: SimTime) {
        let period = params.alpha_timer.0;
        if period == 0 {
            return;
        }
        let elapsed = now.0.saturating_sub(self.alpha_updated_at.0);
        let periods = elapsed / period;
        if periods > 0 {
            self.cc_alpha *= (1.0 - params.g).powi(periods.min(i32::MAX as u64) as i32);
            self.alpha_updated_at = SimTime(self.alpha_updated_at.0 + periods * period);
        }
    }

    /// One recovery step: halfway to the target during fast recovery, then
    /// additive increase.
    pub fn rate_increase_tick(&mut self, params: &DcqcnParams) {
        if self.timer_stage.max(self.byte_stage) <= params.fast_recovery_steps {
            self.current_rate = (self.current_rate + self.target_rate) / 2.0;
        } else {
            self.current_rate += params.rate_ai_bps;
        }
        self.current_rate = self.current_rate.clamp(params.rate_min_bps, params.link_rate_bps);
        self.target_rate = self.target_rate.max(self.current_rate);
    }

    /// Timer-driven increase event.
    pub fn on_rate_timer(&mut self, params: &DcqcnParams) {
        self.timer_stage += 1;
        self.rate_increase_tick(params);
    }

    /// Accounts sent bytes; returns true if the byte counter fired an
    /// increase event.
    pub fn on_bytes_sent(&mut self, params: &DcqcnParams, bytes: u64) -> bool {
        if self.at_line_rate(params) {
            return false;
        }
        self.byte_counter += bytes;
        if self.byte_counter >= params.byte_counter {
            self.byte_counter -= params.byte_counter;
            self.byte_stage += 1;
            self.rate_increase_tick(params);
            true
        } else {
            false
        }
    }
}

/// Receiver-side CNP pacing for one flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CnpPacer {
    last: Option<SimTime>,
}

impl CnpPacer {
    /// Returns true when a CE-marked arrival at `now` should produce a CNP.
    pub fn on_marked(&mut self, now: SimTime, interval: SimTime) -> bool {
        match self.last {
            Some(t) if now.0 < t.0 + interval.0 => false,
            _ => {
                self.last = Some(now);
                true
            }
        }
    }
}
