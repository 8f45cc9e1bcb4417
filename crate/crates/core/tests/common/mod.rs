//! Shared test helpers: a reference interpreter of the per-packet tracking
//! algorithm and a generator of adversarial packet traces.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symphony_sim::sim::SimTime;
use symphony_sim::symphony::{process_packet, window_tick, HwMode, PerJobStateBlock, SymphonyParams, Tau};

/// Reference switch state. The windowed max is kept as two registers, the
/// previous window's max and the current one's; the progress reference is
/// their max.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefState {
    pub step_min: u64,
    pub prev_max: u64,
    pub cur_max: u64,
    pub alpha: i64,
    pub cnt_total: u64,
    pub cnt_op: u64,
}

impl RefState {
    pub fn fresh() -> Self {
        RefState {
            step_min: 0,
            prev_max: 0,
            cur_max: 0,
            alpha: 1,
            cnt_total: 0,
            cnt_op: 0,
        }
    }

    pub fn psn_rec(&self) -> u64 {
        self.prev_max.max(self.cur_max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RefParams {
    pub k: f64,
    pub tau: f64,
    pub n_warmup: u64,
    pub n_sample: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefDecision {
    /// The packet reached the probability draw.
    pub drew: bool,
    pub delta: f64,
    pub p: f64,
    pub mark: bool,
}

/// One packet, line by line: count, update the tracked step, decide.
pub fn ref_packet(s: &mut RefState, step: u64, psn: u64, last: bool, prm: &RefParams, u: f64) -> RefDecision {
    // traffic statistics against the step_min in force on arrival
    s.cnt_total += 1;
    if step > s.step_min {
        s.cnt_op += 1;
    }
    // tracking
    if last {
        s.step_min = step + 1;
        s.prev_max = 0;
        s.cur_max = 0;
    } else if step < s.step_min {
        s.step_min = step;
        s.prev_max = 0;
        s.cur_max = psn;
    } else if step == s.step_min && psn > s.cur_max {
        s.cur_max = psn;
    }
    // decision
    let none = RefDecision {
        drew: false,
        delta: 0.0,
        p: 0.0,
        mark: false,
    };
    if step <= s.step_min {
        return none;
    }
    let rec = s.psn_rec();
    if rec <= prm.n_warmup {
        return none;
    }
    let delta = s.alpha as f64 * psn as f64 / rec as f64;
    let p = if prm.k * delta > 1.0 { 1.0 } else { prm.k * delta };
    RefDecision {
        drew: true,
        delta,
        p,
        mark: u < p,
    }
}

/// End of a measurement window.
pub fn ref_tick(s: &mut RefState, prm: &RefParams) {
    if s.cnt_total > prm.n_sample {
        let rho = s.cnt_op as f64 / s.cnt_total as f64;
        s.alpha = if rho >= prm.tau {
            s.alpha + 1
        } else {
            (s.alpha - 1).max(1)
        };
    }
    s.cnt_total = 0;
    s.cnt_op = 0;
    s.prev_max = s.cur_max;
    s.cur_max = 0;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceOp {
    Packet { step: u32, psn: u32, last: bool, u: f64 },
    Tick,
}

/// A ring-like packet stream: a sliding set of steps in flight, each sending
/// `pkts_per_step` packets, then perturbed by neighbour swaps, duplicates and
/// stray packets of arbitrary steps. Window ticks are interleaved.
pub fn generate_trace(seed: u64, len: usize) -> Vec<TraceOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pkts_per_step: u32 = [150, 400, 1000, 2000][rng.gen_range(0..4)];
    let mut lo: u32 = 0;
    let mut width: u32 = 1;
    let mut next_psn: Vec<u32> = vec![0; 8];
    let mut ops = Vec::with_capacity(len + len / 50);
    while ops.len() < len {
        if rng.gen_bool(0.01) {
            ops.push(TraceOp::Tick);
            continue;
        }
        if rng.gen_bool(0.002) {
            width = rng.gen_range(1..6);
        }
        let step = if rng.gen_bool(0.6) {
            lo
        } else {
            lo + rng.gen_range(0..width)
        };
        let idx = step as usize;
        if idx >= next_psn.len() {
            next_psn.resize(idx + 8, 0);
        }
        let (step, psn, last) = if next_psn[idx] < pkts_per_step {
            let psn = next_psn[idx];
            next_psn[idx] += 1;
            (step, psn + 1, psn + 1 == pkts_per_step)
        } else {
            (lo, pkts_per_step, false)
        };
        while next_psn.get(lo as usize).copied() == Some(pkts_per_step) {
            lo += 1;
            if lo as usize >= next_psn.len() {
                next_psn.resize(lo as usize + 8, 0);
            }
        }
        ops.push(TraceOp::Packet {
            step,
            psn,
            last,
            u: rng.gen(),
        });
        if rng.gen_bool(0.02) {
            // duplicate, possibly of a LAST packet
            ops.push(*ops.last().unwrap());
        }
        if rng.gen_bool(0.01) {
            ops.push(TraceOp::Packet {
                step: rng.gen_range(0..lo + 4),
                psn: rng.gen_range(0..pkts_per_step + 1),
                last: rng.gen_bool(0.1),
                u: rng.gen(),
            });
        }
    }
    ops.truncate(len);
    for i in 1..ops.len() {
        if rng.gen_bool(0.05) {
            ops.swap(i - 1, i);
        }
    }
    ops
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    assert!(n > 0);
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn engine_params(p: &RefParams) -> SymphonyParams {
    SymphonyParams {
        k: p.k,
        tau: Tau::from_f64(p.tau),
        t_win: SimTime::from_micros(100),
        n_warmup: p.n_warmup as u32,
        n_sample: p.n_sample as u32,
        hw_mode: HwMode::Exact,
    }
}

fn same_state(b: &PerJobStateBlock, r: &RefState) -> bool {
    b.step_min as u64 == r.step_min
        && b.psn_rec as u64 == r.psn_rec()
        && b.psn_rec_window as u64 == r.cur_max
        && b.alpha as i64 == r.alpha
        && b.cnt_total as u64 == r.cnt_total
        && b.cnt_op as u64 == r.cnt_op
}

/// Runs `ops` through the engine and the reference side by side; reports
/// the first divergence in state or decision.
pub fn check_trace(ops: &[TraceOp], prm: &RefParams) -> Result<usize, String> {
    let params = engine_params(prm);
    let mut block = PerJobStateBlock::new(SimTime::ZERO);
    let mut reference = RefState::fresh();
    let mut marks = 0;
    for (i, op) in ops.iter().enumerate() {
        match *op {
            TraceOp::Tick => {
                window_tick(&mut block, &params, SimTime::ZERO);
                ref_tick(&mut reference, prm);
            }
            TraceOp::Packet { step, psn, last, u } => {
                let mut draws = 0;
                let d = process_packet(&mut block, step, psn, last, &params, &mut || {
                    draws += 1;
                    u
                });
                let r = ref_packet(&mut reference, step as u64, psn as u64, last, prm, u);
                let drew = draws == 1;
                if draws > 1 || drew != r.drew || d.mark != r.mark || d.delta != r.delta || d.probability != r.p {
                    return Err(format!("op {i} {op:?}: engine {d:?} ({draws} draws), reference {r:?}"));
                }
                marks += d.mark as usize;
            }
        }
        if !same_state(&block, &reference) {
            return Err(format!("op {i} {op:?}: engine {block:?}, reference {reference:?}"));
        }
    }
    Ok(marks)
}
