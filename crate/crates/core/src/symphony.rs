//! Switch-resident progress tracking and selective ECN throttling for ring
//! collectives.
//!
//! Each switch keeps one [`PerJobStateBlock`] per registered job. Every
//! dequeued packet of a tracked job is run through [`process_packet`], which
//! updates the job's view of the lagging step (`step_min`) and its intra-step
//! progress reference (`psn_rec`), and decides whether the packet belongs to
//! an outpacing flow that should receive a congestion mark. Marking
//! probability grows with the progress gap `alpha * psn / psn_rec`, where the
//! integer `alpha` is adjusted once per window according to how much of the
//! window's traffic was outpacing.
//!
//! The engine is a pure state machine: given a state block, a packet and a
//! uniform draw, the next state and the decision are fully determined.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::sim::{SimTime, Uniform01};

/// Job identifier carried in every collective packet.
pub type JobId = u32;

/// How the marking probability is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HwMode {
    /// Floating-point `min(1, k * delta)`.
    #[default]
    Exact,
    /// Log-domain evaluation through small lookup tables, the way a switch
    /// pipeline without dividers would do it.
    TableApprox,
}

/// A threshold in `(0, 1)` stored as a 16-bit binary fraction so the window
/// check is a shift and a multiply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tau {
    q16: u32,
}

impl Tau {
    pub const FRAC_BITS: u32 = 16;

    /// Rounds `tau` to the nearest multiple of 2^-16.
    pub fn from_f64(tau: f64) -> Self {
        let q = (tau * (1u64 << Self::FRAC_BITS) as f64).round();
        Tau {
            q16: q.clamp(0.0, (1u64 << Self::FRAC_BITS) as f64) as u32,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.q16 as f64 / (1u64 << Self::FRAC_BITS) as f64
    }

    /// True when `tau` has no more than 16 fractional bits, i.e. the integer
    /// comparison is exact.
    pub fn is_exact(tau: f64) -> bool {
        Tau::from_f64(tau).as_f64() == tau
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("k must be finite and >= 0, got {0}")]
    K(f64),
    #[error("tau must lie strictly between 0 and 1, got {0}")]
    Tau(f64),
    #[error("t_win must be positive")]
    Window,
}

/// Tunables of the throttling loop.
#[derive(Clone, Debug, PartialEq)]
pub struct SymphonyParams {
    /// Gain converting a progress gap into a marking probability.
    pub k: f64,
    /// Outpacing-traffic fraction above which `alpha` grows.
    pub tau: Tau,
    pub t_win: SimTime,
    /// Marking is suppressed while `psn_rec` is at or below this value.
    pub n_warmup: u32,
    /// `alpha` is only updated for windows with more packets than this.
    pub n_sample: u32,
    pub hw_mode: HwMode,
}

impl Default for SymphonyParams {
    fn default() -> Self {
        SymphonyParams {
            k: 0.01,
            tau: Tau::from_f64(0.25),
            t_win: SimTime::from_micros(100),
            n_warmup: 100,
            n_sample: 50,
            hw_mode: HwMode::Exact,
        }
    }
}

impl SymphonyParams {
    /// `k = 0` is accepted: it disables marking while keeping the tracker live.
    pub fn validate(&self) -> Result<(), ParamError> {
        if !self.k.is_finite() || self.k < 0.0 {
            return Err(ParamError::K(self.k));
        }
        let tau = self.tau.as_f64();
        if !(tau > 0.0 && tau < 1.0) {
            return Err(ParamError::Tau(tau));
        }
        if self.t_win == SimTime::ZERO {
            return Err(ParamError::Window);
        }
        Ok(())
    }
}

/// Per-job switch state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerJobStateBlock {
    /// Smallest step index believed to be still in progress.
    pub step_min: u32,
    /// Progress reference for `step_min`: max PSN seen over the previous and
    /// the current window.
    pub psn_rec: u32,
    /// Max PSN of `step_min` packets seen in the current window only.
    pub psn_rec_window: u32,
    /// Adaptive aggressiveness, never below 1.
    pub alpha: u32,
    pub cnt_total: u32,
    pub cnt_op: u32,
    pub last_window_start: SimTime,
}

impl Default for PerJobStateBlock {
    fn default() -> Self {
        PerJobStateBlock {
            step_min: 0,
            psn_rec: 0,
            psn_rec_window: 0,
            alpha: 1,
            cnt_total: 0,
            cnt_op: 0,
            last_window_start: SimTime::ZERO,
        }
    }
}

impl PerJobStateBlock {
    pub fn new(now: SimTime) -> Self {
        PerJobStateBlock {
            last_window_start: now,
            ..Default::default()
        }
    }

    /// Block for a job whose current step is unknown, e.g. when tracking is
    /// switched on mid-run. `step_min` starts above every real step, so the
    /// first packet seen pulls it down to that packet's step.
    pub fn unsynchronized(now: SimTime) -> Self {
        PerJobStateBlock {
            step_min: u32::MAX,
            last_window_start: now,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    /// At or behind `step_min`, or not a tracked collective packet.
    Lagging,
    Outpacing,
    /// Ahead of `step_min`, but the lagging step has not progressed far
    /// enough for a stable ratio.
    Warmup,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkDecision {
    pub mark: bool,
    pub delta: f64,
    pub probability: f64,
    pub classified_as: Classification,
}

impl MarkDecision {
    pub const PASS: MarkDecision = MarkDecision {
        mark: false,
        delta: 0.0,
        probability: 0.0,
        classified_as: Classification::Lagging,
    };

    fn no_mark(classified_as: Classification) -> Self {
        MarkDecision {
            classified_as,
            ..Self::PASS
        }
    }
}

/// `alpha * psn / psn_rec`.
pub fn progress_gap(alpha: u32, psn: u32, psn_rec: u32) -> f64 {
    assert!(psn_rec > 0, "progress gap needs a non-zero reference");
    alpha as f64 * psn as f64 / psn_rec as f64
}

/// `min(1, k * delta)`, floored at zero.
pub fn marking_probability(delta: f64, k: f64) -> f64 {
    (k * delta).clamp(0.0, 1.0)
}

/// `cnt_op >= tau * cnt_total` without a division.
pub fn outpacing_check(cnt_op: u32, cnt_total: u32, tau: Tau) -> bool {
    ((cnt_op as u64) << Tau::FRAC_BITS) >= tau.q16 as u64 * cnt_total as u64
}

/// Runs one dequeued packet through the job's state block.
///
/// Traffic counters are classified against `step_min` as it stood before the
/// packet's own state transition. A uniform draw is consumed only for packets
/// classified as outpacing.
pub fn process_packet<R: Uniform01 + ?Sized>(
    state: &mut PerJobStateBlock,
    step: u32,
    psn: u32,
    is_last: bool,
    params: &SymphonyParams,
    rng: &mut R,
) -> MarkDecision {
    state.cnt_total = state.cnt_total.saturating_add(1);
    if step > state.step_min {
        state.cnt_op = state.cnt_op.saturating_add(1);
    }

    if is_last {
        state.step_min = step.saturating_add(1);
        state.psn_rec = 0;
        state.psn_rec_window = 0;
    } else if step < state.step_min {
        state.step_min = step;
        state.psn_rec = psn;
        state.psn_rec_window = psn;
    } else if step == state.step_min {
        state.psn_rec = state.psn_rec.max(psn);
        state.psn_rec_window = state.psn_rec_window.max(psn);
    }

    if step <= state.step_min {
        return MarkDecision::no_mark(Classification::Lagging);
    }
    if state.psn_rec <= params.n_warmup {
        return MarkDecision::no_mark(Classification::Warmup);
    }

    let delta = progress_gap(state.alpha, psn, state.psn_rec);
    let probability = match params.hw_mode {
        HwMode::Exact => marking_probability(delta, params.k),
        HwMode::TableApprox => hw_gap_probability(state.alpha, psn, state.psn_rec, params.k),
    };
    let mark = rng.uniform01() < probability;
    MarkDecision {
        mark,
        delta,
        probability,
        classified_as: Classification::Outpacing,
    }
}

/// End-of-window update: adjust `alpha` (only if the window carried more than
/// `n_sample` packets), clear the counters and roll the PSN reference.
pub fn window_tick(state: &mut PerJobStateBlock, params: &SymphonyParams, now: SimTime) {
    if state.cnt_total > params.n_sample {
        if outpacing_check(state.cnt_op, state.cnt_total, params.tau) {
            state.alpha = state.alpha.saturating_add(1);
        } else {
            state.alpha = state.alpha.saturating_sub(1).max(1);
        }
    }
    state.cnt_total = 0;
    state.cnt_op = 0;
    state.psn_rec = state.psn_rec_window;
    state.psn_rec_window = 0;
    state.last_window_start = now;
}

// ---------------------------------------------------------------------------
// Division-free probability evaluation.
//
// log2 of an integer is its MSB position plus a table entry indexed by the
// next LOG_BITS mantissa bits. The log-domain sum is mapped back through a
// 2^x table. All values are fixed point with LOG_BITS fractional bits.

const LOG_BITS: u32 = 6;
const LOG_ONE: i64 = 1 << LOG_BITS;
/// Output probabilities are binary fractions with this many bits.
const PROB_BITS: u32 = 32;

struct HwTables {
    log2_frac: [i64; 1 << LOG_BITS],
    exp2_frac: [u64; 1 << LOG_BITS],
}

fn hw_tables() -> &'static HwTables {
    static TABLES: OnceLock<HwTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let n = 1usize << LOG_BITS;
        let mut log2_frac = [0i64; 1 << LOG_BITS];
        let mut exp2_frac = [0u64; 1 << LOG_BITS];
        for i in 0..n {
            // centre of the mantissa bucket halves the truncation error
            let m = 1.0 + (i as f64 + 0.5) / n as f64;
            log2_frac[i] = (m.log2() * LOG_ONE as f64).round() as i64;
            exp2_frac[i] = ((i as f64 / n as f64).exp2() * (1u64 << PROB_BITS) as f64).round() as u64;
        }
        HwTables { log2_frac, exp2_frac }
    })
}

/// Fixed-point log2 of a positive integer.
fn log2_fixed(x: u64) -> i64 {
    debug_assert!(x > 0);
    let msb = 63 - x.leading_zeros() as i64;
    let frac_index = if msb >= LOG_BITS as i64 {
        (x >> (msb - LOG_BITS as i64)) & (LOG_ONE as u64 - 1)
    } else {
        (x << (LOG_BITS as i64 - msb)) & (LOG_ONE as u64 - 1)
    };
    let exact_small = msb < LOG_BITS as i64;
    let frac = if exact_small && frac_index == 0 {
        0
    } else {
        hw_tables().log2_frac[frac_index as usize]
    };
    msb * LOG_ONE + frac
}

/// Fixed-point log2 of a positive real, as a control plane would precompute
/// for a constant such as `k`.
fn log2_fixed_f64(x: f64) -> i64 {
    (x.log2() * LOG_ONE as f64).round() as i64
}

/// 2^l for a non-positive fixed-point exponent, as a PROB_BITS fraction.
fn exp2_fixed(l: i64) -> u64 {
    if l >= 0 {
        return 1u64 << PROB_BITS;
    }
    let int = l.div_euclid(LOG_ONE);
    let frac = l.rem_euclid(LOG_ONE) as usize;
    let shift = (-int) as u32;
    if shift >= 64 {
        return 0;
    }
    hw_tables().exp2_frac[frac] >> shift
}

fn q32_to_prob(q: u64) -> f64 {
    (q as f64 / (1u64 << PROB_BITS) as f64).min(1.0)
}

fn hw_gap_probability(alpha: u32, psn: u32, psn_rec: u32, k: f64) -> f64 {
    if k <= 0.0 || psn == 0 {
        return 0.0;
    }
    let l = log2_fixed(alpha.max(1) as u64) + log2_fixed(psn as u64) - log2_fixed(psn_rec as u64) + log2_fixed_f64(k);
    q32_to_prob(exp2_fixed(l))
}

/// Table-approximated `min(1, k * delta)`; `delta` is first quantized to a
/// 16.16 fixed-point value.
pub fn hw_marking_probability(delta: f64, k: f64) -> f64 {
    if delta.is_nan() || delta <= 0.0 || k <= 0.0 {
        return 0.0;
    }
    if k * delta >= 1.0 {
        return 1.0;
    }
    let q = (delta * 65536.0).round();
    if q < 1.0 {
        return 0.0;
    }
    let l = log2_fixed(q as u64) - 16 * LOG_ONE + log2_fixed_f64(k);
    q32_to_prob(exp2_fixed(l))
}

// ---------------------------------------------------------------------------

/// Isolated per-job state slots, indexed by job id.
#[derive(Clone, Debug, Default)]
pub struct JobTable {
    slots: Vec<Option<PerJobStateBlock>>,
    registered: usize,
}

impl JobTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, job: JobId, now: SimTime) {
        self.register_block(job, PerJobStateBlock::new(now));
    }

    pub fn register_block(&mut self, job: JobId, block: PerJobStateBlock) {
        let idx = job as usize;
        if idx >= self.slots.len() {
            self.slots.resize(idx + 1, None);
        }
        if self.slots[idx].is_none() {
            self.registered += 1;
        }
        self.slots[idx] = Some(block);
    }

    pub fn unregister(&mut self, job: JobId) {
        if let Some(slot) = self.slots.get_mut(job as usize) {
            if slot.take().is_some() {
                self.registered -= 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.registered
    }

    pub fn is_empty(&self) -> bool {
        self.registered == 0
    }

    pub fn get(&self, job: JobId) -> Option<&PerJobStateBlock> {
        self.slots.get(job as usize).and_then(|s| s.as_ref())
    }

    pub fn get_mut(&mut self, job: JobId) -> Option<&mut PerJobStateBlock> {
        self.slots.get_mut(job as usize).and_then(|s| s.as_mut())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (JobId, &mut PerJobStateBlock)> {
        self.slots
            .iter_mut()
            .enumerate()
            .filter_map(|(i, s)| s.as_mut().map(|b| (i as JobId, b)))
    }

    /// Bytes of state held for registered jobs.
    pub fn state_bytes(&self) -> usize {
        self.registered * std::mem::size_of::<PerJobStateBlock>()
    }

    /// Processes a packet for `job`. Packets of unregistered jobs pass through
    /// untouched and unmarked.
    pub fn process<R: Uniform01 + ?Sized>(
        &mut self,
        job: JobId,
        step: u32,
        psn: u32,
        is_last: bool,
        params: &SymphonyParams,
        rng: &mut R,
    ) -> MarkDecision {
        match self.get_mut(job) {
            Some(block) => process_packet(block, step, psn, is_last, params, rng),
            None => MarkDecision::PASS,
        }
    }

    pub fn tick_all(&mut self, params: &SymphonyParams, now: SimTime) {
        for (_, block) in self.iter_mut() {
            window_tick(block, params, now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn never() -> impl FnMut() -> f64 {
        || 0.999_999
    }

    fn params() -> SymphonyParams {
        SymphonyParams::default()
    }

    #[test]
    fn last_packet_advances_step_min() {
        let mut s = PerJobStateBlock {
            step_min: 5,
            psn_rec: 300,
            ..Default::default()
        };
        let d = process_packet(&mut s, 5, 512, true, &params(), &mut never());
        assert_eq!(s.step_min, 6);
        assert_eq!(s.psn_rec, 0);
        assert!(!d.mark);
    }

    #[test]
    fn older_step_triggers_lazy_correction() {
        let mut s = PerJobStateBlock {
            step_min: 5,
            psn_rec: 900,
            ..Default::default()
        };
        let d = process_packet(&mut s, 3, 77, false, &params(), &mut never());
        assert_eq!((s.step_min, s.psn_rec), (3, 77));
        assert!(!d.mark);
        assert_eq!(d.classified_as, Classification::Lagging);
    }

    #[test]
    fn outpacing_packet_gap_and_probability() {
        let mut s = PerJobStateBlock {
            step_min: 5,
            psn_rec: 200,
            alpha: 2,
            ..Default::default()
        };
        let d = process_packet(&mut s, 6, 400, false, &params(), &mut never());
        assert_eq!(d.classified_as, Classification::Outpacing);
        assert_eq!(d.delta, 4.0);
        assert!((d.probability - 0.04).abs() < 1e-12);
    }

    #[test]
    fn warmup_guard_blocks_marking() {
        let mut s = PerJobStateBlock {
            step_min: 5,
            psn_rec: 50,
            ..Default::default()
        };
        let d = process_packet(&mut s, 6, 400, false, &params(), &mut || 0.0);
        assert_eq!(d.classified_as, Classification::Warmup);
        assert!(!d.mark);
    }

    #[test]
    fn counters_use_pre_update_step_min() {
        let mut s = PerJobStateBlock {
            step_min: 5,
            ..Default::default()
        };
        // A LAST of step 6 would move step_min to 7, but it is counted as
        // outpacing against the old step_min of 5.
        process_packet(&mut s, 6, 10, true, &params(), &mut never());
        assert_eq!((s.cnt_total, s.cnt_op), (1, 1));
        process_packet(&mut s, 7, 10, false, &params(), &mut never());
        assert_eq!((s.cnt_total, s.cnt_op), (2, 1));
    }

    #[test]
    fn gap_examples() {
        assert_eq!(progress_gap(1, 321, 321), 1.0);
        assert_eq!(progress_gap(3, 100, 50), 6.0);
    }

    #[test]
    #[should_panic]
    fn gap_rejects_zero_reference() {
        progress_gap(1, 1, 0);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(marking_probability(0.0, 0.01), 0.0);
        assert_eq!(marking_probability(200.0, 0.01), 1.0);
        assert!((marking_probability(4.0, 0.01) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn outpacing_check_examples() {
        let tau = Tau::from_f64(0.25);
        assert!(outpacing_check(30, 100, tau));
        assert!(outpacing_check(25, 100, tau));
        assert!(!outpacing_check(24, 100, tau));
    }

    #[test]
    fn window_tick_examples() {
        let p = params();
        let mut s = PerJobStateBlock {
            cnt_op: 300,
            cnt_total: 1000,
            ..Default::default()
        };
        window_tick(&mut s, &p, SimTime::from_micros(100));
        assert_eq!(s.alpha, 2);
        assert_eq!((s.cnt_op, s.cnt_total), (0, 0));
        assert_eq!(s.last_window_start, SimTime::from_micros(100));

        let mut s = PerJobStateBlock {
            cnt_op: 100,
            cnt_total: 1000,
            ..Default::default()
        };
        window_tick(&mut s, &p, SimTime::from_micros(100));
        assert_eq!(s.alpha, 1);

        let mut s = PerJobStateBlock {
            alpha: 4,
            cnt_op: 10,
            cnt_total: 10,
            ..Default::default()
        };
        window_tick(&mut s, &p, SimTime::from_micros(100));
        assert_eq!(s.alpha, 4, "sample guard");
    }

    #[test]
    fn sustained_outpacing_raises_alpha_by_one_per_window() {
        let p = params();
        let mut s = PerJobStateBlock::default();
        for w in 1..=10u64 {
            s.cnt_total = 1000;
            s.cnt_op = 1000;
            window_tick(&mut s, &p, SimTime::from_micros(100 * w));
        }
        assert_eq!(s.alpha, 11);
    }

    #[test]
    fn psn_reference_rolls_over_two_windows() {
        let p = params();
        let mut s = PerJobStateBlock {
            step_min: 2,
            ..Default::default()
        };
        process_packet(&mut s, 2, 300, false, &p, &mut never());
        assert_eq!(s.psn_rec, 300);
        window_tick(&mut s, &p, SimTime::from_micros(100));
        // reference keeps the previous window's max
        assert_eq!((s.psn_rec, s.psn_rec_window), (300, 0));
        process_packet(&mut s, 2, 120, false, &p, &mut never());
        assert_eq!((s.psn_rec, s.psn_rec_window), (300, 120));
        window_tick(&mut s, &p, SimTime::from_micros(200));
        assert_eq!(s.psn_rec, 120);
        window_tick(&mut s, &p, SimTime::from_micros(300));
        assert_eq!(s.psn_rec, 0);
    }

    #[test]
    fn duplicate_non_last_packet_is_idempotent() {
        let p = params();
        let mut s = PerJobStateBlock {
            step_min: 4,
            psn_rec: 150,
            ..Default::default()
        };
        for (step, psn) in [(4, 180), (3, 40), (6, 500)] {
            process_packet(&mut s, step, psn, false, &p, &mut never());
            let snap = (s.step_min, s.psn_rec);
            process_packet(&mut s, step, psn, false, &p, &mut never());
            assert_eq!(snap, (s.step_min, s.psn_rec));
        }
    }

    #[test]
    fn zero_gain_never_marks() {
        let p = SymphonyParams { k: 0.0, ..params() };
        let mut s = PerJobStateBlock {
            step_min: 1,
            psn_rec: 1000,
            alpha: 50,
            ..Default::default()
        };
        let d = process_packet(&mut s, 9, 5000, false, &p, &mut || 0.0);
        assert_eq!(d.probability, 0.0);
        assert!(!d.mark);
    }

    #[test]
    fn hw_probability_edges() {
        assert_eq!(hw_marking_probability(0.0, 0.01), 0.0);
        assert_eq!(hw_marking_probability(100.0, 0.01), 1.0);
        assert_eq!(hw_marking_probability(1e6, 0.01), 1.0);
    }

    #[test]
    fn hw_probability_relative_error_sweep() {
        let k = 0.01;
        let mut worst: f64 = 0.0;
        let mut delta = 1e-3 / k;
        while k * delta < 1.0 {
            let exact = marking_probability(delta, k);
            let approx = hw_marking_probability(delta, k);
            worst = worst.max((approx - exact).abs() / exact);
            delta *= 1.01;
        }
        for i in 0..20 {
            let delta = (1u64 << i) as f64 / k * 1e-3;
            if k * delta >= 1.0 {
                assert_eq!(hw_marking_probability(delta, k), 1.0);
                continue;
            }
            let exact = marking_probability(delta, k);
            let approx = hw_marking_probability(delta, k);
            worst = worst.max((approx - exact).abs() / exact);
        }
        assert!(worst <= 0.25, "worst relative error {worst}");
    }

    #[test]
    fn hw_gap_probability_tracks_exact() {
        let mut worst: f64 = 0.0;
        for alpha in [1u32, 2, 3, 7, 20] {
            for psn in [101u32, 150, 999, 4096, 8191] {
                for psn_rec in [101u32, 333, 1024, 8000] {
                    let exact = marking_probability(progress_gap(alpha, psn, psn_rec), 0.01);
                    let approx = hw_gap_probability(alpha, psn, psn_rec, 0.01);
                    if exact >= 1.0 {
                        assert_eq!(approx, 1.0);
                    } else {
                        worst = worst.max((approx - exact).abs() / exact);
                    }
                }
            }
        }
        assert!(worst <= 0.25, "worst relative error {worst}");
    }

    #[test]
    fn unknown_job_passes_through() {
        let mut t = JobTable::new();
        t.register(3, SimTime::ZERO);
        let d = t.process(9, 7, 700, false, &params(), &mut || 0.0);
        assert_eq!(d, MarkDecision::PASS);
        assert_eq!(d.classified_as, Classification::Lagging);
    }

    #[test]
    fn sixteen_k_jobs_fit_in_hundreds_of_kb() {
        let mut t = JobTable::new();
        for j in 0..16_384 {
            t.register(j, SimTime::ZERO);
        }
        assert_eq!(t.len(), 16_384);
        assert!(t.state_bytes() <= 512 * 1024, "{} bytes", t.state_bytes());
    }

    #[test]
    fn param_validation() {
        assert!(params().validate().is_ok());
        let bad = SymphonyParams {
            tau: Tau::from_f64(1.0),
            ..params()
        };
        assert!(bad.validate().is_err());
        let bad = SymphonyParams { k: -1.0, ..params() };
        assert_eq!(bad.validate(), Err(ParamError::K(-1.0)));
        assert!(Tau::is_exact(0.25));
        assert!(!Tau::is_exact(0.1));
    }
}
