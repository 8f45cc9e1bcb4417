//! Discrete-event core: virtual time, an ordered event queue and seeded
//! random streams.
//!
//! Time is kept in integer nanoseconds. Events that fire at the same instant
//! are dispatched in insertion order, so a run is a pure function of its
//! configuration and seed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Virtual time in nanoseconds since the start of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    /// Rounds to the nearest nanosecond; negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs.is_nan() || secs <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((secs * 1e9).round() as u64)
    }

    pub fn from_micros_f64(us: f64) -> Self {
        Self::from_secs_f64(us * 1e-6)
    }

    pub fn from_millis_f64(ms: f64) -> Self {
        Self::from_secs_f64(ms * 1e-3)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 * 1e-3
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 * 1e-6
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }

    /// Time to serialize `bytes` onto a link of `rate_bps`, rounded to the
    /// nearest nanosecond (never zero for a non-empty packet).
    pub fn serialization(bytes: u64, rate_bps: f64) -> SimTime {
        let ns = (bytes as f64 * 8.0 * 1e9 / rate_bps).round() as u64;
        SimTime(ns.max(1))
    }
}

/// Saturates at `SimTime::MAX`, which stands for "never".
impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 = self.0.saturating_add(rhs.0);
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 >= 1_000_000 {
            write!(f, "{:.3}ms", self.as_millis_f64())
        } else if self.0 >= 1_000 {
            write!(f, "{:.3}us", self.as_micros_f64())
        } else {
            write!(f, "{}ns", self.0)
        }
    }
}

/// Identifier returned by [`EventQueue::schedule`]; equal to the tie-break
/// sequence number of the event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.fire_at.cmp(&self.fire_at).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<E: Clone> Clone for Entry<E> {
    fn clone(&self) -> Self {
        Entry {
            fire_at: self.fire_at,
            seq: self.seq,
            event: self.event.clone(),
        }
    }
}

/// Pending-event set with a virtual clock.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    next_seq: u64,
    now: SimTime,
    dispatched: u64,
}

impl<E: Clone> Clone for EventQueue<E> {
    fn clone(&self) -> Self {
        EventQueue {
            heap: self.heap.clone(),
            next_seq: self.next_seq,
            now: self.now,
            dispatched: self.dispatched,
        }
    }
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::with_capacity(1024),
            next_seq: 0,
            now: SimTime::ZERO,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Total number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.fire_at)
    }

    /// Schedules `event` at `fire_at`.
    ///
    /// Panics if `fire_at` lies in the past: the caller has broken the
    /// causality contract and the run cannot continue meaningfully.
    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> EventId {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: fire_at={} now={}",
            fire_at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { fire_at, seq, event });
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventId {
        let at = self.now + delay;
        self.schedule(at, event)
    }

    /// Pops the next event if it fires at or before `t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, EventId, E)> {
        match self.heap.peek() {
            Some(e) if e.fire_at <= t_end => {}
            _ => return None,
        }
        let Entry { fire_at, seq, event } = self.heap.pop().expect("peeked");
        debug_assert!(fire_at >= self.now);
        self.now = fire_at;
        self.dispatched += 1;
        Some((fire_at, EventId(seq), event))
    }

    /// Moves the clock forward to `t` without dispatching anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Dispatches every event with `fire_at <= t_end` through `handler`, then
    /// advances the clock to `t_end`. Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut EventQueue<E>, SimTime, EventId, E),
    {
        let mut count = 0;
        while let Some((at, id, ev)) = self.pop_until(t_end) {
            handler(self, at, id, ev);
            count += 1;
        }
        self.advance_to(t_end);
        count
    }
}

/// Anything that can produce uniform draws on `[0, 1)`.
pub trait Uniform01 {
    fn uniform01(&mut self) -> f64;
}

impl<F: FnMut() -> f64> Uniform01 for F {
    fn uniform01(&mut self) -> f64 {
        self()
    }
}

/// A seeded, platform-independent random stream.
#[derive(Clone, Debug)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Sub-stream `name` of the generator seeded with `seed`. Streams with
    /// different names never share draws, so adding a consumer leaves the
    /// sequences of the others untouched.
    pub fn stream(seed: u64, name: &str) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(fnv1a(name.as_bytes()));
        SimRng { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }

    /// Exponentially distributed draw with the given mean.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        let u = self.uniform01();
        -mean * (1.0 - u).ln()
    }
}

impl Uniform01 for SimRng {
    fn uniform01(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }
}

/// Convenience wrapper matching the free-function form used by callers that
/// hold a `SimRng` directly.
pub fn uniform01(rng: &mut SimRng) -> f64 {
    rng.uniform01()
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_dispatch_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), 'a');
        q.schedule(SimTime(5), 'b');
        let mut seen = Vec::new();
        q.run_until(SimTime(10), |_, _, _, e| seen.push(e));
        assert_eq!(seen, vec!['a', 'b']);
    }

    #[test]
    fn event_at_now_runs_before_clock_moves() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(0), 1u32);
        q.schedule(SimTime(7), 2u32);
        let mut times = Vec::new();
        q.run_until(SimTime(100), |q, t, _, e| {
            times.push((t, e));
            if e == 1 {
                // scheduled "now" from inside a handler
                q.schedule(q.now(), 3);
            }
        });
        assert_eq!(times, vec![(SimTime(0), 1), (SimTime(0), 3), (SimTime(7), 2)]);
    }

    #[test]
    fn empty_queue_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        let n = q.run_until(SimTime::from_millis(1000), |_, _, _, _| {});
        assert_eq!(n, 0);
        assert_eq!(q.now(), SimTime::from_millis(1000));
    }

    #[test]
    fn run_until_stops_at_horizon() {
        let mut q = EventQueue::new();
        for us in [1, 2, 3] {
            q.schedule(SimTime::from_micros(us), us);
        }
        let n = q.run_until(SimTime::from_micros(2), |_, _, _, _| {});
        assert_eq!(n, 2);
        assert_eq!(q.len(), 1);
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn scheduling_in_the_past_aborts() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), ());
        q.run_until(SimTime(10), |_, _, _, _| {});
        q.schedule(SimTime(3), ());
    }

    #[test]
    fn dispatch_order_matches_sort_oracle() {
        let mut rng = SimRng::new(9);
        let mut q = EventQueue::new();
        let mut expected = Vec::new();
        for i in 0..1_000_000u64 {
            let t = SimTime(rng.below(50_000));
            let id = q.schedule(t, i);
            expected.push((t, id.0, i));
        }
        expected.sort();
        let mut got = Vec::with_capacity(expected.len());
        q.run_until(SimTime::MAX, |_, t, id, e| got.push((t, id.0, e)));
        assert_eq!(got, expected);
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = SimRng::new(42);
        let mut b = SimRng::new(42);
        let pa = (a.uniform01(), a.uniform01());
        let pb = (b.uniform01(), b.uniform01());
        assert_eq!(pa, pb);
    }

    #[test]
    fn uniform_mean_is_one_half() {
        let mut rng = SimRng::new(7);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rng.uniform01()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn named_streams_are_uncorrelated() {
        let mut a = SimRng::stream(1, "marking");
        let mut b = SimRng::stream(1, "ecmp");
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.uniform01()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.uniform01()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            cov += (x - mx) * (y - my);
            vx += (x - mx) * (x - mx);
            vy += (y - my) * (y - my);
        }
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.05, "correlation {r}");
    }

    #[test]
    fn adding_a_stream_does_not_perturb_others() {
        let mut a1 = SimRng::stream(5, "red");
        let first: Vec<u64> = (0..8).map(|_| a1.next_u64()).collect();
        let mut other = SimRng::stream(5, "faults");
        let _ = other.next_u64();
        let mut a2 = SimRng::stream(5, "red");
        let second: Vec<u64> = (0..8).map(|_| a2.next_u64()).collect();
        assert_eq!(first, second);
    }
}
