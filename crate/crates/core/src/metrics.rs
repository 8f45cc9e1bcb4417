//! Evaluation metrics: step overlap, step completion rate, CCT/JCT,
//! final-step span, mark accounting and the CSV schemas they are stored in.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;
use crate::symphony::JobId;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("job {job} has not completed {what}")]
    Incomplete { job: JobId, what: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    StepOverlap,
    StepCompletionRate,
    ThroughputGbps,
}

/// Time series with strictly increasing sample times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub kind: MetricKind,
    pub job_id: JobId,
    pub samples: Vec<(SimTime, f64)>,
}

impl MetricSeries {
    pub fn new(kind: MetricKind, job_id: JobId) -> Self {
        MetricSeries {
            kind,
            job_id,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, t: SimTime, v: f64) {
        if let Some(&(last, _)) = self.samples.last() {
            assert!(t > last, "sample times must be strictly increasing");
        }
        self.samples.push((t, v));
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }
}

/// Live count of distinct steps with packets in the network.
#[derive(Clone, Debug, Default)]
pub struct OverlapTracker {
    in_flight: Vec<u32>,
    distinct: u32,
}

impl OverlapTracker {
    pub fn new(steps: u32) -> Self {
        OverlapTracker {
            in_flight: vec![0; steps as usize],
            distinct: 0,
        }
    }

    #[inline]
    pub fn enter(&mut self, step: u32) {
        let c = &mut self.in_flight[step as usize];
        if *c == 0 {
            self.distinct += 1;
        }
        *c += 1;
    }

    #[inline]
    pub fn leave(&mut self, step: u32) {
        let c = &mut self.in_flight[step as usize];
        debug_assert!(*c > 0);
        *c -= 1;
        if *c == 0 {
            self.distinct -= 1;
        }
    }

    pub fn distinct(&self) -> u32 {
        self.distinct
    }

    pub fn in_flight(&self, step: u32) -> u32 {
        self.in_flight[step as usize]
    }
}

/// A packet entering (`+1`) or leaving (`-1`) the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketLogEntry {
    pub t: SimTime,
    pub job_id: JobId,
    pub step: u32,
    pub delta: i8,
}

/// Rebuilds the overlap series of `job` from a packet log, sampling at
/// `interval, 2*interval, ...` up to `t_end`. A sample at time `t` reflects
/// every log entry with time `<= t`.
pub fn step_overlap(log: &[PacketLogEntry], job: JobId, interval: SimTime, t_end: SimTime) -> MetricSeries {
    let mut counts: std::collections::BTreeMap<u32, i64> = Default::default();
    let mut series = MetricSeries::new(MetricKind::StepOverlap, job);
    let mut entries = log.iter().filter(|e| e.job_id == job).peekable();
    let mut t = interval;
    while t <= t_end {
        while let Some(e) = entries.peek() {
            if e.t > t {
                break;
            }
            let c = counts.entry(e.step).or_insert(0);
            *c += e.delta as i64;
            if *c == 0 {
                counts.remove(&e.step);
            }
            entries.next();
        }
        series.push(t, counts.len() as f64);
        t += interval;
    }
    series
}

/// `1 / (t_i - t_{i-1})`, divided by the theoretical per-step rate.
pub fn step_completion_rate(completions: &[SimTime], theoretical_step: SimTime, job: JobId) -> MetricSeries {
    let mut s = MetricSeries::new(MetricKind::StepCompletionRate, job);
    for w in completions.windows(2) {
        let dt = w[1].0.saturating_sub(w[0].0);
        if dt == 0 {
            continue;
        }
        s.push(w[1], theoretical_step.0 as f64 / dt as f64);
    }
    s
}

/// Spread between the fastest and slowest flow of a step.
pub fn final_step_span(flow_completions: &[SimTime]) -> SimTime {
    match (flow_completions.iter().min(), flow_completions.iter().max()) {
        (Some(a), Some(b)) => *b - *a,
        _ => SimTime::ZERO,
    }
}

/// Per-job timing record filled in by the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobTelemetry {
    pub job_id: JobId,
    pub arrival: SimTime,
    pub start: Option<SimTime>,
    pub passes: u32,
    pub steps_per_pass: u32,
    pub step_first_start: Vec<Option<SimTime>>,
    pub step_complete: Vec<Option<SimTime>>,
    pub final_step_flows: Vec<SimTime>,
    pub overlap: MetricSeries,
    pub throughput: MetricSeries,
    pub red_marks: u64,
    pub symphony_marks: u64,
    pub ce_deliveries: u64,
    pub delivered_packets: u64,
    pub retransmissions: u64,
}

impl JobTelemetry {
    pub fn new(job_id: JobId, arrival: SimTime, passes: u32, steps_per_pass: u32) -> Self {
        let total = (passes * steps_per_pass) as usize;
        JobTelemetry {
            job_id,
            arrival,
            start: None,
            passes,
            steps_per_pass,
            step_first_start: vec![None; total],
            step_complete: vec![None; total],
            final_step_flows: Vec::new(),
            overlap: MetricSeries::new(MetricKind::StepOverlap, job_id),
            throughput: MetricSeries::new(MetricKind::ThroughputGbps, job_id),
            red_marks: 0,
            symphony_marks: 0,
            ce_deliveries: 0,
            delivered_packets: 0,
            retransmissions: 0,
        }
    }

    pub fn total_steps(&self) -> u32 {
        self.passes * self.steps_per_pass
    }

    pub fn is_complete(&self) -> bool {
        self.step_complete.last().is_some_and(Option::is_some)
    }

    fn incomplete(&self, what: String) -> MetricsError {
        MetricsError::Incomplete { job: self.job_id, what }
    }

    /// Last delivery of the pass minus the earliest flow start of its first
    /// step.
    pub fn collective_completion_time(&self, pass: u32) -> Result<SimTime, MetricsError> {
        let first = (pass * self.steps_per_pass) as usize;
        let last = first + self.steps_per_pass as usize - 1;
        let what = || format!("pass {pass}");
        let start = self
            .step_first_start
            .get(first)
            .copied()
            .flatten()
            .ok_or_else(|| self.incomplete(what()))?;
        let end = self
            .step_complete
            .get(last)
            .copied()
            .flatten()
            .ok_or_else(|| self.incomplete(what()))?;
        Ok(end - start)
    }

    /// Mean per-pass CCT.
    pub fn mean_cct(&self) -> Result<SimTime, MetricsError> {
        let mut sum = 0u64;
        for p in 0..self.passes {
            sum += self.collective_completion_time(p)?.0;
        }
        Ok(SimTime(sum / self.passes as u64))
    }

    /// Last delivery minus job start.
    pub fn job_completion_time(&self) -> Result<SimTime, MetricsError> {
        let end = self
            .step_complete
            .last()
            .copied()
            .flatten()
            .ok_or_else(|| self.incomplete("all passes".into()))?;
        let start = self.start.ok_or_else(|| self.incomplete("admission".into()))?;
        Ok(end - start)
    }

    pub fn final_step_span(&self) -> SimTime {
        final_step_span(&self.final_step_flows)
    }

    /// Completion times of the steps completed so far, in step order.
    pub fn completions(&self) -> Vec<SimTime> {
        self.step_complete.iter().map_while(|c| *c).collect()
    }

    pub fn max_overlap(&self) -> u32 {
        self.overlap.max() as u32
    }

    pub fn summary_row(&self, run_id: u32) -> SummaryRow {
        SummaryRow {
            run_id,
            job_id: self.job_id,
            cct_ns: self.mean_cct().ok().map(|t| t.0),
            jct_ns: self.job_completion_time().ok().map(|t| t.0),
            max_overlap: self.max_overlap(),
            final_step_span_ns: if self.is_complete() {
                Some(self.final_step_span().0)
            } else {
                None
            },
            red_marks: self.red_marks,
            symphony_marks: self.symphony_marks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub run_id: u32,
    pub job_id: JobId,
    pub t_ns: u64,
    pub overlap: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRow {
    pub run_id: u32,
    pub job_id: JobId,
    pub pass: u32,
    pub step: u32,
    pub complete_t_ns: u64,
}

/// Timing fields are empty for jobs that did not finish.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: u32,
    pub job_id: JobId,
    pub cct_ns: Option<u64>,
    pub jct_ns: Option<u64>,
    pub max_overlap: u32,
    pub final_step_span_ns: Option<u64>,
    pub red_marks: u64,
    pub symphony_marks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub t_ns: u64,
    pub switch_id: u32,
    pub job_id: JobId,
    pub step: u32,
    pub psn: u32,
    pub step_min: u32,
    pub psn_rec: u32,
    pub alpha: u32,
    pub delta: f64,
    pub p: f64,
    pub marked: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub run_id: u32,
    pub job_id: JobId,
    pub t_ns: u64,
    pub gbps: f64,
}

pub fn write_csv<W: Write, R: Serialize>(w: W, rows: &[R]) -> Result<(), MetricsError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<Rd: Read, R: for<'de> Deserialize<'de>>(r: Rd) -> Result<Vec<R>, MetricsError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Linear-interpolated percentile, `q` in `[0, 1]`. `None` for no data.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 0.5)
}

/// Empirical CDF points `(value, fraction <= value)`.
pub fn cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(t: u64, step: u32, delta: i8) -> PacketLogEntry {
        PacketLogEntry {
            t: SimTime(t),
            job_id: 0,
            step,
            delta,
        }
    }

    #[test]
    fn overlap_counts_distinct_steps() {
        let mut tr = OverlapTracker::new(8);
        for s in [4, 5, 5, 6] {
            tr.enter(s);
        }
        assert_eq!(tr.distinct(), 3);
        tr.leave(5);
        assert_eq!(tr.distinct(), 3);
        tr.leave(5);
        tr.leave(4);
        tr.leave(6);
        assert_eq!(tr.distinct(), 0);
    }

    #[test]
    fn overlap_from_log() {
        let log = vec![entry(1, 4, 1), entry(2, 5, 1), entry(3, 6, 1), entry(15, 4, -1)];
        let s = step_overlap(&log, 0, SimTime(10), SimTime(30));
        assert_eq!(
            s.samples,
            vec![(SimTime(10), 3.0), (SimTime(20), 2.0), (SimTime(30), 2.0)]
        );
        let idle = step_overlap(&log, 1, SimTime(10), SimTime(20));
        assert_eq!(idle.max(), 0.0);
    }

    #[test]
    fn completion_rate_normalization() {
        let step = SimTime::from_micros(800);
        let ts: Vec<SimTime> = (0..4).map(|i| SimTime::from_micros(800 * i)).collect();
        let s = step_completion_rate(&ts, step, 0);
        assert!(s.values().all(|v| (v - 1.0).abs() < 1e-12));
        let ts = vec![SimTime::ZERO, SimTime::from_micros(1600)];
        assert_eq!(step_completion_rate(&ts, step, 0).samples[0].1, 0.5);
    }

    #[test]
    fn span_examples() {
        let t = |ms| SimTime::from_millis(ms);
        assert_eq!(final_step_span(&[t(10), t(12), t(15)]), t(5));
        assert_eq!(final_step_span(&[t(10)]), SimTime::ZERO);
    }

    #[test]
    fn cct_and_jct() {
        let mut j = JobTelemetry::new(0, SimTime::ZERO, 2, 2);
        j.start = Some(SimTime::ZERO);
        assert!(j.job_completion_time().is_err());
        j.step_first_start = vec![Some(SimTime(0)), Some(SimTime(5)), Some(SimTime(10)), Some(SimTime(15))];
        j.step_complete = vec![
            Some(SimTime(6)),
            Some(SimTime(12)),
            Some(SimTime(18)),
            Some(SimTime(25)),
        ];
        assert_eq!(j.collective_completion_time(0).unwrap(), SimTime(12));
        assert_eq!(j.collective_completion_time(1).unwrap(), SimTime(15));
        assert_eq!(j.job_completion_time().unwrap(), SimTime(25));
        assert!(j.job_completion_time().unwrap().0 >= 2 * j.collective_completion_time(0).unwrap().0);
    }

    #[test]
    fn percentiles_and_cdf() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&v, 1.0), Some(4.0));
        assert_eq!(median(&[]), None);
        assert_eq!(cdf(&[1.0, 1.0, 2.0]), vec![(1.0, 2.0 / 3.0), (2.0, 1.0)]);
    }

    #[test]
    fn summary_csv_round_trip_with_missing_fields() {
        let rows = vec![SummaryRow {
            run_id: 0,
            job_id: 1,
            cct_ns: None,
            jct_ns: Some(5),
            max_overlap: 3,
            final_step_span_ns: None,
            red_marks: 7,
            symphony_marks: 0,
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("run_id,job_id,cct_ns,jct_ns,max_overlap,final_step_span_ns,red_marks,symphony_marks\n")
        );
        let back: Vec<SummaryRow> = read_csv(&buf[..]).unwrap();
        assert_eq!(back, rows);
    }
}
