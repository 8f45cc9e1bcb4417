//! End-to-end properties of the packet-level runtime on small fabrics.

use symphony_sim::config::ScenarioConfig;
use symphony_sim::metrics::step_overlap;
use symphony_sim::sim::SimTime;
use symphony_sim::simulation::{SimSetup, Simulation};
use symphony_sim::workload::theoretical_cct;

fn setup(text: &str) -> SimSetup {
    ScenarioConfig::from_toml_str(text).unwrap().to_setup(1).unwrap()
}

const RING16: &str = "[[workload.jobs]]\nranks = 16\nrings = 2\nchunk_bytes = 131072\npasses = 3\n";

#[test]
fn lossless_run_delivers_every_injected_packet() {
    let out = Simulation::new(setup(RING16), 4).unwrap().run();
    assert!(!out.truncated);
    assert_eq!(out.packets_injected, out.packets_delivered);
    let j = &out.jobs[0];
    assert!(j.is_complete());
    assert!(j.job_completion_time().unwrap().0 >= j.collective_completion_time(0).unwrap().0 * 3 / 2);
}

#[test]
fn ce_deliveries_never_exceed_attributed_marks() {
    let out = Simulation::new(setup(RING16), 2).unwrap().run();
    let j = &out.jobs[0];
    assert!(j.ce_deliveries <= j.red_marks + j.symphony_marks);
    assert!(j.red_marks + j.symphony_marks > 0);
}

#[test]
fn overlap_series_is_a_function_of_the_packet_log() {
    let mut s = setup(RING16);
    s.record.packet_log = true;
    let interval = s.sample_interval;
    let out = Simulation::new(s, 7).unwrap().run();
    let job = &out.jobs[0];
    let rebuilt = step_overlap(&out.packet_log, 0, interval, out.end_time);
    let sampled: Vec<_> = job
        .overlap
        .samples
        .iter()
        .filter(|(t, _)| t.0 % interval.0 == 0)
        .collect();
    assert!(sampled.len() > 10);
    for (t, v) in sampled {
        let r = rebuilt.samples.iter().find(|(rt, _)| rt == t).unwrap();
        assert_eq!(r.1, *v, "at {t:?}");
    }
}

#[test]
fn engine_removed_matches_engine_never_configured() {
    let mut on = setup(RING16);
    on.record.marks = true;
    let mut off = on.clone();
    off.symphony.enabled = false;
    let mut sim = Simulation::new(on, 11).unwrap();
    sim.remove_symphony();
    let a = sim.run();
    let b = Simulation::new(off, 11).unwrap().run();
    assert_eq!(a.marks, b.marks);
    assert_eq!(a.jobs[0].step_complete, b.jobs[0].step_complete);
}

#[test]
fn single_ring_tracks_the_lockstep_bound() {
    let s = setup("[symphony]\nenabled = false\n[[workload.jobs]]\nranks = 8\nrings = 1\nchunk_bytes = 262144\n");
    let out = Simulation::new(s, 1).unwrap().run();
    let j = &out.jobs[0];
    let theo = theoretical_cct(8, 262144, 10e9);
    let cct = j.collective_completion_time(0).unwrap();
    assert!(cct >= theo);
    assert!(cct.as_secs_f64() <= theo.as_secs_f64() * 1.05, "{cct:?} vs {theo:?}");
    assert!(j.max_overlap() <= 2);
}

#[test]
fn late_activation_leaves_the_prefix_untouched() {
    let mut late = setup(RING16);
    late.record.marks = true;
    let mut base = late.clone();
    base.symphony.enabled = false;
    late.symphony.activation = Some(SimTime::from_millis(1));
    let a = Simulation::new(late, 3).unwrap().run();
    let b = Simulation::new(base, 3).unwrap().run();
    let cut = SimTime::from_millis(1);
    let pre =
        |m: &Vec<symphony_sim::simulation::MarkRecord>| m.iter().filter(|r| r.t < cut).cloned().collect::<Vec<_>>();
    assert_eq!(pre(&a.marks), pre(&b.marks));
    assert!(a.marks.iter().all(|m| m.t >= cut || !m.symphony));
}

#[test]
fn priority_arm_completes_steps_only_after_their_last_delivery() {
    // strict priority reorders packets within a flow when step_min moves
    let mut s = setup(&format!("[fabric]\nscheduling = \"pq-baseline\"\n{RING16}"));
    s.record.packet_log = true;
    let out = Simulation::new(s, 3).unwrap().run();
    assert!(!out.truncated);
    assert_eq!(out.packets_injected, out.packets_delivered);
    let j = &out.jobs[0];
    assert!(j.is_complete());
    let mut last_delivery = vec![SimTime::ZERO; j.step_complete.len()];
    for e in out.packet_log.iter().filter(|e| e.delta < 0) {
        let t = &mut last_delivery[e.step as usize];
        *t = (*t).max(e.t);
    }
    for (step, (done, last)) in j.step_complete.iter().zip(&last_delivery).enumerate() {
        assert!(
            done.unwrap() >= *last,
            "step {step} completed at {done:?} before its last delivery {last:?}"
        );
    }
}
