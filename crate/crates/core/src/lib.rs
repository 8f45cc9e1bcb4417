//! Packet-level discrete-event simulator of ring collectives over leaf-spine
//! fabrics, with switch-side progress tracking that throttles flows running
//! ahead of their collective's lagging step.
//!
//! Layering, bottom up: [`sim`] (clock, event queue, seeded randomness),
//! [`fabric`] and [`transport`] (network and hosts), [`symphony`] (the
//! per-job tracking and marking state machine), [`workload`] (ring job
//! generation), [`simulation`] (the runtime tying them together),
//! [`metrics`], [`config`] and [`experiment`] (scenario files, seed sweeps and
//! CSV output).

pub mod config;
pub mod experiment;
pub mod fabric;
pub mod metrics;
pub mod sim;
pub mod simulation;
pub mod symphony;
pub mod transport;
pub mod workload;
