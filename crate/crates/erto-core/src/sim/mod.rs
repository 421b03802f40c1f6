//! Packet-level simulation of opportunistic forwarding under the fading
//! link model, with topology control in the loop.
//!
//! `engine` owns the discrete-event machinery for a single run; `metrics`
//! defines what a run reports; `sweep` fans a configuration out over its
//! scenario grid and serializes results; `trace` is the replayable event
//! log format.

mod engine;
mod metrics;
mod sweep;
mod trace;

pub use engine::{build_scenario, World};
pub use metrics::{DropReason, FlowStats, RunMetrics};
pub use sweep::{sweep, Manifest, MetricsRecord, SummaryRow, SweepResult, CSV_HEADER};
