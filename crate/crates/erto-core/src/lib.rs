//! Core library for interference-aware opportunistic routing with joint
//! transmission-power / forwarding-degree topology control.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: positions, the power↔range map, candidate forwarding lens.
//! - [`linkmodel`]: Rayleigh/SINR delivery probabilities (closed form and
//!   Monte-Carlo oracle) and anypath combination over candidate sets.
//! - [`degree`]: Poisson forwarding-degree distribution over the lens.
//! - [`energy`]: expected one-hop retransmission energy cost.
//! - [`pareto`]: NSGA-II over (delivery, degree-robustness, cost) plus a
//!   brute-force grid reference front and hypervolume.
//! - [`topocontrol`]: feasible-set extraction and balanced power selection.
//! - [`routing`]: ETX-prioritized forward plans for the power-adapting and
//!   fixed-power protocol variants.
//! - [`sim`]: deterministic discrete-event simulator, metric sweeps, CSV and
//!   trace emission.
//! - [`config`]: experiment configuration with validated defaults.
//! - [`verify`]: oracle suites shared by the test battery and the CLI.

pub mod config;
pub mod degree;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod linkmodel;
pub mod pareto;
pub mod routing;
pub mod seedmix;
pub mod sim;
pub mod topocontrol;
pub mod verify;

pub use self::error::{Error, Result};
pub use self::geometry::{
    candidate_area, candidate_set, distance, NodeId, Position, RangeMap,
};
pub use self::linkmodel::{
    p_sc, p_sc_predict, p_si, InterfererSource, PredictionContext, RadioParams,
};
pub use self::degree::p_rnd;
pub use self::energy::{expected_attempts, expected_cost, EnergyParams, P_SC_FLOOR};
pub use self::pareto::{GaConfig, OptimizationContext, ParetoSet, Solution};
pub use self::routing::{ForwardPlan, Mode, NeighborTable, Planner, PlannerConfig};
pub use self::sim::{build_scenario, sweep, MetricsRecord, RunMetrics, SweepResult, World};
pub use self::topocontrol::{balanced_select, decide, feasible_set, Decision, FeasibleSet};
pub use self::config::ExperimentConfig;
