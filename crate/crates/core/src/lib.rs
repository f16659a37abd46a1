//! Trace-driven simulator for an adaptive, dual-stream split-computing
//! control plane on a UAV companion computer.
//!
//! The on-board controller picks a compression tier for the heavyweight
//! Insight stream from a lookup table, given the sensed uplink bandwidth and
//! the operator's goal, while a lightweight Context stream keeps the operator
//! aware of the scene. Missions run as discrete-event simulations over a
//! piecewise-constant bandwidth trace with a fluid-flow uplink, and report
//! accuracy, packet rate and on-board energy against single-tier baselines.
//!
//! The model, controller, trace and link layers are generic over [`Scalar`]
//! (`f32` or `f64`); the mission loop and harness run in `f64`. The aliases
//! below name the `f64` instantiations.

// NaN must fail these guards, so `!(x > 0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller;
pub mod harness;
pub mod link;
pub mod model;
pub mod scalar;
pub mod sim;
pub mod svg;
pub mod trace;

pub use controller::{compute_max_pps, select_optimal_tier, select_stream, sense_bandwidth};
pub use harness::{run_comparison, run_scenario, MissionSummary, Scenario};
pub use model::{derive_threshold, load_lut, Dataset, MissionGoal, StreamKind, TierName};
pub use scalar::Scalar;
pub use sim::{run_event_loop, MissionTimeline, Policy};

pub type TierSpec = model::TierSpec<f64>;
pub type SystemLut = model::SystemLut<f64>;
pub type StageProfile = model::StageProfile<f64>;
pub type Packet = model::Packet<f64>;
pub type BandwidthTrace = trace::BandwidthTrace<f64>;
pub type TraceSegmentSpec = trace::TraceSegmentSpec<f64>;
pub type ControllerDecision = controller::ControllerDecision<f64>;
pub type SchedulerState = controller::SchedulerState<f64>;
pub type LinkState = link::LinkState<f64>;

pub type SystemLut32 = model::SystemLut<f32>;
pub type BandwidthTrace32 = trace::BandwidthTrace<f32>;
