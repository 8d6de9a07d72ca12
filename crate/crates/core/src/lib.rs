//! Simulation of teleoperated rapid instrument exchange: a two-bay
//! repository, a latch/limit-switch docking mechanism, the exchange phase
//! machine, a latency-injected teleoperation protocol, scripted operators
//! and the metrics pipeline.

pub mod config;
pub mod fsm;
pub mod mechanism;
pub mod metrics;
pub mod operators;
pub mod protocol;
pub mod scene;
pub mod session;

pub use config::SimConfig;
pub use fsm::{ExchangePhase, FailureMode, Task};
pub use metrics::{BatchSummary, Outcome, TrialRecord};
pub use operators::{OperatorParams, Pilot, ScriptedOperator};
pub use session::Session;
