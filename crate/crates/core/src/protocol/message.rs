//! Wire messages. Every frame is a JSON object whose first field is `type`.

use serde::{Deserialize, Serialize};

use crate::fsm::{EventKind, ExchangePhase, Task, TrialEvent};
use crate::scene::{BayId, DockingBay, Instrument, Pose, PoseDelta};

/// Master to slave: one tick's worth of motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseCommand {
    /// Strictly increasing per session, starting at 1, no gaps.
    pub seq: u64,
    /// Sender wall clock. Informational only.
    #[serde(default)]
    pub client_time_ms: u64,
    #[serde(default)]
    pub session_id: String,
    #[serde(default)]
    pub delta: PoseDelta,
    /// Signed travel along the nearest bay's docking axis (mm).
    #[serde(default)]
    pub axial_feed: f64,
}

impl PoseCommand {
    pub fn zero(seq: u64) -> Self {
        PoseCommand { seq, client_time_ms: 0, session_id: String::new(), delta: PoseDelta::default(), axial_feed: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.delta.is_finite() && self.axial_feed.is_finite()
    }

    pub fn is_movement(&self) -> bool {
        !self.delta.is_zero() || self.axial_feed != 0.0
    }
}

/// Slave to master: the state stream that stands in for the first-person view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    /// Sequence number of the last command applied, 0 before any.
    pub seq: u64,
    pub tick: u64,
    pub sim_time: f64,
    /// Fixed step length (s).
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub task: Task,
    pub phase: ExchangePhase,
    pub target_bay: BayId,
    pub arm_tip: Pose,
    pub bays: Vec<DockingBay>,
    pub instruments: Vec<Instrument>,
    pub base_stable: bool,
    /// Set once the task has finished without failure.
    #[serde(default)]
    pub complete: bool,
    #[serde(default)]
    pub events_since_last: Vec<TrialEvent>,
}

fn default_dt() -> f64 {
    0.01
}

impl StateUpdate {
    pub fn is_finite(&self) -> bool {
        self.sim_time.is_finite()
            && self.dt_s.is_finite()
            && self.arm_tip.is_finite()
            && self.bays.iter().all(|b| b.slot_pose.is_finite())
            && self.instruments.iter().all(|i| i.base_pose.is_finite())
            && self.events_since_last.iter().all(event_is_finite)
    }
}

fn event_is_finite(e: &TrialEvent) -> bool {
    let floats: &[f64] = match &e.kind {
        EventKind::Engage { trans_err, tilt_err, .. } | EventKind::LimitSwitch { trans_err, tilt_err, .. } => {
            &[*trans_err, *tilt_err]
        }
        EventKind::Collision { reaction_n, trans_err, tilt_err, .. } => &[*reaction_n, *trans_err, *tilt_err],
        _ => &[],
    };
    e.sim_time.is_finite() && floats.iter().all(|v| v.is_finite())
}

/// Session handshake. The client sends task and seed; the server answers with
/// the same frame carrying the assigned `session_id` and tick length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorFrame {
    pub code: String,
    pub message: String,
}

impl ErrorFrame {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ErrorFrame { code: code.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Frame {
    #[serde(rename = "hello")]
    Hello(Hello),
    #[serde(rename = "cmd")]
    Cmd(PoseCommand),
    #[serde(rename = "state")]
    State(StateUpdate),
    #[serde(rename = "err")]
    Err(ErrorFrame),
}

impl Frame {
    pub fn is_finite(&self) -> bool {
        match self {
            Frame::Cmd(c) => c.is_finite(),
            Frame::State(s) => s.is_finite(),
            Frame::Hello(h) => h.dt_s.is_none_or(f64::is_finite),
            Frame::Err(_) => true,
        }
    }
}

impl From<PoseCommand> for Frame {
    fn from(c: PoseCommand) -> Self {
        Frame::Cmd(c)
    }
}

impl From<StateUpdate> for Frame {
    fn from(s: StateUpdate) -> Self {
        Frame::State(s)
    }
}
