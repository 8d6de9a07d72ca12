//! Exchange phase machine for attachment, detachment and the full exchange
//! cycle (detach the carried instrument, then attach the standby one).
//!
//! The machine is a pure value computation: [`sense`] turns the current scene
//! into an optional mechanism outcome, and [`transition`] folds that outcome
//! into the next [`FsmState`] plus the events emitted on this tick.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanism::{
    can_release, collision_outcome, try_engage_latch, try_trigger_limit_switch, BayContext,
    CollisionEffects, EngageOutcome, MechanismConfig, ToleranceEnvelope,
};
use crate::scene::{alignment_error, AlignmentError, BayId, Placement, Pose, SceneState, BAY_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "attach")]
    Attach,
    #[serde(rename = "detach")]
    Detach,
    #[serde(rename = "cycle")]
    FullCycle,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Attach, Task::Detach, Task::FullCycle];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Attach => "attach",
            Task::Detach => "detach",
            Task::FullCycle => "cycle",
        }
    }

    /// Instrument layout a trial of this task starts from.
    pub fn default_layout(&self) -> Vec<Placement> {
        match self {
            Task::Attach => vec![Placement::Bay0, Placement::Bay1],
            Task::Detach | Task::FullCycle => vec![Placement::Carried, Placement::Bay1],
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "attach" => Ok(Task::Attach),
            "detach" => Ok(Task::Detach),
            "cycle" | "full_cycle" => Ok(Task::FullCycle),
            other => Err(format!("unknown task `{other}` (expected attach, detach or cycle)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureMode {
    TiltedInsertionNoTrigger,
    AxialMisalignmentCollision,
    BaseSlippage,
    AdjacentEjection,
    RetractRetry,
}

impl FailureMode {
    pub const ALL: [FailureMode; 5] = [
        FailureMode::TiltedInsertionNoTrigger,
        FailureMode::AxialMisalignmentCollision,
        FailureMode::BaseSlippage,
        FailureMode::AdjacentEjection,
        FailureMode::RetractRetry,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FailureMode::TiltedInsertionNoTrigger => "TiltedInsertionNoTrigger",
            FailureMode::AxialMisalignmentCollision => "AxialMisalignmentCollision",
            FailureMode::BaseSlippage => "BaseSlippage",
            FailureMode::AdjacentEjection => "AdjacentEjection",
            FailureMode::RetractRetry => "RetractRetry",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExchangePhase {
    AttachIdle,
    Aligning,
    Feeding,
    Locked,
    WithdrawingCarrying,
    Carrying,
    Returning,
    Inserting,
    ReleaseTriggered,
    WithdrawingEmpty,
    Detached,
    Failed(FailureMode),
}

impl ExchangePhase {
    pub fn is_failed(&self) -> bool {
        matches!(self, ExchangePhase::Failed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// First movement command of the trial; the trial clock starts here.
    ClockStarted,
    PhaseEntered { phase: ExchangePhase },
    /// Tip came within the staging radius of the target bay for the first time.
    RepositoryReached { bay: BayId },
    Engage { bay: BayId, outcome: EngageOutcome, trans_err: f64, tilt_err: f64 },
    LimitSwitch { bay: BayId, triggered: bool, release_ok: bool, trans_err: f64, tilt_err: f64 },
    Collision {
        bay: BayId,
        reaction_n: f64,
        trans_err: f64,
        tilt_err: f64,
        base_slippage: bool,
        ejected_from: Option<BayId>,
    },
    Failed {
        mode: FailureMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    /// Task finished without failure.
    Complete,
    /// Sim-time budget ran out before the task finished.
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub tick: u64,
    pub sim_time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Geometry of the docking workflow that the mechanism itself does not own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsmConfig {
    /// Axial distance in front of the mouth where feeding may begin (mm).
    pub approach_corridor_mm: f64,
    /// Net axial retreat during feeding that counts as a retry (mm).
    pub retract_hysteresis_mm: f64,
    /// Axial retreat after lock or release that completes withdrawal (mm).
    pub withdraw_clearance_mm: f64,
    /// Depth at which an inserted instrument bottoms out on the limit switch (mm).
    pub insertion_depth_mm: f64,
    /// Lateral radius of the bay face; crossing the mouth inside it outside the
    /// corridor is a rigid collision (mm).
    pub bay_face_radius_mm: f64,
    /// Distance from the bay mouth that marks the end of gross positioning (mm).
    pub staging_radius_mm: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            approach_corridor_mm: 20.0,
            retract_hysteresis_mm: 1.0,
            withdraw_clearance_mm: 30.0,
            insertion_depth_mm: 40.0,
            bay_face_radius_mm: 50.0,
            staging_radius_mm: 60.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FsmError {
    #[error("{task} needs {need}")]
    SceneMismatch { task: Task, need: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmState {
    pub task: Task,
    pub phase: ExchangePhase,
    pub target_bay: BayId,
    /// Full cycle only: the bay the standby instrument is attached from.
    pub install_bay: Option<BayId>,
    pub clock_started: bool,
    pub complete: bool,
    repository_reached: bool,
    no_engage_reported: bool,
    last_tip: Pose,
    last_axial: f64,
    max_axial: f64,
    anchor_axial: f64,
    corridor_trans_mm: f64,
    cfg: FsmConfig,
}

/// Mechanism result fed into a transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechOutcome {
    Engage { outcome: EngageOutcome, err: AlignmentError },
    Collision { err: AlignmentError, effects: CollisionEffects },
    Insertion { triggered: bool, release_ok: bool, err: AlignmentError },
}

fn other_bay(b: BayId) -> BayId {
    (b + 1) % BAY_COUNT as BayId
}

pub fn start_trial(
    task: Task,
    scene: &SceneState,
    cfg: FsmConfig,
    env: &ToleranceEnvelope,
) -> Result<FsmState, FsmError> {
    let carrying = scene.carried().is_some();
    let first = |occupied: bool| {
        scene.bays.iter().find(|b| b.occupied_by.is_some() == occupied).map(|b| b.id)
    };
    let (phase, target_bay, install_bay) = match task {
        Task::Attach => {
            if carrying {
                return Err(FsmError::SceneMismatch { task, need: "an empty arm" });
            }
            let bay = first(true).ok_or(FsmError::SceneMismatch { task, need: "an occupied bay" })?;
            (ExchangePhase::AttachIdle, bay, None)
        }
        Task::Detach => {
            if !carrying {
                return Err(FsmError::SceneMismatch { task, need: "a carried instrument" });
            }
            let bay = first(false).ok_or(FsmError::SceneMismatch { task, need: "an empty bay" })?;
            (ExchangePhase::Carrying, bay, None)
        }
        Task::FullCycle => {
            if !carrying {
                return Err(FsmError::SceneMismatch { task, need: "a carried instrument" });
            }
            let empty = first(false).ok_or(FsmError::SceneMismatch { task, need: "an empty bay" })?;
            let full = first(true).ok_or(FsmError::SceneMismatch { task, need: "an occupied bay" })?;
            (ExchangePhase::Carrying, empty, Some(full))
        }
    };
    let slot = scene.bays[target_bay as usize].slot_pose;
    let axial = slot.axial_coordinate(&scene.arm_tip);
    Ok(FsmState {
        task,
        phase,
        target_bay,
        install_bay,
        clock_started: false,
        complete: false,
        repository_reached: false,
        no_engage_reported: false,
        last_tip: scene.arm_tip,
        last_axial: axial,
        max_axial: axial,
        anchor_axial: axial,
        corridor_trans_mm: env.collision_trans_threshold,
        cfg,
    })
}

impl FsmState {
    pub fn is_terminal(&self) -> bool {
        self.complete || self.phase.is_failed()
    }

    pub fn config(&self) -> &FsmConfig {
        &self.cfg
    }
}

/// Probe the mechanism for the current tick: contact at the bay mouth,
/// latch engagement, or bottoming out on the limit switch.
pub fn sense(fsm: &FsmState, scene: &SceneState, mech: &MechanismConfig) -> Option<MechOutcome> {
    let slot = scene.bays.get(fsm.target_bay as usize)?.slot_pose;
    let axial = slot.axial_coordinate(&scene.arm_tip);
    let err = alignment_error(&scene.arm_tip, &slot);
    let crossed = fsm.last_axial < 0.0 && axial >= 0.0;
    let collide = || {
        let adjacent = other_bay(fsm.target_bay);
        let ctx = BayContext {
            adjacent_bay: adjacent,
            adjacent_occupied: scene.bays[adjacent as usize].occupied_by.is_some(),
        };
        let effects = collision_outcome(err, axial - fsm.last_axial, mech.k_contact, ctx, &mech.envelope);
        MechOutcome::Collision { err, effects }
    };
    match fsm.phase {
        ExchangePhase::Aligning | ExchangePhase::Returning => {
            (crossed && err.trans_err <= fsm.cfg.bay_face_radius_mm).then(collide)
        }
        ExchangePhase::Feeding if axial >= 0.0 => match try_engage_latch(err, &mech.envelope) {
            EngageOutcome::Collision => Some(collide()),
            outcome => Some(MechOutcome::Engage { outcome, err }),
        },
        ExchangePhase::Inserting => {
            if crossed && err.trans_err > mech.envelope.collision_trans_threshold {
                Some(collide())
            } else if axial >= fsm.cfg.insertion_depth_mm {
                Some(MechOutcome::Insertion {
                    triggered: try_trigger_limit_switch(err, true, &mech.envelope),
                    release_ok: can_release(&mech.latch),
                    err,
                })
            } else {
                None
            }
        }
        _ => None,
    }
}

struct Emitter {
    tick: u64,
    sim_time: f64,
    events: Vec<TrialEvent>,
}

impl Emitter {
    fn push(&mut self, kind: EventKind) {
        self.events.push(TrialEvent { tick: self.tick, sim_time: self.sim_time, kind });
    }

    fn enter(&mut self, fsm: &mut FsmState, phase: ExchangePhase) {
        fsm.phase = phase;
        self.push(EventKind::PhaseEntered { phase });
    }

    fn fail(&mut self, fsm: &mut FsmState, mode: FailureMode, detail: Option<String>) {
        if !fsm.phase.is_failed() {
            fsm.phase = ExchangePhase::Failed(mode);
        }
        self.push(EventKind::Failed { mode, detail });
    }

    fn collision(&mut self, fsm: &mut FsmState, err: AlignmentError, fx: CollisionEffects) {
        self.push(EventKind::Collision {
            bay: fsm.target_bay,
            reaction_n: fx.reaction_n,
            trans_err: err.trans_err,
            tilt_err: err.tilt_err,
            base_slippage: fx.base_slippage,
            ejected_from: fx.ejected_from,
        });
        self.fail(fsm, FailureMode::AxialMisalignmentCollision, None);
        if fx.base_slippage {
            self.fail(fsm, FailureMode::BaseSlippage, Some(format!("reaction {:.1} N", fx.reaction_n)));
        }
        if let Some(bay) = fx.ejected_from {
            self.fail(fsm, FailureMode::AdjacentEjection, Some(format!("bay {bay}")));
        }
    }
}

/// Advance the phase machine by one tick. Called once per tick after the
/// command for that tick has been applied to `scene`.
pub fn transition(
    fsm: &FsmState,
    scene: &SceneState,
    outcome: Option<&MechOutcome>,
) -> (FsmState, Vec<TrialEvent>) {
    use ExchangePhase::*;

    let mut next = fsm.clone();
    let mut em = Emitter { tick: scene.tick, sim_time: scene.sim_time(), events: Vec::new() };
    if fsm.is_terminal() {
        next.last_tip = scene.arm_tip;
        return (next, em.events);
    }

    let slot = scene.bays[fsm.target_bay as usize].slot_pose;
    let axial = slot.axial_coordinate(&scene.arm_tip);
    let err = alignment_error(&scene.arm_tip, &slot);
    let moved = scene.arm_tip != fsm.last_tip;
    let cfg = fsm.cfg;

    if let Some(MechOutcome::Collision { err, effects }) = outcome {
        em.collision(&mut next, *err, *effects);
    } else {
        match fsm.phase {
            AttachIdle | Carrying => {
                if moved {
                    next.clock_started = true;
                    em.push(EventKind::ClockStarted);
                    em.enter(&mut next, if fsm.phase == AttachIdle { Aligning } else { Returning });
                }
            }
            Aligning | Returning => {
                if !next.repository_reached && slot.distance_to(&scene.arm_tip) <= cfg.staging_radius_mm {
                    next.repository_reached = true;
                    em.push(EventKind::RepositoryReached { bay: fsm.target_bay });
                }
                let in_corridor = axial >= -cfg.approach_corridor_mm
                    && axial < 0.0
                    && err.trans_err < fsm.corridor_trans_mm;
                if in_corridor {
                    next.max_axial = axial;
                    next.no_engage_reported = false;
                    em.enter(&mut next, if fsm.phase == Aligning { Feeding } else { Inserting });
                }
            }
            Feeding => match outcome {
                Some(MechOutcome::Engage { outcome: EngageOutcome::Engaged, err }) => {
                    em.push(EventKind::Engage {
                        bay: fsm.target_bay,
                        outcome: EngageOutcome::Engaged,
                        trans_err: err.trans_err,
                        tilt_err: err.tilt_err,
                    });
                    next.anchor_axial = axial;
                    em.enter(&mut next, Locked);
                }
                Some(MechOutcome::Engage { outcome, err }) => {
                    if !fsm.no_engage_reported {
                        next.no_engage_reported = true;
                        em.push(EventKind::Engage {
                            bay: fsm.target_bay,
                            outcome: *outcome,
                            trans_err: err.trans_err,
                            tilt_err: err.tilt_err,
                        });
                    }
                }
                _ => retract_check(fsm, &mut next, &mut em, axial),
            },
            Inserting => match outcome {
                Some(MechOutcome::Insertion { triggered, release_ok, err }) => {
                    em.push(EventKind::LimitSwitch {
                        bay: fsm.target_bay,
                        triggered: *triggered,
                        release_ok: *release_ok,
                        trans_err: err.trans_err,
                        tilt_err: err.tilt_err,
                    });
                    if *triggered && *release_ok {
                        next.anchor_axial = axial;
                        em.enter(&mut next, ReleaseTriggered);
                    } else if *triggered {
                        em.fail(&mut next, FailureMode::TiltedInsertionNoTrigger, Some("unlock_failed".into()));
                    } else {
                        em.fail(&mut next, FailureMode::TiltedInsertionNoTrigger, None);
                    }
                }
                _ => retract_check(fsm, &mut next, &mut em, axial),
            },
            Locked => {
                if axial < fsm.anchor_axial {
                    em.enter(&mut next, WithdrawingCarrying);
                }
            }
            ReleaseTriggered => {
                if axial < fsm.anchor_axial {
                    em.enter(&mut next, WithdrawingEmpty);
                }
            }
            WithdrawingCarrying => {
                if fsm.anchor_axial - axial >= cfg.withdraw_clearance_mm {
                    next.complete = true;
                    em.push(EventKind::Complete);
                }
            }
            WithdrawingEmpty => {
                if fsm.anchor_axial - axial >= cfg.withdraw_clearance_mm {
                    em.enter(&mut next, Detached);
                    match fsm.install_bay {
                        Some(bay) if fsm.task == Task::FullCycle => {
                            next.target_bay = bay;
                            next.install_bay = None;
                            em.enter(&mut next, Aligning);
                        }
                        _ => {
                            next.complete = true;
                            em.push(EventKind::Complete);
                        }
                    }
                }
            }
            Detached | Failed(_) => {}
        }
    }

    next.last_tip = scene.arm_tip;
    let new_slot = scene.bays[next.target_bay as usize].slot_pose;
    next.last_axial = new_slot.axial_coordinate(&scene.arm_tip);
    (next, em.events)
}

fn retract_check(fsm: &FsmState, next: &mut FsmState, em: &mut Emitter, axial: f64) {
    if fsm.max_axial - axial > fsm.cfg.retract_hysteresis_mm {
        em.fail(
            next,
            FailureMode::RetractRetry,
            Some(format!("retreated {:.2} mm before docking", fsm.max_axial - axial)),
        );
    } else {
        next.max_axial = fsm.max_axial.max(axial);
    }
}

/// First failure mode in event order, or `None` for a clean trial.
pub fn classify_failure(events: &[TrialEvent]) -> Option<FailureMode> {
    events.iter().find_map(|e| match e.kind {
        EventKind::Failed { mode, .. } => Some(mode),
        _ => None,
    })
}
