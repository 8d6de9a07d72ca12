//! One trial's simulation loop: scene, phase machine and event log stepped
//! together at the fixed tick. Shared by headless batches and the server.

use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::fsm::{self, EventKind, ExchangePhase, FsmError, FsmState, MechOutcome, Task, TrialEvent};
use crate::mechanism::EngageOutcome;
use crate::protocol::{PoseCommand, StateUpdate};
use crate::scene::{SceneConfig, SceneError, SceneState};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
}

#[derive(Debug, Clone)]
pub struct Session {
    config: SimConfig,
    scene: SceneState,
    fsm: FsmState,
    events: Vec<TrialEvent>,
    last_seq: u64,
    timed_out: bool,
    timeout_ticks: u64,
}

impl Session {
    /// Build a fresh trial. The instrument layout comes from `task`.
    pub fn new(config: &SimConfig, task: Task) -> Result<Self, SessionError> {
        config.validate()?;
        let scene_cfg = SceneConfig { instruments: task.default_layout(), ..config.scene.clone() };
        let scene = SceneState::new(&scene_cfg)?;
        let fsm = fsm::start_trial(task, &scene, config.fsm, &config.mechanism.envelope)?;
        Ok(Session {
            config: config.clone(),
            scene,
            fsm,
            events: Vec::new(),
            last_seq: 0,
            timed_out: false,
            timeout_ticks: config.timeout_ticks(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    pub fn fsm(&self) -> &FsmState {
        &self.fsm
    }

    pub fn events(&self) -> &[TrialEvent] {
        &self.events
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn timed_out(&self) -> bool {
        self.timed_out
    }

    pub fn is_finished(&self) -> bool {
        self.fsm.is_terminal() || self.timed_out
    }

    /// Snapshot without events, as sent right after the handshake.
    pub fn snapshot(&self) -> StateUpdate {
        self.update_with(Vec::new())
    }

    fn update_with(&self, events_since_last: Vec<TrialEvent>) -> StateUpdate {
        StateUpdate {
            seq: self.last_seq,
            tick: self.scene.tick,
            sim_time: self.scene.sim_time(),
            dt_s: self.scene.dt_s,
            task: self.fsm.task,
            phase: self.fsm.phase,
            target_bay: self.fsm.target_bay,
            arm_tip: self.scene.arm_tip,
            bays: self.scene.bays.clone(),
            instruments: self.scene.instruments.clone(),
            base_stable: self.scene.base_stable,
            complete: self.fsm.complete,
            events_since_last,
        }
    }

    /// Advance one tick, applying `cmd` if one arrived for this tick.
    /// A rejected command leaves the session untouched.
    pub fn step(&mut self, cmd: Option<&PoseCommand>) -> Result<StateUpdate, SceneError> {
        match cmd {
            Some(c) => {
                self.scene.apply_command(c)?;
                self.last_seq = c.seq;
            }
            None => self.scene.idle_tick(),
        }

        let outcome = fsm::sense(&self.fsm, &self.scene, &self.config.mechanism);
        if let Some(MechOutcome::Engage { outcome: EngageOutcome::NoEngage, .. }) = outcome {
            // the passive face stops the arm at the mouth
            self.scene.hold_axial(self.fsm.target_bay, 0.0);
        }
        let (next, mut new_events) = fsm::transition(&self.fsm, &self.scene, outcome.as_ref());
        for e in &new_events {
            self.apply_effect(&e.kind, &next);
        }
        self.fsm = next;

        if !self.fsm.is_terminal() && !self.timed_out && self.scene.tick >= self.timeout_ticks {
            self.timed_out = true;
            new_events.push(TrialEvent {
                tick: self.scene.tick,
                sim_time: self.scene.sim_time(),
                kind: EventKind::TimedOut,
            });
        }
        self.events.extend(new_events.iter().cloned());
        Ok(self.update_with(new_events))
    }

    fn apply_effect(&mut self, kind: &EventKind, fsm: &FsmState) {
        match kind {
            EventKind::PhaseEntered { phase: ExchangePhase::Locked } => {
                self.scene.pick_from(fsm.target_bay);
            }
            EventKind::PhaseEntered { phase: ExchangePhase::ReleaseTriggered } => {
                self.scene.stow_carried(fsm.target_bay);
            }
            EventKind::Collision { base_slippage, ejected_from, .. } => {
                if *base_slippage {
                    self.scene.mark_slipped();
                }
                if let Some(bay) = ejected_from {
                    self.scene.eject(*bay);
                }
            }
            _ => {}
        }
    }
}
