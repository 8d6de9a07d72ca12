//! Latch and release force gating, engagement geometry, and the collision
//! failure cascade. Everything here is a pure function over value types.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{AlignmentError, BayId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("{0} must be finite and non-negative")]
    Negative(&'static str),
    #[error("{0} must be below 2")]
    Coefficient(&'static str),
    #[error("tolerance envelope must satisfy 0 < engage < collision < eject (got {engage}, {collision}, {eject})")]
    Ordering { engage: f64, collision: f64, eject: f64 },
}

fn non_negative(name: &'static str, v: f64) -> Result<(), MechanismError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(MechanismError::Negative(name))
    }
}

/// Forces acting on the instrument-side latch while the repository presses
/// the unlock button.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatchParams {
    /// Spring preload holding the latch closed (N).
    pub f_lock_preload: f64,
    /// Friction coefficient at the latch contact during unlocking.
    pub c_fric: f64,
    /// Normal force at the latch contact surface (N).
    pub f_normal: f64,
    /// Force the repository release actuator can apply (N).
    pub f_release: f64,
}

impl Default for LatchParams {
    fn default() -> Self {
        LatchParams { f_lock_preload: 10.0, c_fric: 0.2, f_normal: 5.0, f_release: 15.0 }
    }
}

impl LatchParams {
    pub fn validate(&self) -> Result<(), MechanismError> {
        non_negative("f_lock_preload", self.f_lock_preload)?;
        non_negative("c_fric", self.c_fric)?;
        non_negative("f_normal", self.f_normal)?;
        non_negative("f_release", self.f_release)?;
        if self.c_fric >= 2.0 {
            return Err(MechanismError::Coefficient("c_fric"));
        }
        Ok(())
    }
}

/// Contact conditions at the active/passive interface once unlocked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterfaceParams {
    pub f_residual: f64,
    pub mu_interface: f64,
    pub n_interface: f64,
}

impl Default for InterfaceParams {
    fn default() -> Self {
        InterfaceParams { f_residual: 2.0, mu_interface: 0.1, n_interface: 30.0 }
    }
}

impl InterfaceParams {
    pub fn validate(&self) -> Result<(), MechanismError> {
        non_negative("f_residual", self.f_residual)?;
        non_negative("mu_interface", self.mu_interface)?;
        non_negative("n_interface", self.n_interface)?;
        if self.mu_interface >= 2.0 {
            return Err(MechanismError::Coefficient("mu_interface"));
        }
        Ok(())
    }
}

/// Geometric tolerances of the docking interface and the force limit of the
/// robot's stance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceEnvelope {
    pub engage_trans_tol: f64,
    pub engage_tilt_tol: f64,
    pub trigger_tilt_tol: f64,
    pub collision_trans_threshold: f64,
    pub eject_trans_threshold: f64,
    pub slip_force_threshold: f64,
}

impl Default for ToleranceEnvelope {
    fn default() -> Self {
        ToleranceEnvelope {
            engage_trans_tol: 3.0,
            engage_tilt_tol: 5.0,
            trigger_tilt_tol: 5.0,
            collision_trans_threshold: 8.0,
            eject_trans_threshold: 12.0,
            slip_force_threshold: 40.0,
        }
    }
}

impl ToleranceEnvelope {
    pub fn validate(&self) -> Result<(), MechanismError> {
        non_negative("engage_tilt_tol", self.engage_tilt_tol)?;
        non_negative("trigger_tilt_tol", self.trigger_tilt_tol)?;
        non_negative("slip_force_threshold", self.slip_force_threshold)?;
        let (e, c, j) = (self.engage_trans_tol, self.collision_trans_threshold, self.eject_trans_threshold);
        if !(0.0 < e && e < c && c < j) {
            return Err(MechanismError::Ordering { engage: e, collision: c, eject: j });
        }
        Ok(())
    }
}

/// Minimum actuator force that opens the latch.
pub fn release_threshold(p: &LatchParams) -> f64 {
    p.f_lock_preload + p.c_fric * p.f_normal
}

pub fn can_release(p: &LatchParams) -> bool {
    p.f_release >= release_threshold(p)
}

/// Axial force opposing separation of the arm from the instrument. Once
/// unlocked only residual contact and sliding friction remain; while locked
/// the latch preload adds on top.
pub fn withdraw_resistance(i: &InterfaceParams, unlocked: bool, p: &LatchParams) -> f64 {
    let sliding = i.f_residual + i.mu_interface * i.n_interface;
    if unlocked {
        sliding
    } else {
        sliding + p.f_lock_preload
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngageOutcome {
    Engaged,
    NoEngage,
    Collision,
}

pub fn try_engage_latch(err: AlignmentError, env: &ToleranceEnvelope) -> EngageOutcome {
    if err.trans_err > env.collision_trans_threshold {
        EngageOutcome::Collision
    } else if err.trans_err <= env.engage_trans_tol && err.tilt_err <= env.engage_tilt_tol {
        EngageOutcome::Engaged
    } else {
        EngageOutcome::NoEngage
    }
}

/// Whether an instrument pushed into an empty bay presses the bottom limit switch.
pub fn try_trigger_limit_switch(err: AlignmentError, depth_reached: bool, env: &ToleranceEnvelope) -> bool {
    depth_reached && err.tilt_err <= env.trigger_tilt_tol && err.trans_err <= env.engage_trans_tol
}

/// Occupancy of the bay next to the one being docked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BayContext {
    pub adjacent_bay: BayId,
    pub adjacent_occupied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEffects {
    pub reaction_n: f64,
    pub base_slippage: bool,
    /// Bay whose standby instrument was pushed out.
    pub ejected_from: Option<BayId>,
}

/// Consequences of a rigid collision at the bay mouth. The reaction force is
/// linear in the axial feed speed at impact (`k_contact` in N per mm/tick).
pub fn collision_outcome(
    err: AlignmentError,
    feed_speed: f64,
    k_contact: f64,
    bays: BayContext,
    env: &ToleranceEnvelope,
) -> CollisionEffects {
    let reaction_n = k_contact * feed_speed.max(0.0);
    let ejected_from = (err.trans_err > env.eject_trans_threshold && bays.adjacent_occupied)
        .then_some(bays.adjacent_bay);
    CollisionEffects {
        reaction_n,
        base_slippage: reaction_n > env.slip_force_threshold,
        ejected_from,
    }
}

/// Bundle of every mechanism constant a session needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismConfig {
    pub latch: LatchParams,
    pub interface: InterfaceParams,
    pub envelope: ToleranceEnvelope,
    /// Contact stiffness: reaction newtons per mm/tick of feed speed.
    pub k_contact: f64,
}

impl Default for MechanismConfig {
    fn default() -> Self {
        MechanismConfig {
            latch: LatchParams::default(),
            interface: InterfaceParams::default(),
            envelope: ToleranceEnvelope::default(),
            k_contact: 10.0,
        }
    }
}

impl MechanismConfig {
    pub fn validate(&self) -> Result<(), MechanismError> {
        self.latch.validate()?;
        self.interface.validate()?;
        self.envelope.validate()?;
        non_negative("k_contact", self.k_contact)
    }
}
