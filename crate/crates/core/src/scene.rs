//! Simulated workspace: arm tip, the two-bay instrument repository and the
//! instruments themselves, advanced by a fixed-step clock.
//!
//! Frame conventions: positions are millimetres in the repository frame,
//! angles are degrees. A pose's pointing axis is derived from pitch and yaw
//! (roll spins about the axis and never affects alignment). Each bay's
//! `slot_pose` sits at the bay mouth and points into the slot, so the
//! signed axial coordinate of a point is positive once it is past the mouth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::PoseCommand;

/// Number of docking bays in the repository.
pub const BAY_COUNT: usize = 2;

pub type BayId = u8;
pub type InstrumentId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("bay poses coincide at ({x}, {y}, {z})")]
    CoincidentBays { x: f64, y: f64, z: f64 },
    #[error("repository holds at most {BAY_COUNT} instruments, config lists {0}")]
    TooManyInstruments(usize),
    #[error("bay {0} is referenced by more than one instrument")]
    BayDoubleBooked(BayId),
    #[error("bay index {0} out of range")]
    NoSuchBay(BayId),
    #[error("more than one instrument is carried by the arm")]
    MultipleCarried,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid scene parameter: {0}")]
    InvalidParameter(String),
}

/// Normalise an angle in degrees to the half-open range (-180, 180].
pub fn normalize_deg(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Rotation about the instrument's long axis.
    pub roll: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, pitch: f64, yaw: f64, roll: f64) -> Self {
        Pose { x, y, z, pitch, yaw, roll }.normalized()
    }

    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Pose { x, y, z, ..Pose::default() }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.pitch, self.yaw, self.roll]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn normalized(mut self) -> Self {
        self.pitch = normalize_deg(self.pitch);
        self.yaw = normalize_deg(self.yaw);
        self.roll = normalize_deg(self.roll);
        self
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Unit vector along the pose's long axis.
    pub fn axis(&self) -> [f64; 3] {
        let (p, w) = (self.pitch.to_radians(), self.yaw.to_radians());
        [p.cos() * w.cos(), p.cos() * w.sin(), p.sin()]
    }

    /// Signed distance of `point` along this pose's axis, measured from its origin.
    pub fn axial_coordinate(&self, point: &Pose) -> f64 {
        dot(sub(point.position(), self.position()), self.axis())
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        norm(sub(self.position(), other.position()))
    }
}

/// Pose increments carried by a command. Angles are not normalised: a delta of
/// 270 degrees is a request, not an orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseDelta {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl PoseDelta {
    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z, self.pitch, self.yaw, self.roll]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        [self.x, self.y, self.z, self.pitch, self.yaw, self.roll]
            .iter()
            .all(|v| *v == 0.0)
    }
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn clamp_norm(v: [f64; 3], max: f64) -> [f64; 3] {
    let n = norm(v);
    if n > max && n > 0.0 {
        let s = max / n;
        [v[0] * s, v[1] * s, v[2] * s]
    } else {
        v
    }
}

/// Lateral and angular misalignment of `arm_tip` against a docking axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentError {
    /// Distance from the docking axis, measured in the plane perpendicular to it (mm).
    pub trans_err: f64,
    /// Angle between the tip axis and the docking axis (degrees).
    pub tilt_err: f64,
}

pub fn alignment_error(arm_tip: &Pose, target: &Pose) -> AlignmentError {
    let axis = target.axis();
    let d = sub(arm_tip.position(), target.position());
    let along = dot(d, axis);
    let lateral = [d[0] - along * axis[0], d[1] - along * axis[1], d[2] - along * axis[2]];
    let cos = dot(arm_tip.axis(), axis).clamp(-1.0, 1.0);
    AlignmentError {
        trans_err: norm(lateral),
        tilt_err: cos.acos().to_degrees(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockingBay {
    pub id: BayId,
    pub slot_pose: Pose,
    pub occupied_by: Option<InstrumentId>,
    pub limit_switch_pressed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "bay")]
pub enum InstrumentState {
    Stowed(BayId),
    Carried,
    Ejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    pub id: InstrumentId,
    pub base_pose: Pose,
    pub state: InstrumentState,
}

/// Where an instrument starts a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Bay0,
    Bay1,
    Carried,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub dt_s: f64,
    pub home: Pose,
    pub bays: [Pose; BAY_COUNT],
    /// Translation clamp per tick (mm).
    pub max_step_mm: f64,
    /// Rotation clamp per tick (degrees).
    pub max_step_deg: f64,
    /// Lateral drift added to every movement once the base has slipped (mm/tick).
    pub slip_bias_mm: f64,
    pub instruments: Vec<Placement>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            dt_s: 0.01,
            home: Pose::at(-400.0, 0.0, 0.0),
            bays: [Pose::at(0.0, -60.0, 0.0), Pose::at(0.0, 60.0, 0.0)],
            max_step_mm: 5.0,
            max_step_deg: 2.0,
            slip_bias_mm: 1.0,
            instruments: vec![Placement::Bay0, Placement::Bay1],
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let finite = self.home.is_finite()
            && self.bays.iter().all(Pose::is_finite)
            && [self.dt_s, self.max_step_mm, self.max_step_deg, self.slip_bias_mm]
                .iter()
                .all(|v| v.is_finite());
        if !finite {
            return Err(SceneError::NonFinite("scene config"));
        }
        if self.dt_s <= 0.0 {
            return Err(SceneError::InvalidParameter(format!("dt_s must be positive, got {}", self.dt_s)));
        }
        if self.max_step_mm <= 0.0 || self.max_step_deg <= 0.0 {
            return Err(SceneError::InvalidParameter("velocity clamps must be positive".into()));
        }
        if self.slip_bias_mm < 0.0 {
            return Err(SceneError::InvalidParameter("slip bias must be non-negative".into()));
        }
        let [a, b] = &self.bays;
        if a.distance_to(b) == 0.0 {
            return Err(SceneError::CoincidentBays { x: a.x, y: a.y, z: a.z });
        }
        if self.instruments.len() > BAY_COUNT {
            return Err(SceneError::TooManyInstruments(self.instruments.len()));
        }
        let mut seen = [false; BAY_COUNT];
        let mut carried = 0;
        for p in &self.instruments {
            match p {
                Placement::Carried => carried += 1,
                Placement::Bay0 | Placement::Bay1 => {
                    let b = if *p == Placement::Bay0 { 0 } else { 1 };
                    if seen[b] {
                        return Err(SceneError::BayDoubleBooked(b as BayId));
                    }
                    seen[b] = true;
                }
            }
        }
        if carried > 1 {
            return Err(SceneError::MultipleCarried);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub arm_tip: Pose,
    pub bays: Vec<DockingBay>,
    pub instruments: Vec<Instrument>,
    pub base_stable: bool,
    pub tick: u64,
    pub dt_s: f64,
    #[serde(skip)]
    limits: Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Limits {
    max_step_mm: f64,
    max_step_deg: f64,
    slip_bias_mm: f64,
}

impl SceneState {
    pub fn new(config: &SceneConfig) -> Result<Self, SceneError> {
        config.validate()?;
        let mut bays: Vec<DockingBay> = config
            .bays
            .iter()
            .enumerate()
            .map(|(i, pose)| DockingBay {
                id: i as BayId,
                slot_pose: pose.normalized(),
                occupied_by: None,
                limit_switch_pressed: false,
            })
            .collect();
        let home = config.home.normalized();
        let instruments = config
            .instruments
            .iter()
            .enumerate()
            .map(|(i, placement)| {
                let id = i as InstrumentId;
                let (state, base_pose) = match placement {
                    Placement::Carried => (InstrumentState::Carried, home),
                    Placement::Bay0 | Placement::Bay1 => {
                        let b = if *placement == Placement::Bay0 { 0 } else { 1 };
                        bays[b].occupied_by = Some(id);
                        bays[b].limit_switch_pressed = true;
                        (InstrumentState::Stowed(b as BayId), bays[b].slot_pose)
                    }
                };
                Instrument { id, base_pose, state }
            })
            .collect();
        Ok(SceneState {
            arm_tip: home,
            bays,
            instruments,
            base_stable: true,
            tick: 0,
            dt_s: config.dt_s,
            limits: Limits {
                max_step_mm: config.max_step_mm,
                max_step_deg: config.max_step_deg,
                slip_bias_mm: config.slip_bias_mm,
            },
        })
    }

    pub fn sim_time(&self) -> f64 {
        self.tick as f64 * self.dt_s
    }

    pub fn bay(&self, id: BayId) -> Option<&DockingBay> {
        self.bays.get(id as usize)
    }

    /// The bay whose mouth is closest to the arm tip; its axis defines axial feed.
    pub fn nearest_bay(&self) -> &DockingBay {
        self.bays
            .iter()
            .min_by(|a, b| {
                let da = a.slot_pose.distance_to(&self.arm_tip);
                let db = b.slot_pose.distance_to(&self.arm_tip);
                da.total_cmp(&db)
            })
            .expect("repository has bays")
    }

    pub fn carried(&self) -> Option<&Instrument> {
        self.instruments.iter().find(|i| i.state == InstrumentState::Carried)
    }

    /// Apply one command and advance the clock by one tick.
    pub fn apply_command(&mut self, cmd: &PoseCommand) -> Result<(), SceneError> {
        if !cmd.delta.is_finite() || !cmd.axial_feed.is_finite() {
            return Err(SceneError::NonFinite("pose command"));
        }
        let axis = self.nearest_bay().slot_pose.axis();
        let d = &cmd.delta;
        let mut step = clamp_norm(
            [
                d.x + cmd.axial_feed * axis[0],
                d.y + cmd.axial_feed * axis[1],
                d.z + cmd.axial_feed * axis[2],
            ],
            self.limits.max_step_mm,
        );
        let turn = clamp_norm([d.pitch, d.yaw, d.roll], self.limits.max_step_deg);
        let moved = !cmd.delta.is_zero() || cmd.axial_feed != 0.0;
        if moved && !self.base_stable {
            // drift is horizontal and perpendicular to the feed axis
            let side = [-axis[1], axis[0], 0.0];
            let n = norm(side);
            if n > 0.0 {
                for (s, v) in step.iter_mut().zip(side) {
                    *s += self.limits.slip_bias_mm * v / n;
                }
            }
        }
        let tip = &mut self.arm_tip;
        tip.x += step[0];
        tip.y += step[1];
        tip.z += step[2];
        tip.pitch = normalize_deg(tip.pitch + turn[0]);
        tip.yaw = normalize_deg(tip.yaw + turn[1]);
        tip.roll = normalize_deg(tip.roll + turn[2]);
        let tip = *tip;
        if let Some(inst) = self.instruments.iter_mut().find(|i| i.state == InstrumentState::Carried) {
            inst.base_pose = tip;
        }
        self.tick += 1;
        Ok(())
    }

    /// Advance the clock without moving the arm.
    pub fn idle_tick(&mut self) {
        self.tick += 1;
    }

    /// Pull the tip back along `bay`'s axis so it sits no deeper than `max_depth`.
    pub fn hold_axial(&mut self, bay: BayId, max_depth: f64) {
        let Some(slot) = self.bay(bay).map(|b| b.slot_pose) else { return };
        let over = slot.axial_coordinate(&self.arm_tip) - max_depth;
        if over > 0.0 {
            let axis = slot.axis();
            self.arm_tip.x -= over * axis[0];
            self.arm_tip.y -= over * axis[1];
            self.arm_tip.z -= over * axis[2];
        }
    }

    /// Latch the instrument stowed in `bay` onto the arm.
    pub fn pick_from(&mut self, bay: BayId) -> Option<InstrumentId> {
        if self.carried().is_some() {
            return None;
        }
        let tip = self.arm_tip;
        let b = self.bays.get_mut(bay as usize)?;
        let id = b.occupied_by.take()?;
        b.limit_switch_pressed = false;
        let inst = self.instruments.iter_mut().find(|i| i.id == id)?;
        inst.state = InstrumentState::Carried;
        inst.base_pose = tip;
        Some(id)
    }

    /// Hand the carried instrument over to `bay`, pressing its limit switch.
    pub fn stow_carried(&mut self, bay: BayId) -> Option<InstrumentId> {
        let b = self.bays.get_mut(bay as usize)?;
        if b.occupied_by.is_some() {
            return None;
        }
        let inst = self.instruments.iter_mut().find(|i| i.state == InstrumentState::Carried)?;
        inst.state = InstrumentState::Stowed(bay);
        inst.base_pose = b.slot_pose;
        b.occupied_by = Some(inst.id);
        b.limit_switch_pressed = true;
        Some(inst.id)
    }

    /// Knock the instrument out of `bay`.
    pub fn eject(&mut self, bay: BayId) -> Option<InstrumentId> {
        let b = self.bays.get_mut(bay as usize)?;
        let id = b.occupied_by.take()?;
        b.limit_switch_pressed = false;
        let inst = self.instruments.iter_mut().find(|i| i.id == id)?;
        inst.state = InstrumentState::Ejected;
        Some(id)
    }

    /// Mark the base as slipped. Never reverts within a trial.
    pub fn mark_slipped(&mut self) {
        self.base_stable = false;
    }
}
