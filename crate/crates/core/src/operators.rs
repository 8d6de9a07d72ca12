//! Scripted operators that drive a session headlessly.
//!
//! An operator splits each task into gross positioning (one macro transit
//! from the home pose to a staging point in front of the repository), local
//! fine alignment in front of the target bay, and axial feed / withdraw moves
//! gated on the observed phase. Two regimes are modelled:
//!
//! * local phases learn: for novices the alignment noise scales as
//!   `k^-alpha` over trial index `k`, and fine-tuning takes a fixed floor
//!   plus an excess that scales the same way;
//! * the macro transit does not: its duration is drawn from a stationary
//!   Gaussian (truncated at the physically reachable minimum).
//!
//! Experts use fixed floors for the local phases. A batch is split into
//! subjects of `trials_per_subject` trials and `k` restarts at 1 for each.

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::fsm::{ExchangePhase, Task};
use crate::metrics::{run_batch, MetricsError};
use crate::protocol::{PoseCommand, StateUpdate};
use crate::scene::{normalize_deg, Pose, PoseDelta};

/// Anything that turns observed state into the next command.
pub trait Pilot {
    fn next_command(&mut self, observed: &StateUpdate) -> PoseCommand;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    Expert,
    Novice,
}

impl std::str::FromStr for Skill {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expert" => Ok(Skill::Expert),
            "novice" => Ok(Skill::Novice),
            other => Err(format!("unknown operator `{other}` (expected expert or novice)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("invalid operator params: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing operator params: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorParams {
    pub label: String,
    pub skill: Skill,
    /// Novice lateral alignment noise std per axis at k = 1 (mm).
    pub align_noise_mm0: f64,
    /// Novice tilt noise std per axis at k = 1 (degrees).
    pub align_noise_deg0: f64,
    /// Expert lateral noise std (mm), independent of k.
    pub noise_floor_mm: f64,
    /// Expert tilt noise std (degrees), independent of k.
    pub noise_floor_deg: f64,
    pub learn_alpha: f64,
    /// Fine-alignment duration once fully trained (s).
    pub fine_tune_s: f64,
    /// Extra novice fine-alignment time at k = 1, decaying as `k^-alpha` (s).
    pub fine_tune_excess_s: f64,
    /// Log-normal spread of the fine-alignment duration.
    pub fine_tune_spread: f64,
    pub macro_transit_mean_s: f64,
    pub macro_transit_std_s: f64,
    /// Lateral scatter of the staging point reached by the macro transit (mm).
    pub macro_scatter_mm: f64,
    /// Pause between seeing a lock/release and retracting; also how long a
    /// stalled feed is tolerated before backing off (s).
    pub reaction_s: f64,
    /// Axial feed and withdraw speed (mm/tick).
    pub feed_speed: f64,
    /// Translation speed cap for planned transits (mm/tick).
    pub transit_speed_cap: f64,
    /// Batch trials are split into subjects of this many consecutive
    /// trials; `k` restarts at 1 for each subject.
    pub trials_per_subject: u32,
    pub seed: u64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams::expert()
    }
}

impl OperatorParams {
    pub fn expert() -> Self {
        OperatorParams {
            label: "expert".into(),
            skill: Skill::Expert,
            align_noise_mm0: 0.5,
            align_noise_deg0: 0.5,
            noise_floor_mm: 0.5,
            noise_floor_deg: 0.5,
            learn_alpha: 0.0,
            fine_tune_s: 8.0,
            fine_tune_excess_s: 0.0,
            fine_tune_spread: 0.15,
            macro_transit_mean_s: 27.5,
            macro_transit_std_s: 4.0,
            macro_scatter_mm: 4.0,
            reaction_s: 1.0,
            feed_speed: 1.5,
            transit_speed_cap: 4.0,
            trials_per_subject: 20,
            seed: 0x5eed_e4e7,
        }
    }

    pub fn novice() -> Self {
        OperatorParams {
            label: "novice".into(),
            skill: Skill::Novice,
            align_noise_mm0: 7.0,
            align_noise_deg0: 3.0,
            learn_alpha: 1.0,
            fine_tune_excess_s: 25.0,
            fine_tune_spread: 0.1,
            macro_transit_mean_s: 72.5,
            macro_transit_std_s: 12.0,
            macro_scatter_mm: 10.0,
            reaction_s: 1.5,
            feed_speed: 4.5,
            seed: 0x5eed_0001,
            ..OperatorParams::expert()
        }
    }

    pub fn for_skill(skill: Skill) -> Self {
        match skill {
            Skill::Expert => Self::expert(),
            Skill::Novice => Self::novice(),
        }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let non_neg = [
            ("align_noise_mm0", self.align_noise_mm0),
            ("align_noise_deg0", self.align_noise_deg0),
            ("noise_floor_mm", self.noise_floor_mm),
            ("noise_floor_deg", self.noise_floor_deg),
            ("fine_tune_s", self.fine_tune_s),
            ("fine_tune_excess_s", self.fine_tune_excess_s),
            ("fine_tune_spread", self.fine_tune_spread),
            ("macro_transit_mean_s", self.macro_transit_mean_s),
            ("macro_transit_std_s", self.macro_transit_std_s),
            ("macro_scatter_mm", self.macro_scatter_mm),
            ("reaction_s", self.reaction_s),
        ];
        for (name, v) in non_neg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(OperatorError::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=2.0).contains(&self.learn_alpha) {
            return Err(OperatorError::Invalid(format!("learn_alpha must lie in [0, 2], got {}", self.learn_alpha)));
        }
        if !(self.feed_speed > 0.0 && self.transit_speed_cap > 0.0) {
            return Err(OperatorError::Invalid("feed speed and transit cap must be positive".into()));
        }
        if self.trials_per_subject == 0 {
            return Err(OperatorError::Invalid("trials_per_subject must be positive".into()));
        }
        Ok(())
    }

    /// Lateral (mm) and tilt (degrees) alignment noise std at trial `k` (1-based).
    pub fn alignment_noise(&self, k: u32) -> (f64, f64) {
        match self.skill {
            Skill::Expert => (self.noise_floor_mm, self.noise_floor_deg),
            Skill::Novice => {
                let f = learning_factor(k, self.learn_alpha);
                (self.align_noise_mm0 * f, self.align_noise_deg0 * f)
            }
        }
    }

    /// Median fine-alignment duration at trial `k` (s).
    pub fn fine_tune_at(&self, k: u32) -> f64 {
        match self.skill {
            Skill::Expert => self.fine_tune_s,
            Skill::Novice => self.fine_tune_s + self.fine_tune_excess_s * learning_factor(k, self.learn_alpha),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, OperatorError> {
        let p: OperatorParams = toml::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OperatorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| OperatorError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("params are always representable")
    }
}

/// `k^-alpha` for a 1-based trial index.
pub fn learning_factor(k: u32, alpha: f64) -> f64 {
    (k.max(1) as f64).powf(-alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Subgoal {
    /// Linear pose interpolation over a fixed number of ticks.
    Transit { from: Pose, to: Pose, total: u32, done: u32 },
    Dwell(u32),
    Feed,
    Withdraw,
    Hold,
}

#[derive(Debug, Clone)]
pub struct PolicyState {
    /// 1-based trial index.
    pub k: u32,
    pub plan: VecDeque<Subgoal>,
    pub rng: ChaCha8Rng,
    seq: u64,
    macro_done: bool,
    stalled_ticks: u32,
    last_axial: Option<f64>,
}

impl PolicyState {
    pub fn new(k: u32, seed: u64) -> Self {
        PolicyState {
            k: k.max(1),
            plan: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            macro_done: false,
            stalled_ticks: 0,
            last_axial: None,
        }
    }

    /// Move on to the next trial: bump `k` and reset per-trial progress.
    pub fn advance(&mut self) {
        self.k += 1;
        self.plan.clear();
        self.seq = 0;
        self.macro_done = false;
        self.stalled_ticks = 0;
        self.last_axial = None;
    }

    pub fn current_subgoal(&self) -> Option<&Subgoal> {
        self.plan.front()
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedOperator {
    pub params: OperatorParams,
    pub state: PolicyState,
}

const STAGING_STANDOFF_MM: f64 = 50.0;
const ALIGN_STANDOFF_MM: f64 = 25.0;

impl ScriptedOperator {
    /// Operator for trial `k` (1-based). `trial_seed` is mixed with the
    /// params' own seed.
    pub fn new(params: OperatorParams, k: u32, trial_seed: u64) -> Self {
        let seed = params.seed ^ trial_seed.rotate_left(17);
        ScriptedOperator { state: PolicyState::new(k, seed), params }
    }

    fn ticks(&self, seconds: f64, dt: f64) -> u32 {
        (seconds / dt).round().max(1.0) as u32
    }

    fn min_ticks(&self, from: &Pose, to: &Pose) -> u32 {
        (from.distance_to(to) / self.params.transit_speed_cap).ceil().max(1.0) as u32
    }

    fn perpendiculars(axis: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let h = [axis[1], -axis[0], 0.0];
        let n = (h[0] * h[0] + h[1] * h[1]).sqrt();
        let u = if n > 1e-9 { [h[0] / n, h[1] / n, 0.0] } else { [0.0, 1.0, 0.0] };
        let v = [
            axis[1] * u[2] - axis[2] * u[1],
            axis[2] * u[0] - axis[0] * u[2],
            axis[0] * u[1] - axis[1] * u[0],
        ];
        (u, v)
    }

    fn point_in_front(slot: &Pose, standoff: f64, lateral: (f64, f64)) -> Pose {
        let axis = slot.axis();
        let (u, v) = Self::perpendiculars(axis);
        let mut p = *slot;
        for (i, c) in [&mut p.x, &mut p.y, &mut p.z].into_iter().enumerate() {
            *c += -standoff * axis[i] + lateral.0 * u[i] + lateral.1 * v[i];
        }
        p
    }

    fn gauss(&mut self, std: f64) -> f64 {
        if std > 0.0 {
            Normal::new(0.0, std).expect("finite std").sample(&mut self.state.rng)
        } else {
            0.0
        }
    }

    fn plan_approach(&mut self, observed: &StateUpdate) {
        let dt = self.step_s(observed);
        let Some(slot) = observed.bays.get(observed.target_bay as usize).map(|b| b.slot_pose) else {
            self.state.plan.push_back(Subgoal::Hold);
            return;
        };
        let mut from = observed.arm_tip;
        if !self.state.macro_done {
            self.state.macro_done = true;
            let s = self.params.macro_scatter_mm;
            let scatter = (self.gauss(s), self.gauss(s));
            let mut staging = Self::point_in_front(&slot, STAGING_STANDOFF_MM, scatter);
            staging.pitch = from.pitch;
            staging.yaw = from.yaw;
            staging.roll = from.roll;
            let drawn = self.params.macro_transit_mean_s + self.gauss(self.params.macro_transit_std_s);
            let total = self.ticks(drawn.max(0.0), dt).max(self.min_ticks(&from, &staging));
            self.state.plan.push_back(Subgoal::Transit { from, to: staging, total, done: 0 });
            from = staging;
        }
        let (sigma_mm, sigma_deg) = self.params.alignment_noise(self.state.k);
        let lateral = (self.gauss(sigma_mm), self.gauss(sigma_mm));
        let mut aligned = Self::point_in_front(&slot, ALIGN_STANDOFF_MM, lateral);
        aligned.pitch = normalize_deg(slot.pitch + self.gauss(sigma_deg));
        aligned.yaw = normalize_deg(slot.yaw + self.gauss(sigma_deg));
        aligned.roll = slot.roll;
        let spread = self.gauss(self.params.fine_tune_spread).exp();
        let fine = self.params.fine_tune_at(self.state.k) * spread;
        let total = self.ticks(fine, dt).max(self.min_ticks(&from, &aligned));
        self.state.plan.push_back(Subgoal::Transit { from, to: aligned, total, done: 0 });
        self.state.plan.push_back(Subgoal::Feed);
    }

    fn step_s(&self, observed: &StateUpdate) -> f64 {
        observed.dt_s
    }

    fn replan(&mut self, observed: &StateUpdate) {
        use ExchangePhase::*;
        let dt = self.step_s(observed);
        match observed.phase {
            AttachIdle | Carrying | Aligning | Returning => self.plan_approach(observed),
            Feeding | Inserting => self.state.plan.push_back(Subgoal::Feed),
            Locked | ReleaseTriggered => {
                let n = self.ticks(self.params.reaction_s, dt);
                self.state.plan.push_back(Subgoal::Dwell(n));
                self.state.plan.push_back(Subgoal::Withdraw);
            }
            WithdrawingCarrying | WithdrawingEmpty => self.state.plan.push_back(Subgoal::Withdraw),
            Detached | Failed(_) => self.state.plan.push_back(Subgoal::Hold),
        }
    }

    fn command(&mut self, delta: PoseDelta, axial_feed: f64) -> PoseCommand {
        self.state.seq += 1;
        PoseCommand {
            seq: self.state.seq,
            client_time_ms: 0,
            session_id: String::new(),
            delta,
            axial_feed,
        }
    }

    fn toward(from: &Pose, to: &Pose) -> PoseDelta {
        PoseDelta {
            x: to.x - from.x,
            y: to.y - from.y,
            z: to.z - from.z,
            pitch: normalize_deg(to.pitch - from.pitch),
            yaw: normalize_deg(to.yaw - from.yaw),
            roll: normalize_deg(to.roll - from.roll),
        }
    }
}

fn lerp_pose(a: &Pose, b: &Pose, t: f64) -> Pose {
    let l = |x: f64, y: f64| x + (y - x) * t;
    let la = |x: f64, y: f64| x + normalize_deg(y - x) * t;
    Pose {
        x: l(a.x, b.x),
        y: l(a.y, b.y),
        z: l(a.z, b.z),
        pitch: normalize_deg(la(a.pitch, b.pitch)),
        yaw: normalize_deg(la(a.yaw, b.yaw)),
        roll: normalize_deg(la(a.roll, b.roll)),
    }
}

impl Pilot for ScriptedOperator {
    fn next_command(&mut self, observed: &StateUpdate) -> PoseCommand {
        use ExchangePhase::*;
        if observed.phase.is_failed() || observed.complete {
            self.state.plan.clear();
            self.state.plan.push_back(Subgoal::Hold);
        }
        loop {
            if self.state.plan.is_empty() {
                self.replan(observed);
            }
            let dt = self.step_s(observed);
            let stall_limit = self.ticks(self.params.reaction_s, dt);
            let axial = observed
                .bays
                .get(observed.target_bay as usize)
                .map(|b| b.slot_pose.axial_coordinate(&observed.arm_tip));
            let speed = self.params.feed_speed;
            match self.state.plan.front_mut().expect("plan refilled") {
                Subgoal::Hold => return self.command(PoseDelta::default(), 0.0),
                Subgoal::Dwell(n) => {
                    if *n == 0 {
                        self.state.plan.pop_front();
                        continue;
                    }
                    *n -= 1;
                    return self.command(PoseDelta::default(), 0.0);
                }
                Subgoal::Transit { from, to, total, done } => {
                    if *done >= *total {
                        self.state.plan.pop_front();
                        continue;
                    }
                    *done += 1;
                    let waypoint = lerp_pose(from, to, *done as f64 / *total as f64);
                    let delta = Self::toward(&observed.arm_tip, &waypoint);
                    return self.command(delta, 0.0);
                }
                Subgoal::Feed => {
                    if !matches!(observed.phase, AttachIdle | Carrying | Aligning | Returning | Feeding | Inserting) {
                        self.state.plan.pop_front();
                        self.state.last_axial = None;
                        continue;
                    }
                    // a feed that stops making progress gets backed off
                    if let (Some(now), Some(prev)) = (axial, self.state.last_axial) {
                        if now - prev < 1e-3 {
                            self.state.stalled_ticks += 1;
                        } else {
                            self.state.stalled_ticks = 0;
                        }
                    }
                    self.state.last_axial = axial;
                    if self.state.stalled_ticks >= stall_limit {
                        self.state.stalled_ticks = 0;
                        self.state.plan.clear();
                        self.state.plan.push_back(Subgoal::Withdraw);
                        continue;
                    }
                    return self.command(PoseDelta::default(), speed);
                }
                Subgoal::Withdraw => {
                    let withdrawing = matches!(
                        observed.phase,
                        Locked | ReleaseTriggered | WithdrawingCarrying | WithdrawingEmpty | Feeding | Inserting
                    );
                    if !withdrawing {
                        self.state.plan.pop_front();
                        continue;
                    }
                    return self.command(PoseDelta::default(), -speed);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationTargets {
    pub expert_cycle_s: f64,
    pub novice_cycle_s: f64,
    pub trials: usize,
    /// Relative tolerance on each mean.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets { expert_cycle_s: 48.0, novice_cycle_s: 98.0, trials: 20, tolerance: 0.15, seed: 42 }
    }
}

impl CalibrationTargets {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, OperatorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| OperatorError::Io { path: path.display().to_string(), source })?;
        Ok(toml::from_str(&text)?)
    }
}

/// Macro-transit means searched per skill: 0 to 150 s in 2.5 s steps.
pub fn calibration_grid() -> Vec<f64> {
    (0..=60).map(|i| i as f64 * 2.5).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub skill: Skill,
    pub macro_transit_mean_s: f64,
    /// Mean cycle time over successful trials, absent if none succeeded.
    pub mean_cycle_s: Option<f64>,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub targets: CalibrationTargets,
    pub expert_mean_s: f64,
    pub novice_mean_s: f64,
    pub expert: OperatorParams,
    pub novice: OperatorParams,
    pub grid: Vec<GridPoint>,
}

impl Calibration {
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("calibration is always representable")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, OperatorError> {
        Ok(toml::from_str(text)?)
    }
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error(
        "no grid point within {tol_pct:.0}% of targets; best expert mean {} (target {expert_target} s), \
         best novice mean {} (target {novice_target} s)",
        show_mean(.best_expert),
        show_mean(.best_novice)
    )]
    NotFound {
        tol_pct: f64,
        expert_target: f64,
        novice_target: f64,
        best_expert: Option<f64>,
        best_novice: Option<f64>,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("calibration needs at least one trial per grid point")]
    NoTrials,
}

fn show_mean(m: &Option<f64>) -> String {
    m.map(|v| format!("{v:.2} s")).unwrap_or_else(|| "n/a (no successful trial)".into())
}

fn search(
    sim: &SimConfig,
    base: &OperatorParams,
    target: f64,
    targets: &CalibrationTargets,
    grid: &mut Vec<GridPoint>,
) -> Result<(OperatorParams, Option<f64>), CalibrationError> {
    let mut best: Option<(f64, OperatorParams, f64)> = None;
    for macro_mean in calibration_grid() {
        let params = OperatorParams { macro_transit_mean_s: macro_mean, ..base.clone() };
        let (_, summary) = run_batch(sim, Task::FullCycle, &params, targets.trials, targets.seed)?;
        let mean = summary.task_time.as_ref().map(|s| s.mean_s);
        grid.push(GridPoint {
            skill: base.skill,
            macro_transit_mean_s: macro_mean,
            mean_cycle_s: mean,
            successes: summary.n_total - summary.n_fail,
        });
        if let Some(m) = mean {
            let gap = (m - target).abs();
            if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
                best = Some((gap, params, m));
            }
        }
    }
    Ok(match best {
        Some((_, p, m)) => (p, Some(m)),
        None => (base.clone(), None),
    })
}

/// Grid-search the macro-transit mean of each skill so that the simulated
/// full-cycle mean lands on its target. Deterministic for fixed targets.
pub fn calibrate(targets: &CalibrationTargets, sim: &SimConfig) -> Result<Calibration, CalibrationError> {
    if targets.trials == 0 {
        return Err(CalibrationError::NoTrials);
    }
    let mut grid = Vec::new();
    let (expert, expert_mean) = search(sim, &OperatorParams::expert(), targets.expert_cycle_s, targets, &mut grid)?;
    let (novice, novice_mean) = search(sim, &OperatorParams::novice(), targets.novice_cycle_s, targets, &mut grid)?;
    let within = |mean: Option<f64>, target: f64| {
        mean.is_some_and(|m| target > 0.0 && (m - target).abs() <= targets.tolerance * target)
    };
    match (expert_mean, novice_mean) {
        (Some(e), Some(n)) if within(expert_mean, targets.expert_cycle_s) && within(novice_mean, targets.novice_cycle_s) => {
            Ok(Calibration { targets: *targets, expert_mean_s: e, novice_mean_s: n, expert, novice, grid })
        }
        _ => Err(CalibrationError::NotFound {
            tol_pct: targets.tolerance * 100.0,
            expert_target: targets.expert_cycle_s,
            novice_target: targets.novice_cycle_s,
            best_expert: expert_mean,
            best_novice: novice_mean,
        }),
    }
}

/// Convenience for examples: a fresh operator driving trial `k` with a seed
/// drawn from `rng`.
pub fn operator_for_trial(params: &OperatorParams, k: u32, rng: &mut impl Rng) -> ScriptedOperator {
    ScriptedOperator::new(params.clone(), k, rng.random())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Pose;
    use crate::session::Session;

    #[test]
    fn power_law_noise() {
        let p = OperatorParams { learn_alpha: 0.5, ..OperatorParams::novice() };
        let (m1, d1) = p.alignment_noise(1);
        let (m16, d16) = p.alignment_noise(16);
        assert!((m16 - m1 / 4.0).abs() < 1e-12);
        assert!((d16 - d1 / 4.0).abs() < 1e-12);
        let e = OperatorParams::expert();
        assert_eq!(e.alignment_noise(1), e.alignment_noise(50));
        assert_eq!(e.alignment_noise(1), (0.5, 0.5));
    }

    #[test]
    fn novice_noise_strictly_decreasing() {
        let p = OperatorParams::novice();
        for k in 1..100 {
            assert!(p.alignment_noise(k + 1).0 < p.alignment_noise(k).0);
            assert!(p.fine_tune_at(k + 1) < p.fine_tune_at(k));
        }
    }

    #[test]
    fn expert_at_bay_mouth_feeds_axially() {
        let mut s = Session::new(&SimConfig::default(), Task::Attach).unwrap();
        let mut op = ScriptedOperator::new(OperatorParams::expert(), 1, 3);
        let mut obs = s.snapshot();
        while obs.phase != ExchangePhase::Feeding {
            let c = op.next_command(&obs);
            obs = s.step(Some(&c)).unwrap();
        }
        let c = op.next_command(&obs);
        assert!(c.delta.is_zero());
        assert_eq!(c.axial_feed, OperatorParams::expert().feed_speed);
    }

    #[test]
    fn same_seed_same_commands() {
        let run = |seed| {
            let mut s = Session::new(&SimConfig::default(), Task::FullCycle).unwrap();
            let mut op = ScriptedOperator::new(OperatorParams::novice(), 3, seed);
            let mut obs = s.snapshot();
            let mut cmds = Vec::new();
            while !s.is_finished() {
                let c = op.next_command(&obs);
                cmds.push(c.clone());
                obs = s.step(Some(&c)).unwrap();
            }
            cmds
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn seq_has_no_gaps() {
        let mut s = Session::new(&SimConfig::default(), Task::Detach).unwrap();
        let mut op = ScriptedOperator::new(OperatorParams::expert(), 1, 5);
        let mut obs = s.snapshot();
        for expect in 1..500u64 {
            let c = op.next_command(&obs);
            assert_eq!(c.seq, expect);
            obs = s.step(Some(&c)).unwrap();
        }
    }

    #[test]
    fn params_round_trip_toml() {
        let p = OperatorParams::novice();
        assert_eq!(OperatorParams::from_toml_str(&p.to_toml_string()).unwrap(), p);
        assert!(OperatorParams::from_toml_str("learn_alpha = 3.0").is_err());
    }

    #[test]
    fn front_point_geometry() {
        let slot = Pose::at(0.0, 60.0, 0.0);
        let p = ScriptedOperator::point_in_front(&slot, 25.0, (0.0, 0.0));
        assert_eq!((p.x, p.y, p.z), (-25.0, 60.0, 0.0));
        let p = ScriptedOperator::point_in_front(&slot, 0.0, (3.0, 4.0));
        let e = crate::scene::alignment_error(&p, &slot);
        assert!((e.trans_err - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_target_is_reported() {
        let targets = CalibrationTargets { expert_cycle_s: 0.0, trials: 2, ..Default::default() };
        let sim = SimConfig::default();
        // a reduced search keeps this fast: only check the error path shape
        let err = calibrate(&targets, &sim).unwrap_err();
        assert!(matches!(err, CalibrationError::NotFound { best_expert: Some(_), .. }), "{err}");
    }
}
