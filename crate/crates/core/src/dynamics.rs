//! Longitudinal kinematics on a one-dimensional street.
//!
//! Every trajectory in the crate is built from piecewise-constant
//! accelerations integrated with [`advance`]. A sample carries the
//! acceleration applied over the interval that *starts* at that sample.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speeds within this distance of a target are snapped onto it.
const SNAP_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("vehicle mass must be positive, got {0}")]
    Mass(f64),
    #[error("resistance coefficients must be non-negative (f0={f0}, f2={f2})")]
    Resistance { f0: f64, f2: f64 },
    #[error("drivetrain efficiency must lie in (0, 1], got {0}")]
    Efficiency(f64),
    #[error("invalid kinematic limits: {0}")]
    Limits(String),
}

/// Physical parameters of a car for the power-demand model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub label: String,
    /// kg
    pub mass: f64,
    /// Rolling resistance, N.
    pub f0: f64,
    /// Aerodynamic drag, N·s²/m².
    pub f2: f64,
    /// Fraction of fuel energy delivered to the wheels.
    pub eta: f64,
}

pub const DEFAULT_ETA: f64 = 0.21;

impl VehicleSpec {
    pub fn new(label: impl Into<String>, mass: f64, f0: f64, f2: f64, eta: f64) -> Result<Self, SpecError> {
        let spec = Self { label: label.into(), mass, f0, f2, eta };
        spec.validate()?;
        Ok(spec)
    }

    /// 2023 Toyota Camry LE/SE road-load coefficients.
    pub fn camry() -> Self {
        Self { label: "camry".into(), mass: 1644.0, f0: 113.82, f2: 0.36, eta: DEFAULT_ETA }
    }

    /// 2023 Toyota Highlander road-load coefficients.
    pub fn highlander() -> Self {
        Self { label: "highlander".into(), mass: 2040.8, f0: 139.7, f2: 0.56, eta: DEFAULT_ETA }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "camry" => Some(Self::camry()),
            "highlander" => Some(Self::highlander()),
            _ => None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.mass > 0.0) {
            return Err(SpecError::Mass(self.mass));
        }
        if !(self.f0 >= 0.0 && self.f2 >= 0.0) {
            return Err(SpecError::Resistance { f0: self.f0, f2: self.f2 });
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(SpecError::Efficiency(self.eta));
        }
        Ok(())
    }
}

/// Speed limit, acceleration magnitudes and the simulation step.
///
/// All rates are positive magnitudes; braking is applied with a negative sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub v_max: f64,
    pub a_accel: f64,
    pub a_decel: f64,
    pub a_emergency: f64,
    pub dt: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self { v_max: 13.4, a_accel: 2.6, a_decel: 4.5, a_emergency: 9.0, dt: 0.5 }
    }
}

impl KinematicLimits {
    pub fn validate(&self) -> Result<(), SpecError> {
        let ok = self.v_max > 0.0
            && self.a_accel > 0.0
            && self.a_decel > 0.0
            && self.a_decel <= self.a_emergency
            && self.dt > 0.0
            && [self.v_max, self.a_accel, self.a_decel, self.a_emergency, self.dt]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SpecError::Limits(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: f64,
    pub speed: f64,
    pub accel: f64,
}

impl TrajectorySample {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn cruising(t: f64, position: f64, speed: f64) -> Self {
        Self { t, position, speed, accel: 0.0 }
    }
}

/// Integrate one step of constant acceleration.
///
/// Braking that would push the speed below zero stops the car mid-step: the
/// speed is clamped to 0 and the position only advances over the moving part
/// of the interval. The returned sample carries `accel` as its own
/// acceleration, or 0 once stopped.
pub fn advance(state: &TrajectorySample, accel: f64, dt: f64) -> TrajectorySample {
    let v0 = state.speed.max(0.0);
    let v1 = v0 + accel * dt;
    let t = state.t + dt;
    if v1 < 0.0 {
        // accel < 0 here, stop at v0 / |a|
        let moved = v0 * v0 / (-2.0 * accel);
        TrajectorySample { t, position: state.position + moved, speed: 0.0, accel: 0.0 }
    } else {
        TrajectorySample {
            t,
            position: state.position + v0 * dt + 0.5 * accel * dt * dt,
            speed: v1,
            accel,
        }
    }
}

/// Acceleration that moves `speed` toward `target` within one step, bounded by
/// the given magnitudes.
pub fn accel_toward(speed: f64, target: f64, a_up: f64, a_down: f64, dt: f64) -> f64 {
    ((target - speed) / dt).clamp(-a_down, a_up)
}

/// [`advance`] toward a target speed, snapping onto the target when the step
/// reaches it so that repeated steps hold it bit-exactly.
pub fn steer(state: &TrajectorySample, target: f64, a_up: f64, a_down: f64, dt: f64) -> (f64, TrajectorySample) {
    if state.speed == target {
        return (0.0, advance(state, 0.0, dt));
    }
    let accel = accel_toward(state.speed, target, a_up, a_down, dt);
    let mut next = advance(state, accel, dt);
    if (next.speed - target).abs() <= SNAP_EPS {
        next.speed = target;
    }
    (accel, next)
}

pub fn braking_distance(v: f64, a_brake: f64) -> f64 {
    v * v / (2.0 * a_brake)
}

/// One piece of a planned acceleration profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub accel: f64,
    pub duration: f64,
}

/// Earliest time at which the car reaches `target_position` when following
/// `plan` from `state`, holding its final speed once the plan is exhausted.
/// Returns `f64::INFINITY` if the target is never reached.
pub fn time_to_reach(state: &TrajectorySample, target_position: f64, plan: &[Segment]) -> f64 {
    let mut t = state.t;
    let mut x = state.position;
    let mut v = state.speed.max(0.0);
    if x >= target_position {
        return t;
    }
    for seg in plan {
        let gap = target_position - x;
        let stop_t = if seg.accel < 0.0 { (v / -seg.accel).min(seg.duration) } else { seg.duration };
        if let Some(tau) = first_hit(v, seg.accel, gap, stop_t) {
            return t + tau;
        }
        let next = advance(&TrajectorySample { t, position: x, speed: v, accel: 0.0 }, seg.accel, seg.duration);
        t = next.t;
        x = next.position;
        v = next.speed;
    }
    if v > 0.0 {
        t + (target_position - x) / v
    } else {
        f64::INFINITY
    }
}

/// Smallest τ in [0, horizon] with v·τ + ½·a·τ² = gap, assuming the car moves
/// forward throughout the window.
pub(crate) fn first_hit(v: f64, a: f64, gap: f64, horizon: f64) -> Option<f64> {
    if gap <= 0.0 {
        return Some(0.0);
    }
    let tau = if a == 0.0 {
        if v <= 0.0 {
            return None;
        }
        gap / v
    } else {
        let disc = v * v + 2.0 * a * gap;
        if disc < 0.0 {
            return None;
        }
        // stable root of ½aτ² + vτ − gap = 0
        2.0 * gap / (v + disc.sqrt())
    };
    (tau <= horizon).then_some(tau)
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory has no samples")]
    Empty,
    #[error("sample spacing is not uniform at row {row}: expected {expected} s, found {found} s")]
    NonUniformStep { row: usize, expected: f64, found: f64 },
}

/// Tolerance on sample spacing, seconds.
pub const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub street_length: f64,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>, street_length: f64) -> Self {
        Self { samples, street_length }
    }

    /// Step size, or `None` for fewer than two samples.
    pub fn dt(&self) -> Option<f64> {
        match self.samples.as_slice() {
            [a, b, ..] => Some(b.t - a.t),
            _ => None,
        }
    }

    /// Checks that samples are evenly spaced and returns the spacing
    /// (0 for a single sample).
    pub fn uniform_dt(&self) -> Result<f64, TrajectoryError> {
        if self.samples.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        let Some(dt) = self.dt() else { return Ok(0.0) };
        for (i, w) in self.samples.windows(2).enumerate() {
            let found = w[1].t - w[0].t;
            if (found - dt).abs() > STEP_TOLERANCE {
                return Err(TrajectoryError::NonUniformStep { row: i + 1, expected: dt, found });
            }
        }
        Ok(dt)
    }

    /// Time from the first sample to the street end. A trajectory whose last
    /// step overshoots the end is timed at the exact in-step crossing,
    /// otherwise it runs to its last sample.
    pub fn trip_time(&self) -> f64 {
        let (Some(a), Some(b)) = (self.samples.first(), self.samples.last()) else { return 0.0 };
        if b.position > self.street_length {
            if let Some(t) = self.arrival_time(self.street_length) {
                return t - a.t;
            }
        }
        b.t - a.t
    }

    pub fn final_position(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.position)
    }

    pub fn max_speed(&self) -> f64 {
        self.samples.iter().map(|s| s.speed).fold(0.0, f64::max)
    }

    /// Exact time at which the trajectory first reaches `position`, using the
    /// constant-acceleration motion inside each step.
    pub fn arrival_time(&self, position: f64) -> Option<f64> {
        let first = self.samples.first()?;
        if first.position >= position {
            return Some(first.t);
        }
        for w in self.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.position >= position {
                let horizon = b.t - a.t;
                let moving = if a.accel < 0.0 { (a.speed / -a.accel).min(horizon) } else { horizon };
                let tau = first_hit(a.speed, a.accel, position - a.position, moving).unwrap_or(moving);
                return Some(a.t + tau);
            }
        }
        None
    }

    /// Position at time `t`, following the in-step kinematics.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        let first = self.samples.first()?;
        if t <= first.t {
            return Some(first.position);
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        let s = &self.samples[idx - 1];
        if idx == self.samples.len() {
            return Some(s.position + s.speed * (t - s.t));
        }
        Some(advance(s, s.accel, t - s.t).position)
    }
}
