//! Speed responses to midblock crossing alerts.
//!
//! An alert tells the car where a crossing cohort is and when the crossing
//! will be over. The informed policies keep the car slow enough to reach each
//! crossing no earlier than its end time:
//!
//! * [`PolicyId::Option1`] adopts every new safe speed immediately.
//! * [`PolicyId::Option2`] may hold its current speed while a nearer crossing
//!   is still ahead, and only slows for a farther crossing once past it.
//!
//! Two uninformed references complete the comparison: [`PolicyId::SuddenStop`]
//! notices a crossing only at emergency braking distance, and
//! [`PolicyId::NoPeds`] cruises at the limit as if nobody were crossing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    advance, braking_distance, first_hit, steer, KinematicLimits, Trajectory, TrajectorySample,
};

/// Distance kept between a stopped car and the crossing line, m.
pub const STOP_STANDOFF: f64 = 1.0;

/// Slack allowed when comparing an arrival time with a crossing end time, s.
pub const ARRIVAL_TOLERANCE: f64 = 1e-6;

/// Two safe speeds closer than this are treated as equal, m/s.
const SPEED_TIE: f64 = 1e-9;

/// Extra distance on top of the comfort braking envelope at which a deferred
/// constraint is enforced even though its anchor crossing is still ahead, m.
const DEFER_MARGIN: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("alert {ordinal}: {reason}")]
    MalformedScenario { ordinal: u32, reason: String },
    #[error("alert {ordinal} cannot be honoured: {policy} reaches {location} m at t={arrival:.3} s, before the crossing ends at {crossing_end} s")]
    InfeasibleConstraint { policy: PolicyId, ordinal: u32, location: f64, arrival: f64, crossing_end: f64 },
    #[error("{policy} did not reach the end of the street within {horizon} s")]
    Stalled { policy: PolicyId, horizon: f64 },
    #[error("invalid run parameters: {0}")]
    Parameters(String),
}

/// A crossing announcement received by the car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    /// 1-based message number.
    pub ordinal: u32,
    pub receipt_time: f64,
    /// Street coordinate of the crossing, m.
    pub location: f64,
    /// When the cohort stepped off the curb.
    pub crossing_start: f64,
    /// When the cohort will have cleared the street.
    pub crossing_end: f64,
}

impl AlertEvent {
    pub fn remaining_at_receipt(&self) -> f64 {
        self.crossing_end - self.receipt_time
    }

    /// Is the crossing in progress at `t`?
    pub fn is_crossing(&self, t: f64) -> bool {
        self.crossing_start <= t && t < self.crossing_end
    }

    pub fn validate(&self, street_length: f64) -> Result<(), PolicyError> {
        let bad = |reason: String| PolicyError::MalformedScenario { ordinal: self.ordinal, reason };
        let fields = [self.receipt_time, self.location, self.crossing_start, self.crossing_end];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite field".into()));
        }
        if self.crossing_end <= self.receipt_time {
            return Err(bad(format!(
                "crossing ends at {} s, not after receipt at {} s",
                self.crossing_end, self.receipt_time
            )));
        }
        if self.receipt_time < self.crossing_start {
            return Err(bad(format!(
                "received at {} s, before the crossing starts at {} s",
                self.receipt_time, self.crossing_start
            )));
        }
        if !(0.0..=street_length).contains(&self.location) {
            return Err(bad(format!("location {} m outside the street [0, {street_length}]", self.location)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyId {
    Option1,
    Option2,
    NoPeds,
    SuddenStop,
}

impl PolicyId {
    /// Row order used in every report.
    pub const ALL: [PolicyId; 4] = [PolicyId::Option1, PolicyId::Option2, PolicyId::NoPeds, PolicyId::SuddenStop];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::Option1 => "option1",
            PolicyId::Option2 => "option2",
            PolicyId::NoPeds => "nopeds",
            PolicyId::SuddenStop => "suddenstop",
        }
    }

    pub fn is_informed(self) -> bool {
        matches!(self, PolicyId::Option1 | PolicyId::Option2)
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        PolicyId::ALL
            .into_iter()
            .find(|p| p.as_str() == key)
            .ok_or_else(|| format!("unknown policy '{s}'"))
    }
}

/// Maximum speed that reaches `alert.location` no earlier than its crossing
/// end, capped by `prev_v_safe`.
///
/// A finished crossing (`now >= crossing_end`) or one the car has already
/// passed leaves `prev_v_safe` unchanged.
pub fn safe_speed(prev_v_safe: f64, car_position: f64, alert: &AlertEvent, now: f64) -> f64 {
    let remaining = alert.crossing_end - now;
    let distance = alert.location - car_position;
    if remaining <= 0.0 || distance <= 0.0 {
        return prev_v_safe;
    }
    prev_v_safe.min(distance / remaining)
}

/// End-of-step speed to command so that the car, changing speed linearly over
/// the next `dt`, stays on schedule to reach `alert.location` no earlier than
/// the crossing end. When already on schedule this is the car's own speed,
/// i.e. the [`safe_speed`] ratio; otherwise it also makes up the lag left by
/// earlier rate-limited steps. Unbounded for a finished or passed crossing.
pub fn tracking_speed(car: &TrajectorySample, alert: &AlertEvent, dt: f64) -> f64 {
    let remaining = alert.crossing_end - car.t;
    let distance = alert.location - car.position;
    if remaining <= 0.0 || distance <= 0.0 {
        return f64::INFINITY;
    }
    let v = car.speed;
    if remaining > dt {
        return (distance - 0.5 * v * dt) / (remaining - 0.5 * dt);
    }
    // the crossing line falls inside this step
    if distance >= v * remaining {
        distance / remaining
    } else {
        v + 2.0 * (distance - v * remaining) / (remaining * remaining) * dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintStatus {
    /// Known but deferred until a nearer crossing is passed.
    Pending,
    /// Shapes the commanded speed.
    Governing,
    /// The car is at or beyond the crossing line.
    Passed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arbitration {
    /// No earlier constraint competes, or the new one is no tighter.
    AdoptDirectly,
    /// The tighter crossing is nearer than the current one.
    MustDecelerateNow,
    /// The tighter crossing lies beyond the current one.
    MayDefer,
}

/// A received alert and what the controller did with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveConstraint {
    pub alert: AlertEvent,
    /// Safe speed when the alert was processed.
    pub v_safe: f64,
    pub status: ConstraintStatus,
    pub decision: Arbitration,
    pub adopted_at: f64,
    /// Location that has to be passed before a pending constraint governs.
    pub defer_until: Option<f64>,
    pub activated_at: Option<f64>,
    pub passed_at: Option<f64>,
}

impl ActiveConstraint {
    fn is_live(&self, car_position: f64, now: f64) -> bool {
        car_position < self.alert.location && now < self.alert.crossing_end
    }
}

/// The live constraint with the lowest safe speed at (`car_position`, `now`),
/// nearest location first on ties.
pub fn current_constraint(
    constraints: &[ActiveConstraint],
    car_position: f64,
    now: f64,
    v_max: f64,
) -> Option<&ActiveConstraint> {
    constraints
        .iter()
        .filter(|c| c.is_live(car_position, now))
        .map(|c| (safe_speed(v_max, car_position, &c.alert, now), c))
        .min_by(|(va, a), (vb, b)| {
            va.total_cmp(vb).then(a.alert.location.total_cmp(&b.alert.location))
        })
        .map(|(_, c)| c)
}

/// Decide how a new alert relates to the constraint currently holding the
/// car back. Speeds are evaluated at (`car_position`, `now`), capped at `v_max`.
pub fn arbitrate(
    current: Option<&ActiveConstraint>,
    incoming: &AlertEvent,
    car_position: f64,
    now: f64,
    v_max: f64,
) -> Arbitration {
    let Some(current) = current else {
        return Arbitration::AdoptDirectly;
    };
    let v_current = safe_speed(v_max, car_position, &current.alert, now);
    let v_incoming = safe_speed(v_max, car_position, incoming, now);
    if v_incoming >= v_current - SPEED_TIE {
        Arbitration::AdoptDirectly
    } else if incoming.location <= current.alert.location {
        Arbitration::MustDecelerateNow
    } else {
        Arbitration::MayDefer
    }
}

/// A trajectory produced by one policy for one alert sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: PolicyId,
    pub alerts: Vec<AlertEvent>,
    pub trajectory: Trajectory,
    pub constraints: Vec<ActiveConstraint>,
}

impl PolicyRun {
    pub fn deferred_any(&self) -> bool {
        self.constraints.iter().any(|c| c.decision == Arbitration::MayDefer)
    }
}

/// Synthesize the trajectory of `policy` from position 0 at `v_max`, t = 0,
/// until the car reaches `street_length`.
pub fn run_policy(
    policy: PolicyId,
    alerts: &[AlertEvent],
    limits: &KinematicLimits,
    street_length: f64,
) -> Result<PolicyRun, PolicyError> {
    limits.validate().map_err(|e| PolicyError::Parameters(e.to_string()))?;
    if !(street_length > 0.0 && street_length.is_finite()) {
        return Err(PolicyError::Parameters(format!("street length {street_length}")));
    }
    for alert in alerts {
        alert.validate(street_length)?;
    }
    if let Some(w) = alerts.windows(2).find(|w| w[1].receipt_time < w[0].receipt_time) {
        return Err(PolicyError::MalformedScenario {
            ordinal: w[1].ordinal,
            reason: "alerts are not sorted by receipt time".into(),
        });
    }

    let latest_end = alerts.iter().map(|a| a.crossing_end).fold(0.0, f64::max);
    let horizon = latest_end + 4.0 * street_length / limits.v_max + 600.0;
    let sim = Sim { policy, alerts, limits, street_length, max_steps: (horizon / limits.dt).ceil() as usize };
    let (samples, constraints) = match policy {
        PolicyId::NoPeds => sim.cruise()?,
        PolicyId::SuddenStop => sim.sudden_stop()?,
        PolicyId::Option1 | PolicyId::Option2 => sim.informed(policy == PolicyId::Option2)?,
    };
    Ok(PolicyRun {
        policy,
        alerts: alerts.to_vec(),
        trajectory: Trajectory::new(samples, street_length),
        constraints,
    })
}

struct Sim<'a> {
    policy: PolicyId,
    alerts: &'a [AlertEvent],
    limits: &'a KinematicLimits,
    street_length: f64,
    max_steps: usize,
}

type SimOutput = (Vec<TrajectorySample>, Vec<ActiveConstraint>);

impl Sim<'_> {
    fn time(&self, k: usize) -> f64 {
        k as f64 * self.limits.dt
    }

    fn stalled(&self) -> PolicyError {
        PolicyError::Stalled { policy: self.policy, horizon: self.time(self.max_steps) }
    }

    /// Drive a per-step controller until the street end. `control` returns
    /// the acceleration for the interval starting at the given sample along
    /// with the next sample.
    fn drive<F>(&self, mut control: F) -> Result<Vec<TrajectorySample>, PolicyError>
    where
        F: FnMut(usize, &TrajectorySample) -> Result<(f64, TrajectorySample), PolicyError>,
    {
        let mut state = TrajectorySample::cruising(0.0, 0.0, self.limits.v_max);
        let mut samples = Vec::new();
        for k in 0..self.max_steps {
            state.t = self.time(k);
            if state.position >= self.street_length {
                state.accel = 0.0;
                samples.push(state);
                return Ok(samples);
            }
            let (accel, next) = control(k, &state)?;
            state.accel = accel;
            samples.push(state);
            state = next;
        }
        Err(self.stalled())
    }

    fn cruise(&self) -> Result<SimOutput, PolicyError> {
        let samples = self.drive(|_, s| Ok((0.0, advance(s, 0.0, self.limits.dt))))?;
        Ok((samples, Vec::new()))
    }

    /// Fails if the step from `from` to `to` crosses `alert.location` before
    /// the crossing is over.
    fn check_arrival(&self, alert: &AlertEvent, from: &TrajectorySample, accel: f64, to: &TrajectorySample) -> Result<(), PolicyError> {
        if from.position >= alert.location || to.position < alert.location {
            return Ok(());
        }
        let moving = if accel < 0.0 { (from.speed / -accel).min(self.limits.dt) } else { self.limits.dt };
        let tau = first_hit(from.speed, accel, alert.location - from.position, moving).unwrap_or(moving);
        let arrival = from.t + tau;
        if arrival >= alert.crossing_start && arrival < alert.crossing_end - ARRIVAL_TOLERANCE {
            return Err(PolicyError::InfeasibleConstraint {
                policy: self.policy,
                ordinal: alert.ordinal,
                location: alert.location,
                arrival,
                crossing_end: alert.crossing_end,
            });
        }
        Ok(())
    }

    fn informed(&self, may_defer: bool) -> Result<SimOutput, PolicyError> {
        let lim = *self.limits;
        let mut constraints: Vec<ActiveConstraint> = Vec::new();
        let mut delivered = 0usize;
        let mut last: Option<TrajectorySample> = None;

        let samples = self.drive(|_, s| {
            let (t, x) = (s.t, s.position);

            for c in constraints.iter_mut() {
                if c.status != ConstraintStatus::Passed && x >= c.alert.location {
                    c.status = ConstraintStatus::Passed;
                    c.passed_at = Some(t);
                }
            }
            for c in constraints.iter_mut() {
                if c.status == ConstraintStatus::Pending && c.defer_until.is_some_and(|anchor| x >= anchor) {
                    c.status = ConstraintStatus::Governing;
                    c.activated_at = Some(t);
                }
            }

            while delivered < self.alerts.len() && self.alerts[delivered].receipt_time <= t {
                let alert = self.alerts[delivered];
                delivered += 1;
                // decide on the car's state when the message arrived, which
                // may lie inside the previous step
                let (rx, rt) = match last {
                    Some(p) if alert.receipt_time > p.t && alert.receipt_time < t => {
                        (advance(&p, p.accel, alert.receipt_time - p.t).position, alert.receipt_time)
                    }
                    _ => (x, t),
                };
                let v_safe = safe_speed(lim.v_max, rx, &alert, rt);
                if rx >= alert.location {
                    constraints.push(ActiveConstraint {
                        alert,
                        v_safe,
                        status: ConstraintStatus::Passed,
                        decision: Arbitration::AdoptDirectly,
                        adopted_at: t,
                        defer_until: None,
                        activated_at: None,
                        passed_at: Some(t),
                    });
                    continue;
                }
                let current = current_constraint(&constraints, rx, rt, lim.v_max);
                let decision = arbitrate(current, &alert, rx, rt, lim.v_max);
                let defer_until = match (decision, current) {
                    (Arbitration::MayDefer, Some(c)) if may_defer => Some(c.alert.location),
                    _ => None,
                };
                let (status, activated_at) = match defer_until {
                    Some(_) => (ConstraintStatus::Pending, None),
                    None => (ConstraintStatus::Governing, Some(t)),
                };
                constraints.push(ActiveConstraint {
                    alert,
                    v_safe,
                    status,
                    decision,
                    adopted_at: t,
                    defer_until,
                    activated_at,
                    passed_at: None,
                });
            }

            // a deferred crossing may not be left until it is out of braking reach
            let envelope = braking_distance(s.speed, lim.a_decel) + s.speed * lim.dt + DEFER_MARGIN;
            for c in constraints.iter_mut() {
                if c.status == ConstraintStatus::Pending && c.alert.location - x <= envelope {
                    c.status = ConstraintStatus::Governing;
                    c.activated_at = Some(t);
                }
            }

            let target = constraints
                .iter()
                .filter(|c| c.status == ConstraintStatus::Governing)
                .fold(lim.v_max, |v, c| v.min(tracking_speed(s, &c.alert, lim.dt)));
            let (accel, mut next) = steer(s, target, lim.a_accel, lim.a_decel, lim.dt);
            next.t = t + lim.dt;
            for c in constraints.iter().filter(|c| c.status != ConstraintStatus::Passed) {
                self.check_arrival(&c.alert, s, accel, &next)?;
            }
            last = Some(TrajectorySample { accel, ..*s });
            Ok((accel, next))
        })?;
        Ok((samples, constraints))
    }

    fn sudden_stop(&self) -> Result<SimOutput, PolicyError> {
        let lim = *self.limits;
        let samples = self.drive(|_, s| {
            let (t, x, v) = (s.t, s.position, s.speed);
            let (_, free) = steer(s, lim.v_max, lim.a_accel, lim.a_decel, lim.dt);

            // strongest braking demanded by a crossing the driver can see
            let mut brake: Option<f64> = None;
            for alert in self.alerts.iter().filter(|a| a.is_crossing(t) && a.location > x) {
                let stop_line = alert.location - STOP_STANDOFF;
                let noticed = stop_line - free.position < braking_distance(free.speed, lim.a_emergency);
                if !noticed {
                    continue;
                }
                let demand = if v == 0.0 {
                    0.0
                } else {
                    let gap = if stop_line > x { stop_line - x } else { alert.location - x };
                    v * v / (2.0 * gap)
                };
                if demand > lim.a_emergency * (1.0 + 1e-9) {
                    return Err(PolicyError::InfeasibleConstraint {
                        policy: self.policy,
                        ordinal: alert.ordinal,
                        location: alert.location,
                        arrival: t + (alert.location - x) / v,
                        crossing_end: alert.crossing_end,
                    });
                }
                brake = Some(brake.map_or(demand, |b: f64| b.max(demand)));
            }

            let (accel, mut next) = match brake {
                Some(0.0) => (0.0, advance(s, 0.0, lim.dt)),
                Some(demand) => (-demand, advance(s, -demand, lim.dt)),
                None => steer(s, lim.v_max, lim.a_accel, lim.a_decel, lim.dt),
            };
            next.t = t + lim.dt;
            for alert in self.alerts {
                self.check_arrival(alert, s, accel, &next)?;
            }
            Ok((accel, next))
        })?;
        Ok((samples, Vec::new()))
    }
}

/// True when no alert's crossing line is reached while that crossing is
/// still under way. Crossings the car had already passed at receipt do not
/// count.
pub fn collision_free(run: &PolicyRun) -> bool {
    run.alerts.iter().all(|alert| match run.trajectory.arrival_time(alert.location) {
        None => true,
        Some(arrival) if arrival < alert.receipt_time => true,
        Some(arrival) => arrival >= alert.crossing_end - ARRIVAL_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alert(ordinal: u32, start: f64, location: f64, duration: f64) -> AlertEvent {
        AlertEvent { ordinal, receipt_time: start, location, crossing_start: start, crossing_end: start + duration }
    }

    fn constraint(a: AlertEvent) -> ActiveConstraint {
        ActiveConstraint {
            alert: a,
            v_safe: 0.0,
            status: ConstraintStatus::Governing,
            decision: Arbitration::AdoptDirectly,
            adopted_at: a.receipt_time,
            defer_until: None,
            activated_at: None,
            passed_at: None,
        }
    }

    #[test]
    fn safe_speed_examples() {
        assert_eq!(safe_speed(13.4, 0.0, &alert(1, 0.0, 134.0, 10.0), 0.0), 13.4);
        assert_eq!(safe_speed(13.4, 0.0, &alert(1, 0.0, 100.0, 20.0), 0.0), 5.0);
        assert_eq!(safe_speed(4.0, 0.0, &alert(1, 0.0, 100.0, 20.0), 0.0), 4.0);
    }

    #[test]
    fn safe_speed_vacuous_cases() {
        let a = alert(1, 0.0, 100.0, 20.0);
        assert_eq!(safe_speed(7.0, 0.0, &a, 20.0), 7.0);
        assert_eq!(safe_speed(7.0, 0.0, &a, 25.0), 7.0);
        assert_eq!(safe_speed(7.0, 100.0, &a, 5.0), 7.0);
        assert_eq!(safe_speed(7.0, 120.0, &a, 5.0), 7.0);
    }

    #[test]
    fn arbitration_examples() {
        let incoming = alert(2, 20.0, 200.0, 20.0);
        assert_eq!(arbitrate(None, &incoming, 0.0, 20.0, 13.4), Arbitration::AdoptDirectly);

        // current crossing is far and loose; the nearer one is tighter
        let far = constraint(alert(1, 10.0, 300.0, 20.0));
        assert_eq!(arbitrate(Some(&far), &incoming, 150.0, 20.0, 13.4), Arbitration::MustDecelerateNow);

        let near = constraint(alert(1, 10.0, 200.0, 20.0));
        let farther = alert(2, 15.0, 210.0, 20.0);
        assert_eq!(arbitrate(Some(&near), &farther, 150.0, 15.0, 13.4), Arbitration::MayDefer);
    }

    #[test]
    fn arbitration_ties() {
        let cur = constraint(alert(1, 0.0, 200.0, 20.0));
        // same location, tighter: conservative branch
        let same = AlertEvent { crossing_end: 30.0, ..alert(2, 5.0, 200.0, 20.0) };
        let cur_late = constraint(AlertEvent { crossing_end: 25.0, ..cur.alert });
        assert_eq!(arbitrate(Some(&cur_late), &same, 100.0, 5.0, 13.4), Arbitration::MustDecelerateNow);
        // equal speeds never defer
        let equal = AlertEvent { location: 300.0, crossing_end: 20.0 + 100.0 / 5.0, ..alert(2, 0.0, 0.0, 0.0) };
        let v_cur = safe_speed(13.4, 100.0, &cur.alert, 0.0);
        let v_eq = safe_speed(13.4, 100.0, &equal, 0.0);
        assert!((v_cur - v_eq).abs() < 1e-12);
        assert_eq!(arbitrate(Some(&cur), &equal, 100.0, 0.0, 13.4), Arbitration::AdoptDirectly);
    }

    #[test]
    fn no_alerts_matches_nopeds() {
        let lim = KinematicLimits::default();
        let base = run_policy(PolicyId::NoPeds, &[], &lim, 500.0).unwrap();
        for p in PolicyId::ALL {
            let run = run_policy(p, &[], &lim, 500.0).unwrap();
            assert_eq!(run.trajectory, base.trajectory, "{p}");
        }
        assert!(base.trajectory.samples.iter().all(|s| s.speed == 13.4));
        assert!(base.trajectory.final_position() >= 500.0);
    }

    #[test]
    fn exact_fit_alert_needs_no_braking() {
        let lim = KinematicLimits::default();
        let run = run_policy(PolicyId::Option1, &[alert(1, 0.0, 134.0, 10.0)], &lim, 500.0).unwrap();
        assert!(run.trajectory.samples.iter().all(|s| (s.speed - 13.4).abs() < 1e-9 && s.accel.abs() < 1e-9));
        let arrival = run.trajectory.arrival_time(134.0).unwrap();
        // sub-stepped constant-speed integration
        let mut x = 0.0;
        let mut k = 0u32;
        while x < 134.0 {
            x += 13.4 * 1e-3;
            k += 1;
        }
        assert!((arrival - 10.0).abs() < 1e-9);
        assert!((f64::from(k) * 1e-3 - arrival).abs() < 2e-3);
        assert!(collision_free(&run));
    }

    #[test]
    fn constant_speed_against_close_crossing_collides() {
        let lim = KinematicLimits::default();
        let mut run = run_policy(PolicyId::NoPeds, &[], &lim, 500.0).unwrap();
        assert!(collision_free(&run));
        run.alerts.push(alert(1, 0.0, 50.0, 20.0));
        assert!(!collision_free(&run));
    }

    #[test]
    fn option1_slows_for_single_alert() {
        let lim = KinematicLimits::default();
        let a = alert(1, 5.0, 250.0, 20.0);
        let run = run_policy(PolicyId::Option1, &[a], &lim, 500.0).unwrap();
        assert!(collision_free(&run));
        let traj = &run.trajectory;
        let arrival = traj.arrival_time(250.0).unwrap();
        assert!((25.0 - ARRIVAL_TOLERANCE..25.0 + 0.5).contains(&arrival), "{arrival}");
        assert!(traj.samples.iter().all(|s| s.speed > 0.0));
        assert_eq!(traj.samples.last().unwrap().speed, 13.4);
    }

    #[test]
    fn sudden_stop_idles_until_crossing_ends() {
        let lim = KinematicLimits::default();
        let a = alert(1, 5.0, 250.0, 20.0);
        let run = run_policy(PolicyId::SuddenStop, &[a], &lim, 500.0).unwrap();
        assert!(collision_free(&run));
        let stopped: Vec<_> = run.trajectory.samples.iter().filter(|s| s.speed == 0.0).collect();
        assert!(!stopped.is_empty());
        for s in &stopped {
            assert!((s.position - (250.0 - STOP_STANDOFF)).abs() < 1e-9, "{s:?}");
            assert!(s.t <= 25.0);
        }
        let peak_brake = run.trajectory.samples.iter().map(|s| -s.accel).fold(0.0, f64::max);
        assert!(peak_brake <= lim.a_emergency * (1.0 + 1e-9));
    }

    #[test]
    fn sudden_stop_cannot_stop_in_time() {
        let lim = KinematicLimits::default();
        // 13.4 m/s at t=3 is at 40.2 m, only 4.8 m short
        let a = alert(1, 3.0, 45.0, 20.0);
        let err = run_policy(PolicyId::SuddenStop, &[a], &lim, 500.0).unwrap_err();
        assert!(matches!(err, PolicyError::InfeasibleConstraint { ordinal: 1, .. }), "{err}");
    }

    #[test]
    fn option1_reports_infeasible_alert() {
        let lim = KinematicLimits::default();
        let a = alert(1, 3.0, 45.0, 20.0);
        let err = run_policy(PolicyId::Option1, &[a], &lim, 500.0).unwrap_err();
        assert!(matches!(err, PolicyError::InfeasibleConstraint { .. }), "{err}");
    }

    #[test]
    fn malformed_alerts_rejected() {
        let lim = KinematicLimits::default();
        let mut a = alert(1, 5.0, 250.0, 20.0);
        a.crossing_end = a.receipt_time;
        assert!(matches!(
            run_policy(PolicyId::Option1, &[a], &lim, 500.0),
            Err(PolicyError::MalformedScenario { ordinal: 1, .. })
        ));
        let unsorted = [alert(1, 9.0, 250.0, 20.0), alert(2, 4.0, 300.0, 20.0)];
        assert!(matches!(
            run_policy(PolicyId::Option1, &unsorted, &lim, 500.0),
            Err(PolicyError::MalformedScenario { ordinal: 2, .. })
        ));
        let early = AlertEvent { receipt_time: 2.0, ..alert(1, 5.0, 250.0, 20.0) };
        assert!(run_policy(PolicyId::Option1, &[early], &lim, 500.0).is_err());
        let outside = alert(1, 5.0, 600.0, 20.0);
        assert!(run_policy(PolicyId::Option1, &[outside], &lim, 500.0).is_err());
    }

    #[test]
    fn option2_defers_farther_crossing() {
        let lim = KinematicLimits::default();
        // 200 m crossing first (tight), then a tighter one at 240 m
        let alerts = [alert(1, 2.0, 200.0, 20.0), alert(2, 8.0, 240.0, 20.0)];
        let o1 = run_policy(PolicyId::Option1, &alerts, &lim, 500.0).unwrap();
        let o2 = run_policy(PolicyId::Option2, &alerts, &lim, 500.0).unwrap();
        assert!(o2.deferred_any());
        assert_eq!(o2.constraints[1].decision, Arbitration::MayDefer);
        assert_eq!(o2.constraints[1].defer_until, Some(200.0));
        let activated = o2.constraints[1].activated_at.unwrap();
        let passed_first = o2.constraints[0].passed_at.unwrap();
        assert_eq!(activated, passed_first);
        assert_ne!(o1.trajectory, o2.trajectory);
        assert!(collision_free(&o1) && collision_free(&o2));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyId::ALL {
            assert_eq!(p.as_str().parse::<PolicyId>(), Ok(p));
        }
        assert_eq!("Sudden Stop".parse::<PolicyId>(), Ok(PolicyId::SuddenStop));
        assert_eq!("No Peds".parse::<PolicyId>(), Ok(PolicyId::NoPeds));
        assert!("option3".parse::<PolicyId>().is_err());
    }

    #[test]
    fn tracking_speed_on_schedule_is_the_ratio() {
        let a = alert(1, 0.0, 200.0, 20.0);
        // 100 m to go in 10 s at 10 m/s
        let car = TrajectorySample::cruising(10.0, 100.0, 10.0);
        assert!((tracking_speed(&car, &a, 0.5) - 10.0).abs() < 1e-12);
        assert_eq!(safe_speed(13.4, 100.0, &a, 10.0), 10.0);
        // running fast: aim low enough that the step average is back on schedule
        let fast = TrajectorySample { speed: 11.0, ..car };
        let v = tracking_speed(&fast, &a, 0.5);
        let moved = 0.5 * (11.0 + v) * 0.5;
        assert!(((100.0 - moved) / 9.5 - v).abs() < 1e-12);
        assert_eq!(tracking_speed(&TrajectorySample::cruising(25.0, 100.0, 5.0), &a, 0.5), f64::INFINITY);
    }

    #[test]
    fn tracking_speed_inside_final_step() {
        let a = alert(1, 0.0, 100.0, 20.0);
        // line 1 m ahead, crossing clears in 0.1 s: at 10.5 m/s the car would be early
        let car = TrajectorySample::cruising(19.9, 99.0, 10.5);
        let v = tracking_speed(&car, &a, 0.5);
        let accel = (v - 10.5) / 0.5;
        let at_end = 99.0 + 10.5 * 0.1 + 0.5 * accel * 0.01;
        assert!((at_end - 100.0).abs() < 1e-9, "{at_end}");
        // slower than needed: the ratio, which arrives after the end
        let slow = TrajectorySample { speed: 5.0, ..car };
        assert!((tracking_speed(&slow, &a, 0.5) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn arbitration_uses_state_at_receipt() {
        // the third message arrives between grid points, just before the car
        // passes the first crossing; both grids must see the first crossing live
        let alerts = [
            alert(1, 1.4655814348162304, 189.95231661213637, 20.0),
            alert(2, 12.29571630999236, 336.78279211831006, 20.0),
            alert(3, 21.183111145427645, 380.26470452907955, 20.0),
        ];
        for dt in [0.5, 0.25] {
            let lim = KinematicLimits { dt, ..KinematicLimits::default() };
            let run = run_policy(PolicyId::Option2, &alerts, &lim, 500.0).unwrap();
            assert_eq!(run.constraints[2].decision, Arbitration::AdoptDirectly, "dt={dt}");
            assert!(collision_free(&run));
        }
    }
}
