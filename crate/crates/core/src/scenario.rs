//! Scenario definitions and the four-policy comparison suite.

use serde::{Deserialize, Serialize};

use crate::dynamics::{KinematicLimits, VehicleSpec};
use crate::energy::{energy_of, EnergyReport, ModeDurations, ModeThresholds};
use crate::policy::{run_policy, AlertEvent, PolicyError, PolicyId, PolicyRun};

pub const MPS_PER_MPH: f64 = 0.44704;

pub fn mps_to_mph(v: f64) -> f64 {
    v / MPS_PER_MPH
}

/// Street geometry and pedestrian parameters shared by every crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Street {
    /// m
    pub length: f64,
    /// m
    pub width: f64,
    /// m/s
    pub pedestrian_speed: f64,
    /// Full crossing time, s.
    pub crossing_duration: f64,
}

impl Default for Street {
    fn default() -> Self {
        Self { length: 500.0, width: 13.0, pedestrian_speed: 0.67, crossing_duration: 20.0 }
    }
}

/// One crossing cohort and when the car hears about it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingAlert {
    pub receipt_time: f64,
    pub location: f64,
    pub crossing_start: f64,
    pub crossing_duration: f64,
}

impl CrossingAlert {
    /// Alert delivered the moment the cohort steps off the curb.
    pub fn at_start(location: f64, crossing_start: f64, crossing_duration: f64) -> Self {
        Self { receipt_time: crossing_start, location, crossing_start, crossing_duration }
    }

    pub fn crossing_end(&self) -> f64 {
        self.crossing_start + self.crossing_duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub street: Street,
    pub alerts: Vec<CrossingAlert>,
    pub vehicle: VehicleSpec,
    pub limits: KinematicLimits,
}

impl ScenarioConfig {
    pub fn with_defaults(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            street: Street::default(),
            alerts: Vec::new(),
            vehicle: VehicleSpec::camry(),
            limits: KinematicLimits::default(),
        }
    }

    /// Alert messages in receipt order, numbered from 1.
    pub fn alert_events(&self) -> Vec<AlertEvent> {
        let mut alerts = self.alerts.clone();
        alerts.sort_by(|a, b| a.receipt_time.total_cmp(&b.receipt_time));
        alerts
            .iter()
            .zip(1..)
            .map(|(a, ordinal)| AlertEvent {
                ordinal,
                receipt_time: a.receipt_time,
                location: a.location,
                crossing_start: a.crossing_start,
                crossing_end: a.crossing_end(),
            })
            .collect()
    }

    pub fn run(&self, policy: PolicyId) -> Result<PolicyRun, PolicyError> {
        run_policy(policy, &self.alert_events(), &self.limits, self.street.length)
    }
}

/// Crossing locations (m) and start times (s) of the six canonical scenarios,
/// in the order the crossings begin.
///
/// 1. near and tight, then farther, then farther still; each tighter than the last.
/// 2. near and tight, then farther and tighter, then nearest of all and tighter again.
/// 3. far and loose, then nearer and tight, then one beyond that is looser.
/// 4. like 3, with the third crossing at t = 28 matching the current safe speed.
/// 5. far and loose, then farther and tight, then nearest of all and tighter.
/// 6. far and loose, then nearer and tight, then nearer still and tighter.
pub const CANONICAL_LAYOUTS: [[(f64, f64); 3]; 6] = [
    [(160.0, 4.0), (170.0, 8.0), (180.0, 16.0)],
    [(245.0, 2.0), (280.0, 6.0), (200.0, 12.0)],
    [(430.0, 10.0), (350.0, 20.0), (425.0, 25.0)],
    [(430.0, 10.0), (310.0, 20.0), (320.25, 28.0)],
    [(365.0, 1.0), (415.0, 12.0), (285.0, 15.0)],
    [(430.0, 10.0), (380.0, 20.0), (365.0, 22.0)],
];

pub fn canonical_name(index: usize) -> String {
    format!("scenario-{}", index + 1)
}

/// The six three-crossing scenarios built on the street, vehicle and limits
/// of `defaults`. Alerts arrive when each crossing starts.
pub fn canonical_scenarios(defaults: &ScenarioConfig) -> Vec<ScenarioConfig> {
    CANONICAL_LAYOUTS
        .iter()
        .enumerate()
        .map(|(i, layout)| ScenarioConfig {
            name: canonical_name(i),
            alerts: layout
                .iter()
                .map(|&(location, start)| CrossingAlert::at_start(location, start, defaults.street.crossing_duration))
                .collect(),
            ..defaults.clone()
        })
        .collect()
}

/// Canonical scenarios for each vehicle, ordered by scenario then vehicle.
pub fn canonical_suite(vehicles: &[VehicleSpec], limits: KinematicLimits, street: Street) -> Vec<ScenarioConfig> {
    let defaults = ScenarioConfig { limits, street, ..ScenarioConfig::with_defaults("defaults") };
    canonical_scenarios(&defaults)
        .into_iter()
        .flat_map(|sc| vehicles.iter().map(move |v| ScenarioConfig { vehicle: v.clone(), ..sc.clone() }))
        .collect()
}

/// Outcome of one policy on one scenario and vehicle.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub scenario: String,
    pub vehicle: String,
    pub policy: PolicyId,
    pub outcome: Result<(PolicyRun, EnergyReport), String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub vehicle: String,
    pub policy: PolicyId,
    /// `None` when the run succeeded.
    pub failure: Option<String>,
    pub e_inst_kj: f64,
    pub fuel_kj: f64,
    pub co2_g: f64,
    /// Against the same scenario's NoPeds run.
    pub pct_increase_vs_nopeds: f64,
    /// Against the same scenario's SuddenStop run; positive means less fuel.
    pub pct_reduction_vs_suddenstop: f64,
    pub mode_durations: ModeDurations,
    pub mean_speed_mph: f64,
    pub speed_stddev_mph: f64,
    pub trip_time: f64,
}

impl ComparisonRow {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub runs: Vec<SuiteRun>,
    pub rows: Vec<ComparisonRow>,
}

impl SuiteResult {
    pub fn failures(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(|r| !r.is_ok())
    }

    pub fn row(&self, scenario: &str, vehicle: &str, policy: PolicyId) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.vehicle == vehicle && r.policy == policy)
    }

    pub fn run(&self, scenario: &str, vehicle: &str, policy: PolicyId) -> Option<&SuiteRun> {
        self.runs.iter().find(|r| r.scenario == scenario && r.vehicle == vehicle && r.policy == policy)
    }
}

/// Percentage change of `x` relative to `baseline`.
pub fn pct_change(x: f64, baseline: f64) -> f64 {
    100.0 * (x - baseline) / baseline
}

/// Percentage by which `x` falls below `baseline`.
pub fn pct_reduction(x: f64, baseline: f64) -> f64 {
    100.0 * (baseline - x) / baseline
}

/// Run all four policies on every config. A failed run becomes a row with
/// `failure` set and NaN metrics; the rest of the suite still runs. Rows are
/// sorted by scenario, policy, vehicle.
pub fn run_suite(configs: &[ScenarioConfig], thresholds: &ModeThresholds) -> SuiteResult {
    let runs: Vec<SuiteRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || run_config(cfg, thresholds)))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scenario worker panicked")).collect()
    });

    let mut rows: Vec<ComparisonRow> = runs
        .iter()
        .map(|run| {
            let baseline = |p: PolicyId| -> f64 {
                runs.iter()
                    .find(|r| r.scenario == run.scenario && r.vehicle == run.vehicle && r.policy == p)
                    .and_then(|r| r.outcome.as_ref().ok())
                    .map_or(f64::NAN, |(_, e)| e.e_fuel)
            };
            match &run.outcome {
                Ok((_, e)) => ComparisonRow {
                    scenario: run.scenario.clone(),
                    vehicle: run.vehicle.clone(),
                    policy: run.policy,
                    failure: None,
                    e_inst_kj: e.e_inst / 1000.0,
                    fuel_kj: e.e_fuel / 1000.0,
                    co2_g: e.co2,
                    pct_increase_vs_nopeds: pct_change(e.e_fuel, baseline(PolicyId::NoPeds)),
                    pct_reduction_vs_suddenstop: pct_reduction(e.e_fuel, baseline(PolicyId::SuddenStop)),
                    mode_durations: e.mode_durations,
                    mean_speed_mph: mps_to_mph(e.mean_speed),
                    speed_stddev_mph: mps_to_mph(e.speed_stddev),
                    trip_time: e.trip_time,
                },
                Err(msg) => ComparisonRow {
                    scenario: run.scenario.clone(),
                    vehicle: run.vehicle.clone(),
                    policy: run.policy,
                    failure: Some(msg.clone()),
                    e_inst_kj: f64::NAN,
                    fuel_kj: f64::NAN,
                    co2_g: f64::NAN,
                    pct_increase_vs_nopeds: f64::NAN,
                    pct_reduction_vs_suddenstop: f64::NAN,
                    mode_durations: ModeDurations::default(),
                    mean_speed_mph: f64::NAN,
                    speed_stddev_mph: f64::NAN,
                    trip_time: f64::NAN,
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.scenario
            .cmp(&b.scenario)
            .then(a.policy.cmp(&b.policy))
            .then(a.vehicle.cmp(&b.vehicle))
    });
    SuiteResult { runs, rows }
}

fn run_config(cfg: &ScenarioConfig, thresholds: &ModeThresholds) -> Vec<SuiteRun> {
    PolicyId::ALL
        .into_iter()
        .map(|policy| {
            let outcome = cfg.run(policy).map_err(|e| e.to_string()).and_then(|run| {
                let report = energy_of(&run.trajectory, &cfg.vehicle, thresholds).map_err(|e| e.to_string())?;
                Ok((run, report))
            });
            SuiteRun { scenario: cfg.name.clone(), vehicle: cfg.vehicle.label.clone(), policy, outcome }
        })
        .collect()
}
