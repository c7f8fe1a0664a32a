//! Suite configuration files (TOML).
//!
//! ```toml
//! format_version = 1
//!
//! [street]
//! length_m = 500.0
//! width_m = 13.0
//! pedestrian_speed_mps = 0.67
//! crossing_duration_s = 20.0      # optional, defaults to width / pedestrian speed
//!
//! [limits]
//! v_max_mps = 13.4
//! a_accel_mps2 = 2.6
//! a_decel_mps2 = 4.5
//! a_emergency_mps2 = 9.0
//! dt_s = 0.5
//!
//! [modes]
//! accel_epsilon_mps2 = 0.05
//! idle_speed_mps = 0.1
//!
//! [[vehicles]]
//! label = "camry"
//! mass_kg = 1644.0
//! f0_n = 113.82
//! f2_n_s2_per_m2 = 0.36
//! eta = 0.21
//!
//! [[scenarios]]
//! name = "scenario-1"
//!
//! [[scenarios.crossings]]
//! location_m = 160.0
//! start_s = 4.0
//! receipt_s = 4.0                 # optional, defaults to start_s
//! duration_s = 20.0               # optional, defaults to the street's
//! ```
//!
//! Every section except `[[scenarios]]` is optional and falls back to the
//! built-in defaults. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{KinematicLimits, SpecError, VehicleSpec};
use crate::energy::ModeThresholds;
use crate::scenario::{canonical_scenarios, CrossingAlert, ScenarioConfig, Street};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub format_version: u32,
    #[serde(default)]
    pub street: StreetSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub modes: ModesSection,
    #[serde(default = "default_vehicles")]
    pub vehicles: Vec<VehicleSection>,
    pub scenarios: Vec<ScenarioSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetSection {
    pub length_m: f64,
    pub width_m: f64,
    pub pedestrian_speed_mps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossing_duration_s: Option<f64>,
}

impl Default for StreetSection {
    fn default() -> Self {
        let s = Street::default();
        Self {
            length_m: s.length,
            width_m: s.width,
            pedestrian_speed_mps: s.pedestrian_speed,
            crossing_duration_s: Some(s.crossing_duration),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub v_max_mps: f64,
    pub a_accel_mps2: f64,
    pub a_decel_mps2: f64,
    pub a_emergency_mps2: f64,
    pub dt_s: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        KinematicLimits::default().into()
    }
}

impl From<KinematicLimits> for LimitsSection {
    fn from(l: KinematicLimits) -> Self {
        Self {
            v_max_mps: l.v_max,
            a_accel_mps2: l.a_accel,
            a_decel_mps2: l.a_decel,
            a_emergency_mps2: l.a_emergency,
            dt_s: l.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    pub accel_epsilon_mps2: f64,
    pub idle_speed_mps: f64,
}

impl Default for ModesSection {
    fn default() -> Self {
        let m = ModeThresholds::default();
        Self { accel_epsilon_mps2: m.accel_epsilon, idle_speed_mps: m.idle_speed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub label: String,
    pub mass_kg: f64,
    pub f0_n: f64,
    pub f2_n_s2_per_m2: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

fn default_eta() -> f64 {
    crate::dynamics::DEFAULT_ETA
}

fn default_vehicles() -> Vec<VehicleSection> {
    [VehicleSpec::camry(), VehicleSpec::highlander()].iter().map(VehicleSection::from).collect()
}

impl From<&VehicleSpec> for VehicleSection {
    fn from(v: &VehicleSpec) -> Self {
        Self { label: v.label.clone(), mass_kg: v.mass, f0_n: v.f0, f2_n_s2_per_m2: v.f2, eta: v.eta }
    }
}

impl VehicleSection {
    pub fn to_spec(&self) -> Result<VehicleSpec, SpecError> {
        VehicleSpec::new(self.label.clone(), self.mass_kg, self.f0_n, self.f2_n_s2_per_m2, self.eta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    #[serde(default)]
    pub crossings: Vec<CrossingSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingSection {
    pub location_m: f64,
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

/// A parsed configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub file: SuiteFile,
    pub scenarios: Vec<ScenarioConfig>,
    pub thresholds: ModeThresholds,
}

impl ResolvedConfig {
    /// SHA-256 of the canonical TOML rendering of the resolved file.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(&self.file).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl SuiteFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let file: SuiteFile = toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
        if file.format_version != FORMAT_VERSION {
            return Err(ConfigError::Version(file.format_version));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The six canonical scenarios on the default street, for both reference cars.
    pub fn canonical() -> Self {
        let defaults = ScenarioConfig::with_defaults("defaults");
        let scenarios = canonical_scenarios(&defaults)
            .into_iter()
            .map(|sc| ScenarioSection {
                name: sc.name,
                crossings: sc
                    .alerts
                    .iter()
                    .map(|a| CrossingSection { location_m: a.location, start_s: a.crossing_start, receipt_s: None, duration_s: None })
                    .collect(),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            street: StreetSection::default(),
            limits: LimitsSection::default(),
            modes: ModesSection::default(),
            vehicles: default_vehicles(),
            scenarios,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn set_eta(&mut self, eta: f64) {
        for v in &mut self.vehicles {
            v.eta = eta;
        }
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.limits.dt_s = dt;
    }

    /// Fill defaults, validate, and expand scenarios × vehicles.
    pub fn resolve(mut self) -> Result<ResolvedConfig, ConfigError> {
        let st = &mut self.street;
        if !(st.length_m > 0.0 && st.width_m > 0.0 && st.pedestrian_speed_mps > 0.0) {
            return Err(ConfigError::Invalid(format!("street parameters must be positive: {st:?}")));
        }
        let duration = *st.crossing_duration_s.get_or_insert(st.width_m / st.pedestrian_speed_mps);
        if !(duration > 0.0) {
            return Err(ConfigError::Invalid(format!("crossing duration must be positive, got {duration}")));
        }
        let street = Street {
            length: st.length_m,
            width: st.width_m,
            pedestrian_speed: st.pedestrian_speed_mps,
            crossing_duration: duration,
        };
        let l = &self.limits;
        let limits = KinematicLimits {
            v_max: l.v_max_mps,
            a_accel: l.a_accel_mps2,
            a_decel: l.a_decel_mps2,
            a_emergency: l.a_emergency_mps2,
            dt: l.dt_s,
        };
        limits.validate()?;
        let thresholds = ModeThresholds { accel_epsilon: self.modes.accel_epsilon_mps2, idle_speed: self.modes.idle_speed_mps };
        if !(thresholds.accel_epsilon > 0.0 && thresholds.idle_speed > 0.0) {
            return Err(ConfigError::Invalid(format!("mode thresholds must be positive: {thresholds:?}")));
        }
        if self.vehicles.is_empty() {
            return Err(ConfigError::Invalid("no vehicles configured".into()));
        }
        let vehicles = self.vehicles.iter().map(VehicleSection::to_spec).collect::<Result<Vec<_>, _>>()?;
        for (i, v) in vehicles.iter().enumerate() {
            if vehicles[..i].iter().any(|w| w.label == v.label) {
                return Err(ConfigError::Invalid(format!("duplicate vehicle label '{}'", v.label)));
            }
        }
        if self.scenarios.is_empty() {
            return Err(ConfigError::Invalid("no scenarios configured".into()));
        }

        let mut scenarios = Vec::new();
        for (i, sec) in self.scenarios.iter_mut().enumerate() {
            if sec.name.is_empty() || sec.name.contains(['/', '\\']) {
                return Err(ConfigError::Invalid(format!("scenario {} has an unusable name '{}'", i + 1, sec.name)));
            }
            let mut alerts = Vec::new();
            for c in &mut sec.crossings {
                let receipt = *c.receipt_s.get_or_insert(c.start_s);
                let d = *c.duration_s.get_or_insert(duration);
                let alert = CrossingAlert { receipt_time: receipt, location: c.location_m, crossing_start: c.start_s, crossing_duration: d };
                if !(d > 0.0) || receipt < c.start_s || receipt >= alert.crossing_end() {
                    return Err(ConfigError::Invalid(format!(
                        "scenario '{}': crossing at {} m must be received during the crossing (start {}, receipt {receipt}, duration {d})",
                        sec.name, c.location_m, c.start_s
                    )));
                }
                if !(0.0..=street.length).contains(&c.location_m) {
                    return Err(ConfigError::Invalid(format!(
                        "scenario '{}': crossing at {} m lies outside the street",
                        sec.name, c.location_m
                    )));
                }
                alerts.push(alert);
            }
            for v in &vehicles {
                scenarios.push(ScenarioConfig { name: sec.name.clone(), street, alerts: alerts.clone(), vehicle: v.clone(), limits });
            }
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::Invalid(format!("duplicate scenario name '{}'", w[0])));
        }
        Ok(ResolvedConfig { file: self, scenarios, thresholds })
    }
}
