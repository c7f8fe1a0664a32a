//! Fuel energy and CO₂ from a speed profile.
//!
//! Tractive power is `m·a·v + f0·v + f2·v³`, charged only while the car is
//! moving and not braking. Fuel energy divides the tractive energy by the
//! drivetrain efficiency, and CO₂ follows from the carbon content of fuel
//! energy.

mod ingest;

pub use ingest::{ingest_trajectory, read_trajectory_file, write_trajectory, IngestError, CSV_HEADER, CSV_HEADER_NO_ACCEL};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Trajectory, TrajectoryError, TrajectorySample, VehicleSpec};

/// Grams of carbon per kJ of fuel energy.
pub const CARBON_CONTENT_G_PER_KJ: f64 = 0.0196;
pub const OXIDATION_FRACTION: f64 = 0.99;
/// Molecular mass of CO₂ over atomic mass of carbon.
pub const CO2_PER_CARBON: f64 = 44.0 / 12.0;

/// Grams of CO₂ per kJ of fuel energy.
pub fn co2_grams_per_kj() -> f64 {
    CARBON_CONTENT_G_PER_KJ * OXIDATION_FRACTION * CO2_PER_CARBON
}

pub fn co2_from_fuel(e_fuel_joules: f64) -> f64 {
    e_fuel_joules / 1000.0 * co2_grams_per_kj()
}

/// Bands used to bucket samples into driving modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeThresholds {
    /// |a| at or below this counts as cruising, m/s².
    pub accel_epsilon: f64,
    /// Speeds at or below this count as standing still, m/s.
    pub idle_speed: f64,
}

impl Default for ModeThresholds {
    fn default() -> Self {
        Self { accel_epsilon: 0.05, idle_speed: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrivingMode {
    Accelerating,
    Decelerating,
    Cruising,
    Idling,
}

impl ModeThresholds {
    pub fn classify(&self, sample: &TrajectorySample) -> DrivingMode {
        if sample.accel > self.accel_epsilon {
            DrivingMode::Accelerating
        } else if sample.accel < -self.accel_epsilon {
            DrivingMode::Decelerating
        } else if sample.speed <= self.idle_speed {
            DrivingMode::Idling
        } else {
            DrivingMode::Cruising
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeDurations {
    pub accelerating: f64,
    pub decelerating: f64,
    pub cruising: f64,
    pub idling: f64,
}

impl ModeDurations {
    pub fn total(&self) -> f64 {
        self.accelerating + self.decelerating + self.cruising + self.idling
    }

    fn add(&mut self, mode: DrivingMode, dt: f64) {
        match mode {
            DrivingMode::Accelerating => self.accelerating += dt,
            DrivingMode::Decelerating => self.decelerating += dt,
            DrivingMode::Cruising => self.cruising += dt,
            DrivingMode::Idling => self.idling += dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Tractive energy, J.
    pub e_inst: f64,
    /// Fuel energy, J.
    pub e_fuel: f64,
    /// g
    pub co2: f64,
    pub mode_durations: ModeDurations,
    /// m/s
    pub mean_speed: f64,
    /// Population standard deviation of speed, m/s.
    pub speed_stddev: f64,
    pub trip_time: f64,
}

impl EnergyReport {
    pub fn e_fuel_kj(&self) -> f64 {
        self.e_fuel / 1000.0
    }
}

/// Tractive power demand in watts. Braking and standing still demand nothing.
pub fn instantaneous_power(spec: &VehicleSpec, v: f64, a: f64, thresholds: &ModeThresholds) -> f64 {
    if a < -thresholds.accel_epsilon || v <= thresholds.idle_speed {
        return 0.0;
    }
    spec.mass * a * v + spec.f0 * v + spec.f2 * v * v * v
}

/// Score a trajectory. Each sample's power is held over the step that starts
/// at it, so the final sample (the arrival instant) contributes no energy and
/// no mode time.
pub fn energy_of(trajectory: &Trajectory, spec: &VehicleSpec, thresholds: &ModeThresholds) -> Result<EnergyReport, TrajectoryError> {
    let dt = trajectory.uniform_dt()?;
    let samples = &trajectory.samples;
    let steps = &samples[..samples.len() - 1];

    let mut e_inst = 0.0;
    let mut modes = ModeDurations::default();
    for s in steps {
        e_inst += instantaneous_power(spec, s.speed, s.accel, thresholds) * dt;
        modes.add(thresholds.classify(s), dt);
    }

    let n = samples.len() as f64;
    let mean_speed = samples.iter().map(|s| s.speed).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.speed - mean_speed).powi(2)).sum::<f64>() / n;

    let e_fuel = e_inst / spec.eta;
    Ok(EnergyReport {
        e_inst,
        e_fuel,
        co2: co2_from_fuel(e_fuel),
        mode_durations: modes,
        mean_speed,
        speed_stddev: var.sqrt(),
        trip_time: trajectory.trip_time(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64, duration: f64, dt: f64) -> Trajectory {
        let n = (duration / dt).round() as usize;
        let samples = (0..=n).map(|k| TrajectorySample::cruising(k as f64 * dt, v * k as f64 * dt, v)).collect();
        Trajectory::new(samples, v * duration)
    }

    #[test]
    fn camry_cruise_power() {
        let p = instantaneous_power(&VehicleSpec::camry(), 13.4, 0.0, &ModeThresholds::default());
        let expected = 113.82 * 13.4 + 0.36 * 13.4f64.powi(3);
        assert!((p - expected).abs() < 1e-9);
        assert!((p - 2391.4).abs() < 0.1, "{p}");
    }

    #[test]
    fn zero_power_rules() {
        let th = ModeThresholds::default();
        let spec = VehicleSpec::highlander();
        assert_eq!(instantaneous_power(&spec, 0.0, 0.0, &th), 0.0);
        assert_eq!(instantaneous_power(&spec, 10.0, -2.0, &th), 0.0);
        // mild deceleration still pays the road load
        assert!(instantaneous_power(&spec, 10.0, -0.01, &th) > 0.0);
    }

    #[test]
    fn constant_cruise_energy() {
        let spec = VehicleSpec::camry().with_eta(0.2);
        let r = energy_of(&constant(13.4, 74.5, 0.5), &spec, &ModeThresholds::default()).unwrap();
        let power = 113.82 * 13.4 + 0.36 * 13.4f64.powi(3);
        assert!((r.e_inst - power * 74.5).abs() / r.e_inst < 1e-12);
        assert!((r.e_inst / 1000.0 - 178.2).abs() < 0.1, "{}", r.e_inst);
        assert!((r.e_fuel / 1000.0 - 890.8).abs() < 0.1, "{}", r.e_fuel);
        assert_eq!(r.mode_durations.cruising, 74.5);
        assert_eq!(r.trip_time, 74.5);
        assert!(r.speed_stddev.abs() < 1e-12);
    }

    #[test]
    fn standing_still() {
        let r = energy_of(&constant(0.0, 30.0, 0.5), &VehicleSpec::camry(), &ModeThresholds::default()).unwrap();
        assert_eq!(r.e_inst, 0.0);
        assert_eq!(r.co2, 0.0);
        assert_eq!(r.mode_durations.idling, r.trip_time);
    }

    #[test]
    fn co2_of_one_megajoule() {
        let co2 = co2_from_fuel(1_000_000.0);
        assert!((co2 - 71.148).abs() < 1e-9, "{co2}");
    }

    #[test]
    fn non_uniform_step_rejected() {
        let mut t = constant(10.0, 5.0, 0.5);
        t.samples[3].t += 0.01;
        assert!(matches!(
            energy_of(&t, &VehicleSpec::camry(), &ModeThresholds::default()),
            Err(TrajectoryError::NonUniformStep { .. })
        ));
        let empty = Trajectory::new(Vec::new(), 0.0);
        assert_eq!(energy_of(&empty, &VehicleSpec::camry(), &ModeThresholds::default()), Err(TrajectoryError::Empty));
    }

    #[test]
    fn classification_order() {
        let th = ModeThresholds::default();
        let s = |speed, accel| TrajectorySample { t: 0.0, position: 0.0, speed, accel };
        assert_eq!(th.classify(&s(0.0, 2.6)), DrivingMode::Accelerating);
        assert_eq!(th.classify(&s(0.5, -9.0)), DrivingMode::Decelerating);
        assert_eq!(th.classify(&s(0.0, 0.0)), DrivingMode::Idling);
        assert_eq!(th.classify(&s(5.0, -0.04)), DrivingMode::Cruising);
    }
}
