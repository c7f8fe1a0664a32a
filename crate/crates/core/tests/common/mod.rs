//! Shared helpers for the integration tests.
#![allow(dead_code)]

use midblock::dynamics::{advance, Trajectory, TrajectorySample, VehicleSpec};
use midblock::policy::AlertEvent;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const V_MAX: f64 = 13.4;
pub const CROSSING_DURATION: f64 = 20.0;

/// Three crossings in [60, 440] m, at least 40 m apart, each starting while a
/// car cruising at the limit from t = 0 is still 40 m or more short of it.
/// Alerts arrive at crossing start.
pub fn random_feasible_alerts(rng: &mut ChaCha8Rng) -> Vec<AlertEvent> {
    let locations = loop {
        let mut ls: Vec<f64> = (0..3).map(|_| rng.gen_range(60.0..440.0)).collect();
        ls.sort_by(f64::total_cmp);
        if ls.windows(2).all(|w| w[1] - w[0] >= 40.0) {
            break ls;
        }
    };
    let mut crossings: Vec<(f64, f64)> = locations
        .iter()
        .map(|&l| {
            let latest = (l - 40.0) / V_MAX;
            (l, rng.gen_range(0.0..latest))
        })
        .collect();
    crossings.sort_by(|a, b| a.1.total_cmp(&b.1));
    crossings
        .iter()
        .zip(1..)
        .map(|(&(location, start), ordinal)| AlertEvent {
            ordinal,
            receipt_time: start,
            location,
            crossing_start: start,
            crossing_end: start + CROSSING_DURATION,
        })
        .collect()
}

/// A trajectory driven by random piecewise-constant accelerations from a
/// random initial speed. Speeds stay within [0, 20] m/s.
pub fn random_trajectory(rng: &mut ChaCha8Rng, dt: f64, steps: usize) -> Trajectory {
    let mut s = TrajectorySample::cruising(0.0, 0.0, rng.gen_range(0.0..20.0));
    let mut samples = Vec::with_capacity(steps + 1);
    for k in 0..steps {
        let a = match rng.gen_range(0..4) {
            0 => 0.0,
            1 => rng.gen_range(-0.05..0.05),
            _ => rng.gen_range(-9.0..3.0),
        };
        let a = if s.speed + a * dt > 20.0 { 0.0 } else { a };
        let next = advance(&s, a, dt);
        s.accel = a;
        samples.push(s);
        s = TrajectorySample { t: (k + 1) as f64 * dt, ..next };
    }
    s.accel = 0.0;
    samples.push(s);
    let end = samples.last().unwrap().position;
    Trajectory::new(samples, end)
}

/// Brute-force energy accounting kept apart from the library: walks the
/// samples one interval at a time with the literal power formula.
pub struct OracleEnergy {
    pub e_inst: f64,
    pub e_fuel: f64,
    pub co2: f64,
}

pub fn oracle_energy(samples: &[TrajectorySample], spec: &VehicleSpec) -> OracleEnergy {
    let mut e_inst = 0.0;
    for i in 0..samples.len() - 1 {
        let dt = samples[i + 1].t - samples[i].t;
        let v = samples[i].speed;
        let a = samples[i].accel;
        let braking = a < -0.05;
        let stopped = v <= 0.1;
        let p = if braking || stopped { 0.0 } else { spec.mass * a * v + spec.f0 * v + spec.f2 * v * v * v };
        e_inst += p * dt;
    }
    let e_fuel = e_inst / spec.eta;
    // 19.6 g carbon per MJ of fuel, 99 % oxidised, 44/12 g CO2 per g carbon.
    let co2 = e_fuel / 1.0e6 * 19.6 * 0.99 * 44.0 / 12.0;
    OracleEnergy { e_inst, e_fuel, co2 }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
