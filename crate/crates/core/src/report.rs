//! Output artifacts: trajectory files, the comparison table, plot data and
//! the run manifest.
//!
//! Layout of a suite output directory:
//!
//! ```text
//! out/
//!   manifest.json
//!   comparison.csv
//!   trajectories/<scenario>__<vehicle>__<policy>.csv
//!   plot_increase_vs_nopeds.csv        (written by `plotdata`)
//!   plot_reduction_vs_suddenstop.csv   (written by `plotdata`)
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back yields the exact values that were written.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{write_trajectory, EnergyReport};
use crate::policy::PolicyId;
use crate::scenario::{mps_to_mph, ComparisonRow, SuiteResult, MPS_PER_MPH};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJECTORY_DIR: &str = "trajectories";
pub const INCREASE_PLOT_FILE: &str = "plot_increase_vs_nopeds.csv";
pub const REDUCTION_PLOT_FILE: &str = "plot_reduction_vs_suddenstop.csv";

/// Reproducible-build convention: seconds since the Unix epoch to stamp
/// into manifests instead of the wall clock.
pub const SOURCE_DATE_EPOCH: &str = "SOURCE_DATE_EPOCH";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("no suite output found: {0} does not exist")]
    MissingSuiteOutput(PathBuf),
    #[error("{0}")]
    Format(String),
}

impl ReportError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| Self::Io { path: path.to_path_buf(), source }
    }

    fn csv(path: &Path) -> impl FnOnce(csv::Error) -> Self + '_ {
        move |source| Self::Csv { path: path.to_path_buf(), source }
    }
}

pub fn trajectory_file_name(scenario: &str, vehicle: &str, policy: PolicyId) -> String {
    format!("{scenario}__{vehicle}__{policy}.csv")
}

/// One line of `comparison.csv`. Metric columns are empty for failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub scenario: String,
    pub vehicle: String,
    pub policy: String,
    /// `ok` or `failed`.
    pub status: String,
    pub error: String,
    pub e_inst_j: Option<f64>,
    pub e_inst_kj: Option<f64>,
    pub fuel_j: Option<f64>,
    pub fuel_kj: Option<f64>,
    pub co2_g: Option<f64>,
    pub pct_increase_vs_nopeds: Option<f64>,
    pub pct_reduction_vs_suddenstop: Option<f64>,
    pub accelerating_s: Option<f64>,
    pub decelerating_s: Option<f64>,
    pub cruising_s: Option<f64>,
    pub idling_s: Option<f64>,
    pub mean_speed_mps: Option<f64>,
    pub mean_speed_mph: Option<f64>,
    pub speed_stddev_mps: Option<f64>,
    pub speed_stddev_mph: Option<f64>,
    pub trip_time_s: Option<f64>,
}

impl From<&ComparisonRow> for ComparisonRecord {
    fn from(r: &ComparisonRow) -> Self {
        let ok = r.is_ok();
        let m = |x: f64| ok.then_some(x);
        Self {
            scenario: r.scenario.clone(),
            vehicle: r.vehicle.clone(),
            policy: r.policy.to_string(),
            status: if ok { "ok" } else { "failed" }.to_string(),
            error: r.failure.clone().unwrap_or_default(),
            e_inst_j: m(r.e_inst_kj * 1000.0),
            e_inst_kj: m(r.e_inst_kj),
            fuel_j: m(r.fuel_kj * 1000.0),
            fuel_kj: m(r.fuel_kj),
            co2_g: m(r.co2_g),
            pct_increase_vs_nopeds: m(r.pct_increase_vs_nopeds),
            pct_reduction_vs_suddenstop: m(r.pct_reduction_vs_suddenstop),
            accelerating_s: m(r.mode_durations.accelerating),
            decelerating_s: m(r.mode_durations.decelerating),
            cruising_s: m(r.mode_durations.cruising),
            idling_s: m(r.mode_durations.idling),
            mean_speed_mps: m(r.mean_speed_mph * MPS_PER_MPH),
            mean_speed_mph: m(r.mean_speed_mph),
            speed_stddev_mps: m(r.speed_stddev_mph * MPS_PER_MPH),
            speed_stddev_mph: m(r.speed_stddev_mph),
            trip_time_s: m(r.trip_time),
        }
    }
}

impl ComparisonRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn policy_id(&self) -> Option<PolicyId> {
        self.policy.parse().ok()
    }
}

pub fn write_comparison<W: Write>(out: W, rows: &[ComparisonRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(ComparisonRecord::from(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparison<R: Read>(input: R) -> csv::Result<Vec<ComparisonRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Energy metrics of one trajectory in both SI and report units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub vehicle: String,
    pub eta: f64,
    pub e_inst_j: f64,
    pub e_inst_kj: f64,
    pub e_fuel_j: f64,
    pub e_fuel_kj: f64,
    pub co2_g: f64,
    pub accelerating_s: f64,
    pub decelerating_s: f64,
    pub cruising_s: f64,
    pub idling_s: f64,
    pub mean_speed_mps: f64,
    pub mean_speed_mph: f64,
    pub speed_stddev_mps: f64,
    pub speed_stddev_mph: f64,
    pub trip_time_s: f64,
}

impl EnergyRecord {
    pub fn new(vehicle: &str, eta: f64, e: &EnergyReport) -> Self {
        Self {
            vehicle: vehicle.to_string(),
            eta,
            e_inst_j: e.e_inst,
            e_inst_kj: e.e_inst / 1000.0,
            e_fuel_j: e.e_fuel,
            e_fuel_kj: e.e_fuel_kj(),
            co2_g: e.co2,
            accelerating_s: e.mode_durations.accelerating,
            decelerating_s: e.mode_durations.decelerating,
            cruising_s: e.mode_durations.cruising,
            idling_s: e.mode_durations.idling,
            mean_speed_mps: e.mean_speed,
            mean_speed_mph: mps_to_mph(e.mean_speed),
            speed_stddev_mps: e.speed_stddev,
            speed_stddev_mph: mps_to_mph(e.speed_stddev),
            trip_time_s: e.trip_time,
        }
    }

    /// Multi-line summary laid out like the paper's per-trajectory table.
    pub fn human_block(&self) -> String {
        format!(
            "vehicle           {} (eta {})\n\
             trip time         {:.1} s\n\
             accelerating      {:.1} s\n\
             decelerating      {:.1} s\n\
             cruising          {:.1} s\n\
             idling            {:.1} s\n\
             mean speed        {:.2} mph ({:.2} m/s)\n\
             speed std dev     {:.2} mph ({:.2} m/s)\n\
             E_inst            {:.3} kJ\n\
             fuel energy       {:.3} kJ\n\
             CO2               {:.3} g\n",
            self.vehicle,
            self.eta,
            self.trip_time_s,
            self.accelerating_s,
            self.decelerating_s,
            self.cruising_s,
            self.idling_s,
            self.mean_speed_mph,
            self.mean_speed_mps,
            self.speed_stddev_mph,
            self.speed_stddev_mps,
            self.e_inst_kj,
            self.e_fuel_kj,
            self.co2_g,
        )
    }
}

/// Fixed-width table of comparison rows for the terminal.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut s = format!(
        "{:<12} {:<11} {:<10} {:>9} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "scenario", "vehicle", "policy", "fuel kJ", "CO2 g", "+% none", "-% stop", "acc s", "dec s", "cru s", "idle s", "mph",
        "sd mph", "trip s"
    );
    for r in rows {
        if let Some(err) = &r.failure {
            s += &format!("{:<12} {:<11} {:<10} FAILED: {err}\n", r.scenario, r.vehicle, r.policy.to_string());
            continue;
        }
        let m = &r.mode_durations;
        s += &format!(
            "{:<12} {:<11} {:<10} {:>9.1} {:>8.1} {:>8.2} {:>8.2} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.2} {:>6.2} {:>6.1}\n",
            r.scenario,
            r.vehicle,
            r.policy.to_string(),
            r.fuel_kj,
            r.co2_g,
            r.pct_increase_vs_nopeds,
            r.pct_reduction_vs_suddenstop,
            m.accelerating,
            m.decelerating,
            m.cruising,
            m.idling,
            r.mean_speed_mph,
            r.speed_stddev_mph,
            r.trip_time,
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    /// ISO-8601, UTC.
    pub timestamp: String,
    /// Relative to the output directory, sorted.
    pub output_paths: Vec<String>,
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the current time.
pub fn manifest_timestamp() -> Result<String, ReportError> {
    let when = match std::env::var(SOURCE_DATE_EPOCH) {
        Ok(raw) => {
            let secs: i64 = raw
                .trim()
                .parse()
                .map_err(|_| ReportError::Format(format!("{SOURCE_DATE_EPOCH}={raw:?} is not an integer")))?;
            DateTime::<Utc>::from_timestamp(secs, 0)
                .ok_or_else(|| ReportError::Format(format!("{SOURCE_DATE_EPOCH}={secs} is out of range")))?
        }
        Err(_) => Utc::now(),
    };
    Ok(when.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, ReportError> {
    File::create(path).map(BufWriter::new).map_err(ReportError::io(path))
}

/// Write the trajectory of every successful run into `dir`; returns the file
/// names in suite order.
pub fn write_trajectories(dir: &Path, suite: &SuiteResult) -> Result<Vec<String>, ReportError> {
    fs::create_dir_all(dir).map_err(ReportError::io(dir))?;
    let mut names = Vec::new();
    for run in &suite.runs {
        let Ok((policy_run, _)) = &run.outcome else { continue };
        let name = trajectory_file_name(&run.scenario, &run.vehicle, run.policy);
        let path = dir.join(&name);
        let mut f = create_file(&path)?;
        write_trajectory(&mut f, &policy_run.trajectory).map_err(ReportError::io(&path))?;
        f.flush().map_err(ReportError::io(&path))?;
        names.push(name);
    }
    Ok(names)
}

/// Write trajectories, the comparison table and the manifest under `out_dir`.
pub fn write_suite_outputs(out_dir: &Path, suite: &SuiteResult, config_digest: &str) -> Result<RunManifest, ReportError> {
    fs::create_dir_all(out_dir).map_err(ReportError::io(out_dir))?;
    let mut outputs: Vec<String> = write_trajectories(&out_dir.join(TRAJECTORY_DIR), suite)?
        .into_iter()
        .map(|n| format!("{TRAJECTORY_DIR}/{n}"))
        .collect();

    let path = out_dir.join(COMPARISON_FILE);
    let mut f = create_file(&path)?;
    write_comparison(&mut f, &suite.rows).map_err(ReportError::csv(&path))?;
    f.flush().map_err(ReportError::io(&path))?;
    outputs.push(COMPARISON_FILE.to_string());
    outputs.sort();

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: config_digest.to_string(),
        timestamp: manifest_timestamp()?,
        output_paths: outputs,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut f = create_file(&path)?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| ReportError::Io { path: path.clone(), source: e.into() })?;
    writeln!(f).and_then(|_| f.flush()).map_err(ReportError::io(&path))?;
    Ok(manifest)
}

pub fn read_suite_comparison(out_dir: &Path) -> Result<Vec<ComparisonRecord>, ReportError> {
    let path = out_dir.join(COMPARISON_FILE);
    if !path.is_file() {
        return Err(ReportError::MissingSuiteOutput(path));
    }
    let f = File::open(&path).map_err(ReportError::io(&path))?;
    read_comparison(f).map_err(ReportError::csv(&path))
}

#[derive(Debug, Serialize)]
struct IncreasePoint<'a> {
    scenario: &'a str,
    policy: &'a str,
    vehicle: &'a str,
    pct_increase_vs_nopeds: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ReductionPoint<'a> {
    scenario: &'a str,
    policy: &'a str,
    vehicle: &'a str,
    pct_reduction_vs_suddenstop: Option<f64>,
}

/// Tidy per-(scenario, policy, vehicle) CSVs for the two comparison figures.
/// Returns the paths written.
pub fn write_plot_data(out_dir: &Path, records: &[ComparisonRecord]) -> Result<Vec<PathBuf>, ReportError> {
    let inc_path = out_dir.join(INCREASE_PLOT_FILE);
    let mut inc = csv::Writer::from_writer(create_file(&inc_path)?);
    for r in records {
        inc.serialize(IncreasePoint {
            scenario: &r.scenario,
            policy: &r.policy,
            vehicle: &r.vehicle,
            pct_increase_vs_nopeds: r.pct_increase_vs_nopeds,
        })
        .map_err(ReportError::csv(&inc_path))?;
    }
    inc.flush().map_err(ReportError::io(&inc_path))?;

    let red_path = out_dir.join(REDUCTION_PLOT_FILE);
    let mut red = csv::Writer::from_writer(create_file(&red_path)?);
    for r in records {
        red.serialize(ReductionPoint {
            scenario: &r.scenario,
            policy: &r.policy,
            vehicle: &r.vehicle,
            pct_reduction_vs_suddenstop: r.pct_reduction_vs_suddenstop,
        })
        .map_err(ReportError::csv(&red_path))?;
    }
    red.flush().map_err(ReportError::io(&red_path))?;
    Ok(vec![inc_path, red_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{KinematicLimits, VehicleSpec};
    use crate::energy::ModeThresholds;
    use crate::scenario::{canonical_suite, run_suite, Street};

    fn small_suite() -> SuiteResult {
        let cfgs = canonical_suite(&[VehicleSpec::camry()], KinematicLimits::default(), Street::default());
        run_suite(&cfgs[..1], &ModeThresholds::default())
    }

    #[test]
    fn comparison_round_trips_exactly() {
        let suite = small_suite();
        let mut buf = Vec::new();
        write_comparison(&mut buf, &suite.rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scenario,vehicle,policy,status,error,e_inst_j,"));
        let back = read_comparison(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        for (rec, row) in back.iter().zip(&suite.rows) {
            assert_eq!(rec, &ComparisonRecord::from(row));
            assert_eq!(rec.fuel_kj, Some(row.fuel_kj));
            assert_eq!(rec.policy_id(), Some(row.policy));
        }
    }

    #[test]
    fn failed_rows_have_empty_metrics() {
        let mut suite = small_suite();
        suite.rows[0].failure = Some("boom".into());
        let rec = ComparisonRecord::from(&suite.rows[0]);
        assert!(!rec.is_ok());
        assert_eq!(rec.error, "boom");
        assert_eq!(rec.fuel_kj, None);
        let mut buf = Vec::new();
        write_comparison(&mut buf, &suite.rows[..1]).unwrap();
        let line = String::from_utf8(buf).unwrap().lines().nth(1).unwrap().to_string();
        assert!(line.starts_with("scenario-1,camry,option1,failed,boom,,,"), "{line}");
    }

    #[test]
    fn file_names() {
        assert_eq!(trajectory_file_name("scenario-3", "camry", PolicyId::SuddenStop), "scenario-3__camry__suddenstop.csv");
    }

    #[test]
    fn human_block_has_table_columns() {
        let suite = small_suite();
        let (_, e) = suite.runs[0].outcome.as_ref().unwrap();
        let block = EnergyRecord::new("camry", 0.21, e).human_block();
        for key in ["accelerating", "decelerating", "cruising", "idling", "mean speed", "speed std dev", "fuel energy", "CO2"] {
            assert!(block.contains(key), "{key} missing");
        }
    }

    #[test]
    fn suite_outputs_and_plot_data() {
        let dir = tempfile::tempdir().unwrap();
        let suite = small_suite();
        let manifest = write_suite_outputs(dir.path(), &suite, "abc").unwrap();
        assert_eq!(manifest.output_paths.len(), 5);
        assert!(manifest.output_paths.contains(&"comparison.csv".to_string()));
        for p in &manifest.output_paths {
            assert!(dir.path().join(p).is_file(), "{p}");
        }
        let json: RunManifest = serde_json::from_reader(File::open(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(json, manifest);

        let records = read_suite_comparison(dir.path()).unwrap();
        let paths = write_plot_data(dir.path(), &records).unwrap();
        let red = fs::read_to_string(&paths[1]).unwrap();
        assert_eq!(red.lines().next(), Some("scenario,policy,vehicle,pct_reduction_vs_suddenstop"));
        assert_eq!(red.lines().count(), 5);
    }

    #[test]
    fn missing_suite_output() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_suite_comparison(dir.path()), Err(ReportError::MissingSuiteOutput(_))));
    }
}
