//! The `midblock` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or input error,
//! 3 at least one run hit an infeasible constraint (outputs are still written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, ResolvedConfig, SuiteFile, VehicleSection};
use crate::dynamics::VehicleSpec;
use crate::energy::{energy_of, read_trajectory_file, IngestError, ModeThresholds};
use crate::report::{self, comparison_table, EnergyRecord, ReportError};
use crate::scenario::{run_suite, SuiteResult};

/// Environment variable that sets the output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "MIDBLOCK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "midblock", version, about = "Vehicle responses to midblock pedestrian-crossing alerts")]
pub struct Cli {
    /// Suite configuration (TOML). Defaults to the built-in six scenarios.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
    /// Vehicle name (camry, highlander) or a TOML vehicle file.
    #[arg(long, global = true, value_name = "NAME")]
    pub vehicle: Option<String>,
    /// Engine efficiency, overriding the vehicle's.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Control step in seconds, overriding the config's.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every scenario under all four policies and write the report files.
    Suite,
    /// Run one scenario and print its comparison rows.
    Run { scenario: String },
    /// Score a trajectory CSV for fuel and CO2.
    Score { trajectory: PathBuf },
    /// Export figure data from a finished suite in the output directory.
    Plotdata,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        let code = match e {
            ReportError::MissingSuiteOutput(_) | ReportError::Format(_) => 2,
            ReportError::Csv { ref source, .. } if !matches!(source.kind(), csv::ErrorKind::Io(_)) => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let code = if matches!(e, IngestError::Io(_)) { 1 } else { 2 };
        Self { code, message: e.to_string() }
    }
}

/// Run the tool; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Suite => cmd_suite(&cli),
        Command::Run { scenario } => cmd_run(&cli, scenario),
        Command::Score { trajectory } => cmd_score(&cli, trajectory),
        Command::Plotdata => cmd_plotdata(&cli.out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("midblock: error: {}", f.message);
            f.code
        }
    }
}

/// `name` is a built-in vehicle or a TOML file with the `[[vehicles]]` fields.
pub fn resolve_vehicle(name: &str) -> Result<VehicleSpec, Failure> {
    if let Some(v) = VehicleSpec::by_name(name) {
        return Ok(v);
    }
    let path = Path::new(name);
    if !path.is_file() {
        return Err(Failure::usage(format!("unknown vehicle '{name}' (expected camry, highlander or a vehicle file)")));
    }
    let text = fs::read_to_string(path).map_err(|e| Failure { code: 1, message: format!("{name}: {e}") })?;
    let section: VehicleSection = toml::from_str(&text).map_err(|e| Failure::usage(format!("{name}: {e}")))?;
    section.to_spec().map_err(|e| Failure::usage(format!("{name}: {e}")))
}

fn load_config(cli: &Cli) -> Result<ResolvedConfig, Failure> {
    let mut file = match &cli.config {
        Some(path) => SuiteFile::load(path)?,
        None => SuiteFile::canonical(),
    };
    if let Some(name) = &cli.vehicle {
        file.vehicles = vec![VehicleSection::from(&resolve_vehicle(name)?)];
    }
    if let Some(eta) = cli.eta {
        file.set_eta(eta);
    }
    if let Some(dt) = cli.dt {
        file.set_dt(dt);
    }
    Ok(file.resolve()?)
}

// A closed stdout (e.g. piped into `head`) is not an error worth reporting.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn report_failures(suite: &SuiteResult) -> u8 {
    let failed: Vec<_> = suite.failures().collect();
    for r in &failed {
        eprintln!(
            "midblock: infeasible run {} / {} / {}: {}",
            r.scenario,
            r.vehicle,
            r.policy,
            r.failure.as_deref().unwrap_or_default()
        );
    }
    if failed.is_empty() {
        0
    } else {
        3
    }
}

fn cmd_suite(cli: &Cli) -> Result<u8, Failure> {
    let config = load_config(cli)?;
    let suite = run_suite(&config.scenarios, &config.thresholds);
    let manifest = report::write_suite_outputs(&cli.out, &suite, &config.digest())?;
    emit(&comparison_table(&suite.rows));
    emit(&format!("wrote {} files to {}\n", manifest.output_paths.len() + 1, cli.out.display()));
    Ok(report_failures(&suite))
}

fn cmd_run(cli: &Cli, scenario: &str) -> Result<u8, Failure> {
    let config = load_config(cli)?;
    let selected: Vec<_> = config.scenarios.iter().filter(|s| s.name == scenario).cloned().collect();
    if selected.is_empty() {
        let mut names: Vec<&str> = config.file.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.dedup();
        return Err(Failure::usage(format!("unknown scenario '{scenario}' (available: {})", names.join(", "))));
    }
    let suite = run_suite(&selected, &config.thresholds);
    report::write_trajectories(&cli.out.join(report::TRAJECTORY_DIR), &suite)?;
    emit(&comparison_table(&suite.rows));
    Ok(report_failures(&suite))
}

fn cmd_score(cli: &Cli, path: &Path) -> Result<u8, Failure> {
    let mut vehicle = resolve_vehicle(cli.vehicle.as_deref().unwrap_or("camry"))?;
    if let Some(eta) = cli.eta {
        vehicle = vehicle.with_eta(eta);
    }
    vehicle.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let thresholds = match &cli.config {
        Some(p) => SuiteFile::load(p)?.resolve()?.thresholds,
        None => ModeThresholds::default(),
    };
    if !path.is_file() {
        return Err(Failure::usage(format!("{}: no such file", path.display())));
    }
    let trajectory = read_trajectory_file(path).map_err(|e| Failure::from(e).with_path(path))?;
    let energy = energy_of(&trajectory, &vehicle, &thresholds).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let record = EnergyRecord::new(&vehicle.label, vehicle.eta, &energy);
    emit(&format!("{}\n", serde_json::to_string(&record).expect("record serializes")));
    emit(&record.human_block());
    Ok(0)
}

fn cmd_plotdata(out: &Path) -> Result<u8, Failure> {
    let records = report::read_suite_comparison(out)?;
    if records.is_empty() {
        return Err(Failure::usage(format!("{} has no rows", out.join(report::COMPARISON_FILE).display())));
    }
    for p in report::write_plot_data(out, &records)? {
        emit(&format!("wrote {}\n", p.display()));
    }
    Ok(0)
}

impl Failure {
    fn with_path(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}
