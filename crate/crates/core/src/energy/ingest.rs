//! Trajectory CSV: `time_s,speed_mps[,accel_mps2]`.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dynamics::{advance, Trajectory, TrajectoryError, TrajectorySample, STEP_TOLERANCE};

pub const CSV_HEADER: &str = "time_s,speed_mps,accel_mps2";
pub const CSV_HEADER_NO_ACCEL: &str = "time_s,speed_mps";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },
    #[error("row {row}: time {t} s does not increase")]
    Monotonicity { row: usize, t: f64 },
    #[error("row {row}: {message}")]
    Value { row: usize, message: String },
    #[error("row {row}: time step {found} s differs from {expected} s")]
    NonUniformStep { row: usize, expected: f64, found: f64 },
    #[error("no data rows (need at least two)")]
    Empty,
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    /// Line of the offending row, header = 1.
    pub fn row(&self) -> Option<usize> {
        match self {
            IngestError::Schema { row, .. }
            | IngestError::Monotonicity { row, .. }
            | IngestError::Value { row, .. }
            | IngestError::NonUniformStep { row, .. } => Some(*row),
            _ => None,
        }
    }
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map_or(0, |p| p.line() as usize);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            kind => IngestError::Schema { row, message: format!("{kind:?}") },
        }
    }
}

/// Parse a trajectory CSV. Without an acceleration column, each row's
/// acceleration is the forward difference of speed (0 on the last row).
/// Positions are integrated from 0.
pub fn ingest_trajectory<R: Read>(reader: R) -> Result<Trajectory, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(IngestError::Empty),
        Some(h) => h?,
    };
    let header: Vec<&str> = header.iter().collect();
    let has_accel = match header.join(",").as_str() {
        CSV_HEADER => true,
        CSV_HEADER_NO_ACCEL => false,
        other => {
            return Err(IngestError::Schema {
                row: 1,
                message: format!("header '{other}' is neither '{CSV_HEADER}' nor '{CSV_HEADER_NO_ACCEL}'"),
            })
        }
    };
    let width = header.len();

    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != width {
            return Err(IngestError::Schema { row, message: format!("expected {width} columns, found {}", rec.len()) });
        }
        let num = |idx: usize, name: &str| -> Result<f64, IngestError> {
            let raw = rec[idx].trim();
            match raw.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(IngestError::Value { row, message: format!("{name} '{raw}' is not a finite number") }),
            }
        };
        let t = num(0, "time_s")?;
        let v = num(1, "speed_mps")?;
        if v < 0.0 {
            return Err(IngestError::Value { row, message: format!("negative speed {v}") });
        }
        let a = if has_accel { num(2, "accel_mps2")? } else { f64::NAN };
        if let Some(&(prev, _, _)) = rows.last() {
            if t <= prev {
                return Err(IngestError::Monotonicity { row, t });
            }
        }
        rows.push((t, v, a));
    }
    if rows.len() < 2 {
        return Err(IngestError::Empty);
    }

    let dt = rows[1].0 - rows[0].0;
    for (i, w) in rows.windows(2).enumerate() {
        let found = w[1].0 - w[0].0;
        if (found - dt).abs() > STEP_TOLERANCE {
            return Err(IngestError::NonUniformStep { row: i + 3, expected: dt, found });
        }
    }

    let n = rows.len();
    let mut samples = Vec::with_capacity(n);
    let mut position = 0.0;
    for k in 0..n {
        let (t, v, a) = rows[k];
        let accel = if has_accel {
            a
        } else if k + 1 < n {
            (rows[k + 1].1 - v) / dt
        } else {
            0.0
        };
        let sample = TrajectorySample { t, position, speed: v, accel };
        position = advance(&sample, accel, dt).position;
        samples.push(sample);
    }
    let street_length = samples.last().map_or(0.0, |s| s.position);
    Ok(Trajectory::new(samples, street_length))
}

pub fn read_trajectory_file(path: &Path) -> Result<Trajectory, IngestError> {
    ingest_trajectory(File::open(path)?)
}

/// Write with the acceleration column. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_trajectory<W: Write>(mut out: W, trajectory: &Trajectory) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &trajectory.samples {
        writeln!(out, "{},{},{}", s.t, s.speed, s.accel)?;
    }
    out.flush()
}

impl From<TrajectoryError> for IngestError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Empty => IngestError::Empty,
            TrajectoryError::NonUniformStep { row, expected, found } => IngestError::NonUniformStep { row, expected, found },
        }
    }
}
