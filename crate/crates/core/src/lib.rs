//! Single-vehicle responses to midblock pedestrian-crossing alerts.
//!
//! [`dynamics`] integrates piecewise-constant accelerations, [`policy`] turns
//! alert sequences into trajectories, [`energy`] scores them for fuel and
//! CO₂, [`scenario`] runs the comparison suite, [`config`] reads suite files and
//! [`report`] writes the artifacts the [`cli`] produces.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod energy;
pub mod policy;
pub mod report;
pub mod scenario;
