//! CSV and JSON Lines writers for plot data.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dihedral_core::integrate::OrbitPoint;
use dihedral_core::Event;
use serde::Serialize;

use crate::CliError;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EVENTS_FILE: &str = "events.jsonl";

/// The four plot projections: file stem and the two plotted columns.
pub const PROJECTIONS: [(&str, [&str; 2]); 4] = [
    ("q1_q2", ["q1", "q2"]),
    ("r_alpha", ["r", "alpha"]),
    ("alpha_psi", ["alpha", "psi"]),
    ("r_psi", ["r", "psi"]),
];

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    time: f64,
    r: f64,
    alpha_unfolded: f64,
    alpha_folded: f64,
    psi: f64,
    q1: f64,
    q2: f64,
    p1: f64,
    p2: f64,
    #[serde(rename = "Ehat")]
    ehat: f64,
    #[serde(rename = "H")]
    h: f64,
}

impl From<&OrbitPoint> for TrajectoryRow {
    fn from(p: &OrbitPoint) -> Self {
        Self {
            time: p.zeta,
            r: p.r,
            alpha_unfolded: p.alpha,
            alpha_folded: p.alpha_folded,
            psi: p.psi,
            q1: p.q[0],
            q2: p.q[1],
            p1: p.p[0],
            p2: p.p[1],
            ehat: p.ehat,
            h: p.h,
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Writes serializable rows with a header line.
pub fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_trajectory(path: &Path, points: &[OrbitPoint]) -> Result<(), CliError> {
    write_csv(path, points.iter().map(TrajectoryRow::from))
}

pub fn write_events(path: &Path, events: &[Event]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        let line = serde_json::to_string(e).map_err(|e| io_error(path, e))?;
        writeln!(w, "{line}").map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn coordinate(p: &OrbitPoint, name: &str) -> f64 {
    match name {
        "q1" => p.q[0],
        "q2" => p.q[1],
        "r" => p.r,
        "alpha" => p.alpha,
        "psi" => p.psi,
        _ => unreachable!("unknown projection coordinate {name}"),
    }
}

/// Writes the four projections into `dir`; returns the paths written.
pub fn write_projections(dir: &Path, points: &[OrbitPoint]) -> Result<Vec<PathBuf>, CliError> {
    PROJECTIONS
        .iter()
        .map(|(stem, [x, y])| {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
            w.write_record(["time", "segment", x, y])
                .map_err(|e| io_error(&path, e))?;
            for p in points {
                w.serialize((p.zeta, p.segment, coordinate(p, x), coordinate(p, y)))
                    .map_err(|e| io_error(&path, e))?;
            }
            w.flush().map_err(|e| io_error(&path, e))?;
            Ok(path)
        })
        .collect()
}
