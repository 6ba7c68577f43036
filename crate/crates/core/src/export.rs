//! Writing run records to disk and reading them back for rendering.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::partition::{NeighborGraph, PartitionLabels};
use crate::sim::{FinalState, GridInfo, RunStatus, SimRecord, StepRecord};

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const METRICS: &str = "metrics.csv";
pub const LABELS: &str = "labels.txt";
pub const CONFIG: &str = "config.json";
pub const SUMMARY: &str = "summary.json";
pub const RECORD_JSON: &str = "record.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: RunStatus,
    pub step_count: usize,
    pub clip_count: usize,
    pub final_positions: Vec<Vec2>,
    pub final_centroids: Vec<Vec2>,
    pub max_centroid_distance: Option<f64>,
    pub neighbor_edges: Vec<(usize, usize)>,
    pub grid: Option<GridInfo>,
}

impl Summary {
    pub fn of(record: &SimRecord) -> Self {
        let last = record.last();
        Summary {
            status: record.status,
            step_count: record.step_count(),
            clip_count: record.clip_count(),
            final_positions: last.map(|s| s.positions.clone()).unwrap_or_default(),
            final_centroids: last.map(|s| s.centroids.clone()).unwrap_or_default(),
            max_centroid_distance: last.map(|s| {
                s.positions
                    .iter()
                    .zip(&s.centroids)
                    .map(|(p, c)| p.distance(*c))
                    .fold(0.0, f64::max)
            }),
            neighbor_edges: record
                .final_state
                .as_ref()
                .map(|f| f.neighbors.edges())
                .unwrap_or_default(),
            grid: record.final_state.as_ref().map(|f| f.grid),
        }
    }
}

#[derive(Serialize)]
struct JsonStep<'a> {
    step: usize,
    positions: &'a [Vec2],
    centroids: &'a [Vec2],
    objective: f64,
    objective_normalized: f64,
    error_measure: f64,
    speeds: &'a [f64],
    clip_count: usize,
}

fn write(path: PathBuf, contents: &[u8]) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn trajectories_csv(record: &SimRecord) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "agent", "x", "y", "speed"])?;
    for s in &record.steps {
        for (i, (p, u)) in s.positions.iter().zip(&s.speeds).enumerate() {
            w.write_record([
                s.step.to_string(),
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                u.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

fn metrics_csv(record: &SimRecord) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "H", "H_normalized", "error_measure"])?;
    for s in &record.steps {
        w.write_record([
            s.step.to_string(),
            s.objective.to_string(),
            s.objective_normalized.to_string(),
            s.error_measure.to_string(),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// Writes the record under `dir`, creating it if needed. Returns the files
/// written.
pub fn export_record(record: &SimRecord, dir: &Path, format: ExportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write(path.clone(), &bytes)?;
        files.push(path);
        Ok(())
    };
    match format {
        ExportFormat::Csv => {
            let p = dir.join(TRAJECTORIES);
            put(TRAJECTORIES, trajectories_csv(record).map_err(|e| csv_error(&p, e))?)?;
            let p = dir.join(METRICS);
            put(METRICS, metrics_csv(record).map_err(|e| csv_error(&p, e))?)?;
        }
        ExportFormat::Json => {
            let steps: Vec<JsonStep> = record
                .steps
                .iter()
                .map(|s| JsonStep {
                    step: s.step,
                    positions: &s.positions,
                    centroids: &s.centroids,
                    objective: s.objective,
                    objective_normalized: s.objective_normalized,
                    error_measure: s.error_measure,
                    speeds: &s.speeds,
                    clip_count: s.clip_count,
                })
                .collect();
            put(
                RECORD_JSON,
                serde_json::to_vec_pretty(&steps).expect("steps serialize"),
            )?;
        }
    }
    if let Some(fs) = &record.final_state {
        let text = fs.labels.to_matrix_text(fs.grid.nx, fs.grid.ny);
        put(LABELS, text.into_bytes())?;
    }
    put(CONFIG, record.config.to_json().into_bytes())?;
    put(
        SUMMARY,
        serde_json::to_vec_pretty(&Summary::of(record)).expect("summary serializes"),
    )?;
    Ok(files)
}

fn read(path: PathBuf) -> Result<String> {
    fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

/// Rebuilds a record from a CSV export. Centroids are only available for
/// the final step.
pub fn load_record(dir: &Path) -> Result<SimRecord> {
    let cfg_path = dir.join(CONFIG);
    let config = RunConfig::from_json_str(&read(cfg_path.clone())?)
        .map_err(|m| Error::parse(cfg_path, m))?;
    let sum_path = dir.join(SUMMARY);
    let summary: Summary = serde_json::from_str(&read(sum_path.clone())?)
        .map_err(|e| Error::parse(sum_path, e.to_string()))?;
    let n = config.agents.len();

    let met_path = dir.join(METRICS);
    let mut steps = Vec::new();
    let mut rdr = csv::Reader::from_path(&met_path).map_err(|e| csv_error(&met_path, e))?;
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&met_path, e))?;
        let num = |k: usize| -> Result<f64> {
            row.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(&met_path, format!("bad field {k} in {row:?}")))
        };
        steps.push(StepRecord {
            step: num(0)? as usize,
            positions: Vec::with_capacity(n),
            centroids: Vec::new(),
            objective: num(1)?,
            objective_normalized: num(2)?,
            error_measure: num(3)?,
            speeds: Vec::with_capacity(n),
            clip_count: 0,
        });
    }

    let traj_path = dir.join(TRAJECTORIES);
    let mut rdr = csv::Reader::from_path(&traj_path).map_err(|e| csv_error(&traj_path, e))?;
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&traj_path, e))?;
        let num = |k: usize| -> Result<f64> {
            row.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(&traj_path, format!("bad field {k} in {row:?}")))
        };
        let step = num(0)? as usize;
        let s = steps
            .get_mut(step)
            .ok_or_else(|| Error::parse(&traj_path, format!("step {step} missing from metrics")))?;
        s.positions.push(Vec2::new(num(2)?, num(3)?));
        s.speeds.push(num(4)?);
    }
    if let Some(last) = steps.last_mut() {
        last.centroids = summary.final_centroids.clone();
        last.clip_count = summary.clip_count;
    }

    let final_state = match summary.grid {
        Some(grid) => {
            let lab_path = dir.join(LABELS);
            let labels = PartitionLabels::from_matrix_text(&read(lab_path.clone())?, n)
                .map_err(|m| Error::parse(lab_path, m))?;
            let mut neighbors = NeighborGraph::empty(n);
            for &(i, j) in &summary.neighbor_edges {
                neighbors.add_edge(i, j);
            }
            Some(FinalState {
                grid,
                labels,
                neighbors,
            })
        }
        None => None,
    };
    Ok(SimRecord {
        config,
        steps,
        status: summary.status,
        final_state,
    })
}
