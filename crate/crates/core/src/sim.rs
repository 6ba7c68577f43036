//! Closed-loop simulation: partition, moments, controls, integrate.

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scenario};
use crate::control::{max_centroid_distance, step, AgentState};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::objective::{all_moments, objective_h, objective_h_limited, CellMoments};
use crate::partition::{assign, assign_limited, neighbor_graph, NeighborGraph, PartitionLabels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxSteps,
}

/// One recorded round. Controls are those computed at `positions`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub positions: Vec<Vec2>,
    pub centroids: Vec<Vec2>,
    pub objective: f64,
    pub objective_normalized: f64,
    /// `(1/N) Σ |p_i - C_i|^2`
    pub error_measure: f64,
    pub speeds: Vec<f64>,
    /// Cumulative projection events up to this round.
    pub clip_count: usize,
}

/// Raster geometry needed to interpret a labels snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub origin: Vec2,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalState {
    pub grid: GridInfo,
    pub labels: PartitionLabels,
    pub neighbors: NeighborGraph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub config: RunConfig,
    pub steps: Vec<StepRecord>,
    pub status: RunStatus,
    pub final_state: Option<FinalState>,
}

impl SimRecord {
    /// Integration steps performed.
    pub fn step_count(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn clip_count(&self) -> usize {
        self.steps.last().map_or(0, |s| s.clip_count)
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }
}

/// Partition and moments at the current positions.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub labels: PartitionLabels,
    pub moments: Vec<CellMoments>,
    pub objective: f64,
}

pub struct Simulation {
    pub scenario: Scenario,
    pub states: Vec<AgentState>,
    pub clip_count: usize,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let scenario = config.build()?;
        let states = scenario.states.clone();
        Ok(Simulation {
            scenario,
            states,
            clip_count: 0,
        })
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.position).collect()
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        let sc = &self.scenario;
        let positions = self.positions();
        let (labels, objective) = if sc.limited {
            let labels = assign_limited(&sc.env.grid, &positions, &sc.specs)?;
            let h = objective_h_limited(&sc.env, &labels, &positions, &sc.specs)?;
            (labels, h)
        } else {
            let labels = assign(&sc.env.grid, &positions, &sc.specs)?;
            let h = objective_h(&sc.env, &labels, &positions, &sc.specs);
            (labels, h)
        };
        let moments = all_moments(&sc.env, &labels, &positions, &sc.specs)?;
        Ok(Snapshot {
            labels,
            moments,
            objective,
        })
    }

    pub fn velocities(&self, snapshot: &Snapshot) -> Result<Vec<Vec2>> {
        self.states
            .iter()
            .zip(&snapshot.moments)
            .map(|(s, m)| self.scenario.law.velocity(s, m))
            .collect()
    }

    /// Applies one Euler step with the given velocities.
    pub fn advance(&mut self, velocities: &[Vec2]) -> Result<()> {
        let out = step(
            &self.states,
            velocities,
            self.scenario.dt,
            &self.scenario.env.polygon,
        )?;
        self.states = out.states;
        self.clip_count += out.clipped;
        Ok(())
    }
}

fn error_measure(positions: &[Vec2], moments: &[CellMoments]) -> f64 {
    let n = positions.len() as f64;
    positions
        .iter()
        .zip(moments)
        .map(|(p, m)| (*p - m.centroid).norm_sq())
        .sum::<f64>()
        / n
}

/// Runs rounds until termination or `max_steps` integration steps.
/// Non-convergence is reported through [`RunStatus`], not as an error.
pub fn run_simulation(config: &RunConfig) -> Result<SimRecord> {
    let mut sim = Simulation::new(config)?;
    let mut steps = Vec::new();
    let status;
    let mut last: Snapshot;
    let mut k = 0;
    loop {
        let snap = sim.snapshot()?;
        let vel = sim.velocities(&snap)?;
        let positions = sim.positions();
        let done = max_centroid_distance(&sim.states, &snap.moments) < sim.scenario.threshold;
        steps.push(StepRecord {
            step: k,
            centroids: snap.moments.iter().map(|m| m.centroid).collect(),
            error_measure: error_measure(&positions, &snap.moments),
            positions,
            objective: snap.objective,
            objective_normalized: 0.0,
            speeds: vel.iter().map(|u| u.norm()).collect(),
            clip_count: sim.clip_count,
        });
        last = snap;
        if done {
            status = RunStatus::Converged;
            break;
        }
        if k >= sim.scenario.max_steps {
            status = RunStatus::MaxSteps;
            break;
        }
        sim.advance(&vel)?;
        k += 1;
    }
    normalize_objective(&mut steps);

    let grid = &sim.scenario.env.grid;
    let neighbors = neighbor_graph(&last.labels, grid);
    Ok(SimRecord {
        config: config.clone(),
        steps,
        status,
        final_state: Some(FinalState {
            grid: GridInfo {
                origin: grid.origin,
                cell_size: grid.cell_size,
                nx: grid.nx,
                ny: grid.ny,
            },
            labels: last.labels,
            neighbors,
        }),
    })
}

/// `(H_t - H_0) / (H_final - H_0)`, clamped to `[0, 1]`; constant 1 when
/// the objective never moved.
pub fn normalize_objective(steps: &mut [StepRecord]) {
    let (Some(first), Some(last)) = (steps.first(), steps.last()) else {
        return;
    };
    let (h0, hf) = (first.objective, last.objective);
    for s in steps.iter_mut() {
        s.objective_normalized = if hf != h0 {
            ((s.objective - h0) / (hf - h0)).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
}
