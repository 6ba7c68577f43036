//! Checks that each agent's cell and centroid can be computed from its own
//! state plus its neighbours' in the (generalized, possibly range-limited)
//! Delaunay graph.
//!
//! Agent `i` grows its cell from the raster cell containing `p_i`, visiting
//! 8-connected cells in which it beats every known neighbour (and, for
//! range-limited runs, which lie within its own range). The result is
//! compared against the global partition.

use crate::config::{RunConfig, Scenario};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::grid::Environment;
use crate::node::NodeFunctionSpec;
use crate::objective::{all_moments, cell_moments};
use crate::partition::{
    argmax_at, assign, assign_limited, cell_mask, neighbor_graph_with, Adjacency, NeighborGraph,
};

/// Largest centroid discrepancy that still counts as a match.
pub const DISTRIBUTED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheck {
    pub neighbors: Vec<usize>,
    /// Cells where the local and global masks disagree.
    pub mask_mismatch: usize,
    pub centroid_discrepancy: f64,
}

impl AgentCheck {
    pub fn passed(&self) -> bool {
        self.mask_mismatch == 0 && self.centroid_discrepancy < DISTRIBUTED_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributednessReport {
    pub agents: Vec<AgentCheck>,
    pub max_centroid_discrepancy: f64,
}

impl DistributednessReport {
    pub fn passed(&self) -> bool {
        self.agents.iter().all(AgentCheck::passed)
    }

    pub fn failing_agents(&self) -> Vec<usize> {
        self.agents
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.passed())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Global partition plus its 8-connected neighbour graph.
pub fn delaunay_graph(
    env: &Environment,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
    limited: bool,
) -> Result<NeighborGraph> {
    let labels = if limited {
        assign_limited(&env.grid, positions, specs)?
    } else {
        assign(&env.grid, positions, specs)?
    };
    Ok(neighbor_graph_with(&labels, &env.grid, Adjacency::Eight))
}

/// Cell of agent `i` computed from `{i} ∪ known` only.
pub fn local_cell_mask(
    env: &Environment,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
    limited: bool,
    i: usize,
    known: &[usize],
) -> Vec<bool> {
    let grid = &env.grid;
    let mut candidates: Vec<usize> = known.iter().copied().chain([i]).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let owns = |idx: usize| -> bool {
        if !grid.is_inside(idx) {
            return false;
        }
        let q = grid.center(idx);
        argmax_at(q, positions, specs, candidates.iter().copied()) == Some(i)
            && (!limited || specs[i].in_range(specs[i].dist_sq(positions[i], q)))
    };

    let mut mask = vec![false; grid.len()];
    let Some(seed) = grid.cell_containing(positions[i]).filter(|&s| owns(s)) else {
        return mask;
    };
    let mut visited = vec![false; grid.len()];
    visited[seed] = true;
    mask[seed] = true;
    let mut stack = vec![seed];
    while let Some(c) = stack.pop() {
        for nb in grid.neighbors8(c) {
            if !visited[nb] {
                visited[nb] = true;
                if owns(nb) {
                    mask[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    mask
}

/// Compares neighbour-restricted cells and centroids against the global
/// computation, using the supplied graph as each agent's knowledge.
pub fn verify_with_graph(
    env: &Environment,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
    limited: bool,
    graph: &NeighborGraph,
) -> Result<DistributednessReport> {
    let labels = if limited {
        assign_limited(&env.grid, positions, specs)?
    } else {
        assign(&env.grid, positions, specs)?
    };
    let global = all_moments(env, &labels, positions, specs)?;
    let mut agents = Vec::with_capacity(positions.len());
    for i in 0..positions.len() {
        let neighbors: Vec<usize> = graph.neighbors(i).iter().copied().collect();
        let local = local_cell_mask(env, positions, specs, limited, i, &neighbors);
        let global_mask = cell_mask(&labels, i)?;
        let mask_mismatch = local
            .iter()
            .zip(&global_mask)
            .filter(|(a, b)| a != b)
            .count();
        let m = cell_moments(env, &specs[i], positions[i], &local)?;
        let centroid_discrepancy = if m.empty && global[i].empty {
            0.0
        } else if m.empty != global[i].empty {
            f64::INFINITY
        } else {
            m.centroid.distance(global[i].centroid)
        };
        agents.push(AgentCheck {
            neighbors,
            mask_mismatch,
            centroid_discrepancy,
        });
    }
    let max_centroid_discrepancy = agents
        .iter()
        .map(|a| a.centroid_discrepancy)
        .fold(0.0, f64::max);
    Ok(DistributednessReport {
        agents,
        max_centroid_discrepancy,
    })
}

pub fn verify_scenario(scenario: &Scenario, positions: &[Vec2]) -> Result<DistributednessReport> {
    let graph = delaunay_graph(&scenario.env, positions, &scenario.specs, scenario.limited)?;
    verify_with_graph(
        &scenario.env,
        positions,
        &scenario.specs,
        scenario.limited,
        &graph,
    )
}

/// Neighbour-restricted recomputation at `positions` for the configured
/// agents.
pub fn verify_distributedness(
    config: &RunConfig,
    positions: &[Vec2],
) -> Result<DistributednessReport> {
    verify_scenario(&config.build()?, positions)
}

/// Copy of `graph` with every agent's geometrically nearest neighbour edge
/// removed. Verification against it should fail on a generic configuration.
pub fn drop_nearest_neighbors(graph: &NeighborGraph, positions: &[Vec2]) -> NeighborGraph {
    let mut out = graph.clone();
    for i in 0..graph.agent_count() {
        let nearest = graph.neighbors(i).iter().copied().min_by(|&a, &b| {
            positions[i]
                .distance(positions[a])
                .total_cmp(&positions[i].distance(positions[b]))
        });
        if let Some(j) = nearest {
            out.remove_edge(i, j);
        }
    }
    out
}
