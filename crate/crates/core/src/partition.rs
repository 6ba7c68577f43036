//! Generalized Voronoi partition on the raster and its neighbour graph.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::grid::{format_matrix, Grid};
use crate::node::{check_cutoff_equality, NodeFunctionSpec};

/// Owner of each grid cell, `None` outside the domain (and, for limited
/// partitions, outside the owner's sensing range).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionLabels {
    owner: Vec<Option<usize>>,
    agents: usize,
    limited: bool,
}

impl PartitionLabels {
    pub fn owners(&self) -> &[Option<usize>] {
        &self.owner
    }

    pub fn owner(&self, idx: usize) -> Option<usize> {
        self.owner[idx]
    }

    pub fn agent_count(&self) -> usize {
        self.agents
    }

    pub fn is_limited(&self) -> bool {
        self.limited
    }

    /// Number of cells owned by each agent.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.agents];
        for i in self.owner.iter().flatten() {
            counts[*i] += 1;
        }
        counts
    }

    /// Plain-text matrix of owner indices (0-based), `-1` for none.
    pub fn to_matrix_text(&self, nx: usize, ny: usize) -> String {
        let cells: Vec<i64> = self
            .owner
            .iter()
            .map(|o| o.map_or(-1, |i| i as i64))
            .collect();
        format_matrix(nx, ny, &cells)
    }

    pub fn from_matrix_text(text: &str, agents: usize) -> std::result::Result<Self, String> {
        let (_, _, values) = crate::grid::parse_matrix(text)?;
        let mut owner = Vec::with_capacity(values.len());
        for v in values {
            owner.push(match v {
                -1.0 => None,
                v if v >= 0.0 && v.fract() == 0.0 && (v as usize) < agents => Some(v as usize),
                v => return Err(format!("invalid owner index {v}")),
            });
        }
        Ok(PartitionLabels {
            owner,
            agents,
            limited: false,
        })
    }
}

fn validate_agents(grid: &Grid, positions: &[Vec2], specs: &[NodeFunctionSpec]) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::validation("agent list is empty"));
    }
    if positions.len() != specs.len() {
        return Err(Error::validation(format!(
            "{} positions but {} node functions",
            positions.len(),
            specs.len()
        )));
    }
    for (i, p) in positions.iter().enumerate() {
        if !p.is_finite() || !grid.in_extent(*p) {
            return Err(Error::validation(format!(
                "agent {i} position ({}, {}) is outside the domain",
                p.x, p.y
            )));
        }
        for (j, q) in positions[..i].iter().enumerate() {
            if p == q {
                return Err(Error::validation(format!(
                    "agents {j} and {i} share position ({}, {})",
                    p.x, p.y
                )));
            }
        }
    }
    Ok(())
}

/// Index of the most effective candidate at `q`; ties go to the first
/// candidate in iteration order.
#[inline]
pub(crate) fn argmax_at(
    q: Vec2,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
    candidates: impl IntoIterator<Item = usize>,
) -> Option<usize> {
    let mut best = None;
    let mut best_v = f64::NEG_INFINITY;
    for i in candidates {
        let v = specs[i].eval_raw(positions[i], q);
        if best.is_none() || v > best_v {
            best = Some(i);
            best_v = v;
        }
    }
    best
}

fn label_cells(
    grid: &Grid,
    f: impl Fn(Vec2) -> Option<usize> + Sync,
) -> Vec<Option<usize>> {
    let mut owner = vec![None; grid.len()];
    owner
        .par_chunks_mut(grid.nx)
        .enumerate()
        .for_each(|(iy, row)| {
            for (ix, cell) in row.iter_mut().enumerate() {
                let idx = grid.index(ix, iy);
                if grid.is_inside(idx) {
                    *cell = f(grid.center_of(ix, iy));
                }
            }
        });
    owner
}

/// Labels every inside cell with the agent whose node function is largest
/// there. Ties go to the lowest index.
pub fn assign(
    grid: &Grid,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Result<PartitionLabels> {
    validate_agents(grid, positions, specs)?;
    let n = positions.len();
    let owner = label_cells(grid, |q| argmax_at(q, positions, specs, 0..n));
    Ok(PartitionLabels {
        owner,
        agents: n,
        limited: false,
    })
}

/// Like [`assign`], but a cell is kept only if it lies within its owner's
/// range limit.
pub fn assign_limited(
    grid: &Grid,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Result<PartitionLabels> {
    validate_agents(grid, positions, specs)?;
    check_cutoff_equality(specs)?;
    let n = positions.len();
    let owner = label_cells(grid, |q| {
        argmax_at(q, positions, specs, 0..n)
            .filter(|&i| specs[i].in_range(specs[i].dist_sq(positions[i], q)))
    });
    Ok(PartitionLabels {
        owner,
        agents: n,
        limited: true,
    })
}

/// Cell adjacency rule for the neighbour graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    /// Edge-sharing cells only.
    Four,
    /// Edge- or corner-sharing cells.
    Eight,
}

/// Undirected agent adjacency derived from the partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    adjacency: Vec<BTreeSet<usize>>,
}

impl NeighborGraph {
    pub fn empty(agents: usize) -> Self {
        NeighborGraph {
            adjacency: vec![BTreeSet::new(); agents],
        }
    }

    pub fn agent_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.adjacency[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adjacency[i].insert(j);
            self.adjacency[j].insert(i);
        }
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adjacency[i].remove(&j);
        self.adjacency[j].remove(&i);
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, set)| set.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}

/// Agents are adjacent when some cell of one touches a cell of the other.
pub fn neighbor_graph(labels: &PartitionLabels, grid: &Grid) -> NeighborGraph {
    neighbor_graph_with(labels, grid, Adjacency::Four)
}

pub fn neighbor_graph_with(
    labels: &PartitionLabels,
    grid: &Grid,
    adjacency: Adjacency,
) -> NeighborGraph {
    let mut g = NeighborGraph::empty(labels.agents);
    // Only forward neighbours are needed: each unordered cell pair is seen once.
    let forward: &[(usize, usize)] = match adjacency {
        Adjacency::Four => &[(1, 0), (0, 1)],
        Adjacency::Eight => &[(1, 0), (0, 1), (1, 1)],
    };
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let Some(a) = labels.owner[grid.index(ix, iy)] else {
                continue;
            };
            for &(dx, dy) in forward {
                let (jx, jy) = (ix + dx, iy + dy);
                if jx < grid.nx && jy < grid.ny {
                    if let Some(b) = labels.owner[grid.index(jx, jy)] {
                        g.add_edge(a, b);
                    }
                }
            }
            // anti-diagonal (+1, -1) completes the 8-neighbourhood
            if adjacency == Adjacency::Eight && iy > 0 && ix + 1 < grid.nx {
                if let Some(b) = labels.owner[grid.index(ix + 1, iy - 1)] {
                    g.add_edge(a, b);
                }
            }
        }
    }
    g
}

/// Cells owned by agent `i`. May be all false.
pub fn cell_mask(labels: &PartitionLabels, i: usize) -> Result<Vec<bool>> {
    if i >= labels.agents {
        return Err(Error::validation(format!(
            "agent index {i} out of range for {} agents",
            labels.agents
        )));
    }
    Ok(labels.owner.iter().map(|o| *o == Some(i)).collect())
}

/// Number of 4-connected components of a mask.
pub fn connected_components(grid: &Grid, mask: &[bool]) -> usize {
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(c) = stack.pop() {
            for nb in grid.neighbors4(c) {
                if mask[nb] && !seen[nb] {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use crate::grid::build_grid;

    fn square10(res: f64) -> Grid {
        build_grid(&ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap(), res).unwrap()
    }

    #[test]
    fn single_agent_owns_everything() {
        let g = square10(5.0);
        let l = assign(&g, &[Vec2::new(3.0, 3.0)], &[NodeFunctionSpec::quadratic(2.0)]).unwrap();
        assert_eq!(cell_mask(&l, 0).unwrap(), g.inside_mask());
        assert!(neighbor_graph(&l, &g).edges().is_empty());
        assert!(cell_mask(&l, 1).is_err());
    }

    #[test]
    fn homogeneous_pair_splits_at_bisector() {
        let g = square10(10.0);
        let specs = vec![NodeFunctionSpec::quadratic(1.0); 2];
        let l = assign(&g, &[Vec2::new(2.0, 5.0), Vec2::new(8.0, 5.0)], &specs).unwrap();
        for idx in 0..g.len() {
            let c = g.center(idx);
            let expect = if c.x < 5.0 { 0 } else { 1 };
            assert_eq!(l.owner(idx), Some(expect), "cell at {c:?}");
        }
        assert_eq!(neighbor_graph(&l, &g).edges(), vec![(0, 1)]);
    }

    #[test]
    fn collinear_triple_graph() {
        let g = square10(10.0);
        let specs = vec![NodeFunctionSpec::quadratic(1.0); 3];
        let ps = [Vec2::new(1.0, 5.0), Vec2::new(5.0, 5.0), Vec2::new(9.0, 5.0)];
        let l = assign(&g, &ps, &specs).unwrap();
        assert_eq!(neighbor_graph(&l, &g).edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(
            neighbor_graph_with(&l, &g, Adjacency::Eight).edges(),
            vec![(0, 1), (1, 2)]
        );
    }

    #[test]
    fn rejects_bad_agent_lists() {
        let g = square10(2.0);
        let s = NodeFunctionSpec::quadratic(1.0);
        assert!(assign(&g, &[], &[]).is_err());
        let p = Vec2::new(1.0, 1.0);
        assert!(assign(&g, &[p, p], &[s.clone(), s.clone()]).is_err());
        assert!(assign(&g, &[p], &[s.clone(), s.clone()]).is_err());
        assert!(assign(&g, &[Vec2::new(11.0, 1.0)], std::slice::from_ref(&s)).is_err());
        assert!(assign_limited(&g, &[p], &[s]).is_err());
    }

    #[test]
    fn limited_far_apart_discs() {
        let g = square10(20.0);
        let s = NodeFunctionSpec::quadratic(1.0).with_range_limit(1.0);
        let l = assign_limited(
            &g,
            &[Vec2::new(2.0, 2.0), Vec2::new(8.0, 8.0)],
            &[s.clone(), s],
        )
        .unwrap();
        let counts = l.cell_counts();
        let disc = std::f64::consts::PI * 400.0;
        for c in counts {
            assert!((c as f64 - disc).abs() / disc < 0.03);
        }
        assert!(neighbor_graph(&l, &g).edges().is_empty());
        let none = l.owners().iter().filter(|o| o.is_none()).count();
        assert_eq!(none, g.len() - l.cell_counts().iter().sum::<usize>());
    }

    #[test]
    fn labels_matrix_round_trip() {
        let g = square10(1.0);
        let specs = vec![NodeFunctionSpec::quadratic(1.0); 2];
        let l = assign(&g, &[Vec2::new(2.0, 5.0), Vec2::new(8.0, 5.0)], &specs).unwrap();
        let text = l.to_matrix_text(g.nx, g.ny);
        assert!(text.starts_with("10 10\n0 0 0 0 0 1 1 1 1 1\n"));
        let back = PartitionLabels::from_matrix_text(&text, 2).unwrap();
        assert_eq!(back.owners(), l.owners());
    }

    #[test]
    fn component_count() {
        let g = square10(1.0);
        let mut mask = vec![false; g.len()];
        mask[0] = true;
        mask[1] = true;
        mask[g.index(5, 5)] = true;
        mask[g.index(6, 6)] = true;
        assert_eq!(connected_components(&g, &mask), 3);
    }
}
