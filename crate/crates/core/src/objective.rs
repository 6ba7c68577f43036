//! Coverage objective, effective-density cell moments, and gradients.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::grid::{integrate, Environment, Grid};
use crate::node::{check_cutoff_equality, NodeFunctionSpec};
use crate::partition::{assign, assign_limited, PartitionLabels};

/// Cells with effective mass below this are treated as empty.
pub const EMPTY_MASS: f64 = 1e-12;

/// Default finite-difference step for [`fd_gradient_oracle`]. Spans many
/// relabeled cells, so it estimates the smoothed gradient and carries an
/// O(h^2) truncation error that grows where cells are small.
pub const DEFAULT_FD_STEP: f64 = 0.1;

/// Step small enough that repartitioning almost never moves a cell, so the
/// difference quotient tracks the derivative of the raster objective itself
/// while round-off stays far below gradient tolerances.
pub const RASTER_FD_STEP: f64 = 1e-6;

/// Mass and centroid of a cell under the effective density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMoments {
    pub mass: f64,
    /// Equals the agent position when `empty`.
    pub centroid: Vec2,
    pub empty: bool,
}

impl CellMoments {
    fn from_sums(mass: f64, mx: f64, my: f64, p: Vec2) -> Self {
        if mass < EMPTY_MASS {
            CellMoments {
                mass,
                centroid: p,
                empty: true,
            }
        } else {
            CellMoments {
                mass,
                centroid: Vec2::new(mx / mass, my / mass),
                empty: false,
            }
        }
    }
}

/// `∂f/∂(r^2)` at a cell, flooring the distance at a quarter cell for
/// families that are singular at the node.
#[inline]
fn cell_df(spec: &NodeFunctionSpec, p: Vec2, q: Vec2, grid: &Grid) -> Result<f64> {
    let mut r2 = spec.dist_sq(p, q);
    if spec.family.singular_at_node() {
        let floor = 0.25 * grid.cell_size;
        r2 = r2.max(floor * floor);
    }
    spec.df_dr2_r2(r2)
}

/// `φ̃(q) = -φ(q) ∂f/∂(r^2)` on masked cells, zero elsewhere.
pub fn effective_density(
    env: &Environment,
    spec: &NodeFunctionSpec,
    p: Vec2,
    mask: &[bool],
) -> Result<Vec<f64>> {
    let grid = &env.grid;
    if mask.len() != grid.len() {
        return Err(Error::validation("mask does not match the grid"));
    }
    let phi = env.density_values();
    (0..grid.len())
        .map(|idx| {
            if mask[idx] && grid.is_inside(idx) {
                Ok(-phi[idx] * cell_df(spec, p, grid.center(idx), grid)?)
            } else {
                Ok(0.0)
            }
        })
        .collect()
}

/// Moments of one masked cell, via [`integrate`].
pub fn cell_moments(
    env: &Environment,
    spec: &NodeFunctionSpec,
    p: Vec2,
    mask: &[bool],
) -> Result<CellMoments> {
    let grid = &env.grid;
    let phit = effective_density(env, spec, p, mask)?;
    let xw: Vec<f64> = (0..grid.len()).map(|i| grid.center(i).x * phit[i]).collect();
    let yw: Vec<f64> = (0..grid.len()).map(|i| grid.center(i).y * phit[i]).collect();
    let mass = integrate(grid, mask, &phit)?;
    let mx = integrate(grid, mask, &xw)?;
    let my = integrate(grid, mask, &yw)?;
    Ok(CellMoments::from_sums(mass, mx, my, p))
}

/// Moments of every agent's cell in one row-major pass. Bit-identical to
/// calling [`cell_moments`] per agent.
pub fn all_moments(
    env: &Environment,
    labels: &PartitionLabels,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Result<Vec<CellMoments>> {
    let grid = &env.grid;
    let phi = env.density_values();
    let area = grid.cell_area();
    let n = positions.len();
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64); n];
    for (idx, owner) in labels.owners().iter().enumerate() {
        let Some(i) = *owner else { continue };
        let q = grid.center(idx);
        let phit = -phi[idx] * cell_df(&specs[i], positions[i], q, grid)?;
        let s = &mut sums[i];
        s.0 += phit * area;
        s.1 += (q.x * phit) * area;
        s.2 += (q.y * phit) * area;
    }
    Ok(sums
        .into_iter()
        .zip(positions)
        .map(|((m, mx, my), &p)| CellMoments::from_sums(m, mx, my, p))
        .collect())
}

/// `H = Σ_cells f_owner(q) φ(q) dA` over owned cells.
pub fn objective_h(
    env: &Environment,
    labels: &PartitionLabels,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> f64 {
    let grid = &env.grid;
    let phi = env.density_values();
    let area = grid.cell_area();
    labels
        .owners()
        .iter()
        .enumerate()
        .fold(0.0, |acc, (idx, owner)| match *owner {
            Some(i) => acc + specs[i].eval(positions[i], grid.center(idx)) * phi[idx] * area,
            None => acc,
        })
}

/// Range-limited objective. Inside cells outside every sensing range
/// contribute the common saturation value.
pub fn objective_h_limited(
    env: &Environment,
    labels: &PartitionLabels,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Result<f64> {
    let cutoff = check_cutoff_equality(specs)?;
    let grid = &env.grid;
    let phi = env.density_values();
    let area = grid.cell_area();
    Ok(labels
        .owners()
        .iter()
        .enumerate()
        .filter(|(idx, _)| grid.is_inside(*idx))
        .fold(0.0, |acc, (idx, owner)| {
            let f = match *owner {
                Some(i) => specs[i].eval(positions[i], grid.center(idx)),
                None => cutoff,
            };
            acc + f * phi[idx] * area
        }))
}

/// `∂H/∂p_i = 2 L_i M̃_i (C̃_i - p_i)`, zero for empty cells. `L_i` is the
/// identity for Euclidean specs.
pub fn gradient_from_moments(
    moments: &[CellMoments],
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Vec<Vec2> {
    moments
        .iter()
        .zip(positions)
        .zip(specs)
        .map(|((m, &p), spec)| {
            if m.empty {
                return Vec2::ZERO;
            }
            let v = 2.0 * m.mass * (m.centroid - p);
            match &spec.metric {
                None => v,
                Some(l) => l.apply(v),
            }
        })
        .collect()
}

pub fn analytic_gradient(
    env: &Environment,
    labels: &PartitionLabels,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Result<Vec<Vec2>> {
    let moments = all_moments(env, labels, positions, specs)?;
    Ok(gradient_from_moments(&moments, positions, specs))
}

/// Objective with the partition recomputed from scratch. Uses the limited
/// form when every spec carries a range limit.
pub fn objective_at(
    env: &Environment,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
) -> Result<f64> {
    if specs.iter().all(|s| s.range_limit.is_some()) {
        let labels = assign_limited(&env.grid, positions, specs)?;
        objective_h_limited(env, &labels, positions, specs)
    } else {
        let labels = assign(&env.grid, positions, specs)?;
        Ok(objective_h(env, &labels, positions, specs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub gradient: Vec<Vec2>,
    /// Per agent and axis: a one-sided difference was used because the
    /// displaced position left the domain.
    pub one_sided: Vec<[bool; 2]>,
}

/// Central finite differences of the objective, repartitioning at every
/// displaced configuration.
pub fn fd_gradient_oracle(
    env: &Environment,
    positions: &[Vec2],
    specs: &[NodeFunctionSpec],
    h: f64,
) -> Result<FdGradient> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::validation(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let base = objective_at(env, positions, specs)?;
    let mut gradient = Vec::with_capacity(positions.len());
    let mut one_sided = Vec::with_capacity(positions.len());
    let mut moved = positions.to_vec();
    for i in 0..positions.len() {
        let mut g = [0.0; 2];
        let mut flags = [false; 2];
        for (axis, e) in [Vec2::new(h, 0.0), Vec2::new(0.0, h)].into_iter().enumerate() {
            let plus = positions[i] + e;
            let minus = positions[i] - e;
            let inside_plus = env.polygon.contains(plus);
            let inside_minus = env.polygon.contains(minus);
            let mut eval_at = |p: Vec2| -> Result<f64> {
                moved[i] = p;
                let v = objective_at(env, &moved, specs);
                moved[i] = positions[i];
                v
            };
            g[axis] = match (inside_plus, inside_minus) {
                (true, true) => (eval_at(plus)? - eval_at(minus)?) / (2.0 * h),
                (true, false) => {
                    flags[axis] = true;
                    (eval_at(plus)? - base) / h
                }
                (false, true) => {
                    flags[axis] = true;
                    (base - eval_at(minus)?) / h
                }
                (false, false) => {
                    return Err(Error::validation(format!(
                        "step {h} leaves the domain on both sides of agent {i}"
                    )))
                }
            };
        }
        gradient.push(Vec2::new(g[0], g[1]));
        one_sided.push(flags);
    }
    Ok(FdGradient {
        gradient,
        one_sided,
    })
}
