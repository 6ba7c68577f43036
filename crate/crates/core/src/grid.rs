//! Raster discretization of the mission domain, density fields, and
//! midpoint quadrature.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2};

/// Uniform square raster covering a polygon's bounding box.
///
/// Cells are indexed row-major: `idx = iy * nx + ix`, row 0 at minimum `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Vec2,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    inside: Vec<bool>,
    inside_count: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn center(&self, idx: usize) -> Vec2 {
        let (ix, iy) = self.coords(idx);
        self.center_of(ix, iy)
    }

    pub fn center_of(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn inside_count(&self) -> usize {
        self.inside_count
    }

    /// Area estimate of the polygon: inside cells × cell area.
    pub fn inside_area(&self) -> f64 {
        self.inside_count as f64 * self.cell_area()
    }

    /// Upper corner of the raster extent.
    pub fn extent_max(&self) -> Vec2 {
        Vec2::new(
            self.origin.x + self.nx as f64 * self.cell_size,
            self.origin.y + self.ny as f64 * self.cell_size,
        )
    }

    pub fn in_extent(&self, q: Vec2) -> bool {
        let hi = self.extent_max();
        q.x >= self.origin.x && q.y >= self.origin.y && q.x <= hi.x && q.y <= hi.y
    }

    /// Index of the cell whose closed square contains `q`, if any.
    pub fn cell_containing(&self, q: Vec2) -> Option<usize> {
        if !self.in_extent(q) {
            return None;
        }
        let fx = ((q.x - self.origin.x) / self.cell_size).floor() as usize;
        let fy = ((q.y - self.origin.y) / self.cell_size).floor() as usize;
        Some(self.index(fx.min(self.nx - 1), fy.min(self.ny - 1)))
    }

    /// Cell-center inclusion mask of an arbitrary polygon on this raster.
    pub fn mask_for(&self, polygon: &ConvexPolygon) -> Vec<bool> {
        (0..self.len())
            .map(|idx| polygon.contains(self.center(idx)))
            .collect()
    }

    /// Row-major 4-connected neighbours of a cell.
    pub fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors_with(idx, &[(-1, 0), (1, 0), (0, -1), (0, 1)])
    }

    /// Row-major 8-connected neighbours of a cell.
    pub fn neighbors8(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors_with(
            idx,
            &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        )
    }

    fn neighbors_with<'a>(
        &'a self,
        idx: usize,
        offsets: &'a [(isize, isize)],
    ) -> impl Iterator<Item = usize> + 'a {
        let (ix, iy) = self.coords(idx);
        offsets.iter().filter_map(move |&(dx, dy)| {
            let jx = ix.checked_add_signed(dx)?;
            let jy = iy.checked_add_signed(dy)?;
            (jx < self.nx && jy < self.ny).then(|| self.index(jx, jy))
        })
    }
}

/// Rasterizes `polygon` at `resolution` cells per unit length.
pub fn build_grid(polygon: &ConvexPolygon, resolution: f64) -> Result<Grid> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::validation(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let cell_size = 1.0 / resolution;
    let (lo, hi) = polygon.bounding_box();
    let count = |extent: f64| -> usize {
        let n = extent / cell_size;
        // absorb round-off so that 10.0 / 0.02 gives 500, not 501
        let rounded = n.round();
        if (n - rounded).abs() < 1e-9 * rounded.max(1.0) {
            (rounded as usize).max(1)
        } else {
            (n.ceil() as usize).max(1)
        }
    };
    let nx = count(hi.x - lo.x);
    let ny = count(hi.y - lo.y);
    let mut grid = Grid {
        origin: lo,
        cell_size,
        nx,
        ny,
        inside: Vec::new(),
        inside_count: 0,
    };
    grid.inside = grid.mask_for(polygon);
    grid.inside_count = grid.inside.iter().filter(|&&b| b).count();
    if grid.inside_count == 0 {
        return Err(Error::validation(
            "no cell center falls inside the polygon; increase the resolution",
        ));
    }
    Ok(grid)
}

/// Midpoint-rule integral over masked cells, summed in row-major order.
pub fn integrate(grid: &Grid, mask: &[bool], values: &[f64]) -> Result<f64> {
    if mask.len() != grid.len() || values.len() != grid.len() {
        return Err(Error::validation(format!(
            "shape mismatch: grid has {} cells, mask {} and values {}",
            grid.len(),
            mask.len(),
            values.len()
        )));
    }
    let area = grid.cell_area();
    Ok(mask
        .iter()
        .zip(values)
        .filter(|(m, _)| **m)
        .fold(0.0, |acc, (_, v)| acc + v * area))
}

/// Density values on a regular lattice, bilinearly interpolated between
/// lattice-cell centers and clamped at the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDensity {
    pub lo: Vec2,
    pub hi: Vec2,
    pub nx: usize,
    pub ny: usize,
    values: Vec<f64>,
}

impl SampledDensity {
    pub fn new(lo: Vec2, hi: Vec2, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || values.len() != nx * ny {
            return Err(Error::validation(format!(
                "sampled density needs nx*ny = {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if !(hi.x > lo.x && hi.y > lo.y) {
            return Err(Error::validation("sampled density extent is empty"));
        }
        if let Some(k) = values
            .iter()
            .position(|v| !(v.is_finite() && (0.0..=1.0).contains(v)))
        {
            return Err(Error::validation(format!(
                "sampled density value {} at index {k} is outside [0, 1]",
                values[k]
            )));
        }
        Ok(SampledDensity {
            lo,
            hi,
            nx,
            ny,
            values,
        })
    }

    /// Samples `f` at the lattice-cell centers.
    pub fn from_fn(
        lo: Vec2,
        hi: Vec2,
        nx: usize,
        ny: usize,
        f: impl Fn(Vec2) -> f64,
    ) -> Result<Self> {
        let dx = (hi.x - lo.x) / nx as f64;
        let dy = (hi.y - lo.y) / ny as f64;
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(f(Vec2::new(
                    lo.x + (ix as f64 + 0.5) * dx,
                    lo.y + (iy as f64 + 0.5) * dy,
                )));
            }
        }
        Self::new(lo, hi, nx, ny, values)
    }

    /// Parses the plain-text matrix format: a header line `nx ny`, then `ny`
    /// rows of `nx` values, row 0 at minimum `y`.
    pub fn parse(text: &str, lo: Vec2, hi: Vec2) -> std::result::Result<Self, String> {
        let (nx, ny, values) = parse_matrix(text)?;
        Self::new(lo, hi, nx, ny, values).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path, lo: Vec2, hi: Vec2) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, lo, hi).map_err(|msg| Error::parse(path, msg))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value(&self, q: Vec2) -> f64 {
        let dx = (self.hi.x - self.lo.x) / self.nx as f64;
        let dy = (self.hi.y - self.lo.y) / self.ny as f64;
        let fx = ((q.x - self.lo.x) / dx - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((q.y - self.lo.y) / dy - 0.5).clamp(0.0, (self.ny - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.nx - 1), (y0 + 1).min(self.ny - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let at = |ix: usize, iy: usize| self.values[iy * self.nx + ix];
        let bottom = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
        let top = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
        bottom * (1.0 - ty) + top * ty
    }
}

/// Event density over the domain, valued in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityField {
    Uniform {
        level: f64,
    },
    /// `amplitude * exp(-decay * |q - center|^2)`
    Gaussian {
        amplitude: f64,
        decay: f64,
        center: Vec2,
    },
    Sampled(SampledDensity),
}

impl DensityField {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DensityField::Uniform { level } => {
                if !(level > 0.0 && level <= 1.0) {
                    return Err(Error::validation(format!(
                        "uniform density level must lie in (0, 1], got {level}"
                    )));
                }
            }
            DensityField::Gaussian {
                amplitude,
                decay,
                center,
            } => {
                if !(amplitude > 0.0 && amplitude <= 1.0) {
                    return Err(Error::validation(format!(
                        "gaussian amplitude must lie in (0, 1], got {amplitude}"
                    )));
                }
                if !(decay.is_finite() && decay >= 0.0) {
                    return Err(Error::validation(format!(
                        "gaussian decay must be finite and non-negative, got {decay}"
                    )));
                }
                if !center.is_finite() {
                    return Err(Error::validation("gaussian center is not finite"));
                }
            }
            DensityField::Sampled(_) => {}
        }
        Ok(())
    }

    /// Unchecked evaluation; callers guarantee `q` is within the raster.
    pub fn value(&self, q: Vec2) -> f64 {
        match self {
            DensityField::Uniform { level } => *level,
            DensityField::Gaussian {
                amplitude,
                decay,
                center,
            } => amplitude * (-decay * (q - *center).norm_sq()).exp(),
            DensityField::Sampled(s) => s.value(q),
        }
    }

    /// Values at every cell center; zero outside the polygon.
    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len())
            .map(|idx| {
                if grid.is_inside(idx) {
                    self.value(grid.center(idx))
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Density at `q`; fails for points outside the raster extent.
pub fn density_at(field: &DensityField, grid: &Grid, q: Vec2) -> Result<f64> {
    if !grid.in_extent(q) {
        return Err(Error::OutsideGrid { x: q.x, y: q.y });
    }
    Ok(field.value(q))
}

/// Domain polygon, its raster, and the density sampled on it.
#[derive(Debug, Clone)]
pub struct Environment {
    pub polygon: ConvexPolygon,
    pub grid: Grid,
    pub density: DensityField,
    density_values: Vec<f64>,
}

impl Environment {
    pub fn new(polygon: ConvexPolygon, resolution: f64, density: DensityField) -> Result<Self> {
        density.validate()?;
        let grid = build_grid(&polygon, resolution)?;
        let density_values = density.sample(&grid);
        Ok(Environment {
            polygon,
            grid,
            density,
            density_values,
        })
    }

    /// Density at each cell center (zero outside).
    pub fn density_values(&self) -> &[f64] {
        &self.density_values
    }

    /// Total density mass, `∫_Q φ`.
    pub fn total_density(&self) -> f64 {
        integrate(&self.grid, self.grid.inside_mask(), &self.density_values)
            .expect("density sampled on its own grid")
    }
}

pub(crate) fn parse_matrix(text: &str) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty matrix file")?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| format!("bad header {header:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let [nx, ny] = dims[..] else {
        return Err(format!("header must be \"nx ny\", got {header:?}"));
    };
    let mut values = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let line = lines
            .next()
            .ok_or_else(|| format!("expected {ny} rows, found {row}"))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| format!("row {row}: bad value {tok:?}: {e}"))?,
            );
        }
        if values.len() - before != nx {
            return Err(format!(
                "row {row} has {} values, expected {nx}",
                values.len() - before
            ));
        }
    }
    if lines.next().is_some() {
        return Err(format!("more than {ny} rows"));
    }
    Ok((nx, ny, values))
}

/// Writes a matrix in the same `nx ny` + rows layout used by density files.
pub(crate) fn format_matrix<T: std::fmt::Display>(nx: usize, ny: usize, cells: &[T]) -> String {
    let mut out = format!("{nx} {ny}\n");
    for row in cells.chunks(nx).take(ny) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Serializable description of a density, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {
        level: f64,
    },
    Gaussian {
        amplitude: f64,
        decay: f64,
        center: Vec2,
    },
    /// Matrix file; the lattice spans the polygon's bounding box.
    Sampled {
        path: std::path::PathBuf,
    },
}

impl DensitySpec {
    /// Builds the field; relative sample paths resolve against `base_dir`.
    pub fn resolve(&self, polygon: &ConvexPolygon, base_dir: &Path) -> Result<DensityField> {
        Ok(match self {
            DensitySpec::Uniform { level } => DensityField::Uniform { level: *level },
            DensitySpec::Gaussian {
                amplitude,
                decay,
                center,
            } => DensityField::Gaussian {
                amplitude: *amplitude,
                decay: *decay,
                center: *center,
            },
            DensitySpec::Sampled { path } => {
                let (lo, hi) = polygon.bounding_box();
                DensityField::Sampled(SampledDensity::load(&base_dir.join(path), lo, hi)?)
            }
        })
    }
}
