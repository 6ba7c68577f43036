//! Planar points and convex polygons.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or vector in the plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self * rhs.x, self * rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Validates convexity and orientation. Every consecutive vertex triple
    /// must turn strictly left; collinear triples are rejected.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::validation(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        if let Some(k) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("polygon vertex {k} is not finite")));
        }
        for k in 0..n {
            let a = vertices[k];
            let b = vertices[(k + 1) % n];
            let c = vertices[(k + 2) % n];
            let turn = (b - a).cross(c - b);
            if turn <= 0.0 {
                return Err(Error::validation(format!(
                    "polygon is not strictly convex counterclockwise at vertex triple ({k}, {}, {}): \
                     ({}, {}), ({}, {}), ({}, {})",
                    (k + 1) % n,
                    (k + 2) % n,
                    a.x,
                    a.y,
                    b.x,
                    b.y,
                    c.x,
                    c.y
                )));
            }
        }
        let poly = ConvexPolygon { vertices };
        // A star-shaped winding that turns left everywhere but wraps more than once.
        let total_turn: f64 = (0..n)
            .map(|k| {
                let a = poly.vertices[k];
                let b = poly.vertices[(k + 1) % n];
                let c = poly.vertices[(k + 2) % n];
                let (u, v) = (b - a, c - b);
                u.cross(v).atan2(u.dot(v))
            })
            .sum();
        if (total_turn - std::f64::consts::TAU).abs() > 1e-6 {
            return Err(Error::validation("polygon boundary winds more than once"));
        }
        if poly.area() <= 0.0 {
            return Err(Error::validation("polygon has zero area"));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::ZERO;
        for (a, b) in self.edges() {
            c += a.cross(b) * (a + b);
        }
        (1.0 / (6.0 * self.area())) * c
    }

    /// Closed point-in-polygon test.
    pub fn contains(&self, q: Vec2) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(q - a) >= 0.0)
    }

    /// Strict interior test.
    pub fn contains_strict(&self, q: Vec2) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(q - a) > 0.0)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.distance(*b));
            }
        }
        d
    }

    /// Nearest point of the polygon to `q` (identity for points inside).
    pub fn project(&self, q: Vec2) -> Vec2 {
        if self.contains(q) {
            return q;
        }
        let mut best = q;
        let mut best_d = f64::INFINITY;
        for (a, b) in self.edges() {
            let ab = b - a;
            let t = ((q - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            let p = a + t * ab;
            let d = (q - p).norm_sq();
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
        best
    }

    /// Copy with every vertex moved toward the centroid by `factor`.
    pub fn scaled_about_centroid(&self, factor: f64) -> Result<Self> {
        let c = self.centroid();
        Self::new(
            self.vertices
                .iter()
                .map(|&v| c + factor * (v - c))
                .collect(),
        )
    }
}

impl TryFrom<Vec<Vec2>> for ConvexPolygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        ConvexPolygon::new(v)
    }
}

impl From<ConvexPolygon> for Vec<Vec2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}
