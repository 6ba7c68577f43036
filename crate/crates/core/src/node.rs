//! Node functions: per-agent sensing effectiveness as a decreasing function
//! of (possibly anisotropic) distance, with optional range saturation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Samples used by the numerical monotonicity check.
const MONOTONICITY_SAMPLES: usize = 1000;

/// Tolerance for the equal-cutoff requirement of range-limited runs.
pub const CUTOFF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `-alpha * r - d_add`
    WeightedLinear,
    /// `-alpha * r^2`
    Quadratic,
    /// `-r`
    Standard,
    /// `-(r^2 - r_power^2)`
    Power,
    /// `sum_k poly_coeffs[k] * (r^2)^k`
    CustomPolynomial,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::WeightedLinear => "weighted_linear",
            Family::Quadratic => "quadratic",
            Family::Standard => "standard",
            Family::Power => "power",
            Family::CustomPolynomial => "custom_polynomial",
        }
    }

    /// Families whose derivative in `r^2` blows up at the node.
    pub fn singular_at_node(self) -> bool {
        matches!(self, Family::WeightedLinear | Family::Standard)
    }
}

/// Symmetric positive-definite matrix `L` defining `r^2 = (q-p)^T L (q-p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricRepr", into = "MetricRepr")]
pub struct Metric2x2 {
    m: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum MetricRepr {
    Matrix { matrix: [[f64; 2]; 2] },
    Axes { a: f64, b: f64, c: f64, theta: f64 },
}

impl TryFrom<MetricRepr> for Metric2x2 {
    type Error = Error;
    fn try_from(r: MetricRepr) -> Result<Self> {
        match r {
            MetricRepr::Matrix { matrix } => Metric2x2::new(matrix),
            MetricRepr::Axes { a, b, c, theta } => Metric2x2::from_axes(a, b, c, theta),
        }
    }
}

impl From<Metric2x2> for MetricRepr {
    fn from(m: Metric2x2) -> Self {
        MetricRepr::Matrix { matrix: m.m }
    }
}

impl Metric2x2 {
    pub const IDENTITY: Metric2x2 = Metric2x2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn new(m: [[f64; 2]; 2]) -> Result<Self> {
        let flat = [m[0][0], m[0][1], m[1][0], m[1][1]];
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("metric entries must be finite"));
        }
        let scale = flat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if (m[0][1] - m[1][0]).abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::validation("metric matrix must be symmetric"));
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(m[0][0] > 0.0 && det > 0.0) {
            return Err(Error::validation("metric matrix must be positive definite"));
        }
        Ok(Metric2x2 { m })
    }

    /// `L = F^T F` with `F = diag(c/a, c/b) * [[cos θ, sin θ], [-sin θ, cos θ]]`.
    pub fn from_axes(a: f64, b: f64, c: f64, theta: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0 && theta.is_finite()) {
            return Err(Error::validation(format!(
                "metric axes need a, b, c > 0 and finite theta, got a={a} b={b} c={c} theta={theta}"
            )));
        }
        let (s, co) = theta.sin_cos();
        let f = [[c / a * co, c / a * s], [-c / b * s, c / b * co]];
        let mut l = [[0.0; 2]; 2];
        for (i, row) in l.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f[0][i] * f[0][j] + f[1][i] * f[1][j];
            }
        }
        // symmetrize away round-off
        let off = 0.5 * (l[0][1] + l[1][0]);
        l[0][1] = off;
        l[1][0] = off;
        Metric2x2::new(l)
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn quad_form(&self, v: Vec2) -> f64 {
        v.dot(self.apply(v))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let [[a, b], [_, d]] = self.m;
        let half_tr = 0.5 * (a + d);
        half_tr + (0.25 * (a - d) * (a - d) + b * b).sqrt()
    }
}

fn one() -> f64 {
    1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Per-agent node function.
///
/// `eval` returns the range-saturated, shifted value `f̃(r) - shift`, where
/// `f̃(r) = f(min(r, range_limit))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFunctionSpec {
    pub family: Family,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub d_add: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub r_power: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub poly_coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric2x2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_limit: Option<f64>,
    /// Constant subtracted from every evaluation.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift: f64,
}

impl NodeFunctionSpec {
    fn with_family(family: Family) -> Self {
        NodeFunctionSpec {
            family,
            alpha: 1.0,
            d_add: 0.0,
            r_power: 0.0,
            poly_coeffs: Vec::new(),
            metric: None,
            range_limit: None,
            shift: 0.0,
        }
    }

    pub fn quadratic(alpha: f64) -> Self {
        NodeFunctionSpec {
            alpha,
            ..Self::with_family(Family::Quadratic)
        }
    }

    pub fn weighted_linear(alpha: f64, d_add: f64) -> Self {
        NodeFunctionSpec {
            alpha,
            d_add,
            ..Self::with_family(Family::WeightedLinear)
        }
    }

    pub fn standard() -> Self {
        Self::with_family(Family::Standard)
    }

    pub fn power(r_power: f64) -> Self {
        NodeFunctionSpec {
            r_power,
            ..Self::with_family(Family::Power)
        }
    }

    pub fn custom_polynomial(coeffs: Vec<f64>) -> Self {
        NodeFunctionSpec {
            poly_coeffs: coeffs,
            ..Self::with_family(Family::CustomPolynomial)
        }
    }

    pub fn with_metric(mut self, metric: Metric2x2) -> Self {
        self.metric = Some(metric);
        self
    }

    pub fn with_range_limit(mut self, r: f64) -> Self {
        self.range_limit = Some(r);
        self
    }

    /// Squared distance under this spec's metric.
    #[inline]
    pub fn dist_sq(&self, p: Vec2, q: Vec2) -> f64 {
        let d = q - p;
        match &self.metric {
            None => d.norm_sq(),
            Some(m) => m.quad_form(d),
        }
    }

    /// The unsaturated, unshifted profile `f` as a function of `r^2`.
    #[inline]
    pub fn profile(&self, r2: f64) -> f64 {
        match self.family {
            Family::WeightedLinear => -self.alpha * r2.sqrt() - self.d_add,
            Family::Quadratic => -self.alpha * r2,
            Family::Standard => -r2.sqrt(),
            Family::Power => -(r2 - self.r_power * self.r_power),
            Family::CustomPolynomial => self.poly_coeffs.iter().rev().fold(0.0, |acc, c| acc * r2 + c),
        }
    }

    /// `∂f/∂(r^2)` of the unsaturated profile.
    pub fn profile_df(&self, r2: f64) -> Result<f64> {
        Ok(match self.family {
            Family::WeightedLinear | Family::Standard => {
                if r2 <= 0.0 {
                    return Err(Error::Singular {
                        family: self.family.name(),
                    });
                }
                let alpha = if self.family == Family::Standard {
                    1.0
                } else {
                    self.alpha
                };
                -alpha / (2.0 * r2.sqrt())
            }
            Family::Quadratic => -self.alpha,
            Family::Power => -1.0,
            Family::CustomPolynomial => self
                .poly_coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * r2 + k as f64 * c),
        })
    }

    #[inline]
    pub fn in_range(&self, r2: f64) -> bool {
        match self.range_limit {
            None => true,
            Some(r) => r2 <= r * r,
        }
    }

    /// Saturated and shifted value at squared distance `r2`.
    #[inline]
    pub fn eval_r2(&self, r2: f64) -> f64 {
        let r2 = match self.range_limit {
            Some(r) if r2 > r * r => r * r,
            _ => r2,
        };
        self.profile(r2) - self.shift
    }

    /// `∂/∂(r^2)` of [`eval_r2`](Self::eval_r2); zero in the saturated region.
    pub fn df_dr2_r2(&self, r2: f64) -> Result<f64> {
        if !self.in_range(r2) {
            return Ok(0.0);
        }
        self.profile_df(r2)
    }

    #[inline]
    pub fn eval(&self, p: Vec2, q: Vec2) -> f64 {
        self.eval_r2(self.dist_sq(p, q))
    }

    /// Unsaturated, unshifted value used for partition comparisons.
    #[inline]
    pub fn eval_raw(&self, p: Vec2, q: Vec2) -> f64 {
        self.profile(self.dist_sq(p, q))
    }

    /// Saturation constant `f(R) - shift`, if range limited.
    pub fn cutoff_value(&self) -> Option<f64> {
        self.range_limit.map(|r| self.profile(r * r) - self.shift)
    }

    /// Checks parameters and numerically verifies strict decrease on
    /// `[0, diameter]` (or up to the range limit). `diameter` is the Euclidean
    /// domain diameter.
    pub fn validate(&self, diameter: f64) -> Result<()> {
        let name = self.family.name();
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::validation(format!(
                "{name}: alpha must be finite and positive, got {}",
                self.alpha
            )));
        }
        if !(self.d_add.is_finite() && self.d_add >= 0.0) {
            return Err(Error::validation(format!(
                "{name}: d_add must be finite and non-negative, got {}",
                self.d_add
            )));
        }
        if !(self.r_power.is_finite() && self.r_power >= 0.0) {
            return Err(Error::validation(format!(
                "{name}: r_power must be finite and non-negative, got {}",
                self.r_power
            )));
        }
        if !self.shift.is_finite() {
            return Err(Error::validation(format!("{name}: shift must be finite")));
        }
        if let Some(r) = self.range_limit {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::validation(format!(
                    "{name}: range_limit must be finite and positive, got {r}"
                )));
            }
        }
        if self.family == Family::CustomPolynomial {
            let c = &self.poly_coeffs;
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("custom_polynomial: coefficients must be finite"));
            }
            let higher = c.get(1..).unwrap_or(&[]);
            if higher.iter().any(|&v| v > 0.0) || !higher.iter().any(|&v| v < 0.0) {
                return Err(Error::validation(
                    "custom_polynomial: non-constant coefficients must all be <= 0 with at least one < 0",
                ));
            }
        } else if !self.poly_coeffs.is_empty() {
            return Err(Error::validation(format!(
                "{name}: poly_coeffs only apply to custom_polynomial"
            )));
        }

        let stretch = self.metric.map_or(1.0, |m| m.max_eigenvalue().sqrt());
        let mut r_max = diameter * stretch;
        if let Some(r) = self.range_limit {
            r_max = r_max.min(r);
        }
        if r_max > 0.0 {
            let mut prev = self.profile(0.0);
            for k in 1..MONOTONICITY_SAMPLES {
                let r = r_max * k as f64 / (MONOTONICITY_SAMPLES - 1) as f64;
                let v = self.profile(r * r);
                if v.partial_cmp(&prev) != Some(std::cmp::Ordering::Less) {
                    return Err(Error::validation(format!(
                        "{name}: node function is not strictly decreasing near r = {r}"
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }

    /// Rim-shifted variant `f̂ = f̃ - f(R)`, zero at and beyond the range limit.
    pub fn shifted_f_hat(&self) -> Result<Self> {
        let r = self.range_limit.ok_or_else(|| {
            Error::validation("shifted_f_hat requires a range-limited node function")
        })?;
        Ok(NodeFunctionSpec {
            shift: self.profile(r * r),
            ..self.clone()
        })
    }

    /// Distance at which the profile falls to `level`, by bisection on
    /// `[0, r_max]`. `None` if `level` is not attained there.
    pub fn radius_for_level(&self, level: f64, r_max: f64) -> Option<f64> {
        let f = |r: f64| self.profile(r * r);
        if !(f(0.0) >= level && f(r_max) <= level) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, r_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

pub fn eval_f(spec: &NodeFunctionSpec, p: Vec2, q: Vec2) -> f64 {
    spec.eval(p, q)
}

pub fn eval_df_dr2(spec: &NodeFunctionSpec, p: Vec2, q: Vec2) -> Result<f64> {
    spec.df_dr2_r2(spec.dist_sq(p, q))
}

pub fn shifted_f_hat(spec: &NodeFunctionSpec) -> Result<NodeFunctionSpec> {
    spec.shifted_f_hat()
}

/// Every spec must be range limited with a common saturation value.
pub fn check_cutoff_equality(specs: &[NodeFunctionSpec]) -> Result<f64> {
    let mut common: Option<f64> = None;
    for (i, s) in specs.iter().enumerate() {
        let c = s.cutoff_value().ok_or_else(|| {
            Error::validation(format!("agent {i}: range-limited run needs range_limit"))
        })?;
        match common {
            None => common = Some(c),
            Some(c0) => {
                if (c - c0).abs() > CUTOFF_TOLERANCE * c0.abs().max(1.0) {
                    return Err(Error::validation(format!(
                        "agent {i}: cutoff value f(R) = {c} differs from agent 0's {c0}"
                    )));
                }
            }
        }
    }
    common.ok_or_else(|| Error::validation("no agents"))
}
