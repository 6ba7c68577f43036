//! Control laws for first-order integrator agents and the explicit Euler
//! step that advances them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::objective::CellMoments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLawKind {
    Proportional,
    Saturated,
    ConstantSpeed,
    LimitedRangeProportional,
}

impl ControlLawKind {
    pub fn name(self) -> &'static str {
        match self {
            ControlLawKind::Proportional => "proportional",
            ControlLawKind::Saturated => "saturated",
            ControlLawKind::ConstantSpeed => "constant_speed",
            ControlLawKind::LimitedRangeProportional => "limited_range_proportional",
        }
    }

    /// Laws whose linear region has gain `k_prop`.
    pub fn uses_gain(self) -> bool {
        !matches!(self, ControlLawKind::ConstantSpeed)
    }
}

/// Law with its gain; per-agent speed limits live in [`AgentState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLaw {
    pub kind: ControlLawKind,
    pub k_prop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    pub spec_index: usize,
    pub u_max: Option<f64>,
    pub u_const: Option<f64>,
    pub delta: Option<f64>,
}

impl AgentState {
    pub fn at(position: Vec2, spec_index: usize) -> Self {
        AgentState {
            position,
            spec_index,
            u_max: None,
            u_const: None,
            delta: None,
        }
    }
}

/// `u = -k (p - C)`
pub fn control_proportional(p: Vec2, centroid: Vec2, k_prop: f64) -> Vec2 {
    -k_prop * (p - centroid)
}

/// Proportional law with speed clamped to `u_max`, pointing at the centroid.
pub fn control_saturated(p: Vec2, centroid: Vec2, k_prop: f64, u_max: f64) -> Vec2 {
    let u = control_proportional(p, centroid, k_prop);
    if u.norm() <= u_max {
        u
    } else {
        let d = p - centroid;
        -u_max * (1.0 / d.norm()) * d
    }
}

/// Constant speed `u_const` toward the centroid, tapering linearly inside
/// radius `delta`.
pub fn control_constant_speed(p: Vec2, centroid: Vec2, u_const: f64, delta: f64) -> Vec2 {
    let d = p - centroid;
    let dist = d.norm();
    if dist >= delta {
        -u_const * (1.0 / dist) * d
    } else {
        -(u_const / delta) * d
    }
}

/// Proportional law toward the centroid of the range-limited cell.
pub fn control_limited_range(p: Vec2, limited_centroid: Vec2, k_prop: f64) -> Vec2 {
    control_proportional(p, limited_centroid, k_prop)
}

impl ControlLaw {
    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_gain() && !(self.k_prop.is_finite() && self.k_prop > 0.0) {
            return Err(Error::validation(format!(
                "k_prop must be finite and positive, got {}",
                self.k_prop
            )));
        }
        Ok(())
    }

    /// Velocity for one agent given its current cell moments.
    pub fn velocity(&self, state: &AgentState, moments: &CellMoments) -> Result<Vec2> {
        let (p, c) = (state.position, moments.centroid);
        Ok(match self.kind {
            ControlLawKind::Proportional => control_proportional(p, c, self.k_prop),
            ControlLawKind::LimitedRangeProportional => control_limited_range(p, c, self.k_prop),
            ControlLawKind::Saturated => {
                let u_max = state
                    .u_max
                    .ok_or_else(|| Error::validation("saturated law needs u_max"))?;
                control_saturated(p, c, self.k_prop, u_max)
            }
            ControlLawKind::ConstantSpeed => {
                let (u, delta) = state.u_const.zip(state.delta).ok_or_else(|| {
                    Error::validation("constant-speed law needs u_const and delta")
                })?;
                control_constant_speed(p, c, u, delta)
            }
        })
    }

    /// Rejects time steps that would overshoot the centroid in the linear
    /// region: `k_prop·dt <= 1`, or `u_const·dt/delta <= 1`.
    pub fn check_step(&self, states: &[AgentState], dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation(format!("dt must be positive, got {dt}")));
        }
        if self.kind.uses_gain() && self.k_prop * dt > 1.0 {
            return Err(Error::validation(format!(
                "k_prop * dt = {} exceeds the stability bound 1",
                self.k_prop * dt
            )));
        }
        if self.kind == ControlLawKind::ConstantSpeed {
            for (i, s) in states.iter().enumerate() {
                if let (Some(u), Some(delta)) = (s.u_const, s.delta) {
                    if u * dt / delta > 1.0 {
                        return Err(Error::validation(format!(
                            "agent {i}: u_const * dt / delta = {} exceeds the stability bound 1",
                            u * dt / delta
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub states: Vec<AgentState>,
    /// Agents that had to be projected back into the domain.
    pub clipped: usize,
}

/// Explicit Euler update `p += dt·u`, projected onto the domain.
pub fn step(
    states: &[AgentState],
    velocities: &[Vec2],
    dt: f64,
    polygon: &ConvexPolygon,
) -> Result<StepOutcome> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    if states.len() != velocities.len() {
        return Err(Error::validation("one velocity per agent required"));
    }
    let mut clipped = 0;
    let states = states
        .iter()
        .zip(velocities)
        .map(|(s, &u)| {
            let mut p = s.position + dt * u;
            if !polygon.contains(p) {
                p = polygon.project(p);
                clipped += 1;
            }
            AgentState {
                position: p,
                ..s.clone()
            }
        })
        .collect();
    Ok(StepOutcome { states, clipped })
}

/// Largest agent-to-centroid distance.
pub fn max_centroid_distance(states: &[AgentState], moments: &[CellMoments]) -> f64 {
    states
        .iter()
        .zip(moments)
        .map(|(s, m)| s.position.distance(m.centroid))
        .fold(0.0, f64::max)
}

/// True when every agent is within `threshold` of its centroid.
pub fn terminated(states: &[AgentState], moments: &[CellMoments], threshold: f64) -> bool {
    max_centroid_distance(states, moments) < threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(c: Vec2) -> CellMoments {
        CellMoments {
            mass: 1.0,
            centroid: c,
            empty: false,
        }
    }

    #[test]
    fn proportional_examples() {
        assert_eq!(
            control_proportional(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0), 1.0),
            Vec2::ZERO
        );
        assert_eq!(
            control_proportional(Vec2::new(2.0, 0.0), Vec2::ZERO, 1.0),
            Vec2::new(-2.0, 0.0)
        );
        // empty cell: centroid is the position itself
        let p = Vec2::new(3.0, 4.0);
        assert_eq!(control_proportional(p, p, 2.0).norm(), 0.0);
    }

    #[test]
    fn saturated_examples() {
        let u = control_saturated(Vec2::new(0.5, 0.0), Vec2::ZERO, 1.0, 1.0);
        assert_eq!(u, Vec2::new(-0.5, 0.0));
        let u = control_saturated(Vec2::new(10.0, 0.0), Vec2::ZERO, 1.0, 2.0);
        assert_eq!(u, Vec2::new(-2.0, 0.0));
        // switching surface: both branches agree
        let p = Vec2::new(1.2, -1.6);
        let lin = control_proportional(p, Vec2::ZERO, 1.0);
        let sat = -2.0 * (1.0 / p.norm()) * p;
        assert!((lin - sat).norm() < 1e-15);
        assert!((control_saturated(p, Vec2::ZERO, 1.0, 2.0) - sat).norm() < 1e-15);
    }

    #[test]
    fn constant_speed_examples() {
        let delta = 0.1;
        let u = control_constant_speed(Vec2::new(0.2, 0.0), Vec2::ZERO, 1.5, delta);
        assert_eq!(u.norm(), 1.5);
        assert_eq!(control_constant_speed(Vec2::ZERO, Vec2::ZERO, 1.5, delta), Vec2::ZERO);
        let u = control_constant_speed(Vec2::new(0.05, 0.0), Vec2::ZERO, 1.5, delta);
        assert!((u.norm() - 0.75).abs() < 1e-15);
        // continuity at delta
        let at = control_constant_speed(Vec2::new(0.0, delta), Vec2::ZERO, 1.5, delta);
        let below = control_constant_speed(Vec2::new(0.0, delta * (1.0 - 1e-12)), Vec2::ZERO, 1.5, delta);
        assert!((at - below).norm() < 1e-9);
    }

    #[test]
    fn step_lands_on_centroid_with_unit_gain() {
        let poly = ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap();
        let law = ControlLaw {
            kind: ControlLawKind::Proportional,
            k_prop: 20.0,
        };
        let s = vec![AgentState::at(Vec2::new(1.0, 2.0), 0)];
        let c = Vec2::new(4.0, 7.0);
        let u = law.velocity(&s[0], &moments(c)).unwrap();
        law.check_step(&s, 0.05).unwrap();
        let out = step(&s, &[u], 0.05, &poly).unwrap();
        assert!((out.states[0].position - c).norm() < 1e-12);
        assert_eq!(out.clipped, 0);
        assert!(law.check_step(&s, 0.06).is_err());
        assert!(step(&s, &[u], 0.0, &poly).is_err());
    }

    #[test]
    fn step_zero_velocity_and_clipping() {
        let poly = ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).unwrap();
        let s = vec![AgentState::at(Vec2::new(9.9, 5.0), 0)];
        let out = step(&s, &[Vec2::ZERO], 0.05, &poly).unwrap();
        assert_eq!(out.states, s);
        let out = step(&s, &[Vec2::new(10.0, 0.0)], 0.05, &poly).unwrap();
        assert_eq!(out.states[0].position, Vec2::new(10.0, 5.0));
        assert_eq!(out.clipped, 1);
    }

    #[test]
    fn termination() {
        let s = vec![
            AgentState::at(Vec2::new(1.0, 1.0), 0),
            AgentState::at(Vec2::new(5.0, 5.0), 1),
        ];
        let at_centroids = [moments(Vec2::new(1.0, 1.0)), moments(Vec2::new(5.0, 5.0))];
        assert!(terminated(&s, &at_centroids, 1e-9));
        let off = [moments(Vec2::new(1.0, 1.0)), moments(Vec2::new(5.6, 5.0))];
        assert!(!terminated(&s, &off, 0.5));
    }

    #[test]
    fn missing_speed_parameters() {
        let s = AgentState::at(Vec2::new(1.0, 1.0), 0);
        let m = moments(Vec2::ZERO);
        for kind in [ControlLawKind::Saturated, ControlLawKind::ConstantSpeed] {
            let law = ControlLaw { kind, k_prop: 1.0 };
            assert!(law.velocity(&s, &m).is_err());
        }
    }
}
