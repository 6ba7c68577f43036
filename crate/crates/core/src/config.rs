//! Run configuration file: TOML (or JSON) with explicit keys. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{AgentState, ControlLaw, ControlLawKind};
use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, Vec2};
use crate::grid::{DensitySpec, Environment};
use crate::node::{check_cutoff_equality, NodeFunctionSpec};

pub const DEFAULT_RESOLUTION: f64 = 50.0;
pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_MAX_STEPS: usize = 2000;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 0.1;

/// Multiplicative weights of the ten-agent reference experiment.
pub const REFERENCE_ALPHAS: [f64; 10] = [1.0, 1.25, 1.5, 0.75, 0.8, 1.3, 0.9, 1.1, 1.4, 1.2];

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_one() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Drawn uniformly inside the polygon from `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec2>,
    pub node: NodeFunctionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_const: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl AgentConfig {
    pub fn new(node: NodeFunctionSpec) -> Self {
        AgentConfig {
            position: None,
            node,
            u_max: None,
            u_const: None,
            delta: None,
        }
    }

    pub fn at(node: NodeFunctionSpec, position: Vec2) -> Self {
        AgentConfig {
            position: Some(position),
            ..Self::new(node)
        }
    }
}

/// Control law and its defaults for per-agent speed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub kind: ControlLawKind,
    #[serde(default = "default_one")]
    pub k_prop: f64,
    #[serde(default = "default_one")]
    pub u_max: f64,
    #[serde(default = "default_one")]
    pub u_const: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl ControlConfig {
    pub fn new(kind: ControlLawKind) -> Self {
        ControlConfig {
            kind,
            k_prop: 1.0,
            u_max: 1.0,
            u_const: 1.0,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub polygon: ConvexPolygon,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    pub density: DensitySpec,
    pub agents: Vec<AgentConfig>,
    pub control: ControlConfig,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Defaults everywhere except the required pieces.
    pub fn new(
        polygon: ConvexPolygon,
        density: DensitySpec,
        agents: Vec<AgentConfig>,
        control: ControlConfig,
    ) -> Self {
        RunConfig {
            polygon,
            resolution: DEFAULT_RESOLUTION,
            density,
            agents,
            control,
            dt: DEFAULT_DT,
            max_steps: DEFAULT_MAX_STEPS,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            output_dir: default_output_dir(),
        }
    }

    /// Ten quadratic agents on the 10 × 10 square with the reference weights
    /// and random initial positions.
    pub fn reference(density: DensitySpec, kind: ControlLawKind, seed: u64) -> Self {
        let agents = REFERENCE_ALPHAS
            .iter()
            .map(|&a| AgentConfig::new(NodeFunctionSpec::quadratic(a)))
            .collect();
        RunConfig {
            seed,
            ..Self::new(
                ConvexPolygon::rectangle(0.0, 0.0, 10.0, 10.0).expect("static square"),
                density,
                agents,
                ControlConfig::new(kind),
            )
        }
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json_str(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads `.json` files as JSON and everything else as TOML. Relative
    /// sampled-density paths are rebased onto the config's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = if is_json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
        .map_err(|msg| Error::parse(path, msg))?;
        if let DensitySpec::Sampled { path: p } = &mut cfg.density {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn is_limited(&self) -> bool {
        self.control.kind == ControlLawKind::LimitedRangeProportional
    }

    /// Initial positions: configured ones as given, the rest sampled
    /// uniformly inside the polygon from `seed`, in agent order.
    pub fn initial_positions(&self) -> Vec<Vec2> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.polygon.bounding_box();
        self.agents
            .iter()
            .map(|a| {
                a.position.unwrap_or_else(|| loop {
                    let q = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
                    if self.polygon.contains_strict(q) {
                        break q;
                    }
                })
            })
            .collect()
    }

    /// Validates everything and builds the runtime objects.
    pub fn build(&self) -> Result<Scenario> {
        if self.agents.is_empty() {
            return Err(Error::validation("at least one agent is required"));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::validation(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        let law = ControlLaw {
            kind: self.control.kind,
            k_prop: self.control.k_prop,
        };
        law.validate()?;

        let density = self.density.resolve(&self.polygon, Path::new("."))?;
        let env = Environment::new(self.polygon.clone(), self.resolution, density)?;
        let diameter = self.polygon.diameter();
        let specs: Vec<NodeFunctionSpec> = self.agents.iter().map(|a| a.node.clone()).collect();
        for (i, s) in specs.iter().enumerate() {
            s.validate(diameter)
                .map_err(|e| Error::validation(format!("agent {i}: {e}")))?;
        }
        if self.is_limited() {
            check_cutoff_equality(&specs)?;
        } else if let Some(i) = specs.iter().position(|s| s.range_limit.is_some()) {
            return Err(Error::validation(format!(
                "agent {i} has a range_limit but the control law is {}",
                self.control.kind.name()
            )));
        }

        let positions = self.initial_positions();
        for (i, p) in positions.iter().enumerate() {
            if !self.polygon.contains_strict(*p) {
                return Err(Error::validation(format!(
                    "agent {i} initial position ({}, {}) is not strictly inside the polygon",
                    p.x, p.y
                )));
            }
            if let Some(j) = positions[..i].iter().position(|q| q == p) {
                return Err(Error::validation(format!(
                    "agents {j} and {i} start at the same position"
                )));
            }
        }

        let c = &self.control;
        let positive = |what: &str, i: usize, v: f64| -> Result<f64> {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::validation(format!("agent {i}: {what} must be positive, got {v}")))
            }
        };
        let states = self
            .agents
            .iter()
            .zip(&positions)
            .enumerate()
            .map(|(i, (a, &p))| {
                Ok(AgentState {
                    position: p,
                    spec_index: i,
                    u_max: Some(positive("u_max", i, a.u_max.unwrap_or(c.u_max))?),
                    u_const: Some(positive("u_const", i, a.u_const.unwrap_or(c.u_const))?),
                    delta: Some(positive("delta", i, a.delta.unwrap_or(c.delta))?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        law.check_step(&states, self.dt)?;

        Ok(Scenario {
            env,
            specs,
            states,
            law,
            limited: self.is_limited(),
            dt: self.dt,
            max_steps: self.max_steps,
            threshold: self.threshold,
        })
    }
}

/// Validated runtime form of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub env: Environment,
    pub specs: Vec<NodeFunctionSpec>,
    pub states: Vec<AgentState>,
    pub law: ControlLaw,
    pub limited: bool,
    pub dt: f64,
    pub max_steps: usize,
    pub threshold: f64,
}
