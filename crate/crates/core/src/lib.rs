//! Deployment of heterogeneous, possibly range-limited mobile sensors to
//! generalized centroidal Voronoi configurations on a convex planar domain.
//!
//! The domain is rasterized ([`grid`]); each agent carries a decreasing
//! node function ([`node`]); cells are assigned to the most effective agent
//! ([`partition`]); the coverage objective and its gradient follow from
//! effective-density cell moments ([`objective`]); agents move toward their
//! centroids under one of several control laws ([`control`], [`sim`]).

pub mod config;
pub mod control;
pub mod distributed;
pub mod error;
pub mod export;
pub mod geometry;
pub mod grid;
pub mod node;
pub mod objective;
pub mod partition;
pub mod render;
pub mod sim;

pub use config::{AgentConfig, ControlConfig, RunConfig, Scenario};
pub use control::{AgentState, ControlLaw, ControlLawKind};
pub use error::{Error, Result};
pub use geometry::{ConvexPolygon, Vec2};
pub use grid::{build_grid, integrate, DensityField, DensitySpec, Environment, Grid};
pub use node::{Family, Metric2x2, NodeFunctionSpec};
pub use objective::CellMoments;
pub use partition::{NeighborGraph, PartitionLabels};
pub use sim::{run_simulation, RunStatus, SimRecord};
