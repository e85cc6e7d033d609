//! Sampling-based trajectory optimization and model predictive control for
//! a kinematic bicycle, with uncertainty-guided exploration.
//!
//! Candidate trajectories are modeled as Gaussians by propagating a
//! linearized state covariance along each mean rollout. A separation stage
//! pushes the candidates apart under the squared Hellinger distance before
//! the best one seeds a standard MPPI update.

pub mod cost;
pub mod error;
pub mod planners;
pub mod rng;
pub mod uncertainty;
pub mod vehicle;
pub mod world;

pub use cost::{CostWeights, GoalSpec};
pub use error::{Error, Result};
pub use planners::{Diagnostics, Method, Planner, PlannerConfig, PlannerState, PlanningContext};
pub use rng::StreamKey;
pub use uncertainty::{PerturbationModel, SamplerKind, SeparationConfig, TrajectoryDistribution};
pub use vehicle::{Control, ControlSequence, Cov3, GaussianBelief, State, VehicleParams};
pub use world::{Bounds, Costmap, Footprint, ObstacleSet, SensorModel};
