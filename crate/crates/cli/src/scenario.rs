//! Scenario definitions and the built-in presets.

use serde::{Deserialize, Serialize};
use uge_core::cost::{CostWeights, GoalSpec};
use uge_core::planners::PlannerConfig;
use uge_core::vehicle::{Control, State, VehicleParams};
use uge_core::world::{
    generate_cluttered, rasterize_with, Bounds, Circle, ClutterSpec, Costmap, Footprint, Inflation, ObstacleKind,
    ObstacleSet, SensorModel,
};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    ToOpen,
    ToCluttered,
    MpcUnknown,
}

impl ScenarioKind {
    pub fn is_trajectory_optimization(&self) -> bool {
        matches!(self, ScenarioKind::ToOpen | ScenarioKind::ToCluttered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleSource {
    Fixed(ObstacleSet),
    /// `environments` maps, environment `e` generated with seed `seed + e`.
    Generated { spec: ClutterSpec, seed: u64, environments: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    pub bounds: Bounds,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub inflation: Inflation,
    pub start: State,
    pub goals: Vec<[f64; 2]>,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    pub obstacles: ObstacleSource,
    #[serde(default)]
    pub sensor: Option<SensorModel>,
    #[serde(default)]
    pub footprint: Footprint,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub planner: PlannerConfig,
    /// Constant control the nominal sequence starts from.
    #[serde(default)]
    pub initial_control: Control,
    pub trials: usize,
    /// Optimization iterations (trajectory optimization) per trial.
    pub max_iterations: usize,
    /// Closed-loop control steps per trial (navigation).
    #[serde(default = "default_step_cap")]
    pub step_cap: usize,
    pub seed: u64,
}

fn default_resolution() -> f64 {
    0.05
}

fn default_goal_tolerance() -> f64 {
    0.3
}

fn default_step_cap() -> usize {
    1200
}

/// One concrete map of a scenario.
#[derive(Debug, Clone)]
pub struct Environment {
    pub index: usize,
    pub obstacles: ObstacleSet,
    pub map: Costmap,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(format!("scenario '{}': {msg}", self.name)));
        if self.trials < 1 {
            return bad("trials must be >= 1".into());
        }
        if self.goals.is_empty() {
            return bad("at least one goal required".into());
        }
        if self.kind == ScenarioKind::MpcUnknown && self.step_cap == 0 {
            return bad("step_cap must be >= 1".into());
        }
        self.bounds.validate()?;
        self.vehicle.validate()?;
        self.planner.validate()?;
        self.weights.validate()?;
        self.footprint.validate()?;
        GoalSpec::new([0.0, 0.0], self.goal_tolerance)?;
        if let ObstacleSource::Generated { environments: 0, .. } = self.obstacles {
            return bad("environments must be >= 1".into());
        }
        Ok(())
    }

    pub fn environment_count(&self) -> usize {
        match &self.obstacles {
            ObstacleSource::Fixed(_) => 1,
            ObstacleSource::Generated { environments, .. } => *environments,
        }
    }

    pub fn environment(&self, index: usize) -> Result<Environment> {
        let obstacles = match &self.obstacles {
            ObstacleSource::Fixed(set) => set.clone(),
            ObstacleSource::Generated { spec, seed, .. } => generate_cluttered(seed + index as u64, spec)?,
        };
        let map = rasterize_with(&obstacles, &self.bounds, self.resolution, &self.inflation)?;
        Ok(Environment { index, obstacles, map })
    }

    pub fn environments(&self) -> Result<Vec<Environment>> {
        (0..self.environment_count()).map(|e| self.environment(e)).collect()
    }
}

/// Goal positions of the trajectory-optimization table.
pub const TO_GOALS: [[f64; 2]; 6] = [[6.0, 0.0], [6.0, -4.0], [-6.0, -4.0], [-6.0, 0.0], [-6.0, 4.0], [6.0, 4.0]];

fn to_vehicle() -> VehicleParams {
    VehicleParams { v_max: 4.0, v_min: 0.0, ..VehicleParams::default() }
}

/// Belief noise wide enough that candidate distances stay below saturation
/// over an 80-step horizon.
fn exploratory_planner() -> PlannerConfig {
    let q = 0.2;
    PlannerConfig { q: [[q, 0.0, 0.0], [0.0, q, 0.0], [0.0, 0.0, q]], ..PlannerConfig::default() }
}

fn to_base(name: &str, kind: ScenarioKind, obstacles: ObstacleSet) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        kind,
        bounds: Bounds::new(-8.0, -6.0, 8.0, 6.0),
        resolution: 0.05,
        inflation: Inflation::default(),
        start: State::new(0.0, 0.0, 0.0),
        goals: TO_GOALS.to_vec(),
        goal_tolerance: default_goal_tolerance(),
        obstacles: ObstacleSource::Fixed(obstacles),
        sensor: None,
        footprint: Footprint::default(),
        weights: CostWeights::trajectory_optimization(),
        vehicle: to_vehicle(),
        planner: exploratory_planner(),
        initial_control: Control::new(0.5, 0.0),
        trials: 10,
        max_iterations: 100,
        step_cap: default_step_cap(),
        seed: 0,
    }
}

/// Fixed circles placed between the start and the goal ring.
pub fn to_cluttered_obstacles() -> ObstacleSet {
    let c = |x: f64, y: f64, r: f64| Circle { center: [x, y], radius: r };
    ObstacleSet {
        circles: vec![
            c(3.0, 0.6, 0.5),
            c(2.5, -2.5, 0.6),
            c(-2.5, -1.8, 0.5),
            c(-3.5, 1.0, 0.6),
            c(-1.0, 3.0, 0.5),
            c(3.5, 3.0, 0.5),
            c(-4.5, -3.5, 0.4),
            c(0.5, -4.0, 0.5),
        ],
        polygons: vec![],
    }
}

pub fn to_open() -> ScenarioSpec {
    to_base("to_open", ScenarioKind::ToOpen, ObstacleSet::default())
}

pub fn to_cluttered() -> ScenarioSpec {
    to_base("to_cluttered", ScenarioKind::ToCluttered, to_cluttered_obstacles())
}

pub fn mpc_unknown() -> ScenarioSpec {
    let bounds = Bounds::new(0.0, 0.0, 20.0, 20.0);
    ScenarioSpec {
        name: "mpc_unknown".into(),
        kind: ScenarioKind::MpcUnknown,
        bounds,
        resolution: 0.1,
        inflation: Inflation::default(),
        start: State::new(2.0, 2.0, std::f64::consts::FRAC_PI_2),
        goals: vec![[18.0, 18.0]],
        goal_tolerance: default_goal_tolerance(),
        obstacles: ObstacleSource::Generated {
            spec: ClutterSpec {
                bounds: Bounds::new(3.0, 3.0, 17.0, 17.0),
                n_obstacles: 8,
                kind: ObstacleKind::ConcavePolygon,
                min_clearance: 1.5,
                keep_free: vec![[2.0, 2.0], [18.0, 18.0]],
                radius_range: [1.2, 2.5],
                min_gap: 0.8,
                mouth_toward: Some([2.0, 2.0]),
            },
            seed: 0,
            environments: 5,
        },
        sensor: Some(SensorModel { range: 10.0 }),
        footprint: Footprint::default(),
        weights: CostWeights::navigation(),
        vehicle: VehicleParams { v_max: 3.0, v_min: -1.0, ..VehicleParams::default() },
        planner: exploratory_planner(),
        initial_control: Control::new(0.0, 0.0),
        trials: 10,
        max_iterations: 1,
        step_cap: 600,
        seed: 0,
    }
}

pub fn presets() -> Vec<ScenarioSpec> {
    vec![to_open(), to_cluttered(), mpc_unknown()]
}

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    presets().into_iter().find(|s| s.name == name)
}

/// Accepts a single scenario object or an array of them.
pub fn parse_config(text: &str) -> Result<Vec<ScenarioSpec>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let specs = if value.is_array() {
        serde_json::from_value::<Vec<ScenarioSpec>>(value)?
    } else {
        vec![serde_json::from_value::<ScenarioSpec>(value)?]
    };
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}
