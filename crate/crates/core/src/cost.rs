//! Trajectory cost with collision freezing and goal truncation.
//!
//! Walking the horizon, the first colliding state freezes two things for
//! the rest of the trajectory: the obstacle term becomes the collision
//! cost, and the distance term keeps the distance-to-goal measured at
//! that state. A collision-free state inside the goal tolerance ends the
//! walk and becomes the terminal state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{Control, ControlSequence, State};
use crate::world::{footprint_cost, geometry::Point, is_goal_reached, Costmap, Footprint, FootprintCost};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub lambda_u: f64,
    pub lambda_obs: f64,
    pub lambda_dist: f64,
    pub c_collided: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { lambda_u: 0.0, lambda_obs: 50.0, lambda_dist: 10.0, c_collided: 1e3 }
    }
}

impl CostWeights {
    /// Open/cluttered trajectory-optimization weights.
    pub fn trajectory_optimization() -> Self {
        Self::default()
    }

    /// Closed-loop navigation weights.
    pub fn navigation() -> Self {
        CostWeights { lambda_obs: 1e3, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_u >= 0.0 && self.lambda_obs >= 0.0 && self.lambda_dist >= 0.0 && self.c_collided > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid cost weights {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub position: Point,
    pub tolerance: f64,
}

impl GoalSpec {
    pub fn new(position: Point, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::Config(format!("goal tolerance must be > 0, got {tolerance}")));
        }
        Ok(GoalSpec { position, tolerance })
    }
}

/// Quadratic control effort.
pub fn action_cost(control: &Control) -> f64 {
    control.v * control.v + control.delta * control.delta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub total: f64,
    /// Index of the first colliding state.
    pub collided_at: Option<usize>,
    /// Index of the first collision-free goal-reaching state.
    pub goal_reached_at: Option<usize>,
}

/// Borrowed inputs shared by every trajectory evaluated on one map.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    pub map: &'a Costmap,
    pub footprint: &'a Footprint,
    pub goal: &'a GoalSpec,
    pub weights: &'a CostWeights,
}

impl CostContext<'_> {
    pub fn evaluate(&self, states: &[State], controls: &ControlSequence) -> CostBreakdown {
        evaluate_trajectory(states, controls, self.map, self.footprint, self.goal, self.weights)
    }
}

/// # Panics
/// If `states.len() != controls.len() + 1`.
pub fn trajectory_cost(
    states: &[State],
    controls: &ControlSequence,
    map: &Costmap,
    fp: &Footprint,
    goal: &GoalSpec,
    w: &CostWeights,
) -> f64 {
    evaluate_trajectory(states, controls, map, fp, goal, w).total
}

pub fn evaluate_trajectory(
    states: &[State],
    controls: &ControlSequence,
    map: &Costmap,
    fp: &Footprint,
    goal: &GoalSpec,
    w: &CostWeights,
) -> CostBreakdown {
    assert_eq!(states.len(), controls.len() + 1, "need one more state than controls");
    let collided_cost = |d: f64| w.lambda_obs * w.c_collided + w.lambda_dist * d;
    let mut frozen: Option<f64> = None;
    let mut collided_at = None;
    let mut total = 0.0;
    let last = states.len() - 1;

    for (t, x) in states.iter().enumerate() {
        let stage = match frozen {
            Some(d) => collided_cost(d),
            None => {
                let d = x.distance_to(goal.position);
                match footprint_cost(map, x, fp) {
                    FootprintCost::Collided => {
                        frozen = Some(d);
                        collided_at = Some(t);
                        collided_cost(d)
                    }
                    FootprintCost::Free(c) => {
                        let cost = w.lambda_obs * c + w.lambda_dist * d;
                        if is_goal_reached(x, goal.position, goal.tolerance) {
                            return CostBreakdown { total: total + cost, collided_at, goal_reached_at: Some(t) };
                        }
                        cost
                    }
                }
            }
        };
        total += stage;
        if t < last {
            total += w.lambda_u * action_cost(&controls[t]);
        }
    }
    CostBreakdown { total, collided_at, goal_reached_at: None }
}
