//! Trial drivers for open-loop trajectory optimization and closed-loop
//! navigation, plus aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uge_core::cost::GoalSpec;
use uge_core::planners::{Method, Planner, PlannerState, PlanningContext};
use uge_core::rng::StreamKey;
use uge_core::vehicle::{step, ControlSequence, State};
use uge_core::world::{footprint_cost, is_goal_reached, visible_costmap};

use crate::error::{BenchError, Result};
use crate::scenario::{Environment, ScenarioKind, ScenarioSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    /// Seconds; present iff `success`.
    pub goal_time: Option<f64>,
    pub iterations_used: usize,
    pub min_cost_history: Vec<f64>,
    pub path: Vec<State>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub environment: usize,
    pub goal: [f64; 2],
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean over successful trials only; absent without successes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_goal_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_success_iterations: Option<f64>,
}

impl GroupStats {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a TrialResult>) -> Self {
        let (mut trials, mut successes, mut time, mut iters) = (0, 0, 0.0, 0.0);
        for r in results {
            trials += 1;
            if let (true, Some(t)) = (r.success, r.goal_time) {
                successes += 1;
                time += t;
                iters += r.iterations_used as f64;
            }
        }
        let mean = |s: f64| (successes > 0).then(|| s / successes as f64);
        GroupStats {
            trials,
            successes,
            success_rate: if trials > 0 { successes as f64 / trials as f64 } else { 0.0 },
            mean_goal_time: mean(time),
            mean_success_iterations: mean(iters),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalStats {
    pub goal: [f64; 2],
    #[serde(flatten)]
    pub stats: GroupStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub scenario: String,
    pub method: Method,
    #[serde(flatten)]
    pub overall: GroupStats,
    pub per_goal: Vec<GoalStats>,
}

impl AggregateStats {
    pub fn from_records(scenario: &str, method: Method, records: &[TrialRecord]) -> Self {
        let mine: Vec<&TrialRecord> =
            records.iter().filter(|r| r.scenario == scenario && r.method == method).collect();
        let mut goals: Vec<[f64; 2]> = Vec::new();
        for r in &mine {
            if !goals.contains(&r.goal) {
                goals.push(r.goal);
            }
        }
        let per_goal = goals
            .into_iter()
            .map(|g| GoalStats {
                goal: g,
                stats: GroupStats::from_results(mine.iter().filter(|r| r.goal == g).map(|r| &r.result)),
            })
            .collect();
        AggregateStats {
            scenario: scenario.to_string(),
            method,
            overall: GroupStats::from_results(mine.iter().map(|r| &r.result)),
            per_goal,
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.overall.success_rate
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub stats: AggregateStats,
}

fn trial_key(spec: &ScenarioSpec, method: Method, env: usize, goal: usize, trial: usize) -> StreamKey {
    StreamKey::new(spec.seed).named(&spec.name).named(method.name()).path(&[env as u64, goal as u64, trial as u64])
}

/// Open-loop optimization from a fixed start. Success when the optimized
/// nominal or one of the exploratory candidates has a collision-free mean
/// rollout prefix ending at the goal; the goal time is the time along it.
pub fn run_to_trial(
    spec: &ScenarioSpec,
    env: &Environment,
    goal: [f64; 2],
    method: Method,
    key: StreamKey,
) -> Result<TrialResult> {
    let planner = Planner::new(method, spec.planner.clone())?;
    let goal_spec = GoalSpec::new(goal, spec.goal_tolerance)?;
    let ctx = PlanningContext {
        map: &env.map,
        footprint: &spec.footprint,
        goal: &goal_spec,
        weights: &spec.weights,
        params: &spec.vehicle,
    };
    let belief = spec.planner.initial_belief(spec.start, None);
    let mut nominal = ControlSequence::constant(spec.initial_control, spec.planner.t_steps);
    let mut history = Vec::new();
    let mut path = vec![spec.start];
    for iter in 0..spec.max_iterations {
        let diag = planner.optimize(&nominal, &belief, &ctx, key.child(iter as u64))?;
        let best_candidate = diag.candidate_costs.iter().copied().fold(f64::INFINITY, f64::min);
        history.push(best_candidate.min(diag.solution_cost.total));
        // The solution is checked first, then the exploratory candidates.
        let reached = std::iter::once((&diag.solution_rollout, &diag.solution_cost))
            .chain(diag.candidate_rollouts.iter().zip(&diag.candidate_breakdowns))
            .find_map(|(roll, b)| b.goal_reached_at.map(|idx| roll[..=idx].to_vec()));
        if let Some(prefix) = reached {
            return Ok(TrialResult {
                success: true,
                goal_time: Some((prefix.len() - 1) as f64 * spec.vehicle.dt),
                iterations_used: iter + 1,
                min_cost_history: history,
                path: prefix,
            });
        }
        nominal = diag.solution;
        path = diag.solution_rollout;
    }
    Ok(TrialResult {
        success: false,
        goal_time: None,
        iterations_used: spec.max_iterations,
        min_cost_history: history,
        path,
    })
}

/// Closed-loop navigation on a range-limited view of the map, executing
/// the first planned control through noiseless dynamics each step.
pub fn run_mpc_trial(
    spec: &ScenarioSpec,
    env: &Environment,
    goal: [f64; 2],
    method: Method,
    key: StreamKey,
) -> Result<TrialResult> {
    let planner = Planner::new(method, spec.planner.clone())?;
    let goal_spec = GoalSpec::new(goal, spec.goal_tolerance)?;
    let mut state = spec.start;
    let mut st = PlannerState::new(ControlSequence::constant(spec.initial_control, spec.planner.t_steps));
    let mut belief = spec.planner.initial_belief(state, None);
    let mut path = vec![state];
    let mut history = Vec::new();
    for k in 0..spec.step_cap {
        let local = match &spec.sensor {
            Some(sensor) => visible_costmap(&env.map, &state, sensor),
            None => env.map.clone(),
        };
        let ctx = PlanningContext {
            map: &local,
            footprint: &spec.footprint,
            goal: &goal_spec,
            weights: &spec.weights,
            params: &spec.vehicle,
        };
        let (u, next, diag) = planner.step(&st, &belief, &ctx, key.child(k as u64))?;
        history.push(diag.solution_cost.total);
        st = next;
        state = step(state, u, &spec.vehicle)?;
        path.push(state);
        if footprint_cost(&env.map, &state, &spec.footprint).is_collided() {
            return Ok(TrialResult {
                success: false,
                goal_time: None,
                iterations_used: k + 1,
                min_cost_history: history,
                path,
            });
        }
        if is_goal_reached(&state, goal, spec.goal_tolerance) {
            return Ok(TrialResult {
                success: true,
                goal_time: Some((k + 1) as f64 * spec.vehicle.dt),
                iterations_used: k + 1,
                min_cost_history: history,
                path,
            });
        }
        belief = spec.planner.initial_belief(state, Some(&belief));
    }
    Ok(TrialResult { success: false, goal_time: None, iterations_used: spec.step_cap, min_cost_history: history, path })
}

fn run_trials(spec: &ScenarioSpec, method: Method, envs: &[Environment]) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<(usize, usize, usize)> = (0..envs.len())
        .flat_map(|e| (0..spec.goals.len()).flat_map(move |g| (0..spec.trials).map(move |t| (e, g, t))))
        .collect();
    let driver = if spec.kind.is_trajectory_optimization() { run_to_trial } else { run_mpc_trial };
    jobs.into_par_iter()
        .map(|(e, g, t)| {
            let result = driver(spec, &envs[e], spec.goals[g], method, trial_key(spec, method, e, g, t))?;
            Ok(TrialRecord {
                scenario: spec.name.clone(),
                environment: e,
                goal: spec.goals[g],
                method,
                trial: t,
                seed: spec.seed,
                result,
            })
        })
        .collect()
}

pub fn run_to_experiment(spec: &ScenarioSpec, method: Method) -> Result<ExperimentResult> {
    if !spec.kind.is_trajectory_optimization() {
        return Err(BenchError::Config(format!("'{}' is not a trajectory-optimization scenario", spec.name)));
    }
    spec.validate()?;
    let envs = spec.environments()?;
    let records = run_trials(spec, method, &envs)?;
    let stats = AggregateStats::from_records(&spec.name, method, &records);
    Ok(ExperimentResult { records, stats })
}

pub fn run_mpc_experiment(spec: &ScenarioSpec, method: Method) -> Result<ExperimentResult> {
    if spec.kind != ScenarioKind::MpcUnknown {
        return Err(BenchError::Config(format!("'{}' is not a navigation scenario", spec.name)));
    }
    spec.validate()?;
    let envs = spec.environments()?;
    let records = run_trials(spec, method, &envs)?;
    let stats = AggregateStats::from_records(&spec.name, method, &records);
    Ok(ExperimentResult { records, stats })
}

pub fn run_experiment(spec: &ScenarioSpec, method: Method) -> Result<ExperimentResult> {
    if spec.kind.is_trajectory_optimization() {
        run_to_experiment(spec, method)
    } else {
        run_mpc_experiment(spec, method)
    }
}
