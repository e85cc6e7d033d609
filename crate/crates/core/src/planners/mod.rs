//! Planners: uncertainty-guided exploratory MPC, MPPI and log-MPPI.

mod mppi;
mod uge;

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::cost::{CostBreakdown, CostContext, CostWeights, GoalSpec};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::uncertainty::{PerturbationModel, SamplerKind, SeparationConfig};
use crate::vehicle::{rollout_unchecked, Control, ControlSequence, Cov3, GaussianBelief, State, VehicleParams};
use crate::world::{Costmap, Footprint};

pub use mppi::{mppi_update, nln_perturb, weighted_update, MppiOutcome};
pub use uge::{uge_to, UgeToOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mppi,
    UgeMpc,
    LogMppi,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mppi, Method::UgeMpc, Method::LogMppi];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mppi => "mppi",
            Method::UgeMpc => "uge_mpc",
            Method::LogMppi => "log_mppi",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected mppi, uge_mpc or log_mppi)")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Horizon length in steps.
    pub t_steps: usize,
    /// Trajectories kept by the separation stage.
    pub n: usize,
    /// Candidates drawn per trajectory per sweep.
    pub m: usize,
    /// Separation sweeps.
    pub k: usize,
    /// Samples in the final cost-weighted update.
    pub l: usize,
    pub sigma_u: [[f64; 2]; 2],
    pub q: [[f64; 3]; 3],
    pub temperature: f64,
    /// Rollouts available per planning step; plain MPPI spends all of it.
    pub budget: usize,
    pub enforce_budget: bool,
    /// Log-normal spread of the log-MPPI noise multiplier.
    pub sigma_ln: f64,
    /// Reset the belief covariance to `q` at every replanning step.
    pub reset_covariance: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            t_steps: 80,
            n: 16,
            m: 8,
            k: 8,
            l: 1008,
            sigma_u: [[0.25, 0.0], [0.0, 0.04]],
            q: [[1e-4, 0.0, 0.0], [0.0, 1e-4, 0.0], [0.0, 0.0, 1e-4]],
            temperature: 1e-3,
            budget: 2048,
            enforce_budget: true,
            sigma_ln: 0.1,
            reset_covariance: true,
        }
    }
}

impl PlannerConfig {
    pub fn sigma_u_matrix(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|r, c| self.sigma_u[r][c])
    }

    pub fn q_matrix(&self) -> Cov3 {
        Matrix3::from_fn(|r, c| self.q[r][c])
    }

    pub fn separation(&self) -> SeparationConfig {
        SeparationConfig { n_trajectories: self.n, candidates_per_trajectory: self.m, iterations: self.k }
    }

    /// Rollouts one exploratory step may spend under budget accounting.
    pub fn uge_rollouts(&self) -> usize {
        self.n + self.n * self.m * self.k + self.l
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_steps == 0 {
            return Err(Error::Config("t_steps must be >= 1".into()));
        }
        if self.l == 0 || self.budget == 0 {
            return Err(Error::Config("l and budget must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        self.separation().validate()?;
        if self.enforce_budget && self.uge_rollouts() > self.budget {
            return Err(Error::Config(format!(
                "N + N*M*K + L = {} exceeds budget {}",
                self.uge_rollouts(),
                self.budget
            )));
        }
        crate::vehicle::check_psd(&self.q_matrix(), "q").map_err(|e| Error::Config(e.to_string()))?;
        PerturbationModel::gaussian(self.sigma_u_matrix()).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn perturbation(&self, method: Method) -> Result<PerturbationModel> {
        let kind = match method {
            Method::LogMppi => SamplerKind::NormalLogNormal { sigma_ln: self.sigma_ln },
            _ => SamplerKind::Gaussian,
        };
        PerturbationModel::new(self.sigma_u_matrix(), kind)
    }

    pub fn initial_belief(&self, state: State, previous: Option<&GaussianBelief>) -> GaussianBelief {
        match previous {
            Some(b) if !self.reset_covariance => GaussianBelief { mean: state, cov: b.cov },
            _ => GaussianBelief { mean: state, cov: self.q_matrix() },
        }
    }
}

/// Everything a planning step needs to know about the world.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub map: &'a Costmap,
    pub footprint: &'a Footprint,
    pub goal: &'a GoalSpec,
    pub weights: &'a CostWeights,
    pub params: &'a VehicleParams,
}

impl<'a> PlanningContext<'a> {
    pub fn cost(&self) -> CostContext<'a> {
        CostContext { map: self.map, footprint: self.footprint, goal: self.goal, weights: self.weights }
    }

    /// Mean rollout of `seq` from `start` and its cost.
    pub fn evaluate(&self, start: State, seq: &ControlSequence) -> (Vec<State>, CostBreakdown) {
        let states = rollout_unchecked(start, seq, self.params);
        let cost = self.cost().evaluate(&states, seq);
        (states, cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub nominal: ControlSequence,
    pub last_solution_cost: f64,
}

impl PlannerState {
    pub fn new(nominal: ControlSequence) -> Self {
        PlannerState { nominal, last_solution_cost: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleStats {
    pub count: usize,
    pub min_cost: f64,
    pub mean_cost: f64,
    pub max_cost: f64,
}

/// Per-step record streamed to the experiment harness.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub method: Method,
    /// Mean rollouts of the separated candidates (exploratory method only).
    pub candidate_rollouts: Vec<Vec<State>>,
    pub candidate_costs: Vec<f64>,
    pub candidate_breakdowns: Vec<CostBreakdown>,
    pub chosen_index: Option<usize>,
    pub mean_pairwise_h2_before: Option<f64>,
    pub mean_pairwise_h2_after: Option<f64>,
    pub samples: SampleStats,
    pub solution: ControlSequence,
    pub solution_rollout: Vec<State>,
    pub solution_cost: CostBreakdown,
    /// Dynamics rollouts spent (separation builds plus final samples).
    pub rollouts: usize,
}

/// Index of the smallest cost; ties go to the lowest index.
pub fn select_best(costs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &c) in costs.iter().enumerate() {
        match best {
            Some((_, b)) if !(c < b) => {}
            _ => best = Some((i, c)),
        }
    }
    best.map(|(i, _)| i)
}

/// Drops the first control and repeats the last one.
pub fn shift_sequence(seq: &ControlSequence) -> ControlSequence {
    let s = seq.as_slice();
    match s.last() {
        None => ControlSequence::default(),
        Some(&last) => s[1..].iter().copied().chain(std::iter::once(last)).collect(),
    }
}

/// A configured planner for one method.
#[derive(Debug, Clone)]
pub struct Planner {
    method: Method,
    cfg: PlannerConfig,
    model: PerturbationModel,
}

impl Planner {
    pub fn new(method: Method, cfg: PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.perturbation(method)?;
        Ok(Planner { method, cfg, model })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// One optimization pass over `nominal` without executing anything.
    pub fn optimize(
        &self,
        nominal: &ControlSequence,
        belief: &GaussianBelief,
        ctx: &PlanningContext<'_>,
        key: StreamKey,
    ) -> Result<Diagnostics> {
        if nominal.len() != self.cfg.t_steps {
            return Err(crate::error::invalid(format!(
                "nominal has {} steps, horizon is {}",
                nominal.len(),
                self.cfg.t_steps
            )));
        }
        match self.method {
            Method::UgeMpc => uge::optimize(nominal, &self.cfg, &self.model, belief, ctx, key),
            Method::Mppi | Method::LogMppi => {
                mppi::optimize(self.method, nominal, &self.cfg, &self.model, belief, ctx, key)
            }
        }
    }

    /// Optimizes, returns the first control to apply and the shifted nominal.
    pub fn step(
        &self,
        st: &PlannerState,
        belief: &GaussianBelief,
        ctx: &PlanningContext<'_>,
        key: StreamKey,
    ) -> Result<(Control, PlannerState, Diagnostics)> {
        let diag = self.optimize(&st.nominal, belief, ctx, key)?;
        let apply = diag.solution.first().expect("non-empty horizon");
        let next = PlannerState { nominal: shift_sequence(&diag.solution), last_solution_cost: diag.solution_cost.total };
        Ok((apply, next, diag))
    }
}

/// Exploratory MPC step: separation, best-candidate nominal, then the
/// cost-weighted update.
pub fn uge_mpc_step(
    st: &PlannerState,
    cfg: &PlannerConfig,
    belief: &GaussianBelief,
    ctx: &PlanningContext<'_>,
    key: StreamKey,
) -> Result<(Control, PlannerState, Diagnostics)> {
    Planner::new(Method::UgeMpc, cfg.clone())?.step(st, belief, ctx, key)
}

/// Plain MPPI step spending the whole budget on the final update.
pub fn mppi_step(
    st: &PlannerState,
    cfg: &PlannerConfig,
    belief: &GaussianBelief,
    ctx: &PlanningContext<'_>,
    key: StreamKey,
) -> Result<(Control, PlannerState, Diagnostics)> {
    Planner::new(Method::Mppi, cfg.clone())?.step(st, belief, ctx, key)
}
