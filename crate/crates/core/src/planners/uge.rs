use rayon::prelude::*;

use super::mppi::mppi_update;
use super::{select_best, Diagnostics, Method, PlannerConfig, PlanningContext};
use crate::cost::CostBreakdown;
use crate::error::Result;
use crate::rng::StreamKey;
use crate::uncertainty::{
    build_distribution, mean_pairwise_hellinger, perturb, separate, PerturbationModel, SeparationContext,
    SeparationLog, TrajectoryDistribution,
};
use crate::vehicle::{clamp, ControlSequence, GaussianBelief, State, VehicleParams};

#[derive(Debug, Clone)]
pub struct UgeToOutput {
    /// Separated trajectories; index 0 is the unperturbed nominal.
    pub trajectories: Vec<TrajectoryDistribution>,
    pub log: SeparationLog,
    pub initial_mean_h2: f64,
    pub final_mean_h2: f64,
}

/// Exploratory trajectory optimization: `N` perturbed copies of the nominal
/// (the first left unperturbed as an anchor), each modeled as a trajectory
/// Gaussian, then `K` sweeps of distributional separation.
pub fn uge_to(
    nominal: &ControlSequence,
    cfg: &PlannerConfig,
    model: &PerturbationModel,
    start: &GaussianBelief,
    params: &VehicleParams,
    key: StreamKey,
) -> Result<UgeToOutput> {
    cfg.separation().validate()?;
    let q = cfg.q_matrix();
    let seed_key = key.named("seed");
    let anchor: ControlSequence = nominal.iter().map(|u| clamp(*u, params)).collect();
    let initial: Vec<TrajectoryDistribution> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let seq = if i == 0 { anchor.clone() } else { perturb(nominal, model, params, &mut seed_key.child(i as u64).rng()) };
            build_distribution(start, &seq, params, &q)
        })
        .collect::<Result<_>>()?;
    let initial_mean_h2 = mean_pairwise_hellinger(&initial)?;
    let ctx = SeparationContext { start, params, q: &q };
    let (trajectories, log) = separate(initial, &cfg.separation(), model, &ctx, key.named("separate"))?;
    let final_mean_h2 = mean_pairwise_hellinger(&trajectories)?;
    Ok(UgeToOutput { trajectories, log, initial_mean_h2, final_mean_h2 })
}

pub(super) fn optimize(
    nominal: &ControlSequence,
    cfg: &PlannerConfig,
    model: &PerturbationModel,
    belief: &GaussianBelief,
    ctx: &PlanningContext<'_>,
    key: StreamKey,
) -> Result<Diagnostics> {
    let explored = uge_to(nominal, cfg, model, belief, ctx.params, key.named("uge_to"))?;
    let evaluated: Vec<(Vec<State>, CostBreakdown)> = explored
        .trajectories
        .par_iter()
        .map(|d| {
            let states: Vec<State> = d.means().collect();
            let cost = ctx.cost().evaluate(&states, d.controls());
            (states, cost)
        })
        .collect();
    let candidate_costs: Vec<f64> = evaluated.iter().map(|(_, c)| c.total).collect();
    let best = select_best(&candidate_costs).expect("N >= 2 candidates");
    let start = belief.mean;
    let outcome = mppi_update(
        explored.trajectories[best].controls(),
        model,
        cfg.l,
        cfg.temperature,
        ctx.params,
        |seq| ctx.evaluate(start, seq).1.total,
        key.named("mppi"),
    )?;
    let (solution_rollout, solution_cost) = ctx.evaluate(start, &outcome.sequence);
    let (candidate_rollouts, candidate_breakdowns) = evaluated.into_iter().unzip();
    Ok(Diagnostics {
        method: Method::UgeMpc,
        candidate_rollouts,
        candidate_costs,
        candidate_breakdowns,
        chosen_index: Some(best),
        mean_pairwise_h2_before: Some(explored.initial_mean_h2),
        mean_pairwise_h2_after: Some(explored.final_mean_h2),
        samples: outcome.stats(),
        solution: outcome.sequence,
        solution_rollout,
        solution_cost,
        rollouts: cfg.n + explored.log.rollouts + cfg.l,
    })
}
