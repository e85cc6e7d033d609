use rand::Rng;
use rayon::prelude::*;

use super::{Diagnostics, Method, PlannerConfig, PlanningContext, SampleStats};
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::uncertainty::{perturb, PerturbationModel, SamplerKind};
use crate::vehicle::{clamp, Control, ControlSequence, GaussianBelief, VehicleParams};

#[derive(Debug, Clone)]
pub struct MppiOutcome {
    pub sequence: ControlSequence,
    pub costs: Vec<f64>,
}

impl MppiOutcome {
    pub fn stats(&self) -> SampleStats {
        let n = self.costs.len();
        SampleStats {
            count: n,
            min_cost: self.costs.iter().copied().fold(f64::INFINITY, f64::min),
            mean_cost: self.costs.iter().sum::<f64>() / n.max(1) as f64,
            max_cost: self.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// `nominal + sum_l w_l (sample_l - nominal) / sum_l w_l` with
/// `w_l = exp(-(J_l - min J) / temperature)`.
///
/// Subtracting the minimum cost cancels in the ratio, so this is the plain
/// exponential weighting without its underflow.
pub fn weighted_update(
    nominal: &ControlSequence,
    samples: &[ControlSequence],
    costs: &[f64],
    temperature: f64,
) -> Result<ControlSequence> {
    if samples.is_empty() || samples.len() != costs.len() {
        return Err(Error::InvalidArgument(format!("{} samples with {} costs", samples.len(), costs.len())));
    }
    if let Some(bad) = costs.iter().find(|c| c.is_nan()) {
        return Err(Error::InvalidCost(format!("sample cost is {bad}")));
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::InvalidCost("no finite sample cost".into()));
    }
    let weights: Vec<f64> = costs.iter().map(|c| (-(c - min) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = vec![[0.0f64; 2]; nominal.len()];
    for (w, s) in weights.iter().zip(samples) {
        if *w == 0.0 {
            continue;
        }
        for ((a, u), base) in acc.iter_mut().zip(s.iter()).zip(nominal.iter()) {
            a[0] += w * (u.v - base.v);
            a[1] += w * (u.delta - base.delta);
        }
    }
    Ok(nominal
        .iter()
        .zip(acc)
        .map(|(u, a)| Control::new(u.v + a[0] / total, u.delta + a[1] / total))
        .collect())
}

/// Samples `samples` perturbations around `nominal`, costs each with
/// `cost_fn` and returns the cost-weighted update. Sample `l` draws from
/// `key.child(l)`.
pub fn mppi_update<F>(
    nominal: &ControlSequence,
    model: &PerturbationModel,
    samples: usize,
    temperature: f64,
    params: &VehicleParams,
    cost_fn: F,
    key: StreamKey,
) -> Result<MppiOutcome>
where
    F: Fn(&ControlSequence) -> f64 + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let drawn: Vec<(ControlSequence, f64)> = (0..samples)
        .into_par_iter()
        .map(|l| {
            let seq = perturb(nominal, model, params, &mut key.child(l as u64).rng());
            let c = cost_fn(&seq);
            (seq, c)
        })
        .collect();
    let (seqs, costs): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    let sequence: ControlSequence =
        weighted_update(nominal, &seqs, &costs, temperature)?.iter().map(|u| clamp(*u, params)).collect();
    Ok(MppiOutcome { sequence, costs })
}

/// Normal-log-normal perturbation: the Gaussian step noise is scaled by
/// `exp(z)`, `z ~ N(0, sigma_ln^2)`, drawn independently per step.
pub fn nln_perturb<R: Rng + ?Sized>(
    nominal: &ControlSequence,
    sigma_u: nalgebra::Matrix2<f64>,
    sigma_ln: f64,
    params: &VehicleParams,
    rng: &mut R,
) -> Result<ControlSequence> {
    let model = PerturbationModel::new(sigma_u, SamplerKind::NormalLogNormal { sigma_ln })?;
    Ok(perturb(nominal, &model, params, rng))
}

pub(super) fn optimize(
    method: Method,
    nominal: &ControlSequence,
    cfg: &PlannerConfig,
    model: &PerturbationModel,
    belief: &GaussianBelief,
    ctx: &PlanningContext<'_>,
    key: StreamKey,
) -> Result<Diagnostics> {
    let start = belief.mean;
    let outcome = mppi_update(
        nominal,
        model,
        cfg.budget,
        cfg.temperature,
        ctx.params,
        |seq| ctx.evaluate(start, seq).1.total,
        key.named("mppi"),
    )?;
    let (solution_rollout, solution_cost) = ctx.evaluate(start, &outcome.sequence);
    Ok(Diagnostics {
        method,
        candidate_rollouts: Vec::new(),
        candidate_costs: Vec::new(),
        candidate_breakdowns: Vec::new(),
        chosen_index: None,
        mean_pairwise_h2_before: None,
        mean_pairwise_h2_after: None,
        samples: outcome.stats(),
        solution: outcome.sequence,
        solution_rollout,
        solution_cost,
        rollouts: cfg.budget,
    })
}
