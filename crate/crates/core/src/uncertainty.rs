//! Trajectories as block-diagonal Gaussians, the squared Hellinger distance
//! between them, and distributional separation of a trajectory set.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::StreamKey;
use crate::vehicle::{
    check_psd, clamp, jacobian_unchecked, propagate_covariance_unchecked, step_unchecked, Control,
    ControlSequence, Cov3, GaussianBelief, State, VehicleParams,
};

/// Added to every covariance block before determinants and inverses.
pub const COV_REGULARIZATION: f64 = 1e-9;

// Below this, 1 - exp(log_bc) rounds to exactly 1.0 in f64.
const LOG_BC_SATURATION: f64 = -40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    Gaussian,
    /// Gaussian noise scaled per step by `exp(z)`, `z ~ N(0, sigma_ln^2)`.
    NormalLogNormal { sigma_ln: f64 },
}

/// Per-step control noise `eta_t ~ N(0, sigma_u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationModel {
    sigma_u: Matrix2<f64>,
    sqrt_sigma: Matrix2<f64>,
    kind: SamplerKind,
}

impl PerturbationModel {
    pub fn new(sigma_u: Matrix2<f64>, kind: SamplerKind) -> Result<Self> {
        if sigma_u.iter().any(|v| !v.is_finite()) || (sigma_u - sigma_u.transpose()).abs().max() > 1e-9 {
            return Err(invalid("sigma_u must be finite and symmetric"));
        }
        let eig = SymmetricEigen::new(sigma_u);
        if eig.eigenvalues.min() < -1e-9 {
            return Err(invalid(format!("sigma_u is not PSD: {sigma_u:?}")));
        }
        if let SamplerKind::NormalLogNormal { sigma_ln } = kind {
            if !(sigma_ln >= 0.0 && sigma_ln.is_finite()) {
                return Err(invalid(format!("sigma_ln must be >= 0, got {sigma_ln}")));
            }
        }
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt_sigma = eig.eigenvectors * Matrix2::from_diagonal(&root) * eig.eigenvectors.transpose();
        Ok(PerturbationModel { sigma_u, sqrt_sigma, kind })
    }

    pub fn gaussian(sigma_u: Matrix2<f64>) -> Result<Self> {
        Self::new(sigma_u, SamplerKind::Gaussian)
    }

    pub fn sigma_u(&self) -> &Matrix2<f64> {
        &self.sigma_u
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_u.iter().all(|&v| v == 0.0)
    }

    /// Raw (unclamped) noise for `steps` time steps.
    ///
    /// The Gaussian part is drawn first for the whole horizon, so a
    /// normal-log-normal model with `sigma_ln = 0` reproduces the Gaussian
    /// model draw for draw.
    pub fn sample_noise<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> Vec<Vector2<f64>> {
        let mut noise: Vec<Vector2<f64>> = (0..steps)
            .map(|_| {
                let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                self.sqrt_sigma * z
            })
            .collect();
        if let SamplerKind::NormalLogNormal { sigma_ln } = self.kind {
            for eta in noise.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *eta *= (sigma_ln * z).exp();
            }
        }
        noise
    }
}

/// `clamp(nominal + eta)` with `eta` drawn from `model`.
pub fn perturb<R: Rng + ?Sized>(
    nominal: &ControlSequence,
    model: &PerturbationModel,
    params: &VehicleParams,
    rng: &mut R,
) -> ControlSequence {
    let noise = model.sample_noise(nominal.len(), rng);
    nominal
        .iter()
        .zip(noise)
        .map(|(u, eta)| clamp(Control::new(u.v + eta[0], u.delta + eta[1]), params))
        .collect()
}

/// A trajectory as a Gaussian over the stacked states with one 3x3
/// covariance block per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDistribution {
    beliefs: Vec<GaussianBelief>,
    source_controls: ControlSequence,
    // ln|cov_t + eps I| per block
    log_dets: Vec<f64>,
}

impl TrajectoryDistribution {
    pub fn beliefs(&self) -> &[GaussianBelief] {
        &self.beliefs
    }

    pub fn controls(&self) -> &ControlSequence {
        &self.source_controls
    }

    pub fn means(&self) -> impl Iterator<Item = State> + '_ {
        self.beliefs.iter().map(|b| b.mean)
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }
}

#[inline]
fn det3(m: &Cov3) -> f64 {
    m.determinant()
}

#[inline]
fn regularized(m: &Cov3) -> Cov3 {
    m + Cov3::identity() * COV_REGULARIZATION
}

fn log_det_regularized(cov: &Cov3) -> Result<f64> {
    let d = det3(&regularized(cov));
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NumericDegeneracy(format!("covariance block has determinant {d:e}")));
    }
    Ok(d.ln())
}

/// Propagates mean and covariance of `start` under `seq`.
pub fn build_distribution(
    start: &GaussianBelief,
    seq: &ControlSequence,
    params: &VehicleParams,
    q: &Cov3,
) -> Result<TrajectoryDistribution> {
    check_psd(&start.cov, "initial covariance")?;
    check_psd(q, "process noise")?;
    if !start.mean.is_finite() || seq.iter().any(|u| !u.is_finite()) {
        return Err(invalid("non-finite start state or control"));
    }
    build_unchecked(start, seq, params, q)
}

pub(crate) fn build_unchecked(
    start: &GaussianBelief,
    seq: &ControlSequence,
    params: &VehicleParams,
    q: &Cov3,
) -> Result<TrajectoryDistribution> {
    let mut beliefs = Vec::with_capacity(seq.len() + 1);
    let mut log_dets = Vec::with_capacity(seq.len() + 1);
    let mut b = *start;
    beliefs.push(b);
    log_dets.push(log_det_regularized(&b.cov)?);
    for &u in seq.iter() {
        let a = jacobian_unchecked(b.mean, u, params);
        b = GaussianBelief {
            mean: step_unchecked(b.mean, u, params),
            cov: propagate_covariance_unchecked(&b.cov, &a, q),
        };
        beliefs.push(b);
        log_dets.push(log_det_regularized(&b.cov)?);
    }
    Ok(TrajectoryDistribution { beliefs, source_controls: seq.clone(), log_dets })
}

/// ln of the Bhattacharyya coefficient between two 3-D Gaussians, given
/// the log-determinants of their regularized covariances.
#[inline]
fn log_bc(a: &GaussianBelief, ld_a: f64, b: &GaussianBelief, ld_b: f64) -> Result<f64> {
    let avg = regularized(&((a.cov + b.cov) * 0.5));
    let det = det3(&avg);
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::NumericDegeneracy(format!("averaged covariance has determinant {det:e}")));
    }
    let d = a.mean.to_vector() - b.mean.to_vector();
    // adj(avg) = det * avg^-1
    let m = &avg;
    let adj = Cov3::new(
        m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
        m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)],
        m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
        m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)],
        m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
        m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)],
        m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
        m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)],
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
    );
    let maha = d.dot(&(adj * d)) / det;
    Ok(0.25 * ld_a + 0.25 * ld_b - 0.5 * det.ln() - 0.125 * maha)
}

fn h2_from_log_bc(log_bc: f64) -> f64 {
    (1.0 - log_bc.min(0.0).exp()).clamp(0.0, 1.0)
}

/// Squared Hellinger distance between two single-step beliefs, in `[0, 1]`.
pub fn hellinger_sq_block(a: &GaussianBelief, b: &GaussianBelief) -> Result<f64> {
    if !a.mean.is_finite() || !b.mean.is_finite() {
        return Err(invalid("non-finite belief mean"));
    }
    let ld_a = log_det_regularized(&a.cov)?;
    let ld_b = log_det_regularized(&b.cov)?;
    Ok(h2_from_log_bc(log_bc(a, ld_a, b, ld_b)?))
}

/// Squared Hellinger distance between two trajectory Gaussians.
///
/// The block-diagonal structure makes the Bhattacharyya coefficient a
/// product over time steps, accumulated here in log space. The initial
/// block contributes exactly zero when both trajectories share a start.
pub fn hellinger_sq_trajectory(a: &TrajectoryDistribution, b: &TrajectoryDistribution) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid(format!("trajectory lengths differ: {} vs {}", a.len(), b.len())));
    }
    let mut total = 0.0;
    for t in 0..a.len() {
        total += log_bc(&a.beliefs[t], a.log_dets[t], &b.beliefs[t], b.log_dets[t])?;
        if total < LOG_BC_SATURATION {
            return Ok(1.0);
        }
    }
    Ok(h2_from_log_bc(total))
}

/// Sum of squared Hellinger distances from `candidate` to every member of
/// `others` except `others[self_index]`.
pub fn separation_score(
    candidate: &TrajectoryDistribution,
    others: &[TrajectoryDistribution],
    self_index: usize,
) -> Result<f64> {
    others
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != self_index)
        .map(|(_, o)| hellinger_sq_trajectory(candidate, o))
        .sum()
}

/// Mean of the squared Hellinger distance over all unordered pairs.
pub fn mean_pairwise_hellinger(trajs: &[TrajectoryDistribution]) -> Result<f64> {
    let n = trajs.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += hellinger_sq_trajectory(&trajs[i], &trajs[j])?;
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub n_trajectories: usize,
    pub candidates_per_trajectory: usize,
    pub iterations: usize,
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories < 2 || self.candidates_per_trajectory < 1 || self.iterations < 1 {
            return Err(Error::Config(format!(
                "separation needs N >= 2, M >= 1, K >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Shared inputs to building candidate distributions.
#[derive(Debug, Clone, Copy)]
pub struct SeparationContext<'a> {
    pub start: &'a GaussianBelief,
    pub params: &'a VehicleParams,
    pub q: &'a Cov3,
}

/// One replacement decision made during separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapRecord {
    pub sweep: usize,
    pub index: usize,
    /// Candidate chosen; 0 is the incumbent.
    pub chosen: usize,
    pub incumbent_score: f64,
    pub chosen_score: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SeparationLog {
    pub swaps: Vec<SwapRecord>,
    /// Number of candidate distributions built.
    pub rollouts: usize,
}

/// Distributional separation over `K` sweeps.
///
/// Trajectory 0 is the anchor and is never refined. For every other
/// trajectory, `M` perturbed candidates are drawn around it, and the
/// highest-scoring one replaces it. The incumbent competes as candidate 0,
/// so a trajectory's score never drops at a swap; ties keep the lower
/// candidate index. Sweeps visit trajectories in order and score each one
/// against the current state of the set. Candidate noise for
/// `(sweep, i, m)` comes from `key.path([sweep, i, m])`.
pub fn separate(
    mut trajs: Vec<TrajectoryDistribution>,
    cfg: &SeparationConfig,
    model: &PerturbationModel,
    ctx: &SeparationContext<'_>,
    key: StreamKey,
) -> Result<(Vec<TrajectoryDistribution>, SeparationLog)> {
    cfg.validate()?;
    if trajs.len() != cfg.n_trajectories {
        return Err(invalid(format!(
            "expected {} trajectories, got {}",
            cfg.n_trajectories,
            trajs.len()
        )));
    }
    check_psd(&ctx.start.cov, "initial covariance")?;
    check_psd(ctx.q, "process noise")?;
    let mut log = SeparationLog::default();
    for sweep in 0..cfg.iterations {
        for i in 1..trajs.len() {
            let incumbent_score = separation_score(&trajs[i], &trajs, i)?;
            let base = trajs[i].controls().clone();
            let scored: Vec<(TrajectoryDistribution, f64)> = (1..=cfg.candidates_per_trajectory)
                .into_par_iter()
                .map(|m| {
                    let mut rng = key.path(&[sweep as u64, i as u64, m as u64]).rng();
                    let seq = perturb(&base, model, ctx.params, &mut rng);
                    let dist = build_unchecked(ctx.start, &seq, ctx.params, ctx.q)?;
                    let h = separation_score(&dist, &trajs, i)?;
                    Ok((dist, h))
                })
                .collect::<Result<_>>()?;
            log.rollouts += scored.len();
            let mut chosen = 0;
            let mut best = incumbent_score;
            for (m, (_, h)) in scored.iter().enumerate() {
                if *h > best {
                    best = *h;
                    chosen = m + 1;
                }
            }
            log.swaps.push(SwapRecord { sweep, index: i, chosen, incumbent_score, chosen_score: best });
            if chosen > 0 {
                trajs[i] = scored.into_iter().nth(chosen - 1).map(|(d, _)| d).expect("chosen candidate");
            }
        }
    }
    Ok((trajs, log))
}
