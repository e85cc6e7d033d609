//! Kinematic bicycle model: forward-Euler step, its state Jacobian,
//! linearized covariance propagation and deterministic rollouts.
//!
//! Heading is accumulated on a continuous chart and never wrapped here.

use std::ops::Index;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Cov3 = Matrix3<f64>;

/// Tolerance for symmetry and negative-eigenvalue checks.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl State {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        State { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        State::new(v[0], v[1], v[2])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        (self.x - p[0]).hypot(self.y - p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Steering angle, rad.
    pub delta: f64,
}

impl Control {
    pub const fn new(v: f64, delta: f64) -> Self {
        Control { v, delta }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.delta.is_finite()
    }
}

/// A fixed-length sequence of controls over the planning horizon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlSequence(Vec<Control>);

impl ControlSequence {
    pub fn new(controls: Vec<Control>) -> Self {
        ControlSequence(controls)
    }

    pub fn constant(control: Control, steps: usize) -> Self {
        ControlSequence(vec![control; steps])
    }

    pub fn zeros(steps: usize) -> Self {
        Self::constant(Control::default(), steps)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Control> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Control] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [Control] {
        &mut self.0
    }

    pub fn first(&self) -> Option<Control> {
        self.0.first().copied()
    }

    pub fn into_inner(self) -> Vec<Control> {
        self.0
    }
}

impl Index<usize> for ControlSequence {
    type Output = Control;
    fn index(&self, i: usize) -> &Control {
        &self.0[i]
    }
}

impl FromIterator<Control> for ControlSequence {
    fn from_iter<I: IntoIterator<Item = Control>>(iter: I) -> Self {
        ControlSequence(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub dt: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub delta_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase: 0.3,
            dt: 0.05,
            v_max: 1.0,
            v_min: -1.0,
            delta_max: 0.4,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return Err(invalid(format!("wheelbase must be > 0, got {}", self.wheelbase)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.v_max >= self.v_min) || !self.v_max.is_finite() || !self.v_min.is_finite() {
            return Err(invalid(format!(
                "velocity limits must satisfy v_min <= v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        if !(self.delta_max > 0.0 && self.delta_max < std::f64::consts::FRAC_PI_2) {
            return Err(invalid(format!("delta_max must lie in (0, pi/2), got {}", self.delta_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mean: State,
    pub cov: Cov3,
}

impl GaussianBelief {
    pub fn new(mean: State, cov: Cov3) -> Result<Self> {
        check_psd(&cov, "belief covariance")?;
        Ok(GaussianBelief { mean, cov })
    }
}

/// Errors unless `m` is symmetric within [`PSD_TOL`] with no eigenvalue below `-PSD_TOL`.
pub fn check_psd(m: &Cov3, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > PSD_TOL {
        return Err(invalid(format!("{what} is not symmetric (max asymmetry {asym:e})")));
    }
    let eig = SymmetricEigen::new(*m);
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(invalid(format!("{what} is not PSD (min eigenvalue {min:e})")));
    }
    Ok(())
}

/// Saturates a control into the admissible box.
pub fn clamp(control: Control, params: &VehicleParams) -> Control {
    Control {
        v: control.v.clamp(params.v_min, params.v_max),
        delta: control.delta.clamp(-params.delta_max, params.delta_max),
    }
}

#[inline]
pub(crate) fn step_unchecked(s: State, u: Control, p: &VehicleParams) -> State {
    let (sin, cos) = s.theta.sin_cos();
    State {
        x: s.x + u.v * cos * p.dt,
        y: s.y + u.v * sin * p.dt,
        theta: s.theta + u.v / p.wheelbase * u.delta.tan() * p.dt,
    }
}

pub fn step(state: State, control: Control, params: &VehicleParams) -> Result<State> {
    if !state.is_finite() || !control.is_finite() {
        return Err(invalid(format!("non-finite step input: {state:?}, {control:?}")));
    }
    Ok(step_unchecked(state, control, params))
}

#[inline]
pub(crate) fn jacobian_unchecked(s: State, u: Control, p: &VehicleParams) -> Matrix3<f64> {
    let (sin, cos) = s.theta.sin_cos();
    Matrix3::new(
        1.0, 0.0, -u.v * sin * p.dt, //
        0.0, 1.0, u.v * cos * p.dt, //
        0.0, 0.0, 1.0,
    )
}

/// State Jacobian of [`step`] at `(state, control)`.
pub fn jacobian(state: State, control: Control, params: &VehicleParams) -> Result<Matrix3<f64>> {
    if !state.is_finite() || !control.is_finite() {
        return Err(invalid(format!("non-finite jacobian input: {state:?}, {control:?}")));
    }
    Ok(jacobian_unchecked(state, control, params))
}

#[inline]
pub(crate) fn propagate_covariance_unchecked(cov: &Cov3, jac: &Matrix3<f64>, q: &Cov3) -> Cov3 {
    let s = jac * cov * jac.transpose() + q;
    (s + s.transpose()) * 0.5
}

/// `A Σ Aᵀ + Q`, symmetrized.
pub fn propagate_covariance(cov: &Cov3, jac: &Matrix3<f64>, process_noise: &Cov3) -> Result<Cov3> {
    check_psd(cov, "covariance")?;
    check_psd(process_noise, "process noise")?;
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite jacobian"));
    }
    Ok(propagate_covariance_unchecked(cov, jac, process_noise))
}

pub(crate) fn rollout_unchecked(start: State, seq: &ControlSequence, p: &VehicleParams) -> Vec<State> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    let mut s = start;
    out.push(s);
    for &u in seq.iter() {
        s = step_unchecked(s, u, p);
        out.push(s);
    }
    out
}

/// Mean (noise-free) rollout; element 0 is `start`.
pub fn rollout(start: State, seq: &ControlSequence, params: &VehicleParams) -> Result<Vec<State>> {
    if !start.is_finite() {
        return Err(invalid(format!("non-finite rollout start: {start:?}")));
    }
    if let Some(bad) = seq.iter().find(|u| !u.is_finite()) {
        return Err(invalid(format!("non-finite control in sequence: {bad:?}")));
    }
    Ok(rollout_unchecked(start, seq, params))
}
