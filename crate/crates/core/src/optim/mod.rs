//! NAG, RMSProp and ADAM, gradient oracles, and theorem-driven convergence checks.

mod harness;
mod objectives;
mod oracle;

pub use harness::{
    adam_det_bound, log_log_slope, noxi_bound, noxi_guarantee, rmsprop_det_alpha,
    rmsprop_det_bound, rmsprop_fast_alpha, rmsprop_fast_guarantee, rmsprop_sign_alpha,
    rmsprop_sign_bound, trajectories, validate_objective, verify_convergence, ConvergenceReport,
    HarnessConfig, Hyperparameters, Theorem, ValidationReport,
};
pub use objectives::{
    GaussianWell, LogValley, ObjectiveSpec, PseudoHuberCos, Quadratic, SignConstrainedSum,
};
pub use oracle::{make_constrained_oracle, NoiseFamily, NoiseModel, Oracle, OracleKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("component gradients disagree in sign at coordinate {coordinate} (x = {x:?})")]
    SignViolation { coordinate: usize, x: Vec<f64> },
    #[error("declared constant violated: {0}")]
    ConstantMismatch(String),
    #[error("theorem precondition fails: {0}")]
    Precondition(String),
    #[error("oracle kind does not match the theorem: {0}")]
    OracleMismatch(String),
}

/// Constants certified for an objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConstants {
    pub smoothness: f64,
    /// Bound on `‖∇f‖`.
    pub grad_norm_bound: f64,
    /// Bound on each `|∂ᵢf|`.
    pub grad_coord_bound: f64,
    /// Bound on the gradient norm of any finite-sum component.
    pub component_grad_norm_bound: Option<f64>,
    pub f_star: Option<f64>,
    /// `(B_ℓ, B_u)` with `B_ℓ ≤ f ≤ B_u` everywhere.
    pub value_bounds: Option<(f64, f64)>,
}

pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn constants(&self) -> ObjectiveConstants;

    fn num_components(&self) -> usize {
        1
    }

    fn component_gradient(&self, _p: usize, x: &[f64]) -> Vec<f64> {
        self.gradient(x)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `1/√vᵢ` on the support of `v`, 0 elsewhere.
pub fn penrose_inv_sqrt(v: f64) -> f64 {
    if v > 0.0 {
        1.0 / v.sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NagState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl NagState {
    pub fn new(x: Vec<f64>) -> Self {
        let d = x.len();
        Self { x, v: vec![0.0; d] }
    }
}

/// `v ← μv + g`, `x ← x − α(g + μv)`.
pub fn nag_step(state: &mut NagState, g: &[f64], alpha: f64, mu: f64) {
    for i in 0..state.x.len() {
        state.v[i] = mu * state.v[i] + g[i];
        state.x[i] -= alpha * (g[i] + mu * state.v[i]);
    }
}

/// Where `ξ` enters the RMSProp update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiPlacement {
    /// `v ← β₂v + (1−β₂)(g² + ξ)`, `x ← x − α V^{−½} g` (Penrose inverse).
    InAccumulator,
    /// `v ← β₂v + (1−β₂)g²`, `x ← x − α g/(√v + ξ)`.
    InDenominator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl RmsState {
    pub fn new(x: Vec<f64>) -> Self {
        let d = x.len();
        Self { x, v: vec![0.0; d] }
    }
}

pub fn rmsprop_step(
    state: &mut RmsState,
    g: &[f64],
    alpha: f64,
    beta2: f64,
    xi: f64,
    placement: XiPlacement,
) {
    for i in 0..state.x.len() {
        match placement {
            XiPlacement::InAccumulator => {
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g[i] * g[i] + xi);
                state.x[i] -= alpha * penrose_inv_sqrt(state.v[i]) * g[i];
            }
            XiPlacement::InDenominator => {
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
                let den = state.v[i].sqrt() + xi;
                if den > 0.0 {
                    state.x[i] -= alpha * g[i] / den;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(x: Vec<f64>) -> Self {
        let d = x.len();
        Self {
            x,
            m: vec![0.0; d],
            v: vec![0.0; d],
            t: 0,
        }
    }
}

/// `α√(1−β₂ᵗ)/(1−β₁ᵗ)`.
pub fn adam_default_alpha(alpha: f64, beta1: f64, beta2: f64, t: u64) -> f64 {
    let t = t as i32;
    alpha * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t))
}

/// One ADAM step with step length `alpha_t`; `ξ` must be positive.
pub fn adam_step(
    state: &mut AdamState,
    g: &[f64],
    alpha_t: f64,
    beta1: f64,
    beta2: f64,
    xi: f64,
) -> Result<(), OptimError> {
    if !(xi > 0.0) {
        return Err(OptimError::Invalid("ADAM needs xi > 0".into()));
    }
    state.t += 1;
    for i in 0..state.x.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g[i] * g[i];
        state.x[i] -= alpha_t * state.m[i] / (state.v[i].sqrt() + xi);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub f: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Criticality,
    StepLimit,
}

/// Trace of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimRun {
    pub records: Vec<StepRecord>,
    pub trajectory: Option<Vec<Vec<f64>>>,
    pub final_x: Vec<f64>,
    pub stop: StopReason,
    /// First `t` with `‖∇f(x_t)‖ ≤ ε`, if a target was set and reached.
    pub t_reached: Option<u64>,
    /// Steps where `f` increased beyond the rounding slack.
    pub increases: u64,
    pub worst_increase: f64,
    /// Steps where `vᵢ < (1−β₂ᵗ)ξ`.
    pub accumulator_violations: u64,
    pub alphas: Vec<f64>,
}

/// Step-length rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { alpha: f64 },
    /// `α/√t`
    InvSqrt { alpha: f64 },
    /// `α√(1−β₂ᵗ)/(1−β₁ᵗ)`
    AdamBiasCorrected { alpha: f64 },
    /// `‖g_t‖²/(L(1−β₁ᵗ)²) · 4ε/(3(ε+2σ)²)`
    AdamTheorem { smoothness: f64, eps: f64, sigma: f64 },
}

impl StepSchedule {
    pub fn alpha(&self, t: u64, g: &[f64], beta1: f64, beta2: f64) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::InvSqrt { alpha } => alpha / (t as f64).sqrt(),
            StepSchedule::AdamBiasCorrected { alpha } => adam_default_alpha(alpha, beta1, beta2, t),
            StepSchedule::AdamTheorem {
                smoothness,
                eps,
                sigma,
            } => {
                let g2 = g.iter().map(|v| v * v).sum::<f64>();
                let bc = 1.0 - beta1.powi(t as i32);
                g2 / (smoothness * bc * bc) * 4.0 * eps / (3.0 * (eps + 2.0 * sigma).powi(2))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    Nag {
        alpha: f64,
        mu: f64,
    },
    RmsProp {
        schedule: StepSchedule,
        beta2: f64,
        xi: f64,
        placement: XiPlacement,
    },
    Adam {
        schedule: StepSchedule,
        beta1: f64,
        beta2: f64,
        xi: f64,
    },
}

impl Algorithm {
    fn validate(&self) -> Result<(), OptimError> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        match *self {
            Algorithm::Nag { mu, .. } if !unit(mu) => Err(OptimError::Invalid("mu ∉ [0,1)".into())),
            Algorithm::RmsProp { beta2, xi, .. } if !unit(beta2) || !(xi >= 0.0) => {
                Err(OptimError::Invalid("need beta2 ∈ [0,1), xi >= 0".into()))
            }
            Algorithm::Adam { beta1, beta2, xi, .. } if !unit(beta1) || !unit(beta2) || !(xi > 0.0) => {
                Err(OptimError::Invalid("need beta1, beta2 ∈ [0,1), xi > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// `x_1, …, x_{max_iterates}` are examined.
    pub max_iterates: u64,
    pub stop_eps: Option<f64>,
    pub keep_trajectory: bool,
    /// Keep every `record_every`-th record (the first and last are always kept).
    pub record_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iterates: 1000,
            stop_eps: None,
            keep_trajectory: false,
            record_every: 1,
        }
    }
}

/// Relative slack used when checking `f(x_{t+1}) ≤ f(x_t)`.
pub const DECREASE_SLACK: f64 = 1e-12;

enum State {
    Nag(NagState),
    Rms(RmsState),
    Adam(AdamState),
}

impl State {
    fn x(&self) -> &[f64] {
        match self {
            State::Nag(s) => &s.x,
            State::Rms(s) => &s.x,
            State::Adam(s) => &s.x,
        }
    }
}

/// Runs `algorithm` from `x1` and records `f` and `‖∇f‖` at every iterate.
pub fn optimize(
    objective: &dyn Objective,
    oracle: &mut Oracle<'_>,
    algorithm: &Algorithm,
    x1: &[f64],
    opts: &RunOptions,
) -> Result<OptimRun, OptimError> {
    algorithm.validate()?;
    if x1.len() != objective.dim() {
        return Err(OptimError::Invalid(format!(
            "start point has dimension {}, objective {}",
            x1.len(),
            objective.dim()
        )));
    }
    let mut state = match algorithm {
        Algorithm::Nag { .. } => State::Nag(NagState::new(x1.to_vec())),
        Algorithm::RmsProp { .. } => State::Rms(RmsState::new(x1.to_vec())),
        Algorithm::Adam { .. } => State::Adam(AdamState::new(x1.to_vec())),
    };
    let mut run = OptimRun {
        records: Vec::new(),
        trajectory: opts.keep_trajectory.then(Vec::new),
        final_x: Vec::new(),
        stop: StopReason::StepLimit,
        t_reached: None,
        increases: 0,
        worst_increase: 0.0,
        accumulator_violations: 0,
        alphas: Vec::new(),
    };
    let mut f_prev = objective.value(x1);
    for t in 1..=opts.max_iterates {
        let x = state.x().to_vec();
        let f = if t == 1 { f_prev } else { objective.value(&x) };
        if t > 1 {
            let increase = f - f_prev;
            if increase > DECREASE_SLACK * f_prev.abs().max(1.0) {
                run.increases += 1;
            }
            run.worst_increase = run.worst_increase.max(increase);
        }
        f_prev = f;
        let grad_norm = norm(&objective.gradient(&x));
        let record = StepRecord { t, f, grad_norm };
        let reached = opts.stop_eps.is_some_and(|e| grad_norm <= e);
        if t == 1 || reached || t == opts.max_iterates || t % opts.record_every.max(1) == 0 {
            run.records.push(record);
        }
        if let Some(tr) = run.trajectory.as_mut() {
            tr.push(x.clone());
        }
        if reached {
            run.t_reached = Some(t);
            run.stop = StopReason::Criticality;
            break;
        }
        if t == opts.max_iterates {
            break;
        }
        let g = oracle.query(&x)?;
        match (&mut state, algorithm) {
            (State::Nag(s), Algorithm::Nag { alpha, mu }) => {
                run.alphas.push(*alpha);
                nag_step(s, &g, *alpha, *mu);
            }
            (
                State::Rms(s),
                Algorithm::RmsProp {
                    schedule,
                    beta2,
                    xi,
                    placement,
                },
            ) => {
                let a = schedule.alpha(t, &g, 0.0, *beta2);
                run.alphas.push(a);
                rmsprop_step(s, &g, a, *beta2, *xi, *placement);
                if *placement == XiPlacement::InAccumulator && *xi > 0.0 {
                    let floor = (1.0 - beta2.powi(t as i32)) * xi;
                    if s.v.iter().any(|&v| v < floor * (1.0 - 1e-12)) {
                        run.accumulator_violations += 1;
                    }
                }
            }
            (
                State::Adam(s),
                Algorithm::Adam {
                    schedule,
                    beta1,
                    beta2,
                    xi,
                },
            ) => {
                let a = schedule.alpha(t, &g, *beta1, *beta2);
                run.alphas.push(a);
                adam_step(s, &g, a, *beta1, *beta2, *xi)?;
            }
            _ => unreachable!("state matches algorithm"),
        }
    }
    run.final_x = state.x().to_vec();
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nag_hand_step() {
        let mut s = NagState::new(vec![1.0]);
        nag_step(&mut s, &[1.0], 0.1, 0.9);
        assert_eq!(s.v, vec![1.0]);
        assert!((s.x[0] - 0.81).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_hand_step() {
        let mut s = RmsState::new(vec![0.0]);
        rmsprop_step(&mut s, &[1.0], 0.1, 0.9, 1.0, XiPlacement::InAccumulator);
        assert!((s.v[0] - 0.2).abs() < 1e-15);
        assert!((s.x[0] + 0.1 / 0.2_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_accumulator_gives_zero_update() {
        let mut s = RmsState::new(vec![3.0]);
        rmsprop_step(&mut s, &[0.0], 0.1, 0.9, 0.0, XiPlacement::InAccumulator);
        assert_eq!(s.x, vec![3.0]);
    }

    #[test]
    fn adam_hand_step() {
        let mut s = AdamState::new(vec![0.0]);
        let a = adam_default_alpha(1.0, 0.5, 0.5, 1);
        adam_step(&mut s, &[2.0], a, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(s.m, vec![1.0]);
        assert_eq!(s.v, vec![2.0]);
        let expected = -(0.5_f64.sqrt() / 0.5) / (2.0_f64.sqrt() + 1.0);
        assert!((s.x[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_rejects_zero_xi() {
        let mut s = AdamState::new(vec![0.0]);
        assert!(adam_step(&mut s, &[1.0], 0.1, 0.9, 0.9, 0.0).is_err());
    }
}
