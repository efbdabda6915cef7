//! Theorem-configured runs and objective validation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, norm, optimize, Algorithm, AdamState, Objective, ObjectiveConstants, OptimError,
    Oracle, OracleKind, RunOptions, StepRecord, StepSchedule, XiPlacement,
};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Deterministic RMSProp, constant step, `ξ > 0`.
    RmsPropDet,
    /// Deterministic RMSProp, `ξ = 0`, step `α/√t`.
    RmsPropNoXi,
    /// Deterministic ADAM with `β₁ = ε/(ε+2σ)`, `ξ = 2σ` and a gradient-scaled step.
    AdamDet,
    /// Stochastic RMSProp on a sign-constrained finite sum.
    RmsPropSign,
    /// Stochastic RMSProp with a constrained-noise oracle.
    RmsPropFast,
}

impl Theorem {
    pub fn all() -> [Theorem; 5] {
        [
            Theorem::RmsPropDet,
            Theorem::RmsPropNoXi,
            Theorem::AdamDet,
            Theorem::RmsPropSign,
            Theorem::RmsPropFast,
        ]
    }

    fn oracle_matches(&self, kind: &OracleKind) -> bool {
        matches!(
            (self, kind),
            (
                Theorem::RmsPropDet | Theorem::RmsPropNoXi | Theorem::AdamDet,
                OracleKind::Exact
            ) | (Theorem::RmsPropSign, OracleKind::SignConstrainedFiniteSum)
                | (Theorem::RmsPropFast, OracleKind::ConstrainedNoise(_))
        )
    }
}

/// Knobs the theorems leave free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub beta2: f64,
    /// Used by `RmsPropDet` and `RmsPropSign`; the fast mode takes `ξ` from the oracle.
    pub xi: f64,
    /// Base step of the `ξ = 0` schedule `α/√t`.
    pub alpha: f64,
    /// Hard cap on iterates per run.
    pub max_steps: u64,
    pub seeds: Vec<u64>,
    /// Relative slack on `ε²` in the sign-constrained check.
    pub slack: f64,
    /// Horizon window `[lo, hi]` of the decay-rate fit in the fast mode.
    pub rate_window: (u64, u64),
    pub rate_slope: (f64, f64),
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            beta2: 0.9,
            xi: 1.0,
            alpha: 0.1,
            max_steps: 5_000_000,
            seeds: (0..50).collect(),
            slack: 0.2,
            rate_window: (100, 10_000),
            rate_slope: (-1.3, -0.7),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: Option<f64>,
    pub schedule: StepSchedule,
    pub beta1: Option<f64>,
    pub beta2: f64,
    pub xi: f64,
    /// The `σ` fed into the theorem.
    pub sigma: f64,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub theorem: Theorem,
    pub eps: f64,
    pub hyper: Hyperparameters,
    pub f_start: f64,
    pub f_star: f64,
    pub t_bound: f64,
    /// First iterate with `‖∇f‖ ≤ ε` (deterministic modes).
    pub t_reached: Option<u64>,
    /// Steps where `f` rose (deterministic modes assert zero).
    pub increases: u64,
    pub worst_increase: f64,
    pub accumulator_violations: u64,
    /// `min_{t ≤ T} E‖∇f(x_t)‖²` over the seed average (stochastic modes).
    pub min_expected_sq_grad: Option<f64>,
    pub threshold: Option<f64>,
    /// Fitted log-log slope of the running minimum (fast mode).
    pub decay_slope: Option<f64>,
    /// Closed-form guarantee at the end of the horizon (fast mode).
    pub theory_value: Option<f64>,
    pub steps_run: u64,
    pub seeds: usize,
    pub passed: bool,
    /// `(t, f, ‖∇f‖)`; seed means (with `‖∇f‖` the root of the mean square) in stochastic modes.
    pub trace: Vec<StepRecord>,
    pub notes: Vec<String>,
}

fn need_f_star(c: &ObjectiveConstants) -> Result<f64, OptimError> {
    c.f_star
        .ok_or_else(|| OptimError::Invalid("objective does not declare f*".into()))
}

fn check_run_bounds(records: &[StepRecord], c: &ObjectiveConstants) -> Result<(), OptimError> {
    let tol = 1.0 + 1e-9;
    if let Some(r) = records.iter().find(|r| r.grad_norm > c.grad_norm_bound * tol) {
        return Err(OptimError::ConstantMismatch(format!(
            "‖∇f(x_{})‖ = {} exceeds declared bound {}",
            r.t, r.grad_norm, c.grad_norm_bound
        )));
    }
    if let Some(fs) = c.f_star {
        if let Some(r) = records.iter().find(|r| r.f < fs - 1e-9) {
            return Err(OptimError::ConstantMismatch(format!(
                "f(x_{}) = {} is below declared f* = {fs}",
                r.t, r.f
            )));
        }
    }
    Ok(())
}

/// `(1/ε²)·2L(σ²+ξ)(f₁−f*)/((1−β₂)ξ)`.
pub fn rmsprop_det_bound(l: f64, sigma: f64, xi: f64, beta2: f64, gap: f64, eps: f64) -> f64 {
    2.0 * l * (sigma * sigma + xi) * gap / ((1.0 - beta2) * xi * eps * eps)
}

/// `(1−β₂)ξ/(L√(σ²+ξ))`.
pub fn rmsprop_det_alpha(l: f64, sigma: f64, xi: f64, beta2: f64) -> f64 {
    (1.0 - beta2) * xi / (l * (sigma * sigma + xi).sqrt())
}

/// `9Lσ²(f(x₂)−f*)/ε⁶`.
pub fn adam_det_bound(l: f64, sigma: f64, gap: f64, eps: f64) -> f64 {
    9.0 * l * sigma * sigma * gap / eps.powi(6)
}

/// Left side of the `ξ = 0` guarantee at horizon `T`.
pub fn noxi_guarantee(
    t: f64,
    sigma: f64,
    l: f64,
    d: usize,
    alpha: f64,
    beta2: f64,
    value_range: f64,
) -> f64 {
    let p1 = alpha * d as f64 / (1.0 - beta2);
    let tail = d as f64 * alpha * (t.sqrt() - 2.0) / (2.0 * (1.0 - beta2));
    (sigma / t) * (value_range * (t + 1.0).sqrt() / alpha + 0.5 * l * (p1 + tail))
}

/// Smallest integer `T ≥ 1` with `noxi_guarantee(T) ≤ ε²`, or `None` past `2⁶²`.
pub fn noxi_bound(
    sigma: f64,
    l: f64,
    d: usize,
    alpha: f64,
    beta2: f64,
    value_range: f64,
    eps: f64,
) -> Option<u64> {
    let ok = |t: u64| noxi_guarantee(t as f64, sigma, l, d, alpha, beta2, value_range) <= eps * eps;
    let mut hi = 1u64;
    while !ok(hi) {
        if hi >= 1 << 62 {
            return None;
        }
        hi *= 2;
    }
    if hi == 1 {
        return Some(1);
    }
    // `hi/2` failed; bisect the last doubling interval
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// `(1/ε⁴)·2Lσ_f²(σ_f²+ξ)(f₁−f*)/((1−β₂)ξ)`.
pub fn rmsprop_sign_bound(l: f64, sigma_f: f64, xi: f64, beta2: f64, gap: f64, eps: f64) -> f64 {
    let s2 = sigma_f * sigma_f;
    2.0 * l * s2 * (s2 + xi) * gap / ((1.0 - beta2) * xi * eps.powi(4))
}

/// `(1/√T)·√(2ξ(1−β₂)(f₁−f*)/(σ_f²L))`.
pub fn rmsprop_sign_alpha(l: f64, sigma_f: f64, xi: f64, beta2: f64, gap: f64, t: f64) -> f64 {
    (2.0 * xi * (1.0 - beta2) * gap / (sigma_f * sigma_f * l)).sqrt() / t.sqrt()
}

/// Constant step of the fast mode; errors unless the parameter constraints hold.
pub fn rmsprop_fast_alpha(
    l: f64,
    sigma: f64,
    xi: f64,
    beta2: f64,
    c: f64,
) -> Result<f64, OptimError> {
    if !(sigma < (xi / (2.0 * c)).powf(2.0 / 3.0)) {
        return Err(OptimError::Precondition(format!(
            "σ = {sigma} must be below (ξ/2c)^(2/3) = {}",
            (xi / (2.0 * c)).powf(2.0 / 3.0)
        )));
    }
    let lhs = c * sigma.powf(1.5) / xi;
    let rhs = (beta2 * (1.0 - beta2)).sqrt();
    if !(lhs < rhs) {
        return Err(OptimError::Precondition(format!(
            "cσ^1.5/ξ = {lhs} must be below √(β₂(1−β₂)) = {rhs}"
        )));
    }
    let alpha = xi * beta2 * (1.0 - beta2) / (c * l)
        * (1.0 / (beta2 * sigma).sqrt() - c * sigma / (xi * beta2 * (1.0 - beta2).sqrt()));
    if !(alpha > 0.0) {
        return Err(OptimError::Precondition(format!("step {alpha} is not positive")));
    }
    Ok(alpha)
}

/// `K = cσ/√(β₂ξ) − √(ξ(1−β₂)/σ)`; the guarantee is `2cL(f₁−f*)/(T·K²)`.
pub fn rmsprop_fast_guarantee(l: f64, sigma: f64, xi: f64, beta2: f64, c: f64, gap: f64, t: f64) -> f64 {
    let k = c * sigma / (beta2 * xi).sqrt() - (xi * (1.0 - beta2) / sigma).sqrt();
    2.0 * c * l * gap / (t * k * k)
}

/// Runs `theorem` on `objective` from `x1` with hyperparameters fixed by the theorem.
pub fn verify_convergence(
    theorem: Theorem,
    objective: &dyn Objective,
    oracle: OracleKind,
    x1: &[f64],
    eps: f64,
    cfg: &HarnessConfig,
) -> Result<ConvergenceReport, OptimError> {
    if !theorem.oracle_matches(&oracle) {
        return Err(OptimError::OracleMismatch(format!("{theorem:?} with {oracle:?}")));
    }
    if !(eps > 0.0) {
        return Err(OptimError::Invalid("eps must be positive".into()));
    }
    if x1.len() != objective.dim() {
        return Err(OptimError::Invalid("start point dimension".into()));
    }
    match theorem {
        Theorem::RmsPropDet | Theorem::RmsPropNoXi | Theorem::AdamDet => {
            deterministic(theorem, objective, x1, eps, cfg)
        }
        Theorem::RmsPropSign => sign_mode(objective, oracle, x1, eps, cfg),
        Theorem::RmsPropFast => fast_mode(objective, oracle, x1, eps, cfg),
    }
}

fn blank_report(theorem: Theorem, eps: f64, hyper: Hyperparameters, f_start: f64, f_star: f64) -> ConvergenceReport {
    ConvergenceReport {
        theorem,
        eps,
        hyper,
        f_start,
        f_star,
        t_bound: f64::INFINITY,
        t_reached: None,
        increases: 0,
        worst_increase: 0.0,
        accumulator_violations: 0,
        min_expected_sq_grad: None,
        threshold: None,
        decay_slope: None,
        theory_value: None,
        steps_run: 0,
        seeds: 1,
        passed: false,
        trace: Vec::new(),
        notes: Vec::new(),
    }
}

fn deterministic(
    theorem: Theorem,
    objective: &dyn Objective,
    x1: &[f64],
    eps: f64,
    cfg: &HarnessConfig,
) -> Result<ConvergenceReport, OptimError> {
    let c = objective.constants();
    let f_star = need_f_star(&c)?;
    let f1 = objective.value(x1);
    let l = c.smoothness;
    let sigma = c.grad_norm_bound;
    let (algorithm, hyper, t_bound) = match theorem {
        Theorem::RmsPropDet => {
            if !(cfg.xi > 0.0) {
                return Err(OptimError::Invalid("this mode needs xi > 0".into()));
            }
            let alpha = rmsprop_det_alpha(l, sigma, cfg.xi, cfg.beta2);
            let schedule = StepSchedule::Constant { alpha };
            (
                Algorithm::RmsProp {
                    schedule,
                    beta2: cfg.beta2,
                    xi: cfg.xi,
                    placement: XiPlacement::InAccumulator,
                },
                Hyperparameters {
                    alpha: Some(alpha),
                    schedule,
                    beta1: None,
                    beta2: cfg.beta2,
                    xi: cfg.xi,
                    sigma,
                    smoothness: l,
                },
                rmsprop_det_bound(l, sigma, cfg.xi, cfg.beta2, f1 - f_star, eps),
            )
        }
        Theorem::RmsPropNoXi => {
            let (lo, hi) = c.value_bounds.ok_or_else(|| {
                OptimError::Invalid("the ξ = 0 mode needs declared value bounds".into())
            })?;
            let schedule = StepSchedule::InvSqrt { alpha: cfg.alpha };
            let t = noxi_bound(sigma, l, objective.dim(), cfg.alpha, cfg.beta2, hi - lo, eps)
                .map_or(f64::INFINITY, |t| t as f64);
            (
                Algorithm::RmsProp {
                    schedule,
                    beta2: cfg.beta2,
                    xi: 0.0,
                    placement: XiPlacement::InAccumulator,
                },
                Hyperparameters {
                    alpha: Some(cfg.alpha),
                    schedule,
                    beta1: None,
                    beta2: cfg.beta2,
                    xi: 0.0,
                    sigma,
                    smoothness: l,
                },
                t,
            )
        }
        Theorem::AdamDet => {
            let beta1 = eps / (eps + 2.0 * sigma);
            let xi = 2.0 * sigma;
            let schedule = StepSchedule::AdamTheorem {
                smoothness: l,
                eps,
                sigma,
            };
            // the bound is stated from the second iterate
            let mut probe = AdamState::new(x1.to_vec());
            let g1 = objective.gradient(x1);
            let a1 = schedule.alpha(1, &g1, beta1, cfg.beta2);
            adam_step(&mut probe, &g1, a1, beta1, cfg.beta2, xi)?;
            let f2 = objective.value(&probe.x);
            (
                Algorithm::Adam {
                    schedule,
                    beta1,
                    beta2: cfg.beta2,
                    xi,
                },
                Hyperparameters {
                    alpha: None,
                    schedule,
                    beta1: Some(beta1),
                    beta2: cfg.beta2,
                    xi,
                    sigma,
                    smoothness: l,
                },
                adam_det_bound(l, sigma, f2 - f_star, eps),
            )
        }
        _ => unreachable!(),
    };
    let cap = if t_bound.is_finite() {
        (t_bound.floor() as u64).clamp(1, cfg.max_steps)
    } else {
        cfg.max_steps
    };
    let mut oracle = Oracle::new(objective, OracleKind::Exact, 0);
    let run = optimize(
        objective,
        &mut oracle,
        &algorithm,
        x1,
        &RunOptions {
            max_iterates: cap,
            stop_eps: Some(eps),
            keep_trajectory: false,
            record_every: 1,
        },
    )?;
    check_run_bounds(&run.records, &c)?;
    let mut report = blank_report(theorem, eps, hyper, f1, f_star);
    report.t_bound = t_bound;
    report.t_reached = run.t_reached;
    report.increases = run.increases;
    report.worst_increase = run.worst_increase;
    report.accumulator_violations = run.accumulator_violations;
    report.steps_run = run.records.last().map_or(0, |r| r.t);
    // a critical start passes whatever the bound
    let within = run.t_reached.is_some_and(|t| t == 1 || (t as f64) <= t_bound);
    let monotone = match theorem {
        Theorem::RmsPropDet | Theorem::AdamDet => run.increases == 0,
        _ => true,
    };
    if !monotone {
        report.notes.push(format!(
            "f increased on {} steps (worst {:e})",
            run.increases, run.worst_increase
        ));
    }
    if run.t_reached.is_none() && (cap as f64) < t_bound {
        report.notes.push(format!("stopped at step cap {cap} below the bound"));
    }
    report.passed = within && monotone && run.accumulator_violations == 0;
    report.trace = run.records;
    Ok(report)
}

/// Seed-averaged `f` and `‖∇f‖²` at every iterate `1..=horizon`.
fn averaged_curves(
    objective: &dyn Objective,
    oracle: OracleKind,
    algorithm: &Algorithm,
    x1: &[f64],
    horizon: u64,
    seeds: &[u64],
) -> Result<(Vec<f64>, Vec<f64>), OptimError> {
    let runs: Vec<Result<(Vec<f64>, Vec<f64>), OptimError>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut o = Oracle::new(objective, oracle, seed);
            let run = optimize(
                objective,
                &mut o,
                algorithm,
                x1,
                &RunOptions {
                    max_iterates: horizon,
                    stop_eps: None,
                    keep_trajectory: false,
                    record_every: 1,
                },
            )?;
            Ok((
                run.records.iter().map(|r| r.f).collect(),
                run.records.iter().map(|r| r.grad_norm * r.grad_norm).collect(),
            ))
        })
        .collect();
    let n = horizon as usize;
    let mut f = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    for r in runs {
        let (fs, gs) = r?;
        for i in 0..n {
            f[i] += fs[i];
            g2[i] += gs[i];
        }
    }
    let k = seeds.len() as f64;
    f.iter_mut().for_each(|v| *v /= k);
    g2.iter_mut().for_each(|v| *v /= k);
    Ok((f, g2))
}

fn thin_trace(f: &[f64], g2: &[f64]) -> Vec<StepRecord> {
    let n = f.len();
    let stride = (n / 2000).max(1);
    (0..n)
        .filter(|&i| i % stride == 0 || i + 1 == n)
        .map(|i| StepRecord {
            t: i as u64 + 1,
            f: f[i],
            grad_norm: g2[i].sqrt(),
        })
        .collect()
}

fn sign_mode(
    objective: &dyn Objective,
    oracle: OracleKind,
    x1: &[f64],
    eps: f64,
    cfg: &HarnessConfig,
) -> Result<ConvergenceReport, OptimError> {
    let c = objective.constants();
    let f_star = need_f_star(&c)?;
    let sigma_f = c.component_grad_norm_bound.ok_or_else(|| {
        OptimError::Invalid("objective does not declare a component gradient bound".into())
    })?;
    if !(cfg.xi > 0.0) || cfg.seeds.is_empty() {
        return Err(OptimError::Invalid("need xi > 0 and at least one seed".into()));
    }
    let f1 = objective.value(x1);
    let gap = f1 - f_star;
    let l = c.smoothness;
    let t_bound = rmsprop_sign_bound(l, sigma_f, cfg.xi, cfg.beta2, gap, eps);
    let horizon = (t_bound.ceil() as u64).max(1);
    if horizon > cfg.max_steps {
        return Err(OptimError::Invalid(format!(
            "horizon {horizon} exceeds the step cap {}",
            cfg.max_steps
        )));
    }
    let alpha = rmsprop_sign_alpha(l, sigma_f, cfg.xi, cfg.beta2, gap, horizon as f64);
    let schedule = StepSchedule::Constant { alpha };
    let algorithm = Algorithm::RmsProp {
        schedule,
        beta2: cfg.beta2,
        xi: cfg.xi,
        placement: XiPlacement::InAccumulator,
    };
    let (f, g2) = averaged_curves(objective, oracle, &algorithm, x1, horizon, &cfg.seeds)?;
    let min = g2.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = eps * eps * (1.0 + cfg.slack);
    let mut report = blank_report(
        Theorem::RmsPropSign,
        eps,
        Hyperparameters {
            alpha: Some(alpha),
            schedule,
            beta1: None,
            beta2: cfg.beta2,
            xi: cfg.xi,
            sigma: sigma_f,
            smoothness: l,
        },
        f1,
        f_star,
    );
    report.t_bound = t_bound;
    report.t_reached = g2.iter().position(|&v| v <= eps * eps).map(|i| i as u64 + 1);
    report.min_expected_sq_grad = Some(min);
    report.threshold = Some(threshold);
    report.steps_run = horizon;
    report.seeds = cfg.seeds.len();
    report.passed = min <= threshold;
    report.trace = thin_trace(&f, &g2);
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln t`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, y) in points {
        let dx = t.ln() - mx;
        num += dx * (y.ln() - my);
        den += dx * dx;
    }
    num / den
}

fn fast_mode(
    objective: &dyn Objective,
    oracle: OracleKind,
    x1: &[f64],
    eps: f64,
    cfg: &HarnessConfig,
) -> Result<ConvergenceReport, OptimError> {
    let OracleKind::ConstrainedNoise(model) = oracle else {
        unreachable!()
    };
    let c = objective.constants();
    let f_star = need_f_star(&c)?;
    if cfg.seeds.is_empty() {
        return Err(OptimError::Invalid("need at least one seed".into()));
    }
    let (lo, hi) = cfg.rate_window;
    if !(1 <= lo && lo < hi) || hi > cfg.max_steps {
        return Err(OptimError::Invalid("bad rate window".into()));
    }
    let l = c.smoothness;
    let sigma = c.grad_coord_bound;
    let alpha = rmsprop_fast_alpha(l, sigma, model.xi, cfg.beta2, model.beta)?;
    let f1 = objective.value(x1);
    let gap = f1 - f_star;
    let k = model.beta * sigma / (cfg.beta2 * model.xi).sqrt()
        - (model.xi * (1.0 - cfg.beta2) / sigma).sqrt();
    let t_bound = 2.0 * model.beta * l * gap / (eps * eps * k * k);
    let schedule = StepSchedule::Constant { alpha };
    let algorithm = Algorithm::RmsProp {
        schedule,
        beta2: cfg.beta2,
        xi: model.xi,
        placement: XiPlacement::InAccumulator,
    };
    let (f, g2) = averaged_curves(objective, oracle, &algorithm, x1, hi, &cfg.seeds)?;
    let mut running = g2.clone();
    for i in 1..running.len() {
        running[i] = running[i].min(running[i - 1]);
    }
    let samples = 60;
    let (llo, lhi) = ((lo as f64).ln(), (hi as f64).ln());
    let mut pts: Vec<(f64, f64)> = (0..samples)
        .map(|j| {
            let t = (llo + (lhi - llo) * j as f64 / (samples - 1) as f64).exp().round() as u64;
            let t = t.clamp(lo, hi);
            (t as f64, running[t as usize - 1])
        })
        .collect();
    pts.dedup_by(|a, b| a.0 == b.0);
    let slope = log_log_slope(&pts);
    let mut report = blank_report(
        Theorem::RmsPropFast,
        eps,
        Hyperparameters {
            alpha: Some(alpha),
            schedule,
            beta1: None,
            beta2: cfg.beta2,
            xi: model.xi,
            sigma,
            smoothness: l,
        },
        f1,
        f_star,
    );
    let end_min = running[hi as usize - 1];
    report.t_bound = t_bound;
    report.t_reached = g2.iter().position(|&v| v <= eps * eps).map(|i| i as u64 + 1);
    report.min_expected_sq_grad = Some(end_min);
    report.decay_slope = Some(slope);
    report.theory_value = Some(rmsprop_fast_guarantee(
        l, sigma, model.xi, cfg.beta2, model.beta, gap, hi as f64,
    ));
    report.steps_run = hi;
    report.seeds = cfg.seeds.len();
    report.passed = (cfg.rate_slope.0..=cfg.rate_slope.1).contains(&slope);
    report.trace = thin_trace(&f, &g2);
    Ok(report)
}

/// Outcome of [`validate_objective`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    /// Largest `|f(y)−f(x)−⟨∇f(x),y−x⟩| / (½‖y−x‖²)` seen; must not exceed `L`.
    pub max_curvature_ratio: f64,
    pub max_grad_norm: f64,
    pub max_grad_coord: f64,
    /// Largest gap between the gradient and central differences.
    pub max_fd_error: f64,
    pub smoothness_ok: bool,
    pub grad_bound_ok: bool,
    pub finite_difference_ok: bool,
    /// A pair `(x, y)` breaking the smoothness inequality, if one was found.
    pub smoothness_witness: Option<(Vec<f64>, Vec<f64>)>,
    /// A point where the gradient bound or finite differences fail.
    pub gradient_witness: Option<Vec<f64>>,
    pub passed: bool,
}

/// Sampling checks of the declared constants on the box `[lo, hi]ᵈ`.
pub fn validate_objective(
    objective: &dyn Objective,
    domain: (f64, f64),
    samples: usize,
    seed: u64,
) -> ValidationReport {
    let c = objective.constants();
    let d = objective.dim();
    let mut rng = seeded(seed, 7);
    let (lo, hi) = domain;
    let mut report = ValidationReport {
        samples,
        max_curvature_ratio: 0.0,
        max_grad_norm: 0.0,
        max_grad_coord: 0.0,
        max_fd_error: 0.0,
        smoothness_ok: true,
        grad_bound_ok: true,
        finite_difference_ok: true,
        smoothness_witness: None,
        gradient_witness: None,
        passed: true,
    };
    let fd_step = 1e-5;
    for s in 0..samples {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(lo..=hi)).collect();
        // pair distances span several scales
        let scale = (hi - lo) * 10f64.powi(-((s % 4) as i32));
        let y: Vec<f64> = x
            .iter()
            .map(|&v| (v + scale * rng.gen_range(-0.5..0.5)).clamp(lo, hi))
            .collect();
        let g = objective.gradient(&x);
        let h: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let h2: f64 = h.iter().map(|v| v * v).sum();
        if h2 > 0.0 {
            let lin: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
            let gap = (objective.value(&y) - objective.value(&x) - lin).abs();
            let ratio = gap / (0.5 * h2);
            report.max_curvature_ratio = report.max_curvature_ratio.max(ratio);
            let round_off = 1e-12 * objective.value(&x).abs().max(1.0);
            if gap > 0.5 * c.smoothness * h2 * (1.0 + 1e-9) + round_off {
                report.smoothness_ok = false;
                report.smoothness_witness.get_or_insert((x.clone(), y.clone()));
            }
        }
        let gn = norm(&g);
        let gc = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        report.max_grad_norm = report.max_grad_norm.max(gn);
        report.max_grad_coord = report.max_grad_coord.max(gc);
        let mut bad = gn > c.grad_norm_bound * (1.0 + 1e-9) || gc > c.grad_coord_bound * (1.0 + 1e-9);
        if bad {
            report.grad_bound_ok = false;
        }
        let mut xp = x.clone();
        for i in 0..d {
            xp[i] = x[i] + fd_step;
            let fp = objective.value(&xp);
            xp[i] = x[i] - fd_step;
            let fm = objective.value(&xp);
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * fd_step);
            let err = (fd - g[i]).abs();
            report.max_fd_error = report.max_fd_error.max(err);
            if err > 1e-6 * g[i].abs().max(1.0) {
                report.finite_difference_ok = false;
                bad = true;
            }
        }
        if bad {
            report.gradient_witness.get_or_insert(x);
        }
    }
    report.passed = report.smoothness_ok && report.grad_bound_ok && report.finite_difference_ok;
    report
}

/// Trajectory pair used to compare optimizers step by step.
pub fn trajectories(
    objective: &dyn Objective,
    algorithms: [&Algorithm; 2],
    x1: &[f64],
    steps: u64,
) -> Result<[Vec<Vec<f64>>; 2], OptimError> {
    let run = |a: &Algorithm| -> Result<Vec<Vec<f64>>, OptimError> {
        let mut o = Oracle::new(objective, OracleKind::Exact, 0);
        let r = optimize(
            objective,
            &mut o,
            a,
            x1,
            &RunOptions {
                max_iterates: steps,
                stop_eps: None,
                keep_trajectory: true,
                record_every: steps.max(1),
            },
        )?;
        Ok(r.trajectory.unwrap_or_default())
    };
    Ok([run(algorithms[0])?, run(algorithms[1])?])
}
