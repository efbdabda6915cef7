//! Step-size/horizon calculator for `X_{t+1} ≤ (1 − η'b + η'²c₁)X_t + η'²c₂`,
//! and a Monte Carlo check of the Azuma tail bound for bounded-increment super-martingales.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binomial_stderr, TronError};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecursionCase {
    /// `c₂ = 0`.
    NoOffset,
    /// `0 < c₂ < c₁`.
    WithOffset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionPlan {
    pub case: RecursionCase,
    /// `η'`.
    pub step: f64,
    /// `1 − η'b + η'²c₁`.
    pub factor: f64,
    /// `η'²c₂`.
    pub offset: f64,
    /// First index `T` with `X_T ≤ ε'²` when `X_1 = C`.
    pub horizon: u64,
}

fn ceil_horizon(x: f64) -> Result<u64, TronError> {
    if !x.is_finite() || x > 1e15 {
        return Err(TronError::Precondition(format!("horizon {x} is not representable")));
    }
    Ok(x.ceil().max(1.0) as u64)
}

/// `c` is `X_1`, `eps` is `ε'`.
pub fn recursion_horizon(
    c: f64,
    b: f64,
    c1: f64,
    c2: f64,
    eps: f64,
) -> Result<RecursionPlan, TronError> {
    if !(c >= 0.0 && b > 0.0 && c1 > 0.0 && c2 >= 0.0 && eps > 0.0) || !c.is_finite() {
        return Err(TronError::Invalid(
            "need C >= 0, b > 0, c1 > 0, c2 >= 0, eps > 0".into(),
        ));
    }
    let e2 = eps * eps;
    if c2 == 0.0 {
        if !(c1 > b * b / 4.0) {
            return Err(TronError::Precondition(format!(
                "c1 = {c1} must exceed b²/4 = {}",
                b * b / 4.0
            )));
        }
        let step = b / (2.0 * c1);
        let factor = 1.0 - b * b / (4.0 * c1);
        let horizon = if c <= e2 * (1.0 + 1e-12) {
            1
        } else if factor == 0.0 {
            2
        } else {
            ceil_horizon(1.0 + (c / e2).ln() / (1.0 / factor).ln())?
        };
        return Ok(RecursionPlan {
            case: RecursionCase::NoOffset,
            step,
            factor,
            offset: 0.0,
            horizon,
        });
    }
    if c2 >= c1 {
        return Err(TronError::Precondition(format!(
            "c2 = {c2} must be below c1 = {c1}"
        )));
    }
    if e2 > c * (1.0 + 1e-12) {
        return Err(TronError::Precondition(format!("ε'² = {e2} exceeds C = {c}")));
    }
    let cap = (eps.sqrt() + 1.0 / eps.sqrt()).powi(2);
    if b * b / c1 > cap {
        return Err(TronError::Precondition(format!(
            "b²/c1 = {} exceeds (√ε' + 1/√ε')² = {cap}",
            b * b / c1
        )));
    }
    let s = e2 / (1.0 + e2);
    let step = b / c1 * s;
    let factor = 1.0 - b * b / c1 * e2 / (1.0 + e2).powi(2);
    let offset = step * step * c2;
    let ratio = e2 * (c1 - c2) / (c * c1 - c2 * e2);
    let horizon = if ratio >= 1.0 - 1e-12 {
        1
    } else if factor <= 0.0 {
        2
    } else {
        ceil_horizon(1.0 + ratio.ln() / factor.ln())?
    };
    Ok(RecursionPlan {
        case: RecursionCase::WithOffset,
        step,
        factor,
        offset,
        horizon,
    })
}

/// `X_1 = c, …, X_T` under the equality recursion.
pub fn simulate_recursion(plan: &RecursionPlan, c: f64) -> Vec<f64> {
    let mut xs = Vec::with_capacity(plan.horizon as usize);
    let mut x = c;
    xs.push(x);
    for _ in 1..plan.horizon {
        x = plan.factor * x + plan.offset;
        xs.push(x);
    }
    xs
}

/// A process whose increments are meant to have non-positive conditional mean.
pub trait IncrementProcess: Sync {
    /// Increment at `step` (0-based) given the path so far.
    fn increment(&self, step: usize, path: &[f64], rng: &mut ChaCha8Rng) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessFamily {
    /// `±1` with equal probability.
    FairCoin,
    /// `+1` with probability `up < 1/2`, else `−1`.
    DriftedWalk { up: f64 },
    /// Uniform on `[−half_width, half_width]`.
    UniformIncrement { half_width: f64 },
    /// `−step` every time.
    Deterministic { step: f64 },
}

impl ProcessFamily {
    /// Largest possible `|ΔX|`.
    pub fn increment_bound(&self) -> f64 {
        match *self {
            ProcessFamily::FairCoin | ProcessFamily::DriftedWalk { .. } => 1.0,
            ProcessFamily::UniformIncrement { half_width } => half_width,
            ProcessFamily::Deterministic { step } => step.abs(),
        }
    }
}

impl IncrementProcess for ProcessFamily {
    fn increment(&self, _step: usize, _path: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ProcessFamily::FairCoin => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            ProcessFamily::DriftedWalk { up } => {
                if rng.gen_bool(up) {
                    1.0
                } else {
                    -1.0
                }
            }
            ProcessFamily::UniformIncrement { half_width } => {
                rng.gen_range(-half_width..=half_width)
            }
            ProcessFamily::Deterministic { step } => -step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzumaReport {
    pub steps: usize,
    pub trials: usize,
    pub lambda: f64,
    pub sum_sq_bounds: f64,
    /// `exp(−λ² / (2Σc_i²))`.
    pub bound: f64,
    /// Fraction of trials with `X_n − X_0 ≥ λ`.
    pub empirical: f64,
    pub stderr: f64,
    pub passed: bool,
}

/// `bounds[i]` caps `|X_{i+1} − X_i|`; any path breaking a cap aborts with the first witness.
pub fn azuma_check(
    process: &dyn IncrementProcess,
    bounds: &[f64],
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<AzumaReport, TronError> {
    if bounds.is_empty() || trials == 0 || !(lambda > 0.0) {
        return Err(TronError::Invalid("need steps, trials and lambda > 0".into()));
    }
    if bounds.iter().any(|c| !(*c >= 0.0)) {
        return Err(TronError::Invalid("increment bounds must be >= 0".into()));
    }
    let outcomes: Vec<Result<bool, TronError>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeded(seed, trial as u64);
            let mut path = Vec::with_capacity(bounds.len() + 1);
            path.push(0.0);
            let mut x = 0.0;
            for (step, &c) in bounds.iter().enumerate() {
                let dx = process.increment(step, &path, &mut rng);
                if !(dx.abs() <= c * (1.0 + 1e-12)) {
                    return Err(TronError::IncrementBound {
                        trial,
                        step,
                        increment: dx,
                        bound: c,
                    });
                }
                x += dx;
                path.push(x);
            }
            Ok(x >= lambda)
        })
        .collect();
    let mut hits = 0usize;
    for o in outcomes {
        hits += o? as usize;
    }
    let sum_sq: f64 = bounds.iter().map(|c| c * c).sum();
    let bound = if sum_sq == 0.0 {
        0.0
    } else {
        (-lambda * lambda / (2.0 * sum_sq)).exp()
    };
    let empirical = hits as f64 / trials as f64;
    let stderr = binomial_stderr(bound.min(1.0), trials).max(binomial_stderr(empirical, trials));
    Ok(AzumaReport {
        steps: bounds.len(),
        trials,
        lambda,
        sum_sq_bounds: sum_sq,
        bound,
        empirical,
        stderr,
        passed: empirical <= bound + 3.0 * stderr,
    })
}
