//! Modified SGD for a ReLU gate: `w ← w − η·α·1{y>0}(y − ⟨w,x⟩)x` with `α < 0`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::utility::{recursion_horizon, RecursionCase};
use super::{ReluGateProblem, TronError, TronRun};
use crate::rng::seeded;

/// `λ_min(E[1{⟨w*,x⟩>0} xxᵀ])` and `E[1{⟨w*,x⟩>0} ‖x‖⁴]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedMoments {
    pub lambda_min: f64,
    pub fourth_moment: f64,
    /// Batch-means standard errors; zero when computed exactly.
    pub lambda_stderr: f64,
    pub fourth_stderr: f64,
    pub samples: usize,
    pub exact: bool,
}

fn lambda_min(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact for finitely supported samplers, Monte Carlo (`samples` draws) otherwise.
pub fn masked_moments(
    problem: &ReluGateProblem,
    samples: usize,
    seed: u64,
) -> Result<MaskedMoments, TronError> {
    problem.validate()?;
    let w_star = problem.w_star();
    let n = w_star.len();
    if let Some(atoms) = problem.sampler.atoms() {
        let mut cov = DMatrix::zeros(n, n);
        let mut fourth = 0.0;
        for (p, x) in &atoms {
            if w_star.dot(x) > 0.0 {
                cov += *p * x * x.transpose();
                fourth += p * x.norm_squared().powi(2);
            }
        }
        return Ok(MaskedMoments {
            lambda_min: lambda_min(&cov),
            fourth_moment: fourth,
            lambda_stderr: 0.0,
            fourth_stderr: 0.0,
            samples: atoms.len(),
            exact: true,
        });
    }
    if samples < 40 {
        return Err(TronError::Invalid("need at least 40 Monte Carlo samples".into()));
    }
    let batches = 20;
    let per = samples / batches;
    let mut rng = seeded(seed, 101);
    let mut total = DMatrix::zeros(n, n);
    let mut batch_lambda = Vec::with_capacity(batches);
    let mut fourth = Vec::with_capacity(per * batches);
    for _ in 0..batches {
        let mut cov = DMatrix::zeros(n, n);
        for _ in 0..per {
            let x = problem.sampler.sample(&mut rng);
            if w_star.dot(&x) > 0.0 {
                cov += &x * x.transpose();
                fourth.push(x.norm_squared().powi(2));
            } else {
                fourth.push(0.0);
            }
        }
        cov /= per as f64;
        batch_lambda.push(lambda_min(&cov));
        total += cov;
    }
    total /= batches as f64;
    let (_, lambda_stderr) = mean_and_stderr(&batch_lambda);
    let (fourth_moment, fourth_stderr) = mean_and_stderr(&fourth);
    Ok(MaskedMoments {
        lambda_min: lambda_min(&total),
        fourth_moment,
        lambda_stderr,
        fourth_stderr,
        samples: per * batches,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SgdStep {
    Fixed { eta: f64 },
    /// `η = λ_min / (|α|·E[1‖x‖⁴])`.
    Theorem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdRun {
    pub run: TronRun,
    pub eta: f64,
    pub alpha: f64,
    pub moments: Option<MaskedMoments>,
    /// `b = 2λ_min`, `c₁ = E[1‖x‖⁴]`.
    pub b: Option<f64>,
    pub c1: Option<f64>,
    /// `1 − η'b + η'²c₁` with `η' = η|α|`.
    pub factor: Option<f64>,
    /// Steps after which `E‖w_T − w*‖² ≤ ε'²` by the recursion estimate.
    pub horizon: Option<u64>,
}

fn check_alpha(alpha: f64) -> Result<(), TronError> {
    if !(alpha < 0.0) {
        return Err(TronError::Invalid("the internal constant alpha must be negative".into()));
    }
    Ok(())
}

fn run_sgd(
    problem: &ReluGateProblem,
    eta: f64,
    alpha: f64,
    steps: u64,
    w1: &DVector<f64>,
    seed: u64,
    keep_trajectory: bool,
) -> TronRun {
    let w_star = problem.w_star();
    let mut rng = seeded(seed, 0);
    let mut w = w1.clone();
    let mut run = TronRun {
        seed: Some(seed),
        trajectory: keep_trajectory.then(Vec::new),
        ..Default::default()
    };
    for _ in 0..steps {
        run.distances.push((&w - &w_star).norm());
        if let Some(tr) = run.trajectory.as_mut() {
            tr.push(w.as_slice().to_vec());
        }
        let x = problem.sampler.sample(&mut rng);
        let y = w_star.dot(&x).max(0.0);
        if y > 0.0 {
            let coef = alpha * (y - w.dot(&x));
            w.axpy(-eta * coef, &x, 1.0);
        }
    }
    run.distances.push((&w - &w_star).norm());
    run.final_w = w.as_slice().to_vec();
    run
}

/// Runs `steps` updates from `w1`. `target` (an `ε'`) sets the reported horizon in theorem mode.
#[allow(clippy::too_many_arguments)]
pub fn modified_sgd(
    problem: &ReluGateProblem,
    step: SgdStep,
    steps: u64,
    w1: &[f64],
    alpha: f64,
    mc_samples: usize,
    target: Option<f64>,
    seed: u64,
) -> Result<SgdRun, TronError> {
    problem.validate()?;
    check_alpha(alpha)?;
    if w1.len() != problem.w_star.len() {
        return Err(TronError::Invalid("w1 has the wrong dimension".into()));
    }
    let w1 = DVector::from_column_slice(w1);
    let (eta, moments) = match step {
        SgdStep::Fixed { eta } => {
            if !(eta > 0.0) {
                return Err(TronError::Invalid("eta must be positive".into()));
            }
            (eta, None)
        }
        SgdStep::Theorem => {
            let m = masked_moments(problem, mc_samples, seed)?;
            if !(m.lambda_min > 0.0) {
                return Err(TronError::Precondition(format!(
                    "masked covariance is not positive definite (λ_min = {:e})",
                    m.lambda_min
                )));
            }
            (m.lambda_min / (alpha.abs() * m.fourth_moment), Some(m))
        }
    };
    let (b, c1, factor, horizon) = match &moments {
        Some(m) => {
            let b = 2.0 * m.lambda_min;
            let c1 = m.fourth_moment;
            let e = eta * alpha.abs();
            let c0 = (&w1 - problem.w_star()).norm_squared();
            let horizon = match target {
                Some(eps) if c0 <= eps * eps => Some(1),
                // c₁ = b²/4 only for degenerate samplers; one update then lands on w*
                Some(_) if c1 <= b * b / 4.0 * (1.0 + 1e-12) => Some(2),
                Some(eps) => {
                    let plan = recursion_horizon(c0, b, c1, 0.0, eps)?;
                    debug_assert_eq!(plan.case, RecursionCase::NoOffset);
                    Some(plan.horizon)
                }
                None => None,
            };
            (Some(b), Some(c1), Some(1.0 - e * b + e * e * c1), horizon)
        }
        None => (None, None, None, None),
    };
    let run = run_sgd(problem, eta, alpha, steps, &w1, seed, false);
    Ok(SgdRun {
        run,
        eta,
        alpha,
        moments,
        b,
        c1,
        factor,
        horizon,
    })
}

/// Measured per-step contraction of `E‖w_t − w*‖²` against `1 − η'b + η'²c₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub eta: f64,
    pub factor: f64,
    pub moments: MaskedMoments,
    /// Mean of `‖w_{t+1}−w*‖²/‖w_t−w*‖²` over steps and seeds.
    pub mean_ratio: f64,
    pub stderr: f64,
    pub ratios: usize,
    /// `exp` of the slope of `log E‖w_t−w*‖²` against `t`.
    pub regression_rate: Option<f64>,
    /// Seed-mean of `‖w_t − w*‖²`.
    pub mean_sq_distance: Vec<f64>,
    pub seeds: usize,
    pub passed: bool,
}

/// Theorem-mode step on every seed; ratios are taken while `‖w_t−w*‖² > floor·‖w_1−w*‖²`.
pub fn measure_contraction(
    problem: &ReluGateProblem,
    steps: u64,
    w1: &[f64],
    alpha: f64,
    mc_samples: usize,
    seeds: &[u64],
) -> Result<ContractionReport, TronError> {
    problem.validate()?;
    check_alpha(alpha)?;
    if seeds.is_empty() || steps == 0 {
        return Err(TronError::Invalid("need seeds and steps".into()));
    }
    let moments = masked_moments(problem, mc_samples, seeds[0])?;
    if !(moments.lambda_min > 0.0) {
        return Err(TronError::Precondition("masked covariance is not positive definite".into()));
    }
    let eta = moments.lambda_min / (alpha.abs() * moments.fourth_moment);
    let e = eta * alpha.abs();
    let factor = 1.0 - e * 2.0 * moments.lambda_min + e * e * moments.fourth_moment;
    let w1v = DVector::from_column_slice(w1);
    let runs: Vec<TronRun> = seeds
        .par_iter()
        .map(|&s| run_sgd(problem, eta, alpha, steps, &w1v, s, false))
        .collect();
    let floor = 1e-20;
    let mut ratios = Vec::new();
    let len = steps as usize + 1;
    let mut mean_sq = vec![0.0; len];
    for r in &runs {
        let d0 = r.distances[0].powi(2);
        for t in 0..len {
            mean_sq[t] += r.distances[t].powi(2) / runs.len() as f64;
        }
        for t in 0..len - 1 {
            let (a, b) = (r.distances[t].powi(2), r.distances[t + 1].powi(2));
            if a <= floor * d0 || a == 0.0 {
                break;
            }
            ratios.push(b / a);
        }
    }
    let (mean_ratio, stderr) = mean_and_stderr(&ratios);
    let pts: Vec<(f64, f64)> = mean_sq
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v > floor * mean_sq[0] && v > 0.0)
        .map(|(t, &v)| (t as f64, v.ln()))
        .collect();
    let regression_rate = (pts.len() >= 3).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (num / den).exp()
    });
    let passed = !ratios.is_empty() && mean_ratio <= factor + 3.0 * stderr;
    Ok(ContractionReport {
        eta,
        factor,
        moments,
        mean_ratio,
        stderr,
        ratios: ratios.len(),
        regression_rate,
        mean_sq_distance: mean_sq,
        seeds: seeds.len(),
        passed,
    })
}
