//! GLM-Tron: `w₁ = 0`, `w ← w + (1/S)Σ(y_i − σ⟨w,x_i⟩)x_i`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Gate, LabelNoise, ReluGateProblem, TronError, TronRun, RESIDUAL_TOL};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmTronReport {
    pub run: TronRun,
    /// Number of updates performed.
    pub steps: u64,
    pub eps: f64,
    /// Inputs were divided by this so that `max ‖x‖ ≤ 1`; the target became `scale·w*`.
    pub scale: f64,
    pub lipschitz: f64,
    pub theta: f64,
    /// `‖w*‖` after rescaling.
    pub w_norm: f64,
    /// `(L/(2−L))(ε + θ² + 2θW(L+1))`.
    pub bound: f64,
    /// `L̃_S` after the last update.
    pub final_risk: f64,
    pub min_risk: f64,
    /// `(1/S)Σ(σ⟨w,x_i⟩ − y_i)²` after the last update.
    pub final_true_risk: f64,
    /// `(1/S)Σξ_i²` for the drawn labels.
    pub noise_energy: f64,
    pub residual_violations: usize,
    pub passed: bool,
}

/// `⌈‖w*‖/ε⌉`, at least one.
pub fn glm_tron_horizon(w_norm: f64, eps: f64) -> Result<u64, TronError> {
    if !(eps > 0.0) || !(w_norm >= 0.0) {
        return Err(TronError::Invalid("need eps > 0 and a finite ‖w*‖".into()));
    }
    let t = (w_norm / eps).ceil();
    if t > 1e12 {
        return Err(TronError::Invalid("horizon too large".into()));
    }
    Ok((t as u64).max(1))
}

fn risk(gate: &dyn Gate, w: &DVector<f64>, xs: &[DVector<f64>], targets: &[f64]) -> f64 {
    xs.iter()
        .zip(targets)
        .map(|(x, t)| (gate.eval(w.dot(x)) - t).powi(2))
        .sum::<f64>()
        / xs.len() as f64
}

fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Draws `samples` points with `seed`, then runs `steps` updates (`⌈‖w*‖/ε⌉` when `None`).
pub fn glm_tron(
    problem: &ReluGateProblem,
    samples: usize,
    eps: f64,
    steps: Option<u64>,
    seed: u64,
) -> Result<GlmTronReport, TronError> {
    problem.validate()?;
    if samples == 0 {
        return Err(TronError::Invalid("need at least one sample".into()));
    }
    let gate = &problem.activation;
    let l = gate.lipschitz();
    if !(l > 0.0 && l < 2.0) {
        return Err(TronError::Precondition(format!(
            "Lipschitz constant {l} must lie in (0, 2)"
        )));
    }
    let mut rng = seeded(seed, 0);
    let mut xs = problem.draw(samples, &mut rng);
    let radius = xs.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let scale = if radius > 1.0 { radius } else { 1.0 };
    if scale > 1.0 {
        for x in &mut xs {
            *x /= scale;
        }
    }
    let w_star = problem.w_star() * scale;
    let clean: Vec<f64> = xs.iter().map(|x| gate.eval(w_star.dot(x))).collect();
    let theta = problem.noise.theta();
    let fixed_noise: Vec<f64> = match problem.noise {
        LabelNoise::Centered { theta } if theta > 0.0 => {
            (0..samples).map(|_| rng.gen_range(-theta..=theta)).collect()
        }
        _ => vec![0.0; samples],
    };
    let w_norm = w_star.norm();
    let steps = match steps {
        Some(s) => s,
        None => glm_tron_horizon(w_norm, eps)?,
    };
    let n = w_star.len();
    let mut w = DVector::zeros(n);
    let mut run = TronRun {
        seed: Some(seed),
        ..Default::default()
    };
    let mut noise = fixed_noise.clone();
    let mut violations = 0;
    for _ in 0..steps {
        if let LabelNoise::BoundedAdversarial { theta } = problem.noise {
            for (i, x) in xs.iter().enumerate() {
                noise[i] = theta * sign(gate.eval(w.dot(x)) - clean[i]);
            }
        }
        let ys: Vec<f64> = clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
        let delta = (&w - &w_star).norm_squared();
        let lt = risk(gate, &w, &xs, &clean);
        run.distances.push(delta.sqrt());
        run.risks.push(lt);

        let mut label_push = DVector::zeros(n);
        let mut g = DVector::zeros(n);
        for (i, x) in xs.iter().enumerate() {
            g.axpy(ys[i] - gate.eval(w.dot(x)), x, 1.0);
            label_push.axpy(ys[i] - clean[i], x, 1.0);
        }
        g /= samples as f64;
        let eta_t = label_push.norm() / samples as f64;
        let big_w = w_norm.max(delta.sqrt());
        w += g;

        let rhs = delta - (2.0 / l - 1.0) * lt + eta_t * eta_t + 2.0 * eta_t * big_w * (l + 1.0);
        let resid = rhs - (&w - &w_star).norm_squared();
        if resid < -RESIDUAL_TOL {
            violations += 1;
        }
        run.residuals.push(resid);
    }
    let final_risk = risk(gate, &w, &xs, &clean);
    run.distances.push((&w - &w_star).norm());
    run.risks.push(final_risk);
    let final_labels: Vec<f64> = match problem.noise {
        LabelNoise::BoundedAdversarial { theta } => xs
            .iter()
            .zip(&clean)
            .map(|(x, c)| c + theta * sign(gate.eval(w.dot(x)) - c))
            .collect(),
        _ => clean.iter().zip(&fixed_noise).map(|(c, e)| c + e).collect(),
    };
    let final_true_risk = risk(gate, &w, &xs, &final_labels);
    let noise_energy = final_labels
        .iter()
        .zip(&clean)
        .map(|(y, c)| (y - c).powi(2))
        .sum::<f64>()
        / samples as f64;
    run.final_w = w.as_slice().to_vec();
    let bound = l / (2.0 - l) * (eps + theta * theta + 2.0 * theta * w_norm * (l + 1.0));
    let min_risk = run.risks.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GlmTronReport {
        run,
        steps,
        eps,
        scale,
        lipschitz: l,
        theta,
        w_norm,
        bound,
        final_risk,
        min_risk,
        final_true_risk,
        noise_energy,
        residual_violations: violations,
        passed: violations == 0 && final_risk <= bound,
    })
}
