//! Noise-assisted gradient dynamics on a ReLU gate and its confinement probability.
//!
//! `w ← w − η(g + ξ₁) + √η·ξ₂` with `g = −(1/S)Σ 1{⟨w,x⟩≥0}(y − relu⟨w,x⟩)x`,
//! `ξ₁` uniform in the cube of half-side `S₁/√n` and `ξ₂ ~ N(0, σ₂²I)`.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{binomial_stderr, LabelNoise, ReluGateProblem, TronError, TronRun};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyGdConfig {
    /// Sample size `S`.
    pub samples: usize,
    pub eta: f64,
    /// Norm bound `S₁` of `ξ₁`.
    pub s1: f64,
    /// Clip radius `C_L` of the coupled process.
    pub clip: f64,
    /// Per-coordinate standard deviation of `ξ₂`.
    pub sigma2: f64,
    pub i_max: usize,
    pub lambda: f64,
    /// Confinement radius; the smallest admissible one when absent.
    #[serde(default)]
    pub r_star: Option<f64>,
    /// Start point; zero when absent.
    #[serde(default)]
    pub w0: Option<Vec<f64>>,
    pub data_seed: u64,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyGdReport {
    /// `max ‖x_i‖`.
    pub data_radius: f64,
    pub r_star: f64,
    pub r_star_min: f64,
    /// Increment cap of the compensated coupled process.
    pub k: f64,
    /// `P[‖ξ₂‖ > C_L]`.
    pub p_clip: f64,
    /// `i_max(p_clip + exp(−λ²/(2 i_max k)))`.
    pub bound: f64,
    /// Same with `k²` in the exponent.
    pub bound_k_squared: f64,
    pub vacuous: bool,
    pub escapes: usize,
    pub seeds: usize,
    pub frequency: f64,
    pub stderr: f64,
    /// Largest `|Δy_t| / k` seen on the coupled process.
    pub max_increment_ratio: f64,
    /// Smallest `⟨w_t − w*, g_t⟩`.
    pub min_correlation: f64,
    pub correlation_violations: usize,
    pub passed: bool,
    /// Distances and correlations of the first seed.
    pub trace: TronRun,
}

struct Setup {
    xs: Vec<DVector<f64>>,
    ys: Vec<f64>,
    w_star: DVector<f64>,
    w0: DVector<f64>,
    radius: f64,
    r: f64,
    k: f64,
    drift: f64,
}

fn subgradient(w: &DVector<f64>, xs: &[DVector<f64>], ys: &[f64]) -> DVector<f64> {
    let mut g = DVector::zeros(w.len());
    for (x, &y) in xs.iter().zip(ys) {
        let z = w.dot(x);
        if z >= 0.0 {
            g.axpy(-(y - z.max(0.0)), x, 1.0);
        }
    }
    g / xs.len() as f64
}

struct Outcome {
    escaped: bool,
    max_ratio: f64,
    min_corr: f64,
    corr_violations: usize,
    run: TronRun,
}

fn one_seed(s: &Setup, cfg: &NoisyGdConfig, seed: u64, trial: usize) -> Result<Outcome, TronError> {
    let n = s.w_star.len();
    let mut rng: ChaCha8Rng = seeded(seed, 0);
    let half = cfg.s1 / (n as f64).sqrt();
    let sq_eta = cfg.eta.sqrt();
    let mut w = s.w0.clone();
    let mut wc = s.w0.clone();
    let mut stopped = (&wc - &s.w_star).norm() > s.r;
    let mut y_prev = (&wc - &s.w_star).norm_squared();
    let mut out = Outcome {
        escaped: (&w - &s.w_star).norm() > s.r,
        max_ratio: 0.0,
        min_corr: f64::INFINITY,
        corr_violations: 0,
        run: TronRun {
            seed: Some(seed),
            ..Default::default()
        },
    };
    out.run.distances.push((&w - &s.w_star).norm());
    for t in 1..=cfg.i_max {
        let xi1 = DVector::from_iterator(
            n,
            (0..n).map(|_| if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 }),
        );
        let xi2 = DVector::from_iterator(
            n,
            (0..n).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                cfg.sigma2 * z
            }),
        );
        let g = subgradient(&w, &s.xs, &s.ys);
        let corr = (&w - &s.w_star).dot(&g);
        out.min_corr = out.min_corr.min(corr);
        if corr < -super::RESIDUAL_TOL {
            out.corr_violations += 1;
        }
        out.run.residuals.push(corr);
        w = &w - cfg.eta * (&g + &xi1) + sq_eta * &xi2;
        out.run.distances.push((&w - &s.w_star).norm());
        if (&w - &s.w_star).norm() > s.r {
            out.escaped = true;
        }

        if !stopped {
            let gc = subgradient(&wc, &s.xs, &s.ys);
            let norm2 = xi2.norm();
            let clipped = if norm2 > cfg.clip {
                &xi2 * (cfg.clip / norm2)
            } else {
                xi2.clone()
            };
            wc = &wc - cfg.eta * (&gc + &xi1) + sq_eta * &clipped;
            if (&wc - &s.w_star).norm() > s.r {
                stopped = true;
            }
        }
        let y = (&wc - &s.w_star).norm_squared() - t as f64 * s.drift;
        let prev = y_prev - (t - 1) as f64 * s.drift;
        let dy = (y - prev).abs();
        y_prev = (&wc - &s.w_star).norm_squared();
        out.max_ratio = out.max_ratio.max(dy / s.k);
        if dy > s.k * (1.0 + 1e-9) + 1e-12 {
            return Err(TronError::IncrementBound {
                trial,
                step: t,
                increment: dy,
                bound: s.k,
            });
        }
    }
    out.run.final_w = w.as_slice().to_vec();
    Ok(out)
}

pub fn noisy_gd(problem: &ReluGateProblem, cfg: &NoisyGdConfig) -> Result<NoisyGdReport, TronError> {
    problem.validate()?;
    if problem.noise != LabelNoise::None {
        return Err(TronError::Invalid("noisy gradient dynamics takes realizable labels".into()));
    }
    let n = problem.w_star.len();
    let d = n as f64;
    if cfg.samples == 0 || cfg.i_max == 0 || cfg.seeds.is_empty() {
        return Err(TronError::Invalid("need samples, i_max and seeds".into()));
    }
    if !(cfg.eta > 0.0 && cfg.s1 >= 0.0 && cfg.sigma2 >= 0.0) {
        return Err(TronError::Invalid("need eta > 0, S1 >= 0, sigma2 >= 0".into()));
    }
    let mut violated = Vec::new();
    if !(cfg.clip > 0.0 && cfg.clip < d.sqrt()) {
        violated.push(format!("0 < C_L < √n fails: C_L = {}, √n = {}", cfg.clip, d.sqrt()));
    }
    if !(cfg.lambda > 0.0) {
        violated.push(format!("λ > 0 fails: λ = {}", cfg.lambda));
    }
    if cfg.sigma2 > 1.0 {
        violated.push(format!("σ₂ <= 1 fails: σ₂ = {}", cfg.sigma2));
    }

    let mut rng = seeded(cfg.data_seed, 7);
    let xs = problem.draw(cfg.samples, &mut rng);
    let w_star = problem.w_star();
    let ys: Vec<f64> = xs.iter().map(|x| w_star.dot(x).max(0.0)).collect();
    let radius = xs.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let c4 = radius.powi(4);
    let i_max = cfg.i_max as f64;
    let denom = 1.0 - 2.0 * i_max * cfg.eta * cfg.eta * c4;
    if !(denom > 0.0) {
        violated.push(format!(
            "η < 1/(C²√(2 i_max)) fails: η = {}, limit = {}",
            cfg.eta,
            1.0 / (radius * radius * (2.0 * i_max).sqrt())
        ));
    }
    let w0 = match &cfg.w0 {
        Some(v) if v.len() != n => return Err(TronError::Invalid("w0 has the wrong dimension".into())),
        Some(v) => DVector::from_column_slice(v),
        None => DVector::zeros(n),
    };
    if !violated.is_empty() {
        return Err(TronError::Precondition(violated.join("; ")));
    }
    let r_min_sq = (cfg.lambda
        + (&w0 - &w_star).norm_squared()
        + i_max * (2.0 * cfg.eta * cfg.eta * cfg.s1 * cfg.s1 + cfg.eta * d))
        / denom;
    let r_star_min = r_min_sq.sqrt();
    let r = match cfg.r_star {
        Some(r) if r * r < r_min_sq * (1.0 - 1e-12) => {
            return Err(TronError::Precondition(format!(
                "r*² >= (λ + ‖w₀−w*‖² + i_max(2η²S₁² + ηd)) / (1 − 2 i_max η²C⁴) fails: r* = {r}, minimum {r_star_min}"
            )))
        }
        Some(r) => r,
        None => r_star_min,
    };
    let (eta, s1, cl) = (cfg.eta, cfg.s1, cfg.clip);
    let c2 = radius * radius;
    let k = 2.0 * eta.sqrt() * cl * (r + eta * (c2 * r + s1))
        + eta * (2.0 * s1 * r + d + 2.0 * c2 * r * r + 2.0 * eta * (c4 * r * r + s1 * s1));
    let drift = 2.0 * eta * eta * (c4 * r * r + s1 * s1) + eta * d;
    let p_clip = if cfg.sigma2 == 0.0 {
        0.0
    } else {
        let chi = ChiSquared::new(d).map_err(|e| TronError::Invalid(e.to_string()))?;
        1.0 - chi.cdf(cl * cl / (cfg.sigma2 * cfg.sigma2))
    };
    let lam2 = cfg.lambda * cfg.lambda;
    let bound = i_max * (p_clip + (-lam2 / (2.0 * i_max * k)).exp());
    let bound_k_squared = i_max * (p_clip + (-lam2 / (2.0 * i_max * k * k)).exp());

    let setup = Setup {
        xs,
        ys,
        w_star,
        w0,
        radius,
        r,
        k,
        drift,
    };
    let outcomes: Vec<Result<Outcome, TronError>> = cfg
        .seeds
        .par_iter()
        .enumerate()
        .map(|(trial, &seed)| one_seed(&setup, cfg, seed, trial))
        .collect();
    let mut escapes = 0;
    let mut max_ratio: f64 = 0.0;
    let mut min_corr = f64::INFINITY;
    let mut corr_violations = 0;
    let mut trace = None;
    for o in outcomes {
        let o = o?;
        escapes += o.escaped as usize;
        max_ratio = max_ratio.max(o.max_ratio);
        min_corr = min_corr.min(o.min_corr);
        corr_violations += o.corr_violations;
        if trace.is_none() {
            trace = Some(o.run);
        }
    }
    let seeds = cfg.seeds.len();
    let frequency = escapes as f64 / seeds as f64;
    let vacuous = bound >= 1.0;
    let stderr = binomial_stderr(bound.min(1.0), seeds).max(binomial_stderr(frequency, seeds));
    let passed = corr_violations == 0 && (vacuous || frequency <= bound + 3.0 * stderr);
    Ok(NoisyGdReport {
        data_radius: setup.radius,
        r_star: r,
        r_star_min,
        k,
        p_clip,
        bound,
        bound_k_squared,
        vacuous,
        escapes,
        seeds,
        frequency,
        stderr,
        max_increment_ratio: max_ratio,
        min_correlation: min_corr,
        correlation_violations: corr_violations,
        passed,
        trace: trace.unwrap_or_default(),
    })
}
