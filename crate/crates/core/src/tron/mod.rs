//! Provable trainers for a single ReLU gate and a depth-2 leaky-ReLU net,
//! with per-step lemma residuals and concentration utilities.

mod glm;
mod neuro;
mod noisy;
mod sgd;
mod utility;

pub use glm::{glm_tron, glm_tron_horizon, GlmTronReport};
pub use neuro::{
    symmetric_identity_gap, neuro_tron, random_arch, NeuroTronArch, NeuroTronConstants, NeuroTronMode,
    NeuroTronReport,
};
pub use noisy::{noisy_gd, NoisyGdConfig, NoisyGdReport};
pub use sgd::{
    masked_moments, measure_contraction, modified_sgd, ContractionReport, MaskedMoments, SgdRun,
    SgdStep,
};
pub use utility::{
    azuma_check, recursion_horizon, simulate_recursion, AzumaReport, IncrementProcess,
    ProcessFamily, RecursionCase, RecursionPlan,
};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TronError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("precondition fails: {0}")]
    Precondition(String),
    #[error("dataset is not closed under x -> -x")]
    NotSymmetric,
    #[error("increment {increment} exceeds bound {bound} at step {step} of trial {trial}")]
    IncrementBound {
        trial: usize,
        step: usize,
        increment: f64,
        bound: f64,
    },
}

/// A monotone Lipschitz activation.
pub trait Gate: Send + Sync {
    fn eval(&self, z: f64) -> f64;
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// `z` for `z ≥ 0`, `slope·z` otherwise.
    LeakyRelu { slope: f64 },
    /// `lipschitz·tanh(z)`.
    ScaledTanh { lipschitz: f64 },
}

impl Gate for Activation {
    fn eval(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z >= 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::ScaledTanh { lipschitz } => lipschitz * z.tanh(),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            Activation::Relu => 1.0,
            Activation::LeakyRelu { slope } => slope.max(1.0),
            Activation::ScaledTanh { lipschitz } => lipschitz,
        }
    }
}

/// Distribution of inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    PointMass { point: Vec<f64> },
    /// Equal-weight mixture of isotropic Gaussians.
    GaussianMixture { means: Vec<Vec<f64>>, std: f64 },
    UniformBox { dim: usize, lo: f64, hi: f64 },
    /// Uniform over a finite set closed under negation.
    ParitySymmetric { points: Vec<Vec<f64>> },
}

impl Sampler {
    pub fn standard_gaussian(dim: usize) -> Self {
        Sampler::GaussianMixture {
            means: vec![vec![0.0; dim]],
            std: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::PointMass { point } => point.len(),
            Sampler::GaussianMixture { means, .. } => means.first().map_or(0, Vec::len),
            Sampler::UniformBox { dim, .. } => *dim,
            Sampler::ParitySymmetric { points } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<(), TronError> {
        let d = self.dim();
        if d == 0 {
            return Err(TronError::Invalid("sampler has dimension 0".into()));
        }
        match self {
            Sampler::GaussianMixture { means, std } => {
                if means.iter().any(|m| m.len() != d) || !(*std > 0.0) {
                    return Err(TronError::Invalid("ragged means or std <= 0".into()));
                }
            }
            Sampler::UniformBox { lo, hi, .. } if !(lo < hi) => {
                return Err(TronError::Invalid("empty box".into()));
            }
            Sampler::ParitySymmetric { points } => {
                if points.iter().any(|p| p.len() != d) {
                    return Err(TronError::Invalid("ragged points".into()));
                }
                let v: Vec<DVector<f64>> =
                    points.iter().map(|p| DVector::from_column_slice(p)).collect();
                if !is_parity_symmetric(&v, 1e-12) {
                    return Err(TronError::NotSymmetric);
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            Sampler::PointMass { point } => DVector::from_column_slice(point),
            Sampler::GaussianMixture { means, std } => {
                let m = &means[rng.gen_range(0..means.len())];
                DVector::from_iterator(
                    m.len(),
                    m.iter().map(|&c| {
                        let z: f64 = StandardNormal.sample(rng);
                        c + std * z
                    }),
                )
            }
            Sampler::UniformBox { dim, lo, hi } => {
                DVector::from_iterator(*dim, (0..*dim).map(|_| rng.gen_range(*lo..*hi)))
            }
            Sampler::ParitySymmetric { points } => {
                DVector::from_column_slice(&points[rng.gen_range(0..points.len())])
            }
        }
    }

    /// Atoms with their probabilities, for finitely supported samplers.
    pub fn atoms(&self) -> Option<Vec<(f64, DVector<f64>)>> {
        match self {
            Sampler::PointMass { point } => Some(vec![(1.0, DVector::from_column_slice(point))]),
            Sampler::ParitySymmetric { points } => {
                let p = 1.0 / points.len() as f64;
                Some(points.iter().map(|x| (p, DVector::from_column_slice(x))).collect())
            }
            _ => None,
        }
    }
}

/// Label corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelNoise {
    None,
    /// `θ·sign(h_t(x) − σ(⟨w*,x⟩))`, refreshed every step.
    BoundedAdversarial { theta: f64 },
    /// Uniform on `[−θ, θ]`, drawn once per dataset.
    Centered { theta: f64 },
}

impl LabelNoise {
    pub fn theta(&self) -> f64 {
        match *self {
            LabelNoise::None => 0.0,
            LabelNoise::BoundedAdversarial { theta } | LabelNoise::Centered { theta } => theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluGateProblem {
    pub w_star: Vec<f64>,
    pub sampler: Sampler,
    pub noise: LabelNoise,
    pub activation: Activation,
}

impl ReluGateProblem {
    pub fn realizable(w_star: Vec<f64>, sampler: Sampler) -> Self {
        Self {
            w_star,
            sampler,
            noise: LabelNoise::None,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<(), TronError> {
        self.sampler.validate()?;
        if self.w_star.len() != self.sampler.dim() {
            return Err(TronError::Invalid(format!(
                "w* has dimension {}, sampler {}",
                self.w_star.len(),
                self.sampler.dim()
            )));
        }
        if !(self.noise.theta() >= 0.0) {
            return Err(TronError::Invalid("noise level must be >= 0".into()));
        }
        Ok(())
    }

    pub fn w_star(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.w_star)
    }

    pub fn draw(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
        (0..count).map(|_| self.sampler.sample(rng)).collect()
    }
}

/// Per-run series shared by the trainers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TronRun {
    /// `‖w_t − w*‖` for `t = 1..=steps+1`.
    pub distances: Vec<f64>,
    /// Effective risk `L̃_S(h_t)` where defined.
    pub risks: Vec<f64>,
    /// Slack of the asserted step inequality at each step (negative means violated).
    pub residuals: Vec<f64>,
    pub trajectory: Option<Vec<Vec<f64>>>,
    pub final_w: Vec<f64>,
    pub seed: Option<u64>,
}

impl TronRun {
    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Residual floor for the per-step lemma checks.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Whether the multiset `points` is closed under negation, up to `tol`.
pub fn is_parity_symmetric(points: &[DVector<f64>], tol: f64) -> bool {
    let mut used = vec![false; points.len()];
    for i in 0..points.len() {
        if used[i] {
            continue;
        }
        let zero = points[i].norm() <= tol;
        if zero {
            used[i] = true;
            continue;
        }
        let partner = (0..points.len())
            .find(|&j| j != i && !used[j] && (&points[i] + &points[j]).norm() <= tol);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// `points` followed by their negations.
pub fn symmetrize(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    points.iter().cloned().chain(points.iter().map(|p| -p)).collect()
}

/// `half` standard Gaussian points in `ℝⁿ` plus their negations.
pub fn symmetric_gaussian(half: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let pts: Vec<DVector<f64>> = (0..half)
        .map(|_| {
            DVector::from_iterator(
                n,
                (0..n).map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                }),
            )
        })
        .collect();
    symmetrize(&pts)
}

/// Standard error of a binomial frequency.
pub(crate) fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
