//! Gradient oracles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Objective, OptimError};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    Laplace,
    /// Gaussian or Laplace with probability ½ each, per draw.
    Mixture,
}

/// Per-coordinate noise with mean `X` and standard deviation `√(β−1)·min(|X|, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub beta: f64,
    pub xi: f64,
    pub family: NoiseFamily,
}

impl NoiseModel {
    pub fn new(beta: f64, xi: f64, family: NoiseFamily) -> Result<Self, OptimError> {
        if !(beta > 1.0) || !(xi >= 0.0) {
            return Err(OptimError::Invalid("need beta > 1 and xi >= 0".into()));
        }
        Ok(Self { beta, xi, family })
    }

    pub fn std_dev(&self, mean: f64) -> f64 {
        (self.beta - 1.0).sqrt() * mean.abs().min(1.0)
    }

    /// Smallest admissible `α = √(βξ + β²σ²)` for coordinate bound `σ`.
    pub fn implied_alpha(&self, sigma: f64) -> f64 {
        (self.beta * self.xi + self.beta * self.beta * sigma * sigma).sqrt()
    }

    pub fn sample(&self, mean: f64, rng: &mut ChaCha8Rng) -> f64 {
        let s = self.std_dev(mean);
        if s == 0.0 {
            return mean;
        }
        let laplace = match self.family {
            NoiseFamily::Gaussian => false,
            NoiseFamily::Laplace => true,
            NoiseFamily::Mixture => rng.gen_bool(0.5),
        };
        if laplace {
            // inverse CDF with scale s/√2
            let b = s / std::f64::consts::SQRT_2;
            let u: f64 = rng.gen_range(-0.5..0.5);
            mean - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        } else {
            Normal::new(mean, s).expect("positive std").sample(rng)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    FiniteSumUniform,
    /// Uniform component pick; all component gradients must share signs.
    SignConstrainedFiniteSum,
    ConstrainedNoise(NoiseModel),
}

pub struct Oracle<'a> {
    objective: &'a dyn Objective,
    kind: OracleKind,
    rng: ChaCha8Rng,
    queries: u64,
}

impl<'a> Oracle<'a> {
    pub fn new(objective: &'a dyn Objective, kind: OracleKind, seed: u64) -> Self {
        Self {
            objective,
            kind,
            rng: seeded(seed, 0),
            queries: 0,
        }
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn query(&mut self, x: &[f64]) -> Result<Vec<f64>, OptimError> {
        self.queries += 1;
        match self.kind {
            OracleKind::Exact => Ok(self.objective.gradient(x)),
            OracleKind::FiniteSumUniform => {
                let p = self.rng.gen_range(0..self.objective.num_components());
                Ok(self.objective.component_gradient(p, x))
            }
            OracleKind::SignConstrainedFiniteSum => {
                let k = self.objective.num_components();
                let grads: Vec<Vec<f64>> = (0..k)
                    .map(|p| self.objective.component_gradient(p, x))
                    .collect();
                let sign = |v: f64| v >= 0.0;
                for i in 0..x.len() {
                    let s0 = sign(grads[0][i]);
                    if grads.iter().any(|g| sign(g[i]) != s0) {
                        return Err(OptimError::SignViolation {
                            coordinate: i,
                            x: x.to_vec(),
                        });
                    }
                }
                let p = self.rng.gen_range(0..k);
                Ok(grads[p].clone())
            }
            OracleKind::ConstrainedNoise(model) => Ok(self
                .objective
                .gradient(x)
                .into_iter()
                .map(|m| model.sample(m, &mut self.rng))
                .collect()),
        }
    }
}

/// Oracle returning `∇f` corrupted per coordinate by `model`.
pub fn make_constrained_oracle<'a>(
    objective: &'a dyn Objective,
    beta: f64,
    xi: f64,
    family: NoiseFamily,
    seed: u64,
) -> Result<Oracle<'a>, OptimError> {
    let model = NoiseModel::new(beta, xi, family)?;
    Ok(Oracle::new(objective, OracleKind::ConstrainedNoise(model), seed))
}
