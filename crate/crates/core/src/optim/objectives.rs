//! Smooth test objectives with analytically certified constants.

use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveConstants, OptimError};

/// `½ Σ cᵢ xᵢ²`; the gradient bound is declared for the domain of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub diag: Vec<f64>,
    pub declared_smoothness: f64,
    pub declared_grad_bound: f64,
}

impl Quadratic {
    /// Constants certified on the box `[−r, r]ᵈ`.
    pub fn on_box(diag: Vec<f64>, r: f64) -> Self {
        let l = diag.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let g = diag.iter().map(|c| (c * r).powi(2)).sum::<f64>().sqrt();
        Self {
            diag,
            declared_smoothness: l,
            declared_grad_bound: g,
        }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.diag.iter().zip(x).map(|(c, v)| c * v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(x).map(|(c, v)| c * v).collect()
    }

    fn constants(&self) -> ObjectiveConstants {
        ObjectiveConstants {
            smoothness: self.declared_smoothness,
            grad_norm_bound: self.declared_grad_bound,
            grad_coord_bound: self.declared_grad_bound,
            component_grad_norm_bound: None,
            f_star: Some(0.0),
            value_bounds: None,
        }
    }
}

/// `ψ(t) = √(1+t²) − 1 + a(1 − cos t)`.
fn psi(t: f64, a: f64) -> f64 {
    (1.0 + t * t).sqrt() - 1.0 + a * (1.0 - t.cos())
}

fn psi_prime(t: f64, a: f64) -> f64 {
    t / (1.0 + t * t).sqrt() + a * t.sin()
}

/// `Σᵢ ψ(xᵢ)`: pseudo-Huber plus a cosine ripple. Nonconvex for `a > 0`.
///
/// `|ψ'| ≤ 1 + a`, `|ψ''| ≤ 1 + a`, minimum 0 at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoHuberCos {
    pub d: usize,
    pub a: f64,
}

impl PseudoHuberCos {
    pub fn new(d: usize, a: f64) -> Result<Self, OptimError> {
        if d == 0 || !(a >= 0.0) {
            return Err(OptimError::Invalid("need d >= 1 and a >= 0".into()));
        }
        Ok(Self { d, a })
    }
}

impl Objective for PseudoHuberCos {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| psi(t, self.a)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&t| psi_prime(t, self.a)).collect()
    }

    fn constants(&self) -> ObjectiveConstants {
        let b = 1.0 + self.a;
        ObjectiveConstants {
            smoothness: b,
            grad_norm_bound: (self.d as f64).sqrt() * b,
            grad_coord_bound: b,
            component_grad_norm_bound: None,
            f_star: Some(0.0),
            value_bounds: None,
        }
    }
}

/// `Σᵢ (1 − e^{−xᵢ²/2})`, bounded between 0 and `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWell {
    pub d: usize,
}

impl Objective for GaussianWell {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| 1.0 - (-0.5 * t * t).exp()).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&t| t * (-0.5 * t * t).exp()).collect()
    }

    fn constants(&self) -> ObjectiveConstants {
        let coord = (-0.5_f64).exp();
        ObjectiveConstants {
            smoothness: 1.0,
            grad_norm_bound: (self.d as f64).sqrt() * coord,
            grad_coord_bound: coord,
            component_grad_norm_bound: None,
            f_star: Some(0.0),
            value_bounds: Some((0.0, self.d as f64)),
        }
    }
}

/// `Σᵢ [−¼ log(1+xᵢ²) + κ√(1+xᵢ²)]` with `κ = 1/(2R)`: a slowly flattening
/// valley whose minimum sits at `|xᵢ| = √(R²−1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogValley {
    pub d: usize,
    pub radius: f64,
}

impl LogValley {
    pub fn new(d: usize, radius: f64) -> Result<Self, OptimError> {
        if d == 0 || !(radius > 1.0) {
            return Err(OptimError::Invalid("need d >= 1 and radius > 1".into()));
        }
        Ok(Self { d, radius })
    }

    fn kappa(&self) -> f64 {
        0.5 / self.radius
    }
}

impl Objective for LogValley {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let k = self.kappa();
        x.iter()
            .map(|&t| -0.25 * (1.0 + t * t).ln() + k * (1.0 + t * t).sqrt())
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let k = self.kappa();
        x.iter()
            .map(|&t| -t / (2.0 * (1.0 + t * t)) + k * t / (1.0 + t * t).sqrt())
            .collect()
    }

    fn constants(&self) -> ObjectiveConstants {
        let k = self.kappa();
        let coord = 0.25 + k;
        ObjectiveConstants {
            smoothness: 0.5 + k,
            grad_norm_bound: (self.d as f64).sqrt() * coord,
            grad_coord_bound: coord,
            component_grad_norm_bound: None,
            f_star: Some(self.d as f64 * (0.5 - 0.5 * self.radius.ln())),
            value_bounds: None,
        }
    }
}

/// `f = (1/k) Σ_p f_p` with `f_p(x) = Σᵢ w_{p,i} ψ(xᵢ)` and positive weights,
/// so every component gradient lies in the same orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignConstrainedSum {
    pub weights: Vec<Vec<f64>>,
    pub a: f64,
}

impl SignConstrainedSum {
    pub fn new(weights: Vec<Vec<f64>>, a: f64) -> Result<Self, OptimError> {
        let d = weights.first().map_or(0, Vec::len);
        if d == 0 || weights.iter().any(|w| w.len() != d) {
            return Err(OptimError::Invalid("ragged or empty weight table".into()));
        }
        if weights.iter().flatten().any(|&w| !(w > 0.0)) || !(a >= 0.0) {
            return Err(OptimError::Invalid("weights must be positive, a >= 0".into()));
        }
        Ok(Self { weights, a })
    }

    fn mean_weights(&self) -> Vec<f64> {
        let k = self.weights.len() as f64;
        (0..self.dim())
            .map(|i| self.weights.iter().map(|w| w[i]).sum::<f64>() / k)
            .collect()
    }
}

impl Objective for SignConstrainedSum {
    fn dim(&self) -> usize {
        self.weights[0].len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.mean_weights()
            .iter()
            .zip(x)
            .map(|(w, &t)| w * psi(t, self.a))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.mean_weights()
            .iter()
            .zip(x)
            .map(|(w, &t)| w * psi_prime(t, self.a))
            .collect()
    }

    fn constants(&self) -> ObjectiveConstants {
        let b = 1.0 + self.a;
        let mean = self.mean_weights();
        let l = mean.iter().fold(0.0_f64, |m, &w| m.max(w)) * b;
        let norm = mean.iter().map(|w| w * w).sum::<f64>().sqrt() * b;
        let comp = self
            .weights
            .iter()
            .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt() * b)
            .fold(0.0_f64, f64::max);
        ObjectiveConstants {
            smoothness: l,
            grad_norm_bound: norm,
            grad_coord_bound: l,
            component_grad_norm_bound: Some(comp),
            f_star: Some(0.0),
            value_bounds: None,
        }
    }

    fn num_components(&self) -> usize {
        self.weights.len()
    }

    fn component_gradient(&self, p: usize, x: &[f64]) -> Vec<f64> {
        self.weights[p]
            .iter()
            .zip(x)
            .map(|(w, &t)| w * psi_prime(t, self.a))
            .collect()
    }
}

/// Serializable description of a test objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Quadratic { diag: Vec<f64>, box_radius: f64 },
    PseudoHuberCos { d: usize, a: f64 },
    GaussianWell { d: usize },
    LogValley { d: usize, radius: f64 },
    SignConstrainedSum { weights: Vec<Vec<f64>>, a: f64 },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Box<dyn Objective>, OptimError> {
        Ok(match self {
            ObjectiveSpec::Quadratic { diag, box_radius } => {
                if diag.is_empty() {
                    return Err(OptimError::Invalid("empty quadratic".into()));
                }
                Box::new(Quadratic::on_box(diag.clone(), *box_radius))
            }
            ObjectiveSpec::PseudoHuberCos { d, a } => Box::new(PseudoHuberCos::new(*d, *a)?),
            ObjectiveSpec::GaussianWell { d } => {
                if *d == 0 {
                    return Err(OptimError::Invalid("d must be positive".into()));
                }
                Box::new(GaussianWell { d: *d })
            }
            ObjectiveSpec::LogValley { d, radius } => Box::new(LogValley::new(*d, *radius)?),
            ObjectiveSpec::SignConstrainedSum { weights, a } => {
                Box::new(SignConstrainedSum::new(weights.clone(), *a)?)
            }
        })
    }
}
