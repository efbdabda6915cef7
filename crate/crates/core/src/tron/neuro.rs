//! Neuro-Tron for `f_w(x) = (1/w)Σ_j σ(⟨A_jᵀw, x⟩)` with leaky-ReLU `σ` and a sensing matrix `M`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{is_parity_symmetric, Activation, Gate, TronError, TronRun, RESIDUAL_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct NeuroTronArch {
    /// `r × n`.
    pub m: DMatrix<f64>,
    /// `w` matrices, each `r × n`.
    pub a: Vec<DMatrix<f64>>,
    /// Leaky slope `α > 0`.
    pub slope: f64,
}

impl NeuroTronArch {
    pub fn width(&self) -> usize {
        self.a.len()
    }

    pub fn filter_dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.m.ncols()
    }

    pub fn validate(&self) -> Result<(), TronError> {
        let (r, n) = self.m.shape();
        if r == 0 || n == 0 || self.a.is_empty() {
            return Err(TronError::Invalid("empty architecture".into()));
        }
        if self.a.iter().any(|a| a.shape() != (r, n)) {
            return Err(TronError::Invalid("every A_j must match the shape of M".into()));
        }
        if !(self.slope > 0.0) {
            return Err(TronError::Invalid("leaky slope must be positive".into()));
        }
        Ok(())
    }

    pub fn activation(&self) -> Activation {
        Activation::LeakyRelu { slope: self.slope }
    }

    pub fn a_bar(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.m.nrows(), self.m.ncols());
        for a in &self.a {
            s += a;
        }
        s / self.width() as f64
    }

    pub fn predict(&self, w: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let act = self.activation();
        self.a
            .iter()
            .map(|a| act.eval((a.transpose() * w).dot(x)))
            .sum::<f64>()
            / self.width() as f64
    }
}

/// `A_j = Q + spread·G_j/√n` with `Q` having orthonormal rows, and `M = Ā`.
pub fn random_arch(
    n: usize,
    r: usize,
    width: usize,
    slope: f64,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NeuroTronArch, TronError> {
    if r == 0 || r > n || width == 0 {
        return Err(TronError::Invalid("need 0 < r <= n and width > 0".into()));
    }
    let mut gauss = |rows: usize, cols: usize| {
        DMatrix::from_fn(rows, cols, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z
        })
    };
    let q = gauss(n, r).qr().q().transpose();
    let scale = spread / (n as f64).sqrt();
    let a: Vec<DMatrix<f64>> = (0..width).map(|_| &q + gauss(r, n) * scale).collect();
    let mut arch = NeuroTronArch {
        m: DMatrix::zeros(r, n),
        a,
        slope,
    };
    arch.m = arch.a_bar();
    arch.validate()?;
    Ok(arch)
}

/// `|Σ_i σ(⟨Aᵀz₁,x_i⟩)⟨Mx_i,z₂⟩ − ((1+α)/2)·z₁ᵀAΣ̃Mᵀz₂|`.
pub fn symmetric_identity_gap(
    a: &DMatrix<f64>,
    m: &DMatrix<f64>,
    slope: f64,
    xs: &[DVector<f64>],
    z1: &DVector<f64>,
    z2: &DVector<f64>,
) -> f64 {
    let act = Activation::LeakyRelu { slope };
    let u = a.transpose() * z1;
    let v = m.transpose() * z2;
    let lhs: f64 = xs.iter().map(|x| act.eval(u.dot(x)) * v.dot(x)).sum();
    let sigma = gram(xs, a.ncols());
    let rhs = 0.5 * (1.0 + slope) * (z1.transpose() * a * sigma * m.transpose() * z2)[(0, 0)];
    (lhs - rhs).abs()
}

fn gram(xs: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n, n);
    for x in xs {
        s += x * x.transpose();
    }
    s
}

fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    (e.min(), e.max())
}

/// Constants of the convergence argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuroTronConstants {
    pub samples: usize,
    pub width: usize,
    pub slope: f64,
    pub lipschitz: f64,
    /// `max ‖x_i‖`.
    pub data_radius: f64,
    /// Smallest eigenvalue of the symmetric part of `ĀΣ̃Mᵀ`.
    pub lambda_min: f64,
    /// `λ_max(MᵀM)`.
    pub lambda_m: f64,
    /// `λ_max(Σ_j A_jᵀA_j)`.
    pub lambda_a: f64,
    /// `Σ_j √λ_max(A_jA_jᵀ)`.
    pub sum_sqrt_lambda: f64,
    /// `2(1+α)λ_min/(wS)`.
    pub a: f64,
    /// `(2B/w)²λ_M`.
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `B²L²λ_A/w`.
    pub f: f64,
    /// `a/(2bf)`.
    pub eta: f64,
    /// `1 − a²/(4bf)`.
    pub rho: f64,
    /// `S²B⁴/λ_min²` and `(1+α)²w³/(λ_M λ_A)`.
    pub cond_lhs: f64,
    pub cond_rhs: f64,
    pub cond_holds: bool,
}

impl NeuroTronConstants {
    pub fn compute(arch: &NeuroTronArch, xs: &[DVector<f64>]) -> Result<Self, TronError> {
        arch.validate()?;
        if xs.is_empty() || xs.iter().any(|x| x.len() != arch.input_dim()) {
            return Err(TronError::Invalid("data must be non-empty with the input dimension".into()));
        }
        let s = xs.len() as f64;
        let width = arch.width() as f64;
        let alpha = arch.slope;
        let l = arch.activation().lipschitz();
        let big_b = xs.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let k = arch.a_bar() * gram(xs, arch.input_dim()) * arch.m.transpose();
        let sym = (&k + k.transpose()) * 0.5;
        let lambda_min = eig_range(&sym).0;
        let lambda_m = eig_range(&(arch.m.transpose() * &arch.m)).1;
        let mut ata = DMatrix::zeros(arch.input_dim(), arch.input_dim());
        let mut sum_sqrt = 0.0;
        for a in &arch.a {
            ata += a.transpose() * a;
            sum_sqrt += eig_range(&(a * a.transpose())).1.max(0.0).sqrt();
        }
        let lambda_a = eig_range(&ata).1;
        let a = 2.0 * (1.0 + alpha) * lambda_min / (width * s);
        let b = (2.0 * big_b / width).powi(2) * lambda_m;
        let c = 2.0 * b * (big_b * l / width) * sum_sqrt;
        let d = 2.0 * b.sqrt();
        let f = big_b * big_b * l * l * lambda_a / width;
        let eta = a / (2.0 * b * f);
        let rho = 1.0 - a * a / (4.0 * b * f);
        let cond_lhs = s * s * big_b.powi(4) / (lambda_min * lambda_min);
        let cond_rhs = (1.0 + alpha).powi(2) * width.powi(3) / (lambda_m * lambda_a);
        Ok(Self {
            samples: xs.len(),
            width: arch.width(),
            slope: alpha,
            lipschitz: l,
            data_radius: big_b,
            lambda_min,
            lambda_m,
            lambda_a,
            sum_sqrt_lambda: sum_sqrt,
            a,
            b,
            c,
            d,
            f,
            eta,
            rho,
            cond_lhs,
            cond_rhs,
            cond_holds: lambda_min > 0.0 && cond_lhs > cond_rhs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeuroTronMode {
    /// `η = a/(2bf)`, exactly `T − 1` updates with `T = ⌈1 + 2 ln(W/ε)/ln(1/ρ)⌉`.
    Theorem { eps: f64 },
    /// Fixed step; stops once `‖w_t − w*‖ ≤ tol` if given.
    Plain {
        eta: f64,
        steps: u64,
        #[serde(default)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuroTronReport {
    pub constants: NeuroTronConstants,
    pub eta: f64,
    /// Closed-form `T` in theorem mode.
    pub horizon: Option<u64>,
    pub steps: u64,
    pub run: TronRun,
    pub final_distance: f64,
    /// `(‖w_T−w*‖²/‖w_1−w*‖²)^{1/(T−1)}`.
    pub measured_rate: Option<f64>,
    /// Steps where `‖w_{t+1}−w*‖² > ρ‖w_t−w*‖²`.
    pub rate_violations: usize,
    pub residual_violations: usize,
    /// Steps breaking the inequality without the `1/w` in its descent term.
    pub literal_violations: usize,
    pub passed: bool,
}

/// Labels are `f_{w*}(x_i)`; `xs` must be closed under negation.
pub fn neuro_tron(
    arch: &NeuroTronArch,
    xs: &[DVector<f64>],
    w_star: &DVector<f64>,
    w1: &DVector<f64>,
    mode: NeuroTronMode,
) -> Result<NeuroTronReport, TronError> {
    arch.validate()?;
    if w_star.len() != arch.filter_dim() || w1.len() != arch.filter_dim() {
        return Err(TronError::Invalid("w* and w1 must have the filter dimension".into()));
    }
    if !is_parity_symmetric(xs, 1e-12) {
        return Err(TronError::NotSymmetric);
    }
    let consts = NeuroTronConstants::compute(arch, xs)?;
    let start = (w1 - w_star).norm();
    let (eta, horizon, max_updates, tol) = match mode {
        NeuroTronMode::Theorem { eps } => {
            if !(eps > 0.0) {
                return Err(TronError::Invalid("eps must be positive".into()));
            }
            if !consts.cond_holds {
                return Err(TronError::Precondition(format!(
                    "sample condition fails: S²B⁴/λ_min² = {:e}, (1+α)²w³/(λ_M λ_A) = {:e}, λ_min = {:e}",
                    consts.cond_lhs, consts.cond_rhs, consts.lambda_min
                )));
            }
            let t = if start <= eps {
                1.0
            } else {
                (1.0 + 2.0 * (start / eps).ln() / (1.0 / consts.rho).ln()).ceil()
            };
            if !(t.is_finite() && t < 1e9) {
                return Err(TronError::Precondition(format!("horizon {t} is too large")));
            }
            let t = t as u64;
            (consts.eta, Some(t), t - 1, None)
        }
        NeuroTronMode::Plain { eta, steps, tol } => {
            if !(eta > 0.0) {
                return Err(TronError::Invalid("eta must be positive".into()));
            }
            (eta, None, steps, tol)
        }
    };

    let (r, n) = arch.m.shape();
    let width = arch.width() as f64;
    let s = xs.len() as f64;
    let alpha = arch.slope;
    let act = arch.activation();
    let x_mat = DMatrix::from_columns(xs);
    // rows j·r..(j+1)·r of `stack` hold A_j, so stackᵀ-products give all A_jᵀw at once
    let mut stack = DMatrix::zeros(arch.width() * r, n);
    for (j, a) in arch.a.iter().enumerate() {
        stack.view_mut((j * r, 0), (r, n)).copy_from(a);
    }
    let predict_all = |w: &DVector<f64>| -> DVector<f64> {
        let mut dirs = DMatrix::zeros(arch.width(), n);
        for j in 0..arch.width() {
            let d = stack.view((j * r, 0), (r, n)).transpose() * w;
            dirs.row_mut(j).copy_from(&d.transpose());
        }
        let pre = dirs * &x_mat;
        DVector::from_iterator(
            xs.len(),
            (0..xs.len()).map(|i| pre.column(i).iter().map(|&z| act.eval(z)).sum::<f64>() / width),
        )
    };
    let ys = predict_all(w_star);
    let k = arch.a_bar() * gram(xs, n) * arch.m.transpose();
    let bm = consts.data_radius.powi(2) * consts.lambda_m;

    let mut w = w1.clone();
    let mut run = TronRun::default();
    let mut residual_violations = 0;
    let mut literal_violations = 0;
    let mut rate_violations = 0;
    let mut updates = 0;
    let noise_floor = 1e-10 * w_star.norm().max(1.0);
    for _ in 0..max_updates {
        let delta = w_star - &w;
        let dist2 = delta.norm_squared();
        run.distances.push(dist2.sqrt());
        if tol.is_some_and(|t| dist2.sqrt() <= t) {
            break;
        }
        let preds = predict_all(&w);
        let resid_labels = &ys - &preds;
        let lt = resid_labels.norm_squared() / s;
        run.risks.push(lt);
        let g = &arch.m * (&x_mat * &resid_labels) * (2.0 / (width * s));
        w += eta * &g;
        updates += 1;

        let q = delta.dot(&(&k * &delta));
        let push = (2.0 * eta / width).powi(2) * bm * lt;
        let next = (w_star - &w).norm_squared();
        let rhs = dist2 - 2.0 * eta * (1.0 + alpha) * q / (width * s) + push;
        let literal = dist2 - 2.0 * eta * (1.0 + alpha) * q / s + push;
        let tol_abs = RESIDUAL_TOL * dist2.max(1.0);
        if rhs - next < -tol_abs {
            residual_violations += 1;
        }
        if literal - next < -tol_abs {
            literal_violations += 1;
        }
        if horizon.is_some() && dist2.sqrt() > noise_floor && next > consts.rho * dist2 * (1.0 + 1e-12) {
            rate_violations += 1;
        }
        run.residuals.push(rhs - next);
    }
    let final_distance = (w_star - &w).norm();
    run.distances.push(final_distance);
    run.final_w = w.as_slice().to_vec();
    let measured_rate = (updates > 0 && start > 0.0 && final_distance > 0.0)
        .then(|| (final_distance * final_distance / (start * start)).powf(1.0 / updates as f64));
    let passed = residual_violations == 0
        && match mode {
            NeuroTronMode::Theorem { eps } => final_distance <= eps && rate_violations == 0,
            NeuroTronMode::Plain { tol, .. } => tol.map_or(true, |t| final_distance <= t),
        };
    Ok(NeuroTronReport {
        constants: consts,
        eta,
        horizon,
        steps: updates,
        run,
        final_distance,
        measured_rate,
        rate_violations,
        residual_violations,
        literal_violations,
        passed,
    })
}
