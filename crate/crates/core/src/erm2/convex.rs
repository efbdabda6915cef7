//! Linearly constrained least-squares / hinge problems and LP feasibility,
//! solved with an interior-point method plus an active-set polish.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT,
    SolverStatus,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `(f − y)²`
    Squared,
    /// `max(0, 1 − y·f)`
    Hinge,
}

impl Loss {
    pub fn eval(self, prediction: f64, label: f64) -> f64 {
        match self {
            Loss::Squared => (prediction - label).powi(2),
            Loss::Hinge => (1.0 - label * prediction).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NonConverged,
}

/// `min Σⱼ loss((A x)ⱼ, yⱼ)` subject to `G x ≤ h`.
#[derive(Debug, Clone)]
pub struct ConvexProblem {
    pub design: DMatrix<f64>,
    pub targets: DVector<f64>,
    pub loss: Loss,
    pub constraint_matrix: DMatrix<f64>,
    pub constraint_rhs: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvexSettings {
    pub max_iter: u32,
    /// Feasibility tolerance for accepting a polished point.
    pub feas_tol: f64,
}

impl Default for ConvexSettings {
    fn default() -> Self {
        Self {
            max_iter: 500,
            feas_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConvexSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub status: SolveStatus,
    pub iterations: u32,
    /// Infinity norm of the stationarity residual at the returned point.
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub polished: bool,
}

impl ConvexProblem {
    pub fn num_vars(&self) -> usize {
        self.design.ncols()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let pred = &self.design * x;
        pred.iter()
            .zip(self.targets.iter())
            .map(|(&p, &y)| self.loss.eval(p, y))
            .sum()
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        if self.constraint_matrix.nrows() == 0 {
            return 0.0;
        }
        (&self.constraint_matrix * x - &self.constraint_rhs).max().max(0.0)
    }

    fn validate(&self) -> Result<(), ConvexError> {
        let n = self.design.ncols();
        if self.design.nrows() != self.targets.len() {
            return Err(ConvexError::Dimension(format!(
                "design has {} rows, targets {}",
                self.design.nrows(),
                self.targets.len()
            )));
        }
        if self.constraint_matrix.nrows() != self.constraint_rhs.len()
            || (self.constraint_matrix.nrows() > 0 && self.constraint_matrix.ncols() != n)
        {
            return Err(ConvexError::Dimension("constraint block".into()));
        }
        Ok(())
    }

    fn constraint_rows(&self) -> usize {
        self.constraint_matrix.nrows()
    }
}

fn settings(max_iter: u32) -> DefaultSettings<f64> {
    DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(max_iter)
        .build()
        .expect("static settings are valid")
}

fn to_csc(m: &DMatrix<f64>, upper_only: bool) -> CscMatrix<f64> {
    let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if upper_only && i > j {
                continue;
            }
            let v = m[(i, j)];
            if v != 0.0 {
                rows.push(i);
                cols.push(j);
                vals.push(v);
            }
        }
    }
    CscMatrix::new_from_triplets(m.nrows(), m.ncols(), rows, cols, vals)
}

fn map_status(s: SolverStatus) -> SolveStatus {
    match s {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        _ => SolveStatus::NonConverged,
    }
}

struct RawResult {
    x: Vec<f64>,
    z: Vec<f64>,
    status: SolveStatus,
    iterations: u32,
}

fn run_ipm(
    p: &DMatrix<f64>,
    q: &[f64],
    a: &DMatrix<f64>,
    b: &[f64],
    max_iter: u32,
) -> Result<RawResult, ConvexError> {
    let p_csc = to_csc(p, true);
    let a_csc = to_csc(a, false);
    let cones = if b.is_empty() {
        vec![]
    } else {
        vec![NonnegativeConeT(b.len())]
    };
    let mut solver = DefaultSolver::new(&p_csc, q, &a_csc, b, &cones, settings(max_iter))
        .map_err(|e| ConvexError::Setup(format!("{e:?}")))?;
    solver.solve();
    Ok(RawResult {
        x: solver.solution.x.clone(),
        z: solver.solution.z.clone(),
        status: map_status(solver.solution.status),
        iterations: solver.solution.iterations,
    })
}

/// Solves a [`ConvexProblem`].
pub fn convex_subproblem(
    problem: &ConvexProblem,
    opts: &ConvexSettings,
) -> Result<ConvexSolution, ConvexError> {
    problem.validate()?;
    match problem.loss {
        Loss::Squared => solve_squared(problem, opts),
        Loss::Hinge => solve_hinge(problem, opts),
    }
}

fn solve_squared(
    problem: &ConvexProblem,
    opts: &ConvexSettings,
) -> Result<ConvexSolution, ConvexError> {
    let a = &problem.design;
    let y = &problem.targets;
    let n = problem.num_vars();
    let p = a.transpose() * a * 2.0;
    let q: Vec<f64> = (a.transpose() * y * -2.0).iter().copied().collect();
    let g = &problem.constraint_matrix;
    let g = if g.nrows() == 0 {
        DMatrix::zeros(0, n)
    } else {
        g.clone()
    };
    let h: Vec<f64> = problem.constraint_rhs.iter().copied().collect();
    let raw = run_ipm(&p, &q, &g, &h, opts.max_iter)?;
    if raw.status == SolveStatus::Infeasible {
        return Ok(ConvexSolution {
            x: DVector::zeros(n),
            value: f64::INFINITY,
            status: SolveStatus::Infeasible,
            iterations: raw.iterations,
            kkt_residual: f64::NAN,
            max_violation: f64::NAN,
            polished: false,
        });
    }
    let x_ipm = DVector::from_vec(raw.x);
    let z_ipm = DVector::from_vec(raw.z);
    let mut best = x_ipm.clone();
    let mut best_value = problem.objective(&best);
    let mut best_kkt = squared_stationarity(problem, &best, &g, &z_ipm);
    let mut polished = false;

    if let Some((xp, mu, active)) = polish_squared(problem, &best, &g) {
        let value = problem.objective(&xp);
        let viol = problem.max_violation(&xp);
        let ipm_viol = problem.max_violation(&best);
        if viol <= opts.feas_tol.max(ipm_viol) && value <= best_value + 1e-12 * best_value.abs().max(1.0)
        {
            let mut z_full = DVector::zeros(g.nrows());
            for (k, &i) in active.iter().enumerate() {
                z_full[i] = mu[k];
            }
            best_kkt = squared_stationarity(problem, &xp, &g, &z_full);
            best = xp;
            best_value = value;
            polished = true;
        }
    }
    let status = if raw.status == SolveStatus::NonConverged && !polished {
        SolveStatus::NonConverged
    } else {
        SolveStatus::Optimal
    };
    Ok(ConvexSolution {
        max_violation: problem.max_violation(&best),
        x: best,
        value: best_value,
        status,
        iterations: raw.iterations,
        kkt_residual: best_kkt,
        polished,
    })
}

fn squared_stationarity(
    problem: &ConvexProblem,
    x: &DVector<f64>,
    g: &DMatrix<f64>,
    z: &DVector<f64>,
) -> f64 {
    let a = &problem.design;
    let mut grad = a.transpose() * (a * x - &problem.targets) * 2.0;
    if g.nrows() > 0 {
        grad += g.transpose() * z;
    }
    grad.amax()
}

/// Re-solves the equality-constrained problem on the near-active set.
fn polish_squared(
    problem: &ConvexProblem,
    x: &DVector<f64>,
    g: &DMatrix<f64>,
) -> Option<(DVector<f64>, DVector<f64>, Vec<usize>)> {
    let n = problem.num_vars();
    let h = &problem.constraint_rhs;
    let scale = x.amax().max(1.0);
    let active: Vec<usize> = (0..g.nrows())
        .filter(|&i| {
            let row = g.row(i);
            let slack = h[i] - (row * x)[0];
            slack <= 1e-7 * scale * row.amax().max(1.0)
        })
        .collect();
    let k = active.len();
    let a = &problem.design;
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n))
        .copy_from(&(a.transpose() * a * 2.0));
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n)
        .copy_from(&(a.transpose() * &problem.targets * 2.0));
    for (r, &i) in active.iter().enumerate() {
        for c in 0..n {
            kkt[(n + r, c)] = g[(i, c)];
            kkt[(c, n + r)] = g[(i, c)];
        }
        rhs[n + r] = h[i];
    }
    let svd = kkt.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1.0);
    let sol = svd.solve(&rhs, tol).ok()?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned(), active))
}

fn solve_hinge(
    problem: &ConvexProblem,
    opts: &ConvexSettings,
) -> Result<ConvexSolution, ConvexError> {
    let a = &problem.design;
    let y = &problem.targets;
    let n = problem.num_vars();
    let d = a.nrows();
    let m = problem.constraint_rows();
    // variables (x, u); u ≥ 0, u ≥ 1 − y (A x)
    let total = n + d;
    let mut big = DMatrix::zeros(m + 2 * d, total);
    let mut rhs = vec![0.0; m + 2 * d];
    for i in 0..m {
        for c in 0..n {
            big[(i, c)] = problem.constraint_matrix[(i, c)];
        }
        rhs[i] = problem.constraint_rhs[i];
    }
    for j in 0..d {
        for c in 0..n {
            big[(m + j, c)] = -y[j] * a[(j, c)];
        }
        big[(m + j, n + j)] = -1.0;
        rhs[m + j] = -1.0;
        big[(m + d + j, n + j)] = -1.0;
    }
    let mut q = vec![0.0; total];
    for qj in q.iter_mut().skip(n) {
        *qj = 1.0;
    }
    let p = DMatrix::zeros(total, total);
    let raw = run_ipm(&p, &q, &big, &rhs, opts.max_iter)?;
    let x = DVector::from_iterator(n, raw.x.iter().take(n).copied());
    if raw.status == SolveStatus::Infeasible {
        return Ok(ConvexSolution {
            x: DVector::zeros(n),
            value: f64::INFINITY,
            status: SolveStatus::Infeasible,
            iterations: raw.iterations,
            kkt_residual: f64::NAN,
            max_violation: f64::NAN,
            polished: false,
        });
    }
    // Stationarity of the LP in (x, u) with multipliers z.
    let z = DVector::from_vec(raw.z);
    let mut grad = DVector::from_vec(q);
    grad += big.transpose() * z;
    Ok(ConvexSolution {
        value: problem.objective(&x),
        max_violation: problem.max_violation(&x),
        x,
        status: raw.status,
        iterations: raw.iterations,
        kkt_residual: grad.amax(),
        polished: false,
    })
}

/// Whether some `(r, c)` satisfies `±(⟨r, pᵢ⟩ + c) ≥ 1` with the sign given by
/// `positive[i]`. Without `with_bias`, `c` is fixed to 0.
pub fn strictly_separable(
    points: &[Vec<f64>],
    positive: &[bool],
    with_bias: bool,
) -> Result<bool, ConvexError> {
    if points.len() != positive.len() {
        return Err(ConvexError::Dimension("points vs labels".into()));
    }
    if points.is_empty() {
        return Ok(true);
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(ConvexError::Dimension("ragged points".into()));
    }
    if with_bias && (positive.iter().all(|&s| s) || positive.iter().all(|&s| !s)) {
        return Ok(true);
    }
    let vars = dim + usize::from(with_bias);
    let mut g = DMatrix::zeros(points.len(), vars);
    for (i, (p, &pos)) in points.iter().zip(positive).enumerate() {
        let s = if pos { -1.0 } else { 1.0 };
        for c in 0..dim {
            g[(i, c)] = s * p[c];
        }
        if with_bias {
            g[(i, dim)] = s;
        }
    }
    let h = vec![-1.0; points.len()];
    let raw = run_ipm(&DMatrix::zeros(vars, vars), &vec![0.0; vars], &g, &h, 200)?;
    match raw.status {
        SolveStatus::Optimal => {
            let x = DVector::from_vec(raw.x);
            let viol = (&g * &x).iter().map(|v| v + 1.0).fold(f64::NEG_INFINITY, f64::max);
            Ok(viol <= 1e-6)
        }
        _ => Ok(false),
    }
}
