//! Exact global empirical-risk minimization for `x ↦ Σᵢ sᵢ·max(0, ãⁱ·x + b̃ᵢ)`.

pub mod convex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pwl::PwlFunction;
pub use convex::{
    convex_subproblem, strictly_separable, ConvexError, ConvexProblem, ConvexSettings,
    ConvexSolution, Loss, SolveStatus,
};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErmError {
    #[error("{what} = {value} exceeds the cap {cap}")]
    CapExceeded {
        what: &'static str,
        value: u128,
        cap: u128,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset is malformed: {0}")]
    Malformed(String),
    #[error("width must be at least 1")]
    ZeroWidth,
    #[error("1-D route needs scalar inputs, got dimension {0}")]
    NotScalar(usize),
    #[error("no cell produced a solution")]
    NoSolution,
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self, ErmError> {
        let d = Self { points, labels };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ErmError> {
        if self.points.is_empty() {
            return Err(ErmError::EmptyDataset);
        }
        if self.points.len() != self.labels.len() {
            return Err(ErmError::Malformed(format!(
                "{} points but {} labels",
                self.points.len(),
                self.labels.len()
            )));
        }
        let n = self.points[0].len();
        if n == 0 || self.points.iter().any(|p| p.len() != n) {
            return Err(ErmError::Malformed("inconsistent point dimension".into()));
        }
        let finite = self.points.iter().flatten().chain(&self.labels).all(|v| v.is_finite());
        if !finite {
            return Err(ErmError::Malformed("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErmLimits {
    pub max_points: usize,
    pub max_cells: u128,
    pub solver: ConvexLimits,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvexLimits {
    pub max_iter: u32,
}

impl Default for ErmLimits {
    fn default() -> Self {
        Self {
            max_points: 12,
            max_cells: 2_000_000,
            solver: ConvexLimits { max_iter: 500 },
        }
    }
}

impl ErmLimits {
    fn convex(&self) -> ConvexSettings {
        ConvexSettings {
            max_iter: self.solver.max_iter,
            ..ConvexSettings::default()
        }
    }
}

/// P⁺ masks of all dichotomies of `points` realizable by an affine threshold,
/// in increasing mask order. Bit `j` set means point `j` is on the positive side.
pub fn enumerate_dichotomies(points: &[Vec<f64>], cap: usize) -> Result<Vec<u32>, ErmError> {
    let d = points.len();
    if d > cap || d > 31 {
        return Err(ErmError::CapExceeded {
            what: "points",
            value: d as u128,
            cap: cap.min(31) as u128,
        });
    }
    let masks: Vec<Result<Option<u32>, ErmError>> = (0..1u32 << d)
        .into_par_iter()
        .map(|mask| {
            let side: Vec<bool> = (0..d).map(|j| mask >> j & 1 == 1).collect();
            Ok(strictly_separable(points, &side, true)?.then_some(mask))
        })
        .collect();
    let mut out = Vec::new();
    for m in masks {
        if let Some(mask) = m? {
            out.push(mask);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub cells: u64,
    pub optimal: u64,
    pub infeasible: u64,
    pub non_converged: u64,
    /// Interior-point iterations of the winning cell.
    pub iterations: u32,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenUnit {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl HiddenUnit {
    pub fn preactivation(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Erm2Solution {
    pub hidden: Vec<HiddenUnit>,
    pub signs: Vec<i8>,
    /// Mean loss over the dataset.
    pub loss: f64,
    /// P⁺ mask of each unit.
    pub partitions: Vec<u32>,
    pub cell_index: u64,
    pub solver_stats: SolverStats,
}

impl Erm2Solution {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.hidden
            .iter()
            .zip(&self.signs)
            .map(|(u, &s)| f64::from(s) * u.preactivation(x).max(0.0))
            .sum()
    }

    pub fn mean_loss(&self, data: &Dataset, loss: Loss) -> f64 {
        data.points
            .iter()
            .zip(&data.labels)
            .map(|(x, &y)| loss.eval(self.predict(x), y))
            .sum::<f64>()
            / data.len() as f64
    }

    /// Largest amount by which a unit's pre-activation lands on the wrong
    /// side of its certified partition.
    pub fn partition_violation(&self, data: &Dataset) -> f64 {
        let mut worst: f64 = 0.0;
        for (u, &mask) in self.hidden.iter().zip(&self.partitions) {
            for (j, x) in data.points.iter().enumerate() {
                let z = u.preactivation(x);
                let v = if mask >> j & 1 == 1 { -z } else { z };
                worst = worst.max(v);
            }
        }
        worst
    }
}

fn cell_problem(data: &Dataset, signs: &[i8], masks: &[u32], loss: Loss) -> ConvexProblem {
    let n = data.dim();
    let d = data.len();
    let w = signs.len();
    let vars = w * (n + 1);
    let mut design = DMatrix::zeros(d, vars);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(w * d);
    for (i, (&s, &mask)) in signs.iter().zip(masks).enumerate() {
        let off = i * (n + 1);
        for (j, x) in data.points.iter().enumerate() {
            let positive = mask >> j & 1 == 1;
            let mut row = vec![0.0; vars];
            let side = if positive { -1.0 } else { 1.0 };
            for c in 0..n {
                row[off + c] = side * x[c];
                if positive {
                    design[(j, off + c)] += f64::from(s) * x[c];
                }
            }
            row[off + n] = side;
            if positive {
                design[(j, off + n)] += f64::from(s);
            }
            rows.push(row);
        }
    }
    let g = DMatrix::from_fn(rows.len(), vars, |r, c| rows[r][c]);
    ConvexProblem {
        design,
        targets: DVector::from_column_slice(&data.labels),
        loss,
        constraint_matrix: g,
        constraint_rhs: DVector::zeros(rows.len()),
    }
}

struct CellOutcome {
    index: u64,
    solution: ConvexSolution,
}

fn tally(outcomes: &[Result<CellOutcome, ConvexError>]) -> Result<SolverStats, ErmError> {
    let mut stats = SolverStats {
        cells: outcomes.len() as u64,
        ..SolverStats::default()
    };
    for o in outcomes {
        match o {
            Ok(c) => match c.solution.status {
                SolveStatus::Optimal => stats.optimal += 1,
                SolveStatus::Infeasible => stats.infeasible += 1,
                SolveStatus::NonConverged => stats.non_converged += 1,
            },
            Err(e) => return Err(e.clone().into()),
        }
    }
    Ok(stats)
}

fn best_cell(outcomes: Vec<Result<CellOutcome, ConvexError>>) -> Option<CellOutcome> {
    outcomes
        .into_iter()
        .filter_map(Result::ok)
        .filter(|c| c.solution.status == SolveStatus::Optimal)
        .min_by(|a, b| {
            a.solution
                .value
                .total_cmp(&b.solution.value)
                .then(a.index.cmp(&b.index))
        })
}

fn sign_vector(index: u64, w: usize) -> Vec<i8> {
    (0..w)
        .map(|i| if index >> (w - 1 - i) & 1 == 1 { -1 } else { 1 })
        .collect()
}

/// Global minimizer of the mean loss over width-`w` two-layer ReLU nets with
/// no output bias, by enumerating sign vectors and dichotomy tuples.
pub fn solve_exact(
    data: &Dataset,
    w: usize,
    loss: Loss,
    limits: &ErmLimits,
) -> Result<Erm2Solution, ErmError> {
    data.validate()?;
    if w == 0 {
        return Err(ErmError::ZeroWidth);
    }
    let dich = enumerate_dichotomies(&data.points, limits.max_points)?;
    let k = dich.len() as u128;
    let tuples = k.checked_pow(w as u32).unwrap_or(u128::MAX);
    let cells = tuples.saturating_mul(1u128 << w.min(100));
    if cells > limits.max_cells {
        return Err(ErmError::CapExceeded {
            what: "cells",
            value: cells,
            cap: limits.max_cells,
        });
    }
    let tuples = tuples as u64;
    let n = data.dim();
    let settings = limits.convex();
    let outcomes: Vec<Result<CellOutcome, ConvexError>> = (0..cells as u64)
        .into_par_iter()
        .map(|index| {
            let signs = sign_vector(index / tuples, w);
            let masks = tuple_masks(index % tuples, w, &dich);
            let problem = cell_problem(data, &signs, &masks, loss);
            convex_subproblem(&problem, &settings).map(|solution| CellOutcome { index, solution })
        })
        .collect();
    let mut stats = tally(&outcomes)?;
    let best = best_cell(outcomes).ok_or(ErmError::NoSolution)?;
    stats.iterations = best.solution.iterations;
    stats.kkt_residual = best.solution.kkt_residual;
    stats.max_violation = best.solution.max_violation;
    stats.polished = best.solution.polished;
    let signs = sign_vector(best.index / tuples, w);
    let partitions = tuple_masks(best.index % tuples, w, &dich);
    let x = &best.solution.x;
    let hidden = (0..w)
        .map(|i| HiddenUnit {
            weights: x.rows(i * (n + 1), n).iter().copied().collect(),
            bias: x[i * (n + 1) + n],
        })
        .collect();
    Ok(Erm2Solution {
        hidden,
        signs,
        loss: best.solution.value / data.len() as f64,
        partitions,
        cell_index: best.index,
        solver_stats: stats,
    })
}

fn tuple_masks(mut index: u64, w: usize, dich: &[u32]) -> Vec<u32> {
    let k = dich.len() as u64;
    let mut out = vec![0; w];
    for slot in (0..w).rev() {
        out[slot] = dich[(index % k) as usize];
        index /= k;
    }
    out
}

/// A `w`-piece fit on sorted scalar data: piece `j` serves a contiguous group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Erm1dSolution {
    /// `(slope, intercept)` per piece, left to right.
    pub pieces: Vec<(f64, f64)>,
    /// Crossing of consecutive pieces, clamped to the interval allowed by the cell.
    pub breakpoints: Vec<f64>,
    /// The fitted function when the crossings are increasing.
    pub function: Option<PwlFunction>,
    pub loss: f64,
    /// Last sorted index (1-based) covered by each of the first `w − 1` pieces.
    pub interval_ends: Vec<usize>,
    /// Orientation of each slope change.
    pub slope_signs: Vec<i8>,
    pub cell_index: u64,
    pub solver_stats: SolverStats,
}

fn nondecreasing_tuples(len: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(len: usize, lo: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for v in lo..=max {
            cur.push(v);
            rec(len, v, max, cur, out);
            cur.pop();
        }
    }
    rec(len, 1, max, &mut cur, &mut out);
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Exact `w`-piece continuous piecewise-linear regression on scalar data.
pub fn solve_exact_1d(
    data: &Dataset,
    w: usize,
    loss: Loss,
    limits: &ErmLimits,
) -> Result<Erm1dSolution, ErmError> {
    data.validate()?;
    if w == 0 {
        return Err(ErmError::ZeroWidth);
    }
    if data.dim() != 1 {
        return Err(ErmError::NotScalar(data.dim()));
    }
    let d = data.len();
    let cells = binomial((d + w - 2) as u128, (w - 1) as u128).saturating_mul(1u128 << (w - 1));
    if cells > limits.max_cells {
        return Err(ErmError::CapExceeded {
            what: "cells",
            value: cells,
            cap: limits.max_cells,
        });
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| data.points[a][0].total_cmp(&data.points[b][0]));
    let xs: Vec<f64> = order.iter().map(|&i| data.points[i][0]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| data.labels[i]).collect();

    let tuples = nondecreasing_tuples(w - 1, d);
    let per_sign = tuples.len() as u64;
    let settings = limits.convex();
    let outcomes: Vec<Result<CellOutcome, ConvexError>> = (0..cells as u64)
        .into_par_iter()
        .map(|index| {
            let signs = sign_vector(index / per_sign, w - 1);
            let ends = &tuples[(index % per_sign) as usize];
            let problem = interval_problem(&xs, &ys, ends, &signs, loss);
            convex_subproblem(&problem, &settings).map(|solution| CellOutcome { index, solution })
        })
        .collect();
    let mut stats = tally(&outcomes)?;
    let best = best_cell(outcomes).ok_or(ErmError::NoSolution)?;
    stats.iterations = best.solution.iterations;
    stats.kkt_residual = best.solution.kkt_residual;
    stats.max_violation = best.solution.max_violation;
    stats.polished = best.solution.polished;

    let signs = sign_vector(best.index / per_sign, w - 1);
    let ends = tuples[(best.index % per_sign) as usize].clone();
    let x = &best.solution.x;
    let pieces: Vec<(f64, f64)> = (0..w).map(|j| (x[2 * j], x[2 * j + 1])).collect();
    let breakpoints = crossings(&pieces, &ends, &xs);
    let function = assemble_function(&pieces, &breakpoints, &ends, d);
    Ok(Erm1dSolution {
        pieces,
        breakpoints,
        function,
        loss: best.solution.value / d as f64,
        interval_ends: ends,
        slope_signs: signs,
        cell_index: best.index,
        solver_stats: stats,
    })
}

fn interval_problem(
    xs: &[f64],
    ys: &[f64],
    ends: &[usize],
    signs: &[i8],
    loss: Loss,
) -> ConvexProblem {
    let d = xs.len();
    let w = ends.len() + 1;
    let vars = 2 * w;
    let mut design = DMatrix::zeros(d, vars);
    for (i, &x) in xs.iter().enumerate() {
        // 1-based position i+1 belongs to the first piece j with i+1 <= ends[j]
        let j = ends.iter().position(|&e| i < e).unwrap_or(w - 1);
        design[(i, 2 * j)] = x;
        design[(i, 2 * j + 1)] = 1.0;
    }
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    for (j, (&e, &s)) in ends.iter().zip(signs).enumerate() {
        let s = f64::from(s);
        let left = xs[e - 1];
        // S·(δa·x + δb) ≤ 0 at the last point of the left group
        rows.push([-s * left, -s, s * left, s]);
        cols.push(j);
        if e < d {
            let right = xs[e];
            rows.push([s * right, s, -s * right, -s]);
            cols.push(j);
        }
        // S·δa ≥ 0
        rows.push([s, 0.0, -s, 0.0]);
        cols.push(j);
    }
    let mut g = DMatrix::zeros(rows.len(), vars);
    for (r, (row, &j)) in rows.iter().zip(&cols).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            g[(r, 2 * j + c)] = v;
        }
    }
    let m = rows.len();
    ConvexProblem {
        design,
        targets: DVector::from_column_slice(ys),
        loss,
        constraint_matrix: g,
        constraint_rhs: DVector::zeros(m),
    }
}

fn crossings(pieces: &[(f64, f64)], ends: &[usize], xs: &[f64]) -> Vec<f64> {
    let d = xs.len();
    ends.iter()
        .enumerate()
        .map(|(j, &e)| {
            let lo = xs[e - 1];
            let hi = if e < d { xs[e] } else { xs[d - 1] + 1.0 };
            let da = pieces[j + 1].0 - pieces[j].0;
            let db = pieces[j + 1].1 - pieces[j].1;
            if da.abs() > 1e-14 {
                (-db / da).clamp(lo, hi)
            } else {
                0.5 * (lo + hi)
            }
        })
        .collect()
}

fn assemble_function(
    pieces: &[(f64, f64)],
    breakpoints: &[f64],
    ends: &[usize],
    d: usize,
) -> Option<PwlFunction> {
    // Pieces after the first group ending at the last point carry no data.
    let used = ends.iter().position(|&e| e == d).map_or(pieces.len(), |j| j + 1);
    let bps = &breakpoints[..used - 1];
    if bps.is_empty() {
        let (a, b) = pieces[0];
        return PwlFunction::affine(a, 0.0, b).ok();
    }
    if bps.windows(2).any(|w| w[1] <= w[0]) {
        return None;
    }
    let values: Vec<f64> = bps
        .iter()
        .enumerate()
        .map(|(j, &c)| pieces[j].0 * c + pieces[j].1)
        .collect();
    PwlFunction::new(bps.to_vec(), values, pieces[0].0, pieces[used - 1].0).ok()
}
