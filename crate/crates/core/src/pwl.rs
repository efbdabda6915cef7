//! Univariate continuous piecewise-linear functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance under which two adjacent slopes are considered equal.
pub const SLOPE_TOL: f64 = 1e-12;

/// Relative gap under which two candidate breakpoints are merged.
const POINT_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwlError {
    #[error("breakpoints must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("{breakpoints} breakpoints but {values} values")]
    LengthMismatch { breakpoints: usize, values: usize },
    #[error("affine function needs equal slopes and an anchor")]
    BadAffine,
    #[error("non-finite number in input")]
    NonFinite,
    #[error("function has a single affine piece")]
    SinglePiece,
    #[error("simplex point must satisfy 0 < a1 < ... < ap < M with M > 0")]
    BadSimplexPoint,
    #[error("hard functions use different scales ({0} vs {1})")]
    MismatchedScale(f64, f64),
    #[error("empty interval [{0}, {1}]")]
    EmptyInterval(f64, f64),
    #[error("need at least one simplex point")]
    NoSimplexPoints,
    #[error("sawtooth needs w >= 2 and k >= 1")]
    BadSawtooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPwl", into = "RawPwl")]
pub struct PwlFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
    anchor: Option<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawPwl {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<[f64; 2]>,
}

impl TryFrom<RawPwl> for PwlFunction {
    type Error = PwlError;

    fn try_from(raw: RawPwl) -> Result<Self, PwlError> {
        if raw.breakpoints.is_empty() {
            let [x0, f0] = raw.anchor.ok_or(PwlError::BadAffine)?;
            if raw.left_slope != raw.right_slope {
                return Err(PwlError::BadAffine);
            }
            return PwlFunction::affine(raw.left_slope, x0, f0);
        }
        PwlFunction::new(raw.breakpoints, raw.values, raw.left_slope, raw.right_slope)
    }
}

impl From<PwlFunction> for RawPwl {
    fn from(f: PwlFunction) -> Self {
        RawPwl {
            breakpoints: f.breakpoints,
            values: f.values,
            left_slope: f.left_slope,
            right_slope: f.right_slope,
            anchor: f.anchor.map(|(x, y)| [x, y]),
        }
    }
}

impl PwlFunction {
    /// Builds a function from breakpoints, the values there, and the two tail slopes.
    ///
    /// With no breakpoints use [`PwlFunction::affine`].
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    ) -> Result<Self, PwlError> {
        if breakpoints.len() != values.len() {
            return Err(PwlError::LengthMismatch {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        if breakpoints.is_empty() {
            return Err(PwlError::BadAffine);
        }
        let finite = breakpoints.iter().chain(&values).all(|v| v.is_finite())
            && left_slope.is_finite()
            && right_slope.is_finite();
        if !finite {
            return Err(PwlError::NonFinite);
        }
        if let Some(i) = (1..breakpoints.len()).find(|&i| breakpoints[i] <= breakpoints[i - 1]) {
            return Err(PwlError::NotIncreasing(i));
        }
        Ok(Self {
            breakpoints,
            values,
            left_slope,
            right_slope,
            anchor: None,
        })
    }

    /// `x ↦ f0 + slope·(x − x0)`.
    pub fn affine(slope: f64, x0: f64, f0: f64) -> Result<Self, PwlError> {
        if !(slope.is_finite() && x0.is_finite() && f0.is_finite()) {
            return Err(PwlError::NonFinite);
        }
        Ok(Self {
            breakpoints: Vec::new(),
            values: Vec::new(),
            left_slope: slope,
            right_slope: slope,
            anchor: Some((x0, f0)),
        })
    }

    pub fn constant(c: f64) -> Self {
        Self::affine(0.0, 0.0, c).expect("finite constant")
    }

    pub fn identity() -> Self {
        Self::affine(1.0, 0.0, 0.0).expect("finite")
    }

    /// `|x|`.
    pub fn abs() -> Self {
        Self::new(vec![0.0], vec![0.0], -1.0, 1.0).expect("valid")
    }

    /// `max(0, x)`.
    pub fn relu() -> Self {
        Self::new(vec![0.0], vec![0.0], 0.0, 1.0).expect("valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.right_slope
    }

    pub fn anchor(&self) -> Option<(f64, f64)> {
        self.anchor
    }

    pub fn is_affine(&self) -> bool {
        self.breakpoints.is_empty()
    }

    /// Slopes of all pieces from left to right, tails included.
    pub fn slopes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.breakpoints.len() + 1);
        out.push(self.left_slope);
        for i in 1..self.breakpoints.len() {
            out.push(
                (self.values[i] - self.values[i - 1])
                    / (self.breakpoints[i] - self.breakpoints[i - 1]),
            );
        }
        if !self.breakpoints.is_empty() {
            out.push(self.right_slope);
        }
        out
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = &self.breakpoints;
        if a.is_empty() {
            let (x0, f0) = self.anchor.expect("affine functions carry an anchor");
            return f0 + self.left_slope * (x - x0);
        }
        let last = a.len() - 1;
        if x <= a[0] {
            return self.values[0] + self.left_slope * (x - a[0]);
        }
        if x >= a[last] {
            return self.values[last] + self.right_slope * (x - a[last]);
        }
        // a[i] <= x < a[i+1]
        let i = a.partition_point(|&p| p <= x) - 1;
        let t = (x - a[i]) / (a[i + 1] - a[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Drops breakpoints whose adjacent slopes agree within [`SLOPE_TOL`].
    pub fn canonicalize(&self) -> Self {
        if self.breakpoints.is_empty() {
            return self.clone();
        }
        let a = &self.breakpoints;
        let b = &self.values;
        let n = a.len();
        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for i in 0..n {
            let left = match keep.last() {
                Some(&j) => (b[i] - b[j]) / (a[i] - a[j]),
                None => self.left_slope,
            };
            let right = if i + 1 < n {
                (b[i + 1] - b[i]) / (a[i + 1] - a[i])
            } else {
                self.right_slope
            };
            if (left - right).abs() > SLOPE_TOL {
                keep.push(i);
            }
        }
        if keep.is_empty() {
            return Self::affine(self.left_slope, a[0], b[0]).expect("finite");
        }
        Self {
            breakpoints: keep.iter().map(|&i| a[i]).collect(),
            values: keep.iter().map(|&i| b[i]).collect(),
            left_slope: self.left_slope,
            right_slope: self.right_slope,
            anchor: None,
        }
    }

    /// Number of maximal affine intervals on the whole line.
    pub fn num_pieces(&self) -> usize {
        self.canonicalize().breakpoints.len() + 1
    }

    /// Number of maximal affine intervals that meet the open interval `(lo, hi)`.
    pub fn num_pieces_in(&self, lo: f64, hi: f64) -> usize {
        let c = self.canonicalize();
        c.breakpoints.iter().filter(|&&p| p > lo && p < hi).count() + 1
    }

    fn from_points(points: Vec<f64>, eval: impl Fn(f64) -> f64, left: f64, right: f64) -> Self {
        if points.is_empty() {
            return Self::affine(left, 0.0, eval(0.0)).expect("finite");
        }
        let values = points.iter().map(|&x| eval(x)).collect();
        Self::new(points, values, left, right).expect("merged points are increasing")
    }

    fn any_point(&self) -> f64 {
        self.breakpoints
            .first()
            .copied()
            .or(self.anchor.map(|(x, _)| x))
            .unwrap_or(0.0)
    }

    /// `x ↦ f(−x)`.
    pub fn reflect(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().rev().map(|x| -x).collect(),
            values: self.values.iter().rev().copied().collect(),
            left_slope: -self.right_slope,
            right_slope: -self.left_slope,
            anchor: self.anchor.map(|(x, y)| (-x, y)),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            left_slope: c * self.left_slope,
            right_slope: c * self.right_slope,
            anchor: self.anchor.map(|(x, y)| (x, c * y)),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let points = merge_points(&[&self.breakpoints, &other.breakpoints]);
        let left = self.left_slope + other.left_slope;
        let right = self.right_slope + other.right_slope;
        if points.is_empty() {
            let x0 = self.any_point();
            return Self::affine(left, x0, self.eval(x0) + other.eval(x0)).expect("finite");
        }
        Self::from_points(points, |x| self.eval(x) + other.eval(x), left, right)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Pointwise maximum; crossing points of the two graphs become breakpoints.
    pub fn max(&self, other: &Self) -> Self {
        let mut points = merge_points(&[&self.breakpoints, &other.breakpoints]);
        let diff = |x: f64| self.eval(x) - other.eval(x);
        let mut crossings = Vec::new();
        let dl = self.left_slope - other.left_slope;
        let dr = self.right_slope - other.right_slope;
        if points.is_empty() {
            let x0 = self.any_point();
            let d0 = diff(x0);
            if dl != 0.0 {
                crossings.push(x0 - d0 / dl);
            }
        } else {
            let first = points[0];
            let d0 = diff(first);
            if dl != 0.0 {
                let xc = first - d0 / dl;
                if xc < first {
                    crossings.push(xc);
                }
            }
            for w in points.windows(2) {
                let (da, db) = (diff(w[0]), diff(w[1]));
                if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                    crossings.push(w[0] + (w[1] - w[0]) * da / (da - db));
                }
            }
            let last = *points.last().expect("non-empty");
            let dn = diff(last);
            if dr != 0.0 {
                let xc = last - dn / dr;
                if xc > last {
                    crossings.push(xc);
                }
            }
        }
        crossings.retain(|x| x.is_finite());
        points = merge_points(&[&points, &crossings]);
        if points.is_empty() {
            return if diff(self.any_point()) >= 0.0 {
                self.clone()
            } else {
                other.clone()
            };
        }
        let first = points[0];
        let last = *points.last().expect("non-empty");
        let left = if diff(first - 1.0) >= 0.0 {
            self.left_slope
        } else {
            other.left_slope
        };
        let right = if diff(last + 1.0) >= 0.0 {
            self.right_slope
        } else {
            other.right_slope
        };
        Self::from_points(points, |x| self.eval(x).max(other.eval(x)), left, right)
    }

    pub fn min(&self, other: &Self) -> Self {
        self.neg().max(&other.neg()).neg()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        let outer_bps = &self.breakpoints;
        let mut preimages = Vec::new();
        let mut push_preimages = |x_ref: f64, u_ref: f64, slope: f64, lo: f64, hi: f64| {
            if slope == 0.0 {
                return;
            }
            for &a in outer_bps {
                let x = x_ref + (a - u_ref) / slope;
                if x > lo && x < hi {
                    preimages.push(x);
                }
            }
        };
        let ib = &inner.breakpoints;
        if ib.is_empty() {
            let (x0, f0) = inner.anchor.expect("affine anchor");
            push_preimages(x0, f0, inner.left_slope, f64::NEG_INFINITY, f64::INFINITY);
        } else {
            let n = ib.len();
            push_preimages(ib[0], inner.values[0], inner.left_slope, f64::NEG_INFINITY, ib[0]);
            for i in 0..n - 1 {
                let s = (inner.values[i + 1] - inner.values[i]) / (ib[i + 1] - ib[i]);
                push_preimages(ib[i], inner.values[i], s, ib[i], ib[i + 1]);
            }
            push_preimages(
                ib[n - 1],
                inner.values[n - 1],
                inner.right_slope,
                ib[n - 1],
                f64::INFINITY,
            );
        }
        let points = merge_points(&[ib, &preimages]);
        let tail_slope = |inner_slope: f64| {
            if inner_slope > 0.0 {
                (inner_slope * self.left_slope, inner_slope * self.right_slope)
            } else if inner_slope < 0.0 {
                (inner_slope * self.right_slope, inner_slope * self.left_slope)
            } else {
                (0.0, 0.0)
            }
        };
        // Going left, an increasing inner tail heads to -inf.
        let left = tail_slope(inner.left_slope).0;
        let right = tail_slope(inner.right_slope).1;
        Self::from_points(points, |x| self.eval(inner.eval(x)), left, right)
    }

    /// Exact `∫_lo^hi |self − other|`.
    pub fn l1_distance(&self, other: &Self, lo: f64, hi: f64) -> Result<f64, PwlError> {
        if !(lo < hi) {
            return Err(PwlError::EmptyInterval(lo, hi));
        }
        let d = self.sub(other);
        let mut grid = vec![lo];
        grid.extend(d.breakpoints.iter().copied().filter(|&p| p > lo && p < hi));
        grid.push(hi);
        let mut total = 0.0;
        for w in grid.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let (d0, d1) = (d.eval(x0), d.eval(x1));
            let len = x1 - x0;
            total += if d0 * d1 >= 0.0 {
                0.5 * (d0.abs() + d1.abs()) * len
            } else {
                0.5 * (d0 * d0 + d1 * d1) / (d0 - d1).abs() * len
            };
        }
        Ok(total)
    }
}

/// Sorted union of several point lists with near-duplicates merged.
fn merge_points(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&p) if x - p <= POINT_MERGE_TOL * p.abs().max(1.0) => {}
            _ => out.push(x),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlapSide {
    /// Zero left of the breakpoint, `slope·(x − a)` to the right.
    RightOpen,
    /// `slope·(x − a)` left of the breakpoint, zero to the right.
    LeftOpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flap {
    pub breakpoint: f64,
    pub slope: f64,
    pub side: FlapSide,
}

impl Flap {
    pub fn eval(&self, x: f64) -> f64 {
        let dx = x - self.breakpoint;
        match self.side {
            FlapSide::RightOpen if dx > 0.0 => self.slope * dx,
            FlapSide::LeftOpen if dx < 0.0 => self.slope * dx,
            _ => 0.0,
        }
    }

    /// Mirror image under `x ↦ −x`.
    pub fn reflect(&self) -> Flap {
        Flap {
            breakpoint: -self.breakpoint,
            slope: -self.slope,
            side: match self.side {
                FlapSide::RightOpen => FlapSide::LeftOpen,
                FlapSide::LeftOpen => FlapSide::RightOpen,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlapDecomposition {
    pub offset: f64,
    pub flaps: Vec<Flap>,
}

impl FlapDecomposition {
    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.flaps.iter().map(|f| f.eval(x)).sum::<f64>()
    }
}

/// Writes `f` as a constant plus one right-open flap at the last breakpoint
/// and one left-open flap per breakpoint.
///
/// The left-open slopes come from back substitution on the value equations
/// at the breakpoints, the right-most first.
pub fn decompose_flaps(f: &PwlFunction) -> Result<FlapDecomposition, PwlError> {
    let c = f.canonicalize();
    if c.breakpoints.is_empty() {
        return Err(PwlError::SinglePiece);
    }
    let a = &c.breakpoints;
    let k = a.len();
    let offset = c.values[k - 1];
    let shifted: Vec<f64> = c.values.iter().map(|v| v - offset).collect();

    // t[j] is the slope of the left-open flap at a[j].
    let mut t = vec![0.0; k];
    for i in (0..k - 1).rev() {
        let tail: f64 = (i + 2..k).map(|j| t[j] * (a[i] - a[j])).sum();
        t[i + 1] = (shifted[i] - tail) / (a[i] - a[i + 1]);
    }
    t[0] = c.left_slope - t[1..].iter().sum::<f64>();

    let mut flaps = Vec::with_capacity(k + 1);
    flaps.push(Flap {
        breakpoint: a[k - 1],
        slope: c.right_slope,
        side: FlapSide::RightOpen,
    });
    flaps.extend(a.iter().zip(&t).map(|(&ai, &ti)| Flap {
        breakpoint: ai,
        slope: ti,
        side: FlapSide::LeftOpen,
    }));
    Ok(FlapDecomposition { offset, flaps })
}

/// A point of the open simplex `{0 < a₁ < … < a_p < M}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSimplexPoint")]
pub struct SimplexPoint {
    scale: f64,
    coords: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSimplexPoint {
    scale: f64,
    coords: Vec<f64>,
}

impl TryFrom<RawSimplexPoint> for SimplexPoint {
    type Error = PwlError;

    fn try_from(raw: RawSimplexPoint) -> Result<Self, PwlError> {
        SimplexPoint::new(raw.scale, raw.coords)
    }
}

impl SimplexPoint {
    pub fn new(scale: f64, coords: Vec<f64>) -> Result<Self, PwlError> {
        let ok = scale > 0.0
            && scale.is_finite()
            && !coords.is_empty()
            && coords[0] > 0.0
            && *coords.last().expect("non-empty") < scale
            && coords.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(PwlError::BadSimplexPoint);
        }
        Ok(Self { scale, coords })
    }

    /// `(M/w, 2M/w, …, (w−1)M/w)`.
    pub fn uniform(scale: f64, w: usize) -> Result<Self, PwlError> {
        if w < 2 {
            return Err(PwlError::BadSimplexPoint);
        }
        Self::new(scale, (1..w).map(|i| scale * i as f64 / w as f64).collect())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// The alternating-peak function: 0 up to 0, `M·(i mod 2)` at `aᵢ`,
/// `M − h(a_p)` at `M`, continued linearly past `M`.
pub fn hard_function(a: &SimplexPoint) -> PwlFunction {
    let m = a.scale;
    let p = a.coords.len();
    let mut breakpoints = Vec::with_capacity(p + 1);
    let mut values = Vec::with_capacity(p + 1);
    breakpoints.push(0.0);
    values.push(0.0);
    for (i, &ai) in a.coords.iter().enumerate() {
        breakpoints.push(ai);
        values.push(if (i + 1) % 2 == 1 { m } else { 0.0 });
    }
    let last = values[p];
    let at_m = m - last;
    let right = (at_m - last) / (m - a.coords[p - 1]);
    PwlFunction::new(breakpoints, values, 0.0, right).expect("simplex point is increasing")
}

/// `h_{a^k} ∘ … ∘ h_{a^1}`.
pub fn compose_hard(points: &[SimplexPoint]) -> Result<PwlFunction, PwlError> {
    let first = points.first().ok_or(PwlError::NoSimplexPoints)?;
    if let Some(bad) = points.iter().find(|p| p.scale != first.scale) {
        return Err(PwlError::MismatchedScale(first.scale, bad.scale));
    }
    let mut h = hard_function(first);
    for p in &points[1..] {
        h = hard_function(p).compose(&h);
    }
    Ok(h)
}

/// The sawtooth `s_q`, `q = w^k`, on `[0, 1]`.
pub fn sawtooth(w: usize, k: usize) -> Result<PwlFunction, PwlError> {
    if w < 2 || k == 0 {
        return Err(PwlError::BadSawtooth);
    }
    let a = SimplexPoint::uniform(1.0, w)?;
    compose_hard(&vec![a; k])
}
