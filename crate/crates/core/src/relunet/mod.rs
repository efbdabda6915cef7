//! Feedforward ReLU networks and constructive builders.

mod builders;
mod count;
mod zonotope;

pub use builders::{
    add_nets, compose_nets, from_pwl, identity_net, ltf_net, max_net, parity_net,
};
pub use count::{count_pieces_1d, count_pieces_1d_in, net_to_pwl, piece_bound};
pub use zonotope::{support_net, zonotope_hard, Zonotope};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::erm2::ConvexError;
use crate::pwl::PwlError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("layer {0} does not chain with its predecessor")]
    BrokenChain(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("hypercube vertex {0:?} lies on the threshold hyperplane")]
    OnHyperplane(Vec<f64>),
    #[error(transparent)]
    Pwl(#[from] PwlError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// `x ↦ W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAffine", into = "RawAffine")]
pub struct AffineMap {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawAffine {
    #[serde(rename = "W")]
    weights: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<RawAffine> for AffineMap {
    type Error = NetError;

    fn try_from(raw: RawAffine) -> Result<Self, NetError> {
        let rows = raw.weights.len();
        if rows != raw.b.len() {
            return Err(NetError::Dimension {
                expected: rows,
                got: raw.b.len(),
            });
        }
        let cols = raw.weights.first().map_or(0, Vec::len);
        if let Some(bad) = raw.weights.iter().find(|r| r.len() != cols) {
            return Err(NetError::Dimension {
                expected: cols,
                got: bad.len(),
            });
        }
        Ok(AffineMap {
            weights: DMatrix::from_fn(rows, cols, |i, j| raw.weights[i][j]),
            bias: DVector::from_vec(raw.b),
        })
    }
}

impl From<AffineMap> for RawAffine {
    fn from(m: AffineMap) -> Self {
        RawAffine {
            weights: m
                .weights
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            b: m.bias.iter().copied().collect(),
        }
    }
}

impl AffineMap {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self, NetError> {
        if weights.nrows() != bias.len() {
            return Err(NetError::Dimension {
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.weights * x + &self.bias
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            weights: &self.weights * &inner.weights,
            bias: &self.weights * &inner.bias + &self.bias,
        }
    }
}

/// Hidden layers with ReLU after each, followed by an affine output map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct ReluNet {
    layers: Vec<AffineMap>,
    output: AffineMap,
}

#[derive(Serialize, Deserialize)]
struct RawNet {
    layers: Vec<AffineMap>,
    output: AffineMap,
}

impl TryFrom<RawNet> for ReluNet {
    type Error = NetError;

    fn try_from(raw: RawNet) -> Result<Self, NetError> {
        ReluNet::new(raw.layers, raw.output)
    }
}

impl From<ReluNet> for RawNet {
    fn from(n: ReluNet) -> Self {
        RawNet {
            layers: n.layers,
            output: n.output,
        }
    }
}

impl ReluNet {
    pub fn new(layers: Vec<AffineMap>, output: AffineMap) -> Result<Self, NetError> {
        for i in 1..layers.len() {
            if layers[i].in_dim() != layers[i - 1].out_dim() {
                return Err(NetError::BrokenChain(i));
            }
        }
        if let Some(last) = layers.last() {
            if output.in_dim() != last.out_dim() {
                return Err(NetError::BrokenChain(layers.len()));
            }
        }
        if layers.first().map_or(output.in_dim(), AffineMap::in_dim) == 0 || output.out_dim() == 0 {
            return Err(NetError::Invalid("zero input or output dimension".into()));
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[AffineMap] {
        &self.layers
    }

    pub fn output(&self) -> &AffineMap {
        &self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map_or(self.output.in_dim(), AffineMap::in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.output.out_dim()
    }

    /// Number of hidden layers plus one.
    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }

    /// Total number of hidden units.
    pub fn size(&self) -> usize {
        self.layers.iter().map(AffineMap::out_dim).sum()
    }

    pub fn width(&self) -> usize {
        self.layers.iter().map(AffineMap::out_dim).max().unwrap_or(0)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers.iter().map(AffineMap::out_dim).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut h = DVector::from_column_slice(x);
        for layer in &self.layers {
            h = layer.apply(&h).map(|v| v.max(0.0));
        }
        Ok(self.output.apply(&h).iter().copied().collect())
    }

    /// Forward pass of a scalar-in scalar-out net.
    pub fn eval_scalar(&self, x: f64) -> Result<f64, NetError> {
        if self.output_dim() != 1 {
            return Err(NetError::Dimension {
                expected: 1,
                got: self.output_dim(),
            });
        }
        Ok(self.forward(&[x])?[0])
    }

    pub(crate) fn from_parts(layers: Vec<AffineMap>, output: AffineMap) -> Self {
        Self::new(layers, output).expect("builder produced a consistent net")
    }
}
