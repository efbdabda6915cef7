use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{compose_nets, from_pwl, AffineMap, NetError, ReluNet};
use crate::erm2::strictly_separable;
use crate::pwl::{hard_function, PwlError, SimplexPoint};

/// Minkowski sum of the segments `[−bⁱ, bⁱ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawZonotope")]
pub struct Zonotope {
    generators: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawZonotope {
    generators: Vec<Vec<f64>>,
}

impl TryFrom<RawZonotope> for Zonotope {
    type Error = NetError;

    fn try_from(raw: RawZonotope) -> Result<Self, NetError> {
        Zonotope::new(raw.generators)
    }
}

impl Zonotope {
    pub fn new(generators: Vec<Vec<f64>>) -> Result<Self, NetError> {
        let n = generators.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(NetError::Invalid("need at least one nonempty generator".into()));
        }
        if let Some(g) = generators.iter().find(|g| g.len() != n) {
            return Err(NetError::Dimension {
                expected: n,
                got: g.len(),
            });
        }
        if generators.iter().flatten().any(|v| !v.is_finite()) {
            return Err(NetError::Invalid("non-finite generator".into()));
        }
        Ok(Self { generators })
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators[0].len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// `γ_Z(r) = Σᵢ |⟨r, bⁱ⟩|`.
    pub fn support_eval(&self, r: &[f64]) -> Result<f64, NetError> {
        if r.len() != self.dim() {
            return Err(NetError::Dimension {
                expected: self.dim(),
                got: r.len(),
            });
        }
        Ok(self
            .generators
            .iter()
            .map(|g| g.iter().zip(r).map(|(a, b)| a * b).sum::<f64>().abs())
            .sum())
    }

    /// Sign patterns `λ ∈ {±1}ᵐ` (bit set means −1) whose point `Σ λᵢ bⁱ` is a
    /// vertex. Zero generators are dropped first.
    pub fn vertex_patterns(&self) -> Result<Vec<u32>, NetError> {
        let nonzero: Vec<Vec<f64>> = self
            .generators
            .iter()
            .filter(|g| g.iter().any(|&v| v != 0.0))
            .cloned()
            .collect();
        let m = nonzero.len();
        if m > 20 {
            return Err(NetError::Invalid(format!("{m} generators exceed 20")));
        }
        let mut out = Vec::new();
        for mask in 0u32..1 << m {
            let positive: Vec<bool> = (0..m).map(|i| mask >> i & 1 == 0).collect();
            if strictly_separable(&nonzero, &positive, false)? {
                out.push(mask);
            }
        }
        Ok(out)
    }

    pub fn vertex_count(&self) -> Result<usize, NetError> {
        Ok(self.vertex_patterns()?.len())
    }

    /// `Σ_{i<n} C(m−1, i)`, the count quoted for zonotopes in general position.
    pub fn vertex_count_formula(&self) -> u128 {
        let m = self.num_generators() as u128;
        let n = self.dim() as u128;
        (0..n).map(|i| binomial(m - 1, i)).sum()
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Two units per generator: `|⟨r,b⟩| = max(0,⟨r,b⟩) + max(0,−⟨r,b⟩)`.
pub fn support_net(z: &Zonotope) -> ReluNet {
    let m = z.num_generators();
    let n = z.dim();
    let mut w = DMatrix::zeros(2 * m, n);
    for (i, g) in z.generators.iter().enumerate() {
        for (c, &v) in g.iter().enumerate() {
            w[(2 * i, c)] = v;
            w[(2 * i + 1, c)] = -v;
        }
    }
    ReluNet::from_parts(
        vec![AffineMap {
            weights: w,
            bias: DVector::zeros(2 * m),
        }],
        AffineMap {
            weights: DMatrix::from_element(1, 2 * m, 1.0),
            bias: DVector::zeros(1),
        },
    )
}

/// `H_{a¹..aᵏ} ∘ γ_Z` as a net with `k + 1` hidden layers.
pub fn zonotope_hard(points: &[SimplexPoint], z: &Zonotope) -> Result<ReluNet, NetError> {
    let first = points.first().ok_or(PwlError::NoSimplexPoints)?;
    if let Some(bad) = points.iter().find(|p| p.scale() != first.scale()) {
        return Err(PwlError::MismatchedScale(first.scale(), bad.scale()).into());
    }
    let mut net = support_net(z);
    for a in points {
        net = compose_nets(&from_pwl(&hard_function(a))?, &net)?;
    }
    Ok(net)
}
