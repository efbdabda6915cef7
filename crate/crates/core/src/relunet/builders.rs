use nalgebra::{DMatrix, DVector};

use super::{AffineMap, NetError, ReluNet};
use crate::pwl::{decompose_flaps, FlapDecomposition, FlapSide, PwlFunction};

/// Exact two-layer net for a univariate PWL function, one unit per flap with
/// nonzero slope.
///
/// When the left tail is flat and the right is not, the reflected function is
/// decomposed so that the flat tail is the one that costs no unit.
pub fn from_pwl(f: &PwlFunction) -> Result<ReluNet, NetError> {
    let c = f.canonicalize();
    if c.is_affine() {
        let s = c.left_slope();
        let hidden = AffineMap::new(
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            DVector::zeros(2),
        )?;
        let output = AffineMap::new(
            DMatrix::from_row_slice(1, 2, &[s, -s]),
            DVector::from_element(1, c.eval(0.0)),
        )?;
        return Ok(ReluNet::from_parts(vec![hidden], output));
    }
    let decomposition = if c.left_slope() == 0.0 && c.right_slope() != 0.0 {
        let mirrored = decompose_flaps(&c.reflect())?;
        FlapDecomposition {
            offset: mirrored.offset,
            flaps: mirrored.flaps.iter().map(|fl| fl.reflect()).collect(),
        }
    } else {
        decompose_flaps(&c)?
    };
    let mut w = Vec::new();
    let mut b = Vec::new();
    let mut out = Vec::new();
    for flap in decomposition.flaps.iter().filter(|fl| fl.slope != 0.0) {
        let mag = flap.slope.abs();
        let sign = flap.slope.signum();
        match flap.side {
            FlapSide::RightOpen => {
                w.push(mag);
                b.push(-mag * flap.breakpoint);
                out.push(sign);
            }
            FlapSide::LeftOpen => {
                w.push(-mag);
                b.push(mag * flap.breakpoint);
                out.push(-sign);
            }
        }
    }
    let units = w.len();
    let hidden = AffineMap::new(DMatrix::from_vec(units, 1, w), DVector::from_vec(b))?;
    let output = AffineMap::new(
        DMatrix::from_vec(1, units, out),
        DVector::from_element(1, decomposition.offset),
    )?;
    Ok(ReluNet::from_parts(vec![hidden], output))
}

/// `x = max(0, x) − max(0, −x)` coordinatewise; `2d` hidden units.
pub fn identity_net(d: usize) -> Result<ReluNet, NetError> {
    if d == 0 {
        return Err(NetError::Invalid("dimension must be positive".into()));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let mut w = DMatrix::zeros(2 * d, d);
    w.view_mut((0, 0), (d, d)).copy_from(&eye);
    w.view_mut((d, 0), (d, d)).copy_from(&(-&eye));
    let hidden = AffineMap::new(w.clone(), DVector::zeros(2 * d))?;
    let output = AffineMap::new(w.transpose(), DVector::zeros(d))?;
    Ok(ReluNet::from_parts(vec![hidden], output))
}

/// `outer ∘ inner`; the output map of `inner` is folded into the first layer
/// of `outer`, so hidden layers and sizes add.
pub fn compose_nets(outer: &ReluNet, inner: &ReluNet) -> Result<ReluNet, NetError> {
    if outer.input_dim() != inner.output_dim() {
        return Err(NetError::Dimension {
            expected: outer.input_dim(),
            got: inner.output_dim(),
        });
    }
    let mut layers = inner.layers.clone();
    match outer.layers.split_first() {
        Some((first, rest)) => {
            layers.push(first.after(&inner.output));
            layers.extend(rest.iter().cloned());
            Ok(ReluNet::from_parts(layers, outer.output.clone()))
        }
        None => Ok(ReluNet::from_parts(layers, outer.output.after(&inner.output))),
    }
}

/// Appends one hidden layer that passes the output through unchanged.
fn pad_once(net: &ReluNet) -> ReluNet {
    let d = net.output_dim();
    let o = &net.output;
    let mut w = DMatrix::zeros(2 * d, o.in_dim());
    w.view_mut((0, 0), (d, o.in_dim())).copy_from(&o.weights);
    w.view_mut((d, 0), (d, o.in_dim())).copy_from(&(-&o.weights));
    let mut b = DVector::zeros(2 * d);
    b.rows_mut(0, d).copy_from(&o.bias);
    b.rows_mut(d, d).copy_from(&(-&o.bias));
    let mut out = DMatrix::zeros(d, 2 * d);
    out.view_mut((0, 0), (d, d))
        .copy_from(&DMatrix::identity(d, d));
    out.view_mut((0, d), (d, d))
        .copy_from(&(-DMatrix::<f64>::identity(d, d)));
    let mut layers = net.layers.clone();
    layers.push(AffineMap {
        weights: w,
        bias: b,
    });
    ReluNet::from_parts(
        layers,
        AffineMap {
            weights: out,
            bias: DVector::zeros(d),
        },
    )
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

fn stack_bias(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// `f + g`. The shallower net is first extended with identity layers
/// (`2·output_dim` units each) so both have the same depth.
pub fn add_nets(f: &ReluNet, g: &ReluNet) -> Result<ReluNet, NetError> {
    if f.input_dim() != g.input_dim() {
        return Err(NetError::Dimension {
            expected: f.input_dim(),
            got: g.input_dim(),
        });
    }
    if f.output_dim() != g.output_dim() {
        return Err(NetError::Dimension {
            expected: f.output_dim(),
            got: g.output_dim(),
        });
    }
    let (mut f, mut g) = (f.clone(), g.clone());
    while f.depth() < g.depth() {
        f = pad_once(&f);
    }
    while g.depth() < f.depth() {
        g = pad_once(&g);
    }
    let mut layers = Vec::with_capacity(f.layers.len());
    for (i, (lf, lg)) in f.layers.iter().zip(&g.layers).enumerate() {
        let weights = if i == 0 {
            let mut w = DMatrix::zeros(lf.out_dim() + lg.out_dim(), lf.in_dim());
            w.view_mut((0, 0), lf.weights.shape()).copy_from(&lf.weights);
            w.view_mut((lf.out_dim(), 0), lg.weights.shape())
                .copy_from(&lg.weights);
            w
        } else {
            block_diag(&lf.weights, &lg.weights)
        };
        layers.push(AffineMap {
            weights,
            bias: stack_bias(&lf.bias, &lg.bias),
        });
    }
    let (of, og) = (&f.output, &g.output);
    let mut w = DMatrix::zeros(of.out_dim(), of.in_dim() + og.in_dim());
    w.view_mut((0, 0), of.weights.shape()).copy_from(&of.weights);
    w.view_mut((0, of.in_dim()), og.weights.shape())
        .copy_from(&og.weights);
    let output = AffineMap {
        weights: w,
        bias: &of.bias + &og.bias,
    };
    Ok(ReluNet::from_parts(layers, output))
}

/// One round of pairwise maxima: `m` inputs to `⌈m/2⌉` outputs.
fn max_level(m: usize) -> ReluNet {
    let pairs = m / 2;
    let odd = m % 2;
    let units = 4 * pairs + 2 * odd;
    let outs = pairs + odd;
    let mut w = DMatrix::zeros(units, m);
    let mut out = DMatrix::zeros(outs, units);
    for p in 0..pairs {
        let (x, y, u) = (2 * p, 2 * p + 1, 4 * p);
        for (r, (cx, cy)) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)]
            .into_iter()
            .enumerate()
        {
            w[(u + r, x)] = cx;
            w[(u + r, y)] = cy;
        }
        // max = ½(x+y) + ½|x−y|
        for (r, c) in [0.5, -0.5, 0.5, 0.5].into_iter().enumerate() {
            out[(p, u + r)] = c;
        }
    }
    if odd == 1 {
        let u = 4 * pairs;
        w[(u, m - 1)] = 1.0;
        w[(u + 1, m - 1)] = -1.0;
        out[(pairs, u)] = 1.0;
        out[(pairs, u + 1)] = -1.0;
    }
    ReluNet::from_parts(
        vec![AffineMap {
            weights: w,
            bias: DVector::zeros(units),
        }],
        AffineMap {
            weights: out,
            bias: DVector::zeros(outs),
        },
    )
}

/// Maximum of `n` inputs by a balanced tree of 4-unit pairwise gadgets.
pub fn max_net(n: usize) -> Result<ReluNet, NetError> {
    if n < 2 {
        return Err(NetError::Invalid("max_net needs n >= 2".into()));
    }
    let mut net = max_level(n);
    let mut m = n.div_ceil(2);
    while m > 1 {
        net = compose_nets(&max_level(m), &net)?;
        m = m.div_ceil(2);
    }
    Ok(net)
}

/// Parity of `k` bits as a PWL function of their sum; `k + 1` hidden units.
pub fn parity_net(k: usize) -> Result<ReluNet, NetError> {
    if k == 0 {
        return Err(NetError::Invalid("parity_net needs k >= 1".into()));
    }
    let breakpoints: Vec<f64> = (0..=k).map(|j| j as f64).collect();
    let values: Vec<f64> = (0..=k).map(|j| (j % 2) as f64).collect();
    let lift = PwlFunction::new(breakpoints, values, 0.0, 0.0)?;
    let scalar = from_pwl(&lift)?;
    let sum = AffineMap {
        weights: DMatrix::from_element(1, k, 1.0),
        bias: DVector::zeros(1),
    };
    let first = scalar.layers[0].after(&sum);
    Ok(ReluNet::from_parts(vec![first], scalar.output.clone()))
}

/// `sign(⟨a, x⟩ + b)` on `{−1, 1}ⁿ` with two units:
/// `−1 + (2/p)(relu(z + p) − relu(z))`, `p` the smallest negative margin.
pub fn ltf_net(a: &[f64], b: f64) -> Result<ReluNet, NetError> {
    let n = a.len();
    if n == 0 || n > 20 {
        return Err(NetError::Invalid(format!("dimension {n} outside 1..=20")));
    }
    if !(a.iter().all(|v| v.is_finite()) && b.is_finite()) {
        return Err(NetError::Invalid("non-finite threshold".into()));
    }
    let scale = a.iter().map(|v| v.abs()).sum::<f64>() + b.abs();
    let tol = 1e-12 * scale.max(1.0);
    let mut margin = f64::INFINITY;
    for mask in 0u32..1 << n {
        let x: Vec<f64> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let z: f64 = a.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() + b;
        if z.abs() <= tol {
            return Err(NetError::OnHyperplane(x));
        }
        if z < 0.0 {
            margin = margin.min(-z);
        }
    }
    let p = if margin.is_finite() { margin } else { 1.0 };
    let row = DMatrix::from_row_slice(1, n, a);
    let mut w = DMatrix::zeros(2, n);
    w.row_mut(0).copy_from(&row);
    w.row_mut(1).copy_from(&row);
    let hidden = AffineMap {
        weights: w,
        bias: DVector::from_row_slice(&[b + p, b]),
    };
    let output = AffineMap {
        weights: DMatrix::from_row_slice(1, 2, &[2.0 / p, -2.0 / p]),
        bias: DVector::from_element(1, -1.0),
    };
    Ok(ReluNet::from_parts(vec![hidden], output))
}
