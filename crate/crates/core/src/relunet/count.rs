use super::{NetError, ReluNet};
use crate::pwl::PwlFunction;

/// The exact function computed by a scalar-in scalar-out net, obtained by
/// pushing PWL pre-activations through each layer.
pub fn net_to_pwl(net: &ReluNet) -> Result<PwlFunction, NetError> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(NetError::Invalid(format!(
            "expected a 1 -> 1 net, got {} -> {}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    let zero = PwlFunction::constant(0.0);
    let mut units = vec![PwlFunction::identity()];
    for layer in net.layers() {
        units = (0..layer.out_dim())
            .map(|j| affine_combination(&units, layer.weights.row(j).iter(), layer.bias[j]).max(&zero))
            .collect();
    }
    let out = net.output();
    Ok(affine_combination(&units, out.weights.row(0).iter(), out.bias[0]).canonicalize())
}

fn affine_combination<'a>(
    units: &[PwlFunction],
    weights: impl Iterator<Item = &'a f64>,
    bias: f64,
) -> PwlFunction {
    let mut acc = PwlFunction::constant(bias);
    for (u, &w) in units.iter().zip(weights) {
        if w != 0.0 {
            acc = acc.add(&u.scale(w));
        }
    }
    acc.canonicalize()
}

/// Exact number of affine pieces of a scalar net on the whole line.
pub fn count_pieces_1d(net: &ReluNet) -> Result<usize, NetError> {
    Ok(net_to_pwl(net)?.num_pieces())
}

/// Exact number of affine pieces meeting `(lo, hi)`.
pub fn count_pieces_1d_in(net: &ReluNet, lo: f64, hi: f64) -> Result<usize, NetError> {
    Ok(net_to_pwl(net)?.num_pieces_in(lo, hi))
}

/// `2^{k−1}·(w₁+1)·w₂⋯w_k` for hidden widths `w₁..w_k`.
pub fn piece_bound(hidden_widths: &[usize]) -> u128 {
    match hidden_widths.split_first() {
        None => 1,
        Some((&w1, rest)) => {
            let k = hidden_widths.len() as u32;
            (1u128 << (k - 1))
                * (w1 as u128 + 1)
                * rest.iter().map(|&w| w as u128).product::<u128>()
        }
    }
}
