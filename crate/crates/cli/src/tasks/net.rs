use anyhow::{ensure, Context, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use relu_core::pwl::{sawtooth, PwlFunction};
use relu_core::relunet::{count_pieces_1d, piece_bound, support_net, AffineMap, ReluNet, Zonotope};
use relu_core::rng::seeded;

use crate::config::{NetSource, NetTask};
use crate::report::{num, Recorder};

/// `max_λ ⟨r, Σλᵢbⁱ⟩` over all sign vectors.
fn vertex_max(gens: &[Vec<f64>], r: &[f64]) -> f64 {
    (0u32..1 << gens.len())
        .map(|mask| {
            gens.iter()
                .enumerate()
                .map(|(i, g)| {
                    let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    s * g.iter().zip(r).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn random_affine(out: usize, inp: usize, rng: &mut impl Rng) -> Result<AffineMap> {
    Ok(AffineMap::new(
        DMatrix::from_fn(out, inp, |_, _| rng.gen_range(-1.0..1.0)),
        DVector::from_fn(out, |_, _| rng.gen_range(-1.0..1.0)),
    )?)
}

fn load_net(src: &NetSource) -> Result<ReluNet> {
    match src {
        NetSource::Inline(net) => Ok(net.clone()),
        NetSource::File(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing net {}", path.display()))
        }
    }
}

pub fn run(task: &NetTask, rec: &mut Recorder) -> Result<()> {
    match task {
        NetTask::Evaluate { net, inputs, expected, tol } => {
            let net = load_net(net)?;
            if let Some(e) = expected {
                ensure!(e.len() == inputs.len(), "{} expected outputs for {} inputs", e.len(), inputs.len());
            }
            let outputs = inputs.iter().map(|x| net.forward(x)).collect::<Result<Vec<_>, _>>()?;
            let (n, m) = (net.input_dim(), net.output_dim());
            let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
            header.extend((1..=m).map(|j| format!("y{j}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = inputs
                .iter()
                .zip(&outputs)
                .map(|(x, y)| x.iter().chain(y.iter()).map(|v| num(*v)).collect())
                .collect();
            rec.series("outputs", &header, &rows)?;
            let pieces = if n == 1 && m == 1 { Some(count_pieces_1d(&net)?) } else { None };
            let mut worst = None;
            if let Some(e) = expected {
                let mut gap = 0.0_f64;
                for (y, want) in outputs.iter().zip(e) {
                    ensure!(want.len() == m, "expected outputs must have {m} entries");
                    gap = y.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(gap, f64::max);
                }
                rec.verdict("outputs", gap <= *tol, format!("max error {gap:e}, tol {tol:e}"));
                worst = Some(gap);
            }
            rec.result(serde_json::json!({
                "depth": net.depth(),
                "size": net.size(),
                "pieces": pieces,
                "max_error": worst,
                "outputs": outputs,
            }))
        }
        NetTask::ZonotopeSweep { count, max_dim, max_generators, directions, tol, seed } => {
            ensure!(*max_dim >= 1 && *max_generators >= 1, "need max_dim, max_generators >= 1");
            ensure!(*max_generators <= 20, "brute force is limited to 20 generators");
            let mut rows = Vec::new();
            let (mut worst, mut worst_net) = (0.0_f64, 0.0_f64);
            for i in 0..*count {
                let mut rng = seeded(*seed, i as u64);
                let n = rng.gen_range(1..=*max_dim);
                let m = rng.gen_range(1..=*max_generators);
                let gens: Vec<Vec<f64>> =
                    (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let z = Zonotope::new(gens.clone())?;
                let net = support_net(&z);
                let (mut gap, mut gap_net) = (0.0_f64, 0.0_f64);
                for _ in 0..*directions {
                    let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let s = z.support_eval(&r)?;
                    gap = gap.max((s - vertex_max(&gens, &r)).abs());
                    gap_net = gap_net.max((net.forward(&r)?[0] - s).abs());
                }
                worst = worst.max(gap);
                worst_net = worst_net.max(gap_net);
                rows.push(vec![i.to_string(), n.to_string(), m.to_string(), num(gap), num(gap_net)]);
            }
            rec.series("zonotopes", &["index", "dim", "generators", "vertex_gap", "net_gap"], &rows)?;
            rec.verdict("support vs vertex max", worst <= *tol, format!("max gap {worst:e} over {count} zonotopes"));
            rec.verdict("support net", worst_net <= *tol, format!("max gap {worst_net:e}"));
            rec.result(serde_json::json!({ "zonotopes": count, "vertex_gap": worst, "net_gap": worst_net }))
        }
        NetTask::TriangleL1 { qs, tol } => {
            let mut rows = Vec::new();
            let mut worst = 0.0_f64;
            for &q in qs {
                ensure!(q >= 2 && q.is_power_of_two(), "q must be a power of two, got {q}");
                let s = sawtooth(2, q.trailing_zeros() as usize)?;
                let d = s.l1_distance(&PwlFunction::constant(0.5), 0.0, 2.0 / q as f64)?;
                let want = 1.0 / (2.0 * q as f64);
                worst = worst.max((d - want).abs());
                rows.push(vec![q.to_string(), num(d), num(want)]);
            }
            rec.series("triangle-l1", &["q", "integral", "expected"], &rows)?;
            rec.verdict("per-triangle L1", worst <= *tol, format!("max error {worst:e}"));
            rec.result(serde_json::json!({ "max_error": worst }))
        }
        NetTask::PieceCount { widths, trials, seed } => {
            ensure!(!widths.is_empty() && widths.iter().all(|w| *w > 0), "widths must be positive");
            let bound = piece_bound(widths);
            let mut rows = Vec::new();
            let mut over = 0;
            let mut most = 0;
            for i in 0..*trials {
                let mut rng = seeded(*seed, i as u64);
                let mut prev = 1;
                let mut layers = Vec::new();
                for &w in widths {
                    layers.push(random_affine(w, prev, &mut rng)?);
                    prev = w;
                }
                let net = ReluNet::new(layers, random_affine(1, prev, &mut rng)?)?;
                let pieces = count_pieces_1d(&net)?;
                most = most.max(pieces);
                over += (pieces as u128 > bound) as usize;
                rows.push(vec![i.to_string(), pieces.to_string()]);
            }
            rec.series("pieces", &["trial", "pieces"], &rows)?;
            rec.verdict("piece bound", over == 0, format!("max {most} pieces, bound {bound}"));
            rec.result(serde_json::json!({ "bound": bound.to_string(), "max_pieces": most }))
        }
    }
}
