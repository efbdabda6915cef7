use anyhow::{ensure, Result};
use rand::Rng;
use relu_core::pwl::{compose_hard, decompose_flaps, hard_function, PwlFunction, SimplexPoint};
use relu_core::relunet::{compose_nets, count_pieces_1d_in, from_pwl};
use relu_core::rng::seeded;
use serde::Serialize;

use super::{grid, random_pwl};
use crate::config::{FunctionSource, PwlTask};
use crate::report::{num, Recorder};

#[derive(Serialize)]
struct Decomposed {
    function: PwlFunction,
    pieces: usize,
    flaps: relu_core::pwl::FlapDecomposition,
    net_size: usize,
    size_cap: usize,
    max_error: f64,
    net_max_error: f64,
}

/// Net size allowed for `f`: one unit per piece, one fewer with a flat tail.
fn size_cap(f: &PwlFunction) -> usize {
    let p = f.num_pieces();
    if f.right_slope() == 0.0 || f.left_slope() == 0.0 {
        p - 1
    } else {
        p
    }
}

pub fn run(task: &PwlTask, rec: &mut Recorder) -> Result<()> {
    match task {
        PwlTask::Decompose { function, lo, hi, points, tol } => {
            ensure!(lo < hi && *points >= 2, "need lo < hi and at least 2 grid points");
            let f = match function {
                FunctionSource::Explicit { function } => function.clone(),
                FunctionSource::Random { pieces, seed } => {
                    ensure!(*pieces >= 2, "need at least 2 pieces");
                    random_pwl(*pieces, &mut seeded(*seed, 0))
                }
            };
            let d = decompose_flaps(&f)?;
            let net = from_pwl(&f)?;
            let mut rows = Vec::with_capacity(*points);
            let (mut worst, mut worst_net) = (0.0_f64, 0.0_f64);
            for x in grid(*lo, *hi, *points) {
                let (y, r, n) = (f.eval(x), d.eval(x), net.eval_scalar(x)?);
                worst = worst.max((r - y).abs());
                worst_net = worst_net.max((n - y).abs());
                rows.push(vec![num(x), num(y), num(r), num(n), num((r - y).abs())]);
            }
            rec.series("reconstruction", &["x", "f", "flaps", "net", "error"], &rows)?;
            let cap = size_cap(&f);
            rec.verdict(
                "flap reconstruction",
                worst < *tol && worst_net < *tol,
                format!("max error {worst:e}, net {worst_net:e}, tol {tol:e}"),
            );
            rec.verdict(
                "net size",
                net.size() <= cap,
                format!("{} units for {} pieces (cap {cap})", net.size(), f.num_pieces()),
            );
            rec.result(Decomposed {
                pieces: f.num_pieces(),
                flaps: d,
                net_size: net.size(),
                size_cap: cap,
                max_error: worst,
                net_max_error: worst_net,
                function: f,
            })
        }
        PwlTask::FlapSweep { count, min_pieces, max_pieces, points, tol, seed } => {
            ensure!(*min_pieces >= 2 && min_pieces <= max_pieces, "need 2 <= min_pieces <= max_pieces");
            ensure!(*points >= 2, "need at least 2 grid points");
            let mut rows = Vec::with_capacity(*count);
            let (mut worst, mut oversized) = (0.0_f64, 0usize);
            for i in 0..*count {
                let mut rng = seeded(*seed, i as u64);
                let pieces = rng.gen_range(*min_pieces..=*max_pieces);
                let f = random_pwl(pieces, &mut rng);
                let d = decompose_flaps(&f)?;
                let b = f.breakpoints();
                let err = grid(b[0] - 3.0, b[b.len() - 1] + 3.0, *points)
                    .map(|x| (d.eval(x) - f.eval(x)).abs())
                    .fold(0.0, f64::max);
                let size = from_pwl(&f)?.size();
                let cap = size_cap(&f);
                worst = worst.max(err);
                oversized += (size > cap) as usize;
                rows.push(vec![
                    i.to_string(),
                    f.num_pieces().to_string(),
                    num(err),
                    size.to_string(),
                    cap.to_string(),
                ]);
            }
            rec.series("flap-sweep", &["index", "pieces", "max_error", "net_size", "size_cap"], &rows)?;
            rec.verdict(
                "flap reconstruction",
                worst < *tol,
                format!("max error {worst:e} over {count} functions, tol {tol:e}"),
            );
            rec.verdict("net size", oversized == 0, format!("{oversized} nets above the size cap"));
            rec.result(serde_json::json!({ "functions": count, "max_error": worst, "oversized": oversized }))
        }
        PwlTask::HardCounts { scale, p_values, k_values, seed } => {
            let mut rng = seeded(*seed, 0);
            let mut rows = Vec::new();
            let mut bad = 0;
            for &p in p_values {
                for &k in k_values {
                    ensure!(p >= 1 && k >= 1, "p and k must be positive");
                    let points = (0..k)
                        .map(|_| {
                            let mut c: Vec<f64> =
                                (0..p).map(|_| rng.gen_range(0.05..0.95) * scale).collect();
                            c.sort_by(f64::total_cmp);
                            SimplexPoint::new(*scale, c)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let h = compose_hard(&points)?;
                    let mut net = from_pwl(&hard_function(&points[0]))?;
                    for a in &points[1..] {
                        net = compose_nets(&from_pwl(&hard_function(a))?, &net)?;
                    }
                    let want = (p + 1).pow(k);
                    let got = h.num_pieces_in(0.0, *scale);
                    let from_net = count_pieces_1d_in(&net, 0.0, *scale)?;
                    bad += (got != want || from_net != want) as usize;
                    rows.push(vec![
                        p.to_string(),
                        k.to_string(),
                        got.to_string(),
                        from_net.to_string(),
                        want.to_string(),
                    ]);
                }
            }
            rec.series("hard-counts", &["p", "k", "pieces", "net_pieces", "expected"], &rows)?;
            rec.verdict("(p+1)^k pieces", bad == 0, format!("{bad} of {} pairs off", rows.len()));
            let figure = compose_hard(&[
                SimplexPoint::new(1.0, vec![0.3, 0.6])?,
                SimplexPoint::new(1.0, vec![0.4])?,
            ])?
            .num_pieces_in(0.0, 1.0);
            rec.verdict("3-piece after 2-piece", figure == 6, format!("{figure} pieces"));
            rec.result(serde_json::json!({ "pairs": rows.len(), "mismatches": bad, "figure_pieces": figure }))
        }
    }
}
