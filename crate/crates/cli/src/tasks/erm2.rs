use anyhow::{ensure, Result};
use rand::Rng;
use relu_core::erm2::{solve_exact, solve_exact_1d, Dataset, ErmLimits, Loss};
use relu_core::rng::seeded;

use crate::config::{Erm2Task, ErmSolver};
use crate::report::{num, Recorder};

type Units = Vec<(Vec<f64>, f64, f64)>;

fn net_eval(units: &Units, x: &[f64]) -> f64 {
    units
        .iter()
        .map(|(a, b, s)| s * (a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + b).max(0.0))
        .sum()
}

fn random_units(w: usize, n: usize, rng: &mut impl Rng) -> Units {
    (0..w)
        .map(|_| {
            let a = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            (a, rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
        })
        .collect()
}

fn mean_sq(units: &Units, data: &Dataset) -> f64 {
    data.points
        .iter()
        .zip(&data.labels)
        .map(|(x, y)| (net_eval(units, x) - y).powi(2))
        .sum::<f64>()
        / data.len() as f64
}

pub fn run(task: &Erm2Task, rec: &mut Recorder) -> Result<()> {
    match task {
        Erm2Task::Solve { points, labels, width, loss, solver, max_loss, limits } => {
            let data = Dataset::new(points.clone(), labels.clone())?;
            let limits = limits.unwrap_or_default();
            let dim = data.dim();
            let (loss_value, predictions, result) = match solver {
                ErmSolver::General => {
                    let s = solve_exact(&data, *width, *loss, &limits)?;
                    let preds: Vec<f64> = data.points.iter().map(|x| s.predict(x)).collect();
                    (s.loss, preds, serde_json::to_value(&s)?)
                }
                ErmSolver::Scalar => {
                    let s = solve_exact_1d(&data, *width, *loss, &limits)?;
                    let preds = match &s.function {
                        Some(f) => data.points.iter().map(|x| f.eval(x[0])).collect(),
                        None => vec![f64::NAN; data.len()],
                    };
                    (s.loss, preds, serde_json::to_value(&s)?)
                }
            };
            let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
            header.extend(["y".to_string(), "prediction".to_string()]);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = data
                .points
                .iter()
                .zip(&data.labels)
                .zip(&predictions)
                .map(|((x, y), p)| {
                    let mut r: Vec<String> = x.iter().map(|v| num(*v)).collect();
                    r.extend([num(*y), num(*p)]);
                    r
                })
                .collect();
            rec.series("predictions", &header, &rows)?;
            if let Some(cap) = max_loss {
                rec.verdict("loss", loss_value <= *cap, format!("loss {loss_value:e}, cap {cap:e}"));
            }
            rec.result(serde_json::json!({ "loss": loss_value, "solution": result }))
        }
        Erm2Task::OptimalitySweep {
            instances,
            max_points,
            max_dim,
            max_width,
            random_nets,
            slack,
            agreement_tol,
            planted,
            planted_tol,
            seed,
        } => {
            ensure!(*max_points >= 2 && *max_dim >= 1 && *max_width >= 1, "sizes must be positive");
            let limits = ErmLimits::default();
            let mut rows = Vec::new();
            let (mut beaten, mut scalar, mut disagree) = (0, 0, 0);
            for i in 0..*instances {
                let mut rng = seeded(*seed, i as u64);
                let d = rng.gen_range(2..=*max_points);
                let n = rng.gen_range(1..=*max_dim);
                let w = rng.gen_range(1..=*max_width);
                let pts: Vec<Vec<f64>> =
                    (0..d).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let ys = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let data = Dataset::new(pts, ys)?;
                let exact = solve_exact(&data, w, Loss::Squared, &limits)?.loss;
                let best = (0..*random_nets)
                    .map(|_| mean_sq(&random_units(w, n, &mut rng), &data))
                    .fold(f64::INFINITY, f64::min);
                beaten += (exact > best + slack) as usize;
                let pieces = if n == 1 {
                    scalar += 1;
                    let l = solve_exact_1d(&data, w, Loss::Squared, &limits)?.loss;
                    disagree += ((l - exact).abs() > *agreement_tol) as usize;
                    num(l)
                } else {
                    String::new()
                };
                rows.push(vec![
                    i.to_string(),
                    d.to_string(),
                    n.to_string(),
                    w.to_string(),
                    num(exact),
                    num(best),
                    pieces,
                ]);
            }
            rec.series(
                "instances",
                &["index", "points", "dim", "width", "exact_loss", "best_random", "piecewise_loss"],
                &rows,
            )?;
            rec.verdict(
                "global optimality",
                beaten == 0,
                format!("{beaten} of {instances} instances beaten by {random_nets} random nets"),
            );
            rec.advisory(
                "scalar agreement",
                disagree == 0,
                format!(
                    "{disagree} of {scalar} scalar instances differ by more than {agreement_tol:e}; \
                     bias-free w-unit nets and w-piece fits are different classes"
                ),
            );
            let mut worst = 0.0_f64;
            let mut planted_rows = Vec::new();
            for i in 0..*planted {
                let mut rng = seeded(seed.wrapping_add(1_000_003), i as u64);
                let d = rng.gen_range(3..=*max_points.max(&3));
                let n = rng.gen_range(1..=*max_dim);
                let w = rng.gen_range(1..=*max_width);
                let truth = random_units(w, n, &mut rng);
                let pts: Vec<Vec<f64>> =
                    (0..d).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let ys = pts.iter().map(|x| net_eval(&truth, x)).collect();
                let data = Dataset::new(pts, ys)?;
                let l = solve_exact(&data, w, Loss::Squared, &limits)?.loss;
                worst = worst.max(l);
                planted_rows.push(vec![i.to_string(), d.to_string(), n.to_string(), w.to_string(), num(l)]);
            }
            rec.series("planted", &["index", "points", "dim", "width", "loss"], &planted_rows)?;
            rec.verdict(
                "planted recovery",
                worst <= *planted_tol,
                format!("worst loss {worst:e} over {planted} planted nets"),
            );
            rec.result(serde_json::json!({
                "instances": instances,
                "beaten": beaten,
                "scalar_instances": scalar,
                "scalar_disagreements": disagree,
                "planted_worst_loss": worst,
            }))
        }
    }
}
