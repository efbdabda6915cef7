use anyhow::{ensure, Result};
use nalgebra::DVector;
use rand::Rng;
use relu_core::rng::seeded;
use relu_core::tron::{
    azuma_check, symmetric_identity_gap, glm_tron, measure_contraction, neuro_tron, noisy_gd, random_arch,
    recursion_horizon, simulate_recursion, symmetric_gaussian, NoisyGdConfig, RecursionPlan,
    RESIDUAL_TOL,
};

use crate::config::TronTask;
use crate::report::{num, Recorder};

fn need_seeds(seeds: &[u64], task: &str) -> Result<()> {
    ensure!(!seeds.is_empty(), "{task} needs a non-empty seed list");
    Ok(())
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Inequality version of the recursion with random slack in each step; returns `X_T`.
fn slack_path(plan: &RecursionPlan, c: f64, rng: &mut impl Rng) -> f64 {
    let mut x = c;
    for _ in 1..plan.horizon {
        x = rng.gen_range(0.0..=1.0) * (plan.factor * x + plan.offset);
    }
    x
}

pub fn run(task: &TronTask, seeds: &[u64], rec: &mut Recorder) -> Result<()> {
    match task {
        TronTask::Glm { problem, samples, eps, steps } => {
            need_seeds(seeds, "glm")?;
            let mut rows = Vec::new();
            let mut trace = Vec::new();
            let mut reports = Vec::new();
            for &seed in seeds {
                let r = glm_tron(problem, *samples, *eps, *steps, seed)?;
                rows.push(vec![
                    seed.to_string(),
                    r.steps.to_string(),
                    num(r.final_risk),
                    num(r.bound),
                    num(r.run.min_residual()),
                    r.passed.to_string(),
                ]);
                for (t, (d, l)) in r.run.distances.iter().zip(&r.run.risks).enumerate() {
                    trace.push(vec![seed.to_string(), (t + 1).to_string(), num(*d), num(*l)]);
                }
                reports.push(r);
            }
            rec.series("glm-seeds", &["seed", "steps", "final_risk", "bound", "min_residual", "passed"], &rows)?;
            rec.series("glm-trace", &["seed", "t", "distance", "risk"], &trace)?;
            let ok = reports.iter().filter(|r| r.passed).count();
            let min_res = reports.iter().map(|r| r.run.min_residual()).fold(f64::INFINITY, f64::min);
            let worst = reports.iter().map(|r| r.final_risk / r.bound).fold(0.0, f64::max);
            rec.verdict(
                "risk bound",
                ok == reports.len(),
                format!("{ok} of {} seeds within bound, worst risk/bound {worst:.4}", reports.len()),
            );
            rec.verdict(
                "per-step decrease",
                min_res >= -RESIDUAL_TOL,
                format!("min residual {min_res:e}"),
            );
            let risks: Vec<f64> = reports.iter().map(|r| r.final_risk).collect();
            let (mean, stderr) = mean_stderr(&risks);
            let per_seed: Vec<_> = reports
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "seed": r.run.seed, "steps": r.steps, "scale": r.scale, "bound": r.bound,
                        "final_risk": r.final_risk, "final_true_risk": r.final_true_risk,
                        "residual_violations": r.residual_violations, "passed": r.passed,
                    })
                })
                .collect();
            rec.result(serde_json::json!({
                "final_risk_mean": mean,
                "final_risk_stderr": stderr,
                "per_seed": per_seed,
            }))
        }
        TronTask::SgdContraction { problem, steps, w1, alpha, mc_samples } => {
            need_seeds(seeds, "sgd_contraction")?;
            let c = measure_contraction(problem, *steps, w1, *alpha, *mc_samples, seeds)?;
            let rows: Vec<Vec<String>> = c
                .mean_sq_distance
                .iter()
                .enumerate()
                .map(|(t, d)| vec![(t + 1).to_string(), num(*d)])
                .collect();
            rec.series("mean-sq-distance", &["t", "mean_sq_distance"], &rows)?;
            rec.verdict(
                "contraction",
                c.passed,
                format!("mean ratio {:.5} vs factor {:.5} + 3*{:e}", c.mean_ratio, c.factor, c.stderr),
            );
            rec.result(c)
        }
        TronTask::NeuroTron {
            inputs,
            filter,
            width,
            slope,
            spread,
            arch_seed,
            half_samples,
            w_star,
            w1,
            mode,
            symmetry_checks,
            symmetry_tol,
        } => {
            ensure!(w_star.len() == *filter, "w_star must have {filter} entries");
            let mut rng = seeded(*arch_seed, 0);
            let arch = random_arch(*inputs, *filter, *width, *slope, *spread, &mut rng)?;
            let xs = symmetric_gaussian(*half_samples, *inputs, &mut rng);
            let ws = DVector::from_column_slice(w_star);
            let start = match w1 {
                Some(w) => DVector::from_column_slice(w),
                None => DVector::zeros(*filter),
            };
            let r = neuro_tron(&arch, &xs, &ws, &start, *mode)?;
            let rows: Vec<Vec<String>> = r
                .run
                .distances
                .iter()
                .enumerate()
                .step_by((r.run.distances.len() / 5000).max(1))
                .map(|(t, d)| vec![(t + 1).to_string(), num(*d)])
                .collect();
            rec.series("distance", &["t", "distance"], &rows)?;
            rec.verdict(
                "convergence",
                r.passed,
                format!(
                    "distance {:e} after {} updates, horizon {:?}, rate violations {}",
                    r.final_distance, r.steps, r.horizon, r.rate_violations
                ),
            );
            let mut gap = 0.0_f64;
            for a in &arch.a {
                for _ in 0..*symmetry_checks {
                    let z1 = DVector::from_fn(*filter, |_, _| rng.gen_range(-1.0..1.0));
                    let z2 = DVector::from_fn(*filter, |_, _| rng.gen_range(-1.0..1.0));
                    gap = gap.max(symmetric_identity_gap(a, &arch.m, *slope, &xs, &z1, &z2));
                }
            }
            if *symmetry_checks > 0 {
                rec.verdict("symmetric-data identity", gap <= *symmetry_tol, format!("max gap {gap:e}"));
            }
            let mut value = serde_json::to_value(&r)?;
            if let Some(run) = value.get_mut("run").and_then(|v| v.as_object_mut()) {
                run.remove("distances");
                run.remove("risks");
                run.remove("residuals");
            }
            rec.result(serde_json::json!({ "report": value, "symmetry_gap": gap }))
        }
        TronTask::NoisyGd { problem, config, trials } => {
            need_seeds(seeds, "noisy_gd")?;
            let run_seeds = match trials {
                Some(n) => (seeds[0]..seeds[0] + n).collect(),
                None => seeds.to_vec(),
            };
            let cfg = NoisyGdConfig {
                seeds: run_seeds,
                ..config.clone()
            };
            let r = noisy_gd(problem, &cfg)?;
            let rows: Vec<Vec<String>> = r
                .trace
                .distances
                .iter()
                .enumerate()
                .map(|(t, d)| vec![t.to_string(), num(*d)])
                .collect();
            rec.series("first-seed-distance", &["step", "distance"], &rows)?;
            let vac = if r.vacuous { " (vacuous bound)" } else { "" };
            rec.verdict(
                "escape frequency",
                r.passed,
                format!("frequency {:.5} vs bound {:.5} + 3*{:e}{vac}", r.frequency, r.bound, r.stderr),
            );
            rec.verdict(
                "bounded differences",
                r.max_increment_ratio <= 1.0 + 1e-9 && r.correlation_violations == 0,
                format!(
                    "max |dY|/k {:.4}, correlation violations {}",
                    r.max_increment_ratio, r.correlation_violations
                ),
            );
            let mut value = serde_json::to_value(&r)?;
            if let Some(obj) = value.as_object_mut() {
                obj.remove("trace");
            }
            rec.result(value)
        }
        TronTask::Recursion { tuples, seed } => {
            let mut rng = seeded(*seed, 0);
            let mut rows = Vec::new();
            let (mut misses, mut loose) = (0, 0);
            for case in 0..2 {
                for _ in 0..*tuples {
                    let (c, b, c1, c2, eps) = if case == 0 {
                        let b: f64 = rng.gen_range(0.01..5.0);
                        let c1 = b * b / 4.0 * (1.0 + rng.gen_range(0.0..10.0)) + 1e-9;
                        (rng.gen_range(1e-3..100.0), b, c1, 0.0, rng.gen_range(1e-3..1.0))
                    } else {
                        let eps: f64 = rng.gen_range(0.01..0.9);
                        let c1 = rng.gen_range(0.1..10.0);
                        let cap = (eps.sqrt() + 1.0 / eps.sqrt()).powi(2);
                        let b = (rng.gen_range(0.01..1.0) * cap * c1).sqrt();
                        let c = eps * eps * rng.gen_range(1.0..100.0);
                        (c, b, c1, rng.gen_range(0.01..0.99) * c1, eps)
                    };
                    let plan = recursion_horizon(c, b, c1, c2, eps)?;
                    let xs = simulate_recursion(&plan, c);
                    let last = *xs.last().expect("horizon >= 1");
                    let slack = slack_path(&plan, c, &mut rng);
                    let target = eps * eps * (1.0 + 1e-9);
                    misses += (last > target || slack > target) as usize;
                    if case == 0 && xs.len() >= 2 && xs[xs.len() - 2] <= eps * eps * (1.0 - 1e-9) {
                        loose += 1;
                    }
                    rows.push(vec![
                        format!("{:?}", plan.case),
                        num(c),
                        num(b),
                        num(c1),
                        num(c2),
                        num(eps),
                        plan.horizon.to_string(),
                        num(last),
                        num(slack),
                    ]);
                }
            }
            rec.series(
                "recursion",
                &["case", "c", "b", "c1", "c2", "eps", "horizon", "x_horizon", "x_horizon_slack"],
                &rows,
            )?;
            rec.verdict(
                "recursion horizons",
                misses == 0 && loose == 0,
                format!("{misses} targets missed, {loose} non-minimal horizons without offset"),
            );
            rec.result(serde_json::json!({ "tuples_per_case": tuples, "misses": misses, "non_minimal": loose }))
        }
        TronTask::Azuma { runs, seed } => {
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for (i, run) in runs.iter().enumerate() {
                let bounds = vec![run.family.increment_bound(); run.steps];
                let r = azuma_check(&run.family, &bounds, run.lambda, run.trials, seed.wrapping_add(i as u64))?;
                rows.push(vec![
                    format!("{:?}", run.family),
                    run.steps.to_string(),
                    num(run.lambda),
                    num(r.bound),
                    num(r.empirical),
                    num(r.stderr),
                ]);
                rec.verdict(
                    &format!("Azuma {:?}", run.family),
                    r.passed,
                    format!("tail {:.5} vs bound {:.5} + 3*{:e}", r.empirical, r.bound, r.stderr),
                );
                reports.push(r);
            }
            rec.series("azuma", &["family", "steps", "lambda", "bound", "empirical", "stderr"], &rows)?;
            rec.result(reports)
        }
    }
}
