use anyhow::Result;
use relu_core::optim::{verify_convergence, Theorem};

use crate::config::OptimTask;
use crate::report::{num, Recorder};

pub fn run(task: &OptimTask, seeds: &[u64], rec: &mut Recorder) -> Result<()> {
    let OptimTask::Verify { theorem, objective, oracle, x1, eps, harness } = task;
    let mut cfg = harness.clone().unwrap_or_default();
    let stochastic = matches!(theorem, Theorem::RmsPropSign | Theorem::RmsPropFast);
    if stochastic && !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    anyhow::ensure!(!stochastic || !cfg.seeds.is_empty(), "stochastic theorem needs seeds");
    let f = objective.build()?;
    let r = verify_convergence(*theorem, f.as_ref(), *oracle, x1, *eps, &cfg)?;
    let rows: Vec<Vec<String>> = r
        .trace
        .iter()
        .map(|s| vec![s.t.to_string(), num(s.f), num(s.grad_norm)])
        .collect();
    rec.series("trace", &["t", "f", "grad_norm"], &rows)?;
    let detail = match theorem {
        Theorem::RmsPropSign => format!(
            "min E|grad|^2 {:e} vs threshold {:e} at T = {}",
            r.min_expected_sq_grad.unwrap_or(f64::NAN),
            r.threshold.unwrap_or(f64::NAN),
            r.t_bound
        ),
        Theorem::RmsPropFast => format!(
            "log-log slope {:.4} in [{}, {}]",
            r.decay_slope.unwrap_or(f64::NAN),
            cfg.rate_slope.0,
            cfg.rate_slope.1
        ),
        _ => format!(
            "reached at t = {:?} within bound {:e}; f increases {}",
            r.t_reached, r.t_bound, r.increases
        ),
    };
    rec.verdict(&format!("{theorem:?}"), r.passed, detail);
    // the full trace is already in the CSV
    let mut value = serde_json::to_value(&r)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("trace");
    }
    rec.result(value)
}

