use anyhow::Result;
use rand::Rng;
use relu_core::pwl::PwlFunction;

use crate::config::Experiment;
use crate::report::Recorder;

mod erm2;
mod net;
mod optim;
mod pwl;
mod tron;

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub(crate) fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Random continuous PWL function with `pieces` pieces and breakpoints in `(-5, 5)`.
pub(crate) fn random_pwl(pieces: usize, rng: &mut impl Rng) -> PwlFunction {
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < pieces - 1 {
        let x = rng.gen_range(-5.0..5.0);
        if xs.iter().all(|p: &f64| (p - x).abs() > 1e-3) {
            xs.push(x);
        }
    }
    xs.sort_by(f64::total_cmp);
    let ys = xs.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
    let right = if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(-2.0..2.0) };
    PwlFunction::new(xs, ys, rng.gen_range(-2.0..2.0), right)
        .expect("distinct sorted breakpoints form a valid function")
}

/// Runs every task in order; a task error stops the run.
pub fn run_experiment(exp: &Experiment, seeds: &[u64], rec: &mut Recorder) -> Result<()> {
    let kind = exp.name();
    match exp {
        Experiment::Pwl(tasks) => tasks.iter().enumerate().try_for_each(|(i, t)| {
            rec.begin(i + 1, kind);
            pwl::run(t, rec)
        }),
        Experiment::Net(tasks) => tasks.iter().enumerate().try_for_each(|(i, t)| {
            rec.begin(i + 1, kind);
            net::run(t, rec)
        }),
        Experiment::Erm2(tasks) => tasks.iter().enumerate().try_for_each(|(i, t)| {
            rec.begin(i + 1, kind);
            erm2::run(t, rec)
        }),
        Experiment::Optim(tasks) => tasks.iter().enumerate().try_for_each(|(i, t)| {
            rec.begin(i + 1, kind);
            optim::run(t, seeds, rec)
        }),
        Experiment::Tron(tasks) => tasks.iter().enumerate().try_for_each(|(i, t)| {
            rec.begin(i + 1, kind);
            tron::run(t, seeds, rec)
        }),
    }
}
