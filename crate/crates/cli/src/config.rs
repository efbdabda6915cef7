use std::path::PathBuf;

use relu_core::erm2::{ErmLimits, Loss};
use relu_core::optim::{HarnessConfig, ObjectiveSpec, OracleKind, Theorem};
use relu_core::pwl::PwlFunction;
use relu_core::relunet::ReluNet;
use relu_core::tron::{NeuroTronMode, NoisyGdConfig, ProcessFamily, ReluGateProblem};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub description: String,
    /// Used by every stochastic task; `--seeds` replaces it.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "tasks", rename_all = "snake_case")]
pub enum Experiment {
    Pwl(Vec<PwlTask>),
    Net(Vec<NetTask>),
    Erm2(Vec<Erm2Task>),
    Optim(Vec<OptimTask>),
    Tron(Vec<TronTask>),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Pwl(_) => "pwl",
            Experiment::Net(_) => "net",
            Experiment::Erm2(_) => "erm2",
            Experiment::Optim(_) => "optim",
            Experiment::Tron(_) => "tron",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Experiment::Pwl(t) => t.len(),
            Experiment::Net(t) => t.len(),
            Experiment::Erm2(t) => t.len(),
            Experiment::Optim(t) => t.len(),
            Experiment::Tron(t) => t.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FunctionSource {
    Explicit { function: PwlFunction },
    Random { pieces: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum PwlTask {
    /// Flap decomposition and two-layer net of one function, checked on a grid.
    Decompose {
        function: FunctionSource,
        lo: f64,
        hi: f64,
        points: usize,
        tol: f64,
    },
    /// The same check over many random functions.
    FlapSweep {
        count: usize,
        min_pieces: usize,
        max_pieces: usize,
        points: usize,
        tol: f64,
        seed: u64,
    },
    /// In-range piece counts of composed hard functions against `(p+1)^k`.
    HardCounts {
        scale: f64,
        p_values: Vec<usize>,
        k_values: Vec<u32>,
        seed: u64,
    },
}

/// A net in the JSON net format, inline or as a file path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetSource {
    File(PathBuf),
    Inline(ReluNet),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetTask {
    /// Forward pass on given inputs, optionally against expected outputs.
    Evaluate {
        net: NetSource,
        inputs: Vec<Vec<f64>>,
        #[serde(default)]
        expected: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_eval_tol")]
        tol: f64,
    },
    /// Support function and its net against the brute-force vertex maximum.
    ZonotopeSweep {
        count: usize,
        max_dim: usize,
        max_generators: usize,
        directions: usize,
        tol: f64,
        seed: u64,
    },
    /// `∫|s_q − ½|` over one triangle of the sawtooth.
    TriangleL1 { qs: Vec<usize>, tol: f64 },
    /// Exact piece counts of random scalar nets against the product bound.
    PieceCount {
        widths: Vec<usize>,
        trials: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErmSolver {
    General,
    Scalar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum Erm2Task {
    Solve {
        points: Vec<Vec<f64>>,
        labels: Vec<f64>,
        width: usize,
        loss: Loss,
        solver: ErmSolver,
        #[serde(default)]
        max_loss: Option<f64>,
        #[serde(default)]
        limits: Option<ErmLimits>,
    },
    /// Random instances against random-net search, scalar agreement and planted recovery.
    OptimalitySweep {
        instances: usize,
        max_points: usize,
        max_dim: usize,
        max_width: usize,
        random_nets: usize,
        slack: f64,
        agreement_tol: f64,
        planted: usize,
        planted_tol: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimTask {
    Verify {
        theorem: Theorem,
        objective: ObjectiveSpec,
        oracle: OracleKind,
        x1: Vec<f64>,
        eps: f64,
        #[serde(default)]
        harness: Option<HarnessConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AzumaRun {
    pub family: ProcessFamily,
    pub steps: usize,
    pub lambda: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TronTask {
    Glm {
        problem: ReluGateProblem,
        samples: usize,
        eps: f64,
        #[serde(default)]
        steps: Option<u64>,
    },
    SgdContraction {
        problem: ReluGateProblem,
        steps: u64,
        w1: Vec<f64>,
        alpha: f64,
        mc_samples: usize,
    },
    NeuroTron {
        inputs: usize,
        filter: usize,
        width: usize,
        slope: f64,
        spread: f64,
        arch_seed: u64,
        half_samples: usize,
        w_star: Vec<f64>,
        #[serde(default)]
        w1: Option<Vec<f64>>,
        mode: NeuroTronMode,
        #[serde(default)]
        symmetry_checks: usize,
        #[serde(default = "default_symmetry_tol")]
        symmetry_tol: f64,
    },
    /// `seeds` inside `config` is replaced by the run's seed list, or by
    /// `first..first + trials` when `trials` is set.
    NoisyGd {
        problem: ReluGateProblem,
        config: NoisyGdConfig,
        #[serde(default)]
        trials: Option<u64>,
    },
    Recursion { tuples: usize, seed: u64 },
    Azuma { runs: Vec<AzumaRun>, seed: u64 },
}

fn default_eval_tol() -> f64 {
    1e-12
}

fn default_symmetry_tol() -> f64 {
    1e-9
}
