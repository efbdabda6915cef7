//! Piecewise-linear function algebra, ReLU network constructions, exact
//! two-layer training, adaptive optimizers and provable ReLU-gate trainers.

pub mod pwl;
pub mod erm2;
pub mod optim;
pub mod relunet;
pub mod rng;
pub mod tron;
