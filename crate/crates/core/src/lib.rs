//! Sparse generalized linear models solved by block coordinate descent, with
//! Gap Safe screening rules.
//!
//! A [`Problem`] bundles a design matrix, a data-fit term ([`LossModel`]) and
//! a group-decomposable norm ([`Penalty`]). [`solver::solve`] minimises
//! `Σ_i f_i(x_i^⊤β) + λΩ(β)` at one `λ`; [`path::run_path`] does it along a
//! decreasing grid with warm starts.

pub mod bench;
pub mod dataio;
pub mod error;
pub mod groups;
pub mod losses;
pub mod matrix;
pub mod path;
pub mod penalties;
pub mod problem;
pub mod screening;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use groups::{GroupPartition, WeightScheme};
pub use losses::{LossKind, LossModel};
pub use matrix::DesignMatrix;
pub use path::{make_grid, run_path, Grid, PathConfig, PathResult, WarmStart};
pub use penalties::{eps_norm, soft_threshold, Penalty, PenaltyKind};
pub use problem::Problem;
pub use screening::{ActiveSet, RuleKind, SafeSphere};
pub use solver::{solve, solve_with, SolveOptions, SolveResult, SolverConfig};
