//! Regularization paths over a decreasing `λ` grid with warm starts.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::screening::{
    active_set_from_sphere, gap_safe_radius, kkt_default_eps, kkt_postcheck, strong_rule, ActiveSet,
    RuleKind, SafeSphere,
};
use crate::solver::{solve_with, PreviousPoint, SolveOptions, SolveResult, SolverConfig, MAX_KKT_ROUNDS};

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Strictly decreasing positive values.
    Explicit(Vec<f64>),
    /// `count` points from `λ_max` down to `λ_max·10^{−decades}`.
    Geometric { count: usize, decades: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStart {
    /// Start from the previous solution.
    #[default]
    Plain,
    /// First solve on the previous safe active set, then on everything.
    Active,
    /// First solve on the strong set (grown by KKT checks), then on everything.
    Strong,
}

impl WarmStart {
    pub fn name(self) -> &'static str {
        match self {
            WarmStart::Plain => "plain",
            WarmStart::Active => "active",
            WarmStart::Strong => "strong",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [WarmStart::Plain, WarmStart::Active, WarmStart::Strong]
            .into_iter()
            .find(|w| w.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub grid: Grid,
    pub warm_start: WarmStart,
    pub solver: SolverConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            grid: Grid::Geometric {
                count: 100,
                decades: 3.0,
            },
            warm_start: WarmStart::Plain,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug)]
pub struct PathPoint {
    pub lambda: f64,
    pub outcome: Result<SolveResult>,
    pub wall: Duration,
    /// Size of the working set the warm start began with (all groups for `Plain`).
    pub init_active_groups: usize,
    pub init_active_features: usize,
}

#[derive(Debug)]
pub struct PathResult {
    pub lambda_max: f64,
    pub rule: RuleKind,
    pub warm_start: WarmStart,
    pub n_groups: usize,
    pub n_features: usize,
    pub points: Vec<PathPoint>,
}

impl PathResult {
    pub fn all_converged(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.outcome.as_ref().is_ok_and(|r| r.converged))
    }

    pub fn total_wall(&self) -> Duration {
        self.points.iter().map(|p| p.wall).sum()
    }
}

/// `λ_t = λ_max·10^{−δt/(T−1)}`, `t = 0..T−1`.
pub fn make_grid(lambda_max: f64, count: usize, decades: f64) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidConfig("a grid needs at least 2 points".into()));
    }
    if !(decades > 0.0) || !(lambda_max > 0.0) {
        return Err(Error::InvalidConfig("grid span and lambda_max must be positive".into()));
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|t| lambda_max * 10f64.powf(-decades * t as f64 / last))
        .collect())
}

fn resolve_grid(prob: &Problem, grid: &Grid) -> Result<Vec<f64>> {
    match grid {
        Grid::Geometric { count, decades } => make_grid(prob.lambda_max(), *count, *decades),
        Grid::Explicit(values) => {
            if values.is_empty() {
                return Err(Error::InvalidConfig("empty lambda grid".into()));
            }
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig("lambdas must be positive".into()));
            }
            if values.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::InvalidConfig("lambdas must be strictly decreasing".into()));
            }
            Ok(values.clone())
        }
    }
}

/// Solves every grid point in order. A failed point is recorded and the path
/// continues from the last successful solution.
pub fn run_path(prob: &Problem, config: &PathConfig) -> Result<PathResult> {
    config.solver.validate()?;
    let lambdas = resolve_grid(prob, &config.grid)?;
    let part = prob.penalty().partition();
    let mut points = Vec::with_capacity(lambdas.len());
    let mut prev: Option<SolveResult> = None;
    for &lambda in &lambdas {
        let start = Instant::now();
        let (outcome, init) = solve_point(prob, lambda, config, prev.as_ref());
        let wall = start.elapsed();
        let init = init.unwrap_or_else(|| ActiveSet::full(part));
        if let Ok(res) = &outcome {
            prev = Some(res.clone());
        }
        points.push(PathPoint {
            lambda,
            outcome,
            wall,
            init_active_groups: init.n_active_groups(),
            init_active_features: init.n_active_features(),
        });
    }
    Ok(PathResult {
        lambda_max: prob.lambda_max(),
        rule: config.solver.rule,
        warm_start: config.warm_start,
        n_groups: prob.n_groups(),
        n_features: prob.n_features(),
        points,
    })
}

fn solve_point(
    prob: &Problem,
    lambda: f64,
    config: &PathConfig,
    prev: Option<&SolveResult>,
) -> (Result<SolveResult>, Option<ActiveSet>) {
    let Some(prev) = prev else {
        return (solve_with(prob, lambda, &config.solver, &SolveOptions::default()), None);
    };
    let previous = Some(PreviousPoint {
        theta: prev.theta.clone(),
        lambda: prev.lambda,
    });
    let plain = SolveOptions {
        beta0: Some(prev.beta.clone()),
        previous: previous.clone(),
        ..SolveOptions::default()
    };
    let pre = match config.warm_start {
        WarmStart::Plain => return (solve_with(prob, lambda, &config.solver, &plain), None),
        WarmStart::Active => active_presolve(prob, lambda, config, prev),
        WarmStart::Strong => strong_presolve(prob, lambda, config, prev),
    };
    match pre {
        Ok((beta, epochs, init)) => {
            let opts = SolveOptions {
                beta0: Some(beta),
                previous,
                ..SolveOptions::default()
            };
            let res = solve_with(prob, lambda, &config.solver, &opts).map(|mut r| {
                r.epochs += epochs;
                r
            });
            (res, Some(init))
        }
        Err(e) => (Err(e), None),
    }
}

fn presolve_config(config: &PathConfig) -> SolverConfig {
    SolverConfig {
        rule: RuleKind::DynamicGapSafe,
        ..config.solver.clone()
    }
}

/// Restricted solve on `A(θ_{t−1}, r_{t−1})`, the final safe active set of the
/// previous grid point.
fn active_presolve(
    prob: &Problem,
    lambda: f64,
    config: &PathConfig,
    prev: &SolveResult,
) -> Result<(Vec<f64>, usize, ActiveSet)> {
    let sphere = SafeSphere {
        center: prev.theta.clone(),
        radius: gap_safe_radius(prev.gap, prob.gamma(), prev.lambda),
        lambda: prev.lambda,
    };
    let init = active_set_from_sphere(prob, &sphere);
    if init.is_full() {
        return Ok((prev.beta.clone(), 0, init));
    }
    let res = solve_with(
        prob,
        lambda,
        &presolve_config(config),
        &SolveOptions {
            beta0: Some(prev.beta.clone()),
            previous: None,
            domain: Some(init.clone()),
            checkpoints: Vec::new(),
        },
    )?;
    Ok((res.beta, res.epochs, init))
}

/// Restricted solves on the strong set, adding KKT violators back.
fn strong_presolve(
    prob: &Problem,
    lambda: f64,
    config: &PathConfig,
    prev: &SolveResult,
) -> Result<(Vec<f64>, usize, ActiveSet)> {
    let init = strong_rule(prob, &prev.theta, lambda, prev.lambda)?;
    if init.is_full() {
        return Ok((prev.beta.clone(), 0, init));
    }
    let part = prob.penalty().partition();
    let cfg = presolve_config(config);
    let mut working = init.clone();
    let mut beta = prev.beta.clone();
    let mut epochs = 0;
    for _ in 0..MAX_KKT_ROUNDS {
        let res = solve_with(
            prob,
            lambda,
            &cfg,
            &SolveOptions {
                beta0: Some(beta),
                previous: None,
                domain: Some(working.clone()),
                checkpoints: Vec::new(),
            },
        )?;
        epochs += res.epochs;
        beta = res.beta;
        let z = prob.x().matvec(&beta, prob.n_outputs())?;
        let resid: Vec<f64> = prob.loss().gradient_map(&z).iter().map(|g| -g / lambda).collect();
        let eps = match config.solver.kkt_eps {
            Some(e) => e,
            None if prob.is_quadratic() => kkt_default_eps(prob, &beta, lambda, res.tolerance)?,
            None => 0.0,
        };
        let discarded: Vec<usize> = working.inactive_groups().collect();
        let violators = kkt_postcheck(prob, &beta, &resid, &discarded, eps)?;
        if violators.is_empty() {
            break;
        }
        for g in violators {
            working.insert_group(part, g);
        }
    }
    Ok((beta, epochs, init))
}
