#![allow(dead_code)]

use gapsafe::dataio::Task;
use gapsafe::synth::{self, SynthSpec};
use gapsafe::{
    solve, GroupPartition, LossModel, Penalty, Problem, RuleKind, SolveResult, SolverConfig, WeightScheme,
};
use nalgebra::{DMatrix, DVector};

pub fn spec(n: usize, p: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        n,
        p,
        seed,
        ..SynthSpec::default()
    }
}

pub fn lasso(n: usize, p: usize, seed: u64) -> Problem {
    let s = synth::regression(&spec(n, p, seed)).unwrap();
    let loss = s.dataset.to_loss(Task::Regression).unwrap();
    Problem::new(s.dataset.x, loss, Penalty::lasso(p)).unwrap()
}

/// Contiguous groups; Sparse-Group Lasso when `tau` is given.
pub fn grouped(n: usize, p: usize, size: usize, tau: Option<f64>, seed: u64) -> Problem {
    let s = synth::regression(&SynthSpec {
        group_size: size,
        support: 0.1,
        ..spec(n, p, seed)
    })
    .unwrap();
    let loss = s.dataset.to_loss(Task::Regression).unwrap();
    let part = GroupPartition::contiguous(p, size, WeightScheme::Ones).unwrap();
    let pen = match tau {
        Some(t) => Penalty::sparse_group_lasso(t, part).unwrap(),
        None => Penalty::group_lasso(part).unwrap(),
    };
    Problem::new(s.dataset.x, loss, pen).unwrap()
}

pub fn logistic(n: usize, p: usize, seed: u64) -> Problem {
    let s = synth::logistic(&spec(n, p, seed)).unwrap();
    let loss = s.dataset.to_loss(Task::Binary).unwrap();
    Problem::new(s.dataset.x, loss, Penalty::lasso(p)).unwrap()
}

pub fn multitask(n: usize, p: usize, q: usize, seed: u64) -> Problem {
    let s = synth::regression(&SynthSpec { q, ..spec(n, p, seed) }).unwrap();
    let loss = LossModel::multi_task(s.dataset.y, q).unwrap();
    let pen = Penalty::group_lasso(GroupPartition::singletons(p)).unwrap();
    Problem::new(s.dataset.x, loss, pen).unwrap()
}

pub fn multinomial(n: usize, p: usize, q: usize, seed: u64) -> Problem {
    let s = synth::multinomial(&SynthSpec { q, ..spec(n, p, seed) }).unwrap();
    let loss = s.dataset.to_loss(Task::Multiclass).unwrap();
    let pen = Penalty::group_lasso(GroupPartition::singletons(p)).unwrap();
    Problem::new(s.dataset.x, loss, pen).unwrap()
}

/// Unscreened solve to an absolute gap of `1e-12`.
pub fn reference(prob: &Problem, lambda: f64, beta0: Option<&[f64]>) -> SolveResult {
    let cfg = SolverConfig {
        eps: 1e-12,
        scale_tolerance: false,
        max_epochs: 2_000_000,
        rule: RuleKind::NoScreening,
        ..SolverConfig::default()
    };
    solve(prob, lambda, beta0, &cfg).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn dense(prob: &Problem) -> DMatrix<f64> {
    let x = prob.x();
    DMatrix::from_fn(x.n_samples(), x.n_features(), |i, j| x.get(i, j))
}

/// Certified distance between a reference dual point and the optimum.
pub fn dual_uncertainty(prob: &Problem, res: &SolveResult) -> f64 {
    let slack = 8.0 * f64::EPSILON * (res.primal.abs() + res.dual.abs());
    (2.0 * (res.gap + slack) / (prob.gamma() * res.lambda * res.lambda)).sqrt()
}

/// Exact Lasso dual optimum from the support and signs of an accurate
/// solution: solves `X_Sᵀ(y − X_S b) = λ s` and returns `(y − X_S b)/λ`.
/// `None` unless the result satisfies the optimality conditions.
pub fn polished_lasso_dual(prob: &Problem, res: &SolveResult) -> Option<Vec<f64>> {
    let lambda = res.lambda;
    let x = dense(prob);
    let y = DVector::from_column_slice(prob.loss().y());
    let support: Vec<usize> = (0..prob.n_features()).filter(|&j| res.beta[j] != 0.0).collect();
    let resid = if support.is_empty() {
        y.clone()
    } else {
        let xs = x.select_columns(&support);
        let signs = DVector::from_iterator(support.len(), support.iter().map(|&j| res.beta[j].signum()));
        let rhs = xs.tr_mul(&y) - signs.clone() * lambda;
        let b = xs.tr_mul(&xs).cholesky()?.solve(&rhs);
        if b.iter().zip(signs.iter()).any(|(bj, s)| bj * s <= 0.0) {
            return None;
        }
        &y - &xs * b
    };
    let theta: Vec<f64> = resid.iter().map(|r| r / lambda).collect();
    let corr = x.tr_mul(&DVector::from_column_slice(&theta));
    if corr.amax() > 1.0 + 1e-9 {
        return None;
    }
    if dist(&theta, &res.theta) > dual_uncertainty(prob, res) + 1e-9 {
        return None;
    }
    Some(theta)
}
