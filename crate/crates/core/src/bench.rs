//! Active-set size as a function of the epoch budget, per rule and `λ`.

use std::io::Write;
use std::time::Instant;

use crate::dataio::format_float;
use crate::error::Result;
use crate::problem::Problem;
use crate::screening::RuleKind;
use crate::solver::{solve_with, SolveOptions, SolverConfig};

/// `2, 4, …, 2⁹`
pub fn default_budgets() -> Vec<usize> {
    (1..=9).map(|k| 1usize << k).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub rule: RuleKind,
    pub epochs: usize,
    pub lambda: f64,
    /// Active features over all features after `epochs` epochs.
    pub active_fraction: f64,
    pub wall_ms: f64,
}

/// Solves each `λ` from zero once with `K = max(budgets)`, forcing a gap
/// evaluation and screening pass at every budget, and reads off the active
/// set at each budget.
pub fn budget_profile(
    prob: &Problem,
    lambdas: &[f64],
    rule: RuleKind,
    budgets: &[usize],
    base: &SolverConfig,
) -> Result<Vec<BenchRow>> {
    let mut budgets = budgets.to_vec();
    budgets.sort_unstable();
    budgets.dedup();
    let max_budget = budgets.last().copied().unwrap_or(1).max(1);
    let cfg = SolverConfig {
        rule,
        max_epochs: max_budget,
        ..base.clone()
    };
    let p = prob.n_features() as f64;
    let mut rows = Vec::with_capacity(lambdas.len() * budgets.len());
    for &lambda in lambdas {
        let start = Instant::now();
        let res = solve_with(
            prob,
            lambda,
            &cfg,
            &SolveOptions {
                checkpoints: budgets.clone(),
                ..SolveOptions::default()
            },
        )?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        for &b in &budgets {
            let active = if res.epochs <= b {
                res.active.n_active_features()
            } else {
                res.trace
                    .iter()
                    .rev()
                    .find(|e| e.epoch <= b)
                    .map_or(prob.n_features(), |e| e.active_features)
            };
            rows.push(BenchRow {
                rule,
                epochs: b,
                lambda,
                active_fraction: active as f64 / p,
                wall_ms,
            });
        }
    }
    Ok(rows)
}

pub const BENCH_HEADER: &str = "rule,epochs,lambda,active_fraction,wall_ms";

pub fn write_bench_rows<W: Write>(mut w: W, rows: &[BenchRow]) -> Result<()> {
    writeln!(w, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.rule.name(),
            r.epochs,
            format_float(r.lambda),
            format_float(r.active_fraction),
            format_float(r.wall_ms)
        )?;
    }
    w.flush()?;
    Ok(())
}
