//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use gapsafe::bench::budget_profile;
use gapsafe::losses::LossKind;
use gapsafe::path::PathPoint;
use gapsafe::screening::{correlations, lambda_critic, strong_rule};
use gapsafe::solver::PreviousPoint;
use gapsafe::{
    eps_norm, make_grid, run_path, solve, solve_with, ActiveSet, Grid, LossModel, PathConfig, Problem,
    RuleKind, SolveOptions, SolveResult, SolverConfig, WarmStart,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {id:>2}. {name} ({secs:.1}s): {detail}");
    };

    let t = Instant::now();
    let (safety, containment) = safety_suite();
    let elapsed = t.elapsed().as_secs_f64();
    let safety = safety.and_then(|d| {
        if elapsed < 300.0 {
            Ok(d)
        } else {
            Err(format!("{d}; runtime {elapsed:.0}s exceeds 300s"))
        }
    });
    report(1, "safety of safe rules", t, safety);
    report(2, "sphere containment", t, containment);

    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (3, "lambda_max exactness", lambda_max_exactness),
        (4, "eps-norm vs bisection", eps_norm_oracle),
        (5, "equicorrelation identification", equicorrelation),
        (6, "gradients, conjugates, strong concavity", loss_checks),
        (7, "Kronecker equivalence", kronecker),
        (8, "multinomial dual feasibility", multinomial_feasibility),
        (9, "cross-rule objectives", cross_rule),
        (10, "budget profiles on synthetic Lasso", budget_profiles),
        (11, "speedup of gap-dynamic over none", speedup),
        (12, "strong rule on a coarse grid", coarse_strong),
    ];
    for (id, name, f) in criteria {
        let t = Instant::now();
        report(id, name, t, f());
    }
    if failed == 0 {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cfg(rule: RuleKind) -> SolverConfig {
    SolverConfig::with_rule(rule)
}

/// Features whose reference coefficients are nonzero but which `active` drops.
fn dropped_support(prob: &Problem, beta: &[f64], active: &ActiveSet) -> Vec<usize> {
    let q = prob.n_outputs();
    (0..prob.n_features())
        .filter(|&j| beta[j * q..(j + 1) * q].iter().any(|&b| b != 0.0) && !active.feature_active(j))
        .collect()
}

fn safety_suite() -> (Outcome, Outcome) {
    let mut r = rng(11);
    let mut solves = 0;
    let mut events = 0;
    let mut spheres = 0;
    let mut polished = 0;
    let mut enclosed = 0;
    let mut worst_ratio = 0.0f64;
    let mut violations = Vec::new();
    let mut outside = Vec::new();
    let mut ref_failures = Vec::new();
    for inst in 0..200usize {
        let seed = 1000 + inst as u64;
        let (prob, label) = match inst % 4 {
            0 => (lasso(50, 200, seed), "lasso".to_string()),
            1 => (grouped(50, 200, 5, None, seed), "group-lasso".to_string()),
            2 => {
                let tau = [0.2, 0.5, 0.8][(inst / 4) % 3];
                (grouped(50, 200, 5, Some(tau), seed), format!("sgl(tau={tau})"))
            }
            _ => (logistic(60, 150, seed), "logistic".to_string()),
        };
        let lmax = prob.lambda_max();
        let mut lambdas: Vec<f64> = (0..5)
            .map(|_| lmax * 10f64.powf(-2.0 * r.random_range(0.001..0.999)))
            .collect();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let mut prev_beta = vec![0.0; prob.n_features() * prob.n_outputs()];
        let mut prev = PreviousPoint {
            theta: prob.theta_max(),
            lambda: lmax,
        };
        for &lambda in &lambdas {
            let refr = reference(&prob, lambda, Some(&prev_beta));
            if !refr.converged {
                ref_failures.push(format!("{label} #{inst} lambda {lambda:e}: gap {:e}", refr.gap));
                continue;
            }
            let (theta_hat, unc) = match polished_lasso_dual(&prob, &refr).filter(|_| inst % 4 == 0) {
                Some(t) => {
                    polished += 1;
                    (t, 0.0)
                }
                None => {
                    enclosed += 1;
                    (refr.theta.clone(), dual_uncertainty(&prob, &refr))
                }
            };
            let warm = SolveOptions {
                beta0: Some(prev_beta.clone()),
                previous: Some(prev.clone()),
                ..SolveOptions::default()
            };
            let mut runs = vec![
                (RuleKind::Static, SolveOptions::default()),
                (RuleKind::DynamicGapSafe, SolveOptions::default()),
                (RuleKind::DynamicGapSafe, warm.clone()),
                (RuleKind::SequentialGapSafe, warm),
            ];
            if prob.is_single_quadratic() {
                runs.push((RuleKind::Dst3, SolveOptions::default()));
            }
            for (rule, opts) in runs {
                let c = SolverConfig {
                    record_spheres: true,
                    ..cfg(rule)
                };
                let res = solve_with(&prob, lambda, &c, &opts).unwrap();
                solves += 1;
                let mut sets: Vec<&ActiveSet> = res.trace.iter().filter_map(|e| e.active.as_ref()).collect();
                sets.push(&res.active);
                for set in sets {
                    events += 1;
                    let bad = dropped_support(&prob, &refr.beta, set);
                    if !bad.is_empty() {
                        violations.push(format!("{label} #{inst} {rule} lambda {lambda:e}: features {bad:?}"));
                    }
                }
                for sphere in res.trace.iter().filter_map(|e| e.sphere.as_ref()) {
                    spheres += 1;
                    let d = dist(&theta_hat, &sphere.center);
                    if sphere.radius > 0.0 {
                        worst_ratio = worst_ratio.max(d / sphere.radius);
                    }
                    if d > sphere.radius + unc + 1e-9 {
                        outside.push(format!(
                            "{label} #{inst} {rule} lambda {lambda:e}: distance {d:e} radius {:e}",
                            sphere.radius
                        ));
                    }
                }
            }
            prev_beta = refr.beta.clone();
            prev = PreviousPoint {
                theta: refr.theta.clone(),
                lambda,
            };
        }
    }
    let s = check(
        violations.is_empty() && ref_failures.is_empty(),
        format!(
            "{solves} screened solves, {events} active sets checked, {} violations, {} unconverged references{}",
            violations.len(),
            ref_failures.len(),
            first(&violations).or(first(&ref_failures)).unwrap_or_default()
        ),
    );
    let c = check(
        outside.is_empty() && spheres > 0,
        format!(
            "{spheres} spheres, {} outside; optimum exact for {polished} points, certified within the reference gap for {enclosed}; max distance/radius {worst_ratio:.6}{}",
            outside.len(),
            first(&outside).unwrap_or_default()
        ),
    );
    (s, c)
}

fn first(v: &[String]) -> Option<String> {
    v.first().map(|s| format!("; first: {s}"))
}

fn suite_problems(seed: u64) -> Vec<(&'static str, Problem)> {
    vec![
        ("lasso", lasso(50, 100, seed)),
        ("group-lasso", grouped(50, 100, 5, None, seed)),
        ("sgl", grouped(50, 100, 5, Some(0.5), seed)),
        ("logistic", logistic(60, 100, seed)),
        ("multitask", multitask(40, 60, 3, seed)),
        ("multinomial", multinomial(60, 60, 3, seed)),
    ]
}

fn lambda_max_exactness() -> Outcome {
    let tight = SolverConfig {
        eps: 1e-12,
        scale_tolerance: false,
        max_epochs: 1_000_000,
        ..SolverConfig::default()
    };
    let mut failures = Vec::new();
    let (mut at_max, mut below) = (0, 0);
    for seed in 0..10 {
        for (label, prob) in suite_problems(500 + seed) {
            let lmax = prob.lambda_max();
            let oracle = match prob.loss().kind() {
                LossKind::Quadratic => Some(max_abs(&dense(&prob).tr_mul(&DVector::from_column_slice(prob.loss().y())))),
                LossKind::Logistic => {
                    let v: Vec<f64> = prob.loss().y().iter().map(|y| y - 0.5).collect();
                    Some(max_abs(&dense(&prob).tr_mul(&DVector::from_vec(v))))
                }
                _ => None,
            };
            if let Some(o) = oracle.filter(|_| label != "group-lasso" && label != "sgl") {
                if (o - lmax).abs() > 1e-12 * lmax {
                    failures.push(format!("{label} seed {seed}: lambda_max {lmax} vs oracle {o}"));
                }
            }
            let res = solve(&prob, lmax, None, &tight).unwrap();
            at_max += 1;
            if res.nnz() != 0 || res.gap > 1e-12 {
                failures.push(format!("{label} seed {seed}: at lambda_max nnz {} gap {:e}", res.nnz(), res.gap));
            }
            let xi = prob.correlations_at_zero();
            let mut norms: Vec<f64> = (0..prob.n_groups())
                .map(|g| prob.penalty().dual_norm_group(g, &prob.block(g, xi)))
                .collect();
            norms.sort_by(|a, b| b.total_cmp(a));
            if norms.len() > 1 && norms[0] - norms[1] > 1e-6 * norms[0] {
                let res = solve(&prob, 0.999 * lmax, None, &tight).unwrap();
                below += 1;
                if res.nnz() == 0 || !res.converged {
                    failures.push(format!("{label} seed {seed}: beta is zero at 0.999 lambda_max"));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{at_max} solves at lambda_max, {below} at 0.999 lambda_max, {} failures{}",
            failures.len(),
            first(&failures).unwrap_or_default()
        ),
    )
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn eps_norm_bisection(x: &[f64], eps: f64) -> f64 {
    let phi = |nu: f64| {
        x.iter()
            .map(|v| (v.abs() - (1.0 - eps) * nu).max(0.0).powi(2))
            .sum::<f64>()
            - (eps * nu).powi(2)
    };
    let linf = x.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let (mut lo, mut hi) = (linf, norm(x) / eps);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn eps_norm_oracle() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = r.random_range(1..=50);
        let x: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let eps = r.random_range(1e-6..1.0 - 1e-6);
        worst = worst.max((eps_norm(&x, eps) - eps_norm_bisection(&x, eps)).abs());
    }
    let x = [3.0, -4.0, 1.0];
    let inf_ok = eps_norm(&x, 0.0) == 4.0;
    let l2_ok = (eps_norm(&x, 1.0) - 26f64.sqrt()).abs() <= 1e-15;
    let half = eps_norm(&[1.0, 1.0], 0.5);
    let half_err = (half - (4.0 - 2.0 * 2f64.sqrt())).abs();
    check(
        worst <= 1e-10 && inf_ok && l2_ok && half_err <= 1e-12,
        format!(
            "max |sort - bisection| {worst:.2e} over 1000 cases; endpoints exact: {}; |(1,1)|_0.5 error {half_err:.1e}",
            inf_ok && l2_ok
        ),
    )
}

fn equicorrelation() -> Outcome {
    let mut r = rng(5);
    let max_epochs = 20_000;
    let (mut identified, mut excluded) = (0, Vec::new());
    let mut failures = Vec::new();
    let mut k0s = Vec::new();
    for inst in 0..50u64 {
        let prob = lasso(30, 60, 7000 + inst);
        let lambda = prob.lambda_max() * r.random_range(0.1..0.7);
        let refr = reference(&prob, lambda, None);
        let Some(theta) = polished_lasso_dual(&prob, &refr) else {
            failures.push(format!("#{inst}: no exact dual optimum"));
            continue;
        };
        let corr = correlations(&prob, &theta, None);
        let eq: Vec<bool> = corr.iter().map(|c| c.abs() >= 1.0 - 1e-9).collect();
        let margin = corr
            .iter()
            .zip(&eq)
            .filter(|(_, &e)| !e)
            .map(|(c, _)| 1.0 - c.abs())
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-7 {
            excluded.push(format!("#{inst} (margin {margin:.1e})"));
            continue;
        }
        let c = SolverConfig {
            eps: 1e-300,
            scale_tolerance: false,
            max_epochs,
            screen_every: 1,
            record_spheres: true,
            ..cfg(RuleKind::DynamicGapSafe)
        };
        let res = solve(&prob, lambda, None, &c).unwrap();
        let sets: Vec<(usize, &ActiveSet)> = res
            .trace
            .iter()
            .filter_map(|e| e.active.as_ref().map(|a| (e.epoch, a)))
            .collect();
        let k0 = sets.iter().find(|(_, a)| a.feature_mask() == eq.as_slice()).map(|(k, _)| *k);
        match k0 {
            Some(k0) if k0 < max_epochs => {
                let stable = sets
                    .iter()
                    .filter(|(k, _)| *k >= k0)
                    .all(|(_, a)| a.feature_mask() == eq.as_slice());
                if stable {
                    identified += 1;
                    k0s.push(k0);
                } else {
                    failures.push(format!("#{inst}: active set left E after epoch {k0}"));
                }
            }
            _ => failures.push(format!(
                "#{inst}: not identified in {max_epochs} epochs (margin {margin:.1e}, final size {} vs |E| {})",
                res.active.n_active_features(),
                eq.iter().filter(|&&e| e).count()
            )),
        }
    }
    k0s.sort_unstable();
    let median = k0s.get(k0s.len() / 2).copied().unwrap_or(0);
    check(
        failures.is_empty() && identified > 0,
        format!(
            "{identified}/50 identified (median k0 {median}, max {}), {} excluded as boundary-degenerate{}{}",
            k0s.last().copied().unwrap_or(0),
            excluded.len(),
            if excluded.is_empty() { String::new() } else { format!(" {excluded:?}") },
            first(&failures).unwrap_or_default()
        ),
    )
}

fn loss_models(r: &mut ChaCha8Rng, n: usize) -> Vec<LossModel> {
    let gauss = |r: &mut ChaCha8Rng, k: usize| -> Vec<f64> { (0..k).map(|_| r.sample(StandardNormal)).collect() };
    let mut binary: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..2u8))).collect();
    binary[0] = 0.0;
    binary[1] = 1.0;
    let classes: Vec<usize> = (0..n).map(|i| if i < 4 { i } else { r.random_range(0..4) }).collect();
    vec![
        LossModel::quadratic(gauss(r, n)).unwrap(),
        LossModel::logistic(binary).unwrap(),
        LossModel::multi_task(gauss(r, n * 3), 3).unwrap(),
        LossModel::multinomial_from_classes(&classes, 4).unwrap(),
    ]
}

fn loss_checks() -> Outcome {
    let mut r = rng(6);
    let n = 20;
    let mut worst_grad = 0.0f64;
    let mut worst_fenchel = 0.0f64;
    let mut concavity_fail = 0;
    let mut pairs = 0;
    for loss in loss_models(&mut r, n) {
        let q = loss.n_outputs();
        for _ in 0..20 {
            let z: Vec<f64> = (0..n * q).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
            let g = loss.gradient_map(&z);
            let h = 1e-6;
            for k in 0..z.len() {
                let (mut zp, mut zm) = (z.clone(), z.clone());
                zp[k] += h;
                zm[k] -= h;
                let fd = (loss.fit_value(&zp) - loss.fit_value(&zm)) / (2.0 * h);
                worst_grad = worst_grad.max((fd - g[k]).abs() / g[k].abs().max(1.0));
            }
            for i in 0..n {
                let zi = &z[i * q..(i + 1) * q];
                let ui = &g[i * q..(i + 1) * q];
                let inner: f64 = zi.iter().zip(ui).map(|(a, b)| a * b).sum();
                let gap = loss.sample_value(i, zi) + loss.sample_conjugate(i, ui) - inner;
                worst_fenchel = worst_fenchel.max(gap.abs());
            }
        }
        let gamma = loss.gamma();
        for _ in 0..1000 {
            let lambda = r.random_range(0.1..3.0);
            let point = |r: &mut ChaCha8Rng| -> Vec<f64> {
                let z: Vec<f64> = (0..n * q).map(|_| 2.0 * r.sample::<f64, _>(StandardNormal)).collect();
                loss.gradient_map(&z).iter().map(|v| -v / lambda).collect()
            };
            let (t1, t2) = (point(&mut r), point(&mut r));
            let d1 = loss.conjugate_sum(&t1, lambda).unwrap();
            let d2 = loss.conjugate_sum(&t2, lambda).unwrap();
            let grad = loss.dual_gradient(&t1, lambda);
            let lin: f64 = grad.iter().zip(t2.iter().zip(&t1)).map(|(g, (a, b))| g * (a - b)).sum();
            let quad = 0.5 * gamma * lambda * lambda * dist(&t1, &t2).powi(2);
            pairs += 1;
            if d2 > d1 + lin - quad + 1e-9 * (1.0 + d1.abs()) {
                concavity_fail += 1;
            }
        }
    }
    check(
        worst_grad <= 1e-6 && worst_fenchel <= 1e-8 && concavity_fail == 0,
        format!(
            "4 losses: max gradient rel error {worst_grad:.1e}, max Fenchel residual {worst_fenchel:.1e}, {concavity_fail}/{pairs} strong-concavity violations"
        ),
    )
}

fn kronecker() -> Outcome {
    let mut r = rng(7);
    let (n, p, q) = (5, 4, 3);
    let mut g = || -> f64 { r.sample(StandardNormal) };
    let xv: Vec<f64> = (0..n * p).map(|_| g()).collect();
    let yv: Vec<f64> = (0..n * q).map(|_| g()).collect();
    let bv: Vec<f64> = (0..p * q).map(|_| g()).collect();
    let lambda = 0.7;
    let x = gapsafe::DesignMatrix::dense_col_major(n, p, xv.clone()).unwrap();
    let loss = LossModel::multi_task(yv.clone(), q).unwrap();
    let pen = gapsafe::Penalty::group_lasso(gapsafe::GroupPartition::singletons(p)).unwrap();
    let prob = Problem::new(x, loss, pen).unwrap();

    let xm = DMatrix::from_column_slice(n, p, &xv);
    let mut big = DMatrix::zeros(n * q, p * q);
    for k in 0..q {
        big.view_mut((k * n, k * p), (n, p)).copy_from(&xm);
    }
    // vec(·) stacks columns; the library stores rows.
    let vec_b = DVector::from_fn(p * q, |idx, _| bv[(idx % p) * q + idx / p]);
    let vec_y = DVector::from_fn(n * q, |idx, _| yv[(idx % n) * q + idx / n]);
    let resid = &big * &vec_b - &vec_y;
    let rows: f64 = (0..p)
        .map(|j| (0..q).map(|k| bv[j * q + k].powi(2)).sum::<f64>().sqrt())
        .sum();
    let obj_kron = 0.5 * resid.norm_squared() + lambda * rows;
    let grad_kron = big.tr_mul(&resid);

    let obj = prob.primal_objective(&bv, lambda).unwrap();
    let z = prob.x().matvec(&bv, q).unwrap();
    let grad = correlations(&prob, &prob.loss().gradient_map(&z), None);
    let obj_err = (obj - obj_kron).abs();
    let grad_err = (0..p * q)
        .map(|idx| (grad[(idx % p) * q + idx / p] - grad_kron[idx]).abs())
        .fold(0.0, f64::max);
    check(
        obj_err <= 1e-12 && grad_err <= 1e-12,
        format!("n=5 p=4 q=3: objective error {obj_err:.1e}, gradient error {grad_err:.1e}"),
    )
}

fn simplex_violation(prob: &Problem, theta: &[f64], lambda: f64) -> f64 {
    let q = prob.n_outputs();
    prob.loss()
        .y()
        .chunks(q)
        .zip(theta.chunks(q))
        .map(|(y, t)| {
            let x: Vec<f64> = y.iter().zip(t).map(|(a, b)| a - lambda * b).collect();
            let neg = x.iter().fold(0.0f64, |a, &v| a.max(-v));
            neg.max((x.iter().sum::<f64>() - 1.0).abs())
        })
        .fold(0.0, f64::max)
}

fn multinomial_feasibility() -> Outcome {
    let mut checks = 0;
    let mut worst = 0.0f64;
    for seed in 0..4 {
        let q = 3 + (seed as usize % 2);
        let prob = multinomial(60, 80, q, 800 + seed);
        for rule in [RuleKind::NoScreening, RuleKind::DynamicGapSafe, RuleKind::SequentialGapSafe, RuleKind::Strong] {
            let c = SolverConfig {
                record_spheres: true,
                ..cfg(rule)
            };
            let res = run_path(
                &prob,
                &PathConfig {
                    grid: Grid::Geometric { count: 8, decades: 1.5 },
                    warm_start: WarmStart::Plain,
                    solver: c,
                },
            )
            .unwrap();
            for pt in &res.points {
                let Ok(sol) = &pt.outcome else {
                    return Err(format!("solve failed at lambda {:e}", pt.lambda));
                };
                for gc in &sol.gap_checks {
                    checks += 1;
                    worst = worst.max(gc.domain_violation);
                }
                for sphere in sol.trace.iter().filter_map(|e| e.sphere.as_ref()) {
                    checks += 1;
                    worst = worst.max(simplex_violation(&prob, &sphere.center, pt.lambda));
                }
                checks += 1;
                worst = worst.max(simplex_violation(&prob, &sol.theta, pt.lambda));
            }
        }
    }
    check(
        worst <= 1e-12,
        format!("{checks} rescaled dual points, max distance from the simplex {worst:.1e}"),
    )
}

fn primal_of(pt: &PathPoint) -> Result<&SolveResult, String> {
    match &pt.outcome {
        Ok(r) if r.converged => Ok(r),
        Ok(r) => Err(format!("unconverged at lambda {:e} (gap {:e})", pt.lambda, r.gap)),
        Err(e) => Err(format!("error at lambda {:e}: {e}", pt.lambda)),
    }
}

fn cross_rule() -> Outcome {
    let mut compared = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (label, prob) in suite_problems(900) {
        let path = |rule: RuleKind, warm_start: WarmStart| {
            run_path(
                &prob,
                &PathConfig {
                    grid: Grid::Geometric { count: 30, decades: 2.0 },
                    warm_start,
                    solver: SolverConfig {
                        max_epochs: 200_000,
                        ..cfg(rule)
                    },
                },
            )
            .unwrap()
        };
        let base = path(RuleKind::NoScreening, WarmStart::Plain);
        let mut variants: Vec<(RuleKind, WarmStart)> = RuleKind::ALL
            .into_iter()
            .filter(|&r| r != RuleKind::NoScreening)
            .filter(|&r| r != RuleKind::Dst3 || prob.is_single_quadratic())
            .filter(|&r| r != RuleKind::Sis || prob.is_quadratic())
            .map(|r| (r, WarmStart::Plain))
            .collect();
        variants.push((RuleKind::DynamicGapSafe, WarmStart::Active));
        variants.push((RuleKind::DynamicGapSafe, WarmStart::Strong));
        variants.push((RuleKind::Strong, WarmStart::Strong));
        for (rule, ws) in variants {
            let other = path(rule, ws);
            for (a, b) in base.points.iter().zip(&other.points) {
                match (primal_of(a), primal_of(b)) {
                    (Ok(ra), Ok(rb)) => {
                        compared += 1;
                        let tol = ra.tolerance.max(rb.tolerance);
                        let diff = (ra.primal - rb.primal).abs();
                        worst = worst.max(diff / tol);
                        if diff > 2.0 * tol {
                            failures.push(format!(
                                "{label} {rule}/{}: lambda {:e} objective differs by {diff:e} (tol {tol:e})",
                                ws.name(),
                                a.lambda
                            ));
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => failures.push(format!("{label} {rule}/{}: {e}", ws.name())),
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{compared} (rule, lambda) pairs over 6 models, max |dP|/tol {worst:.2e}{}",
            first(&failures).unwrap_or_default()
        ),
    )
}

fn fig4_problem() -> Problem {
    lasso(100, 2000, 42)
}

fn budget_profiles() -> Outcome {
    let prob = fig4_problem();
    let grid = make_grid(prob.lambda_max(), 100, 3.0).unwrap();
    let budgets: Vec<usize> = (1..=9).map(|k| 1 << k).collect();
    let base = SolverConfig::default();
    let dynamic = budget_profile(&prob, &grid, RuleKind::DynamicGapSafe, &budgets, &base).unwrap();
    let stat = budget_profile(&prob, &grid, RuleKind::Static, &budgets, &base).unwrap();
    let nb = budgets.len();

    let mut monotone_fail = Vec::new();
    let mut dominance_fail = Vec::new();
    for (t, &lambda) in grid.iter().enumerate() {
        let d = &dynamic[t * nb..(t + 1) * nb];
        if d.windows(2).any(|w| w[1].active_fraction > w[0].active_fraction) {
            monotone_fail.push(lambda);
        }
        if d[nb - 1].active_fraction > stat[t * nb + nb - 1].active_fraction {
            dominance_fail.push(lambda);
        }
    }

    // λ_critic straight from the data.
    let x = dense(&prob);
    let y = DVector::from_column_slice(prob.loss().y());
    let ynorm = y.norm();
    let xty = x.tr_mul(&y);
    let lmax = max_abs(&xty);
    let oracle = (0..x.ncols())
        .map(|j| {
            let b = ynorm * x.column(j).norm();
            lmax * b / (lmax + b - xty[j].abs())
        })
        .fold(f64::INFINITY, f64::min);
    let lib = lambda_critic(&prob).unwrap_or(f64::NAN);
    let static_full: Vec<bool> = (0..grid.len())
        .map(|t| stat[t * nb].active_fraction == 1.0)
        .collect();
    let first_full = static_full.iter().position(|&f| f);
    let critic_ok = match first_full {
        Some(t) if t > 0 => {
            static_full[t..].iter().all(|&f| f) && grid[t] <= oracle && oracle < grid[t - 1]
        }
        _ => false,
    };
    let formula_ok = (lib - oracle).abs() <= 1e-12 * oracle;
    let d512: Vec<f64> = (0..grid.len()).map(|t| dynamic[t * nb + nb - 1].active_fraction).collect();
    let s512: Vec<f64> = (0..grid.len()).map(|t| stat[t * nb + nb - 1].active_fraction).collect();
    let detail = format!(
        "(a) {} non-monotone lambdas; (b) {} lambdas where dynamic > static at 512 epochs (mean fractions {:.3} vs {:.3}); (c) static screens nothing from grid index {} on, lambda_critic {oracle:.6} (library {lib:.6}) in [{:.6}, {:.6})",
        monotone_fail.len(),
        dominance_fail.len(),
        d512.iter().sum::<f64>() / d512.len() as f64,
        s512.iter().sum::<f64>() / s512.len() as f64,
        first_full.map_or("none".into(), |t| t.to_string()),
        first_full.map_or(f64::NAN, |t| grid[t]),
        first_full.filter(|&t| t > 0).map_or(f64::NAN, |t| grid[t - 1]),
    );
    check(
        monotone_fail.is_empty() && dominance_fail.is_empty() && critic_ok && formula_ok,
        detail,
    )
}

fn speedup() -> Outcome {
    let prob = fig4_problem();
    let run = |rule: RuleKind| {
        let c = PathConfig {
            grid: Grid::Geometric { count: 100, decades: 3.0 },
            warm_start: WarmStart::Plain,
            solver: SolverConfig {
                eps: 1e-6,
                ..cfg(rule)
            },
        };
        let t = Instant::now();
        let res = run_path(&prob, &c).unwrap();
        (t.elapsed().as_secs_f64(), res.all_converged())
    };
    let (t_none, c_none) = run(RuleKind::NoScreening);
    let (t_dyn, c_dyn) = run(RuleKind::DynamicGapSafe);
    check(
        t_dyn <= t_none && c_none && c_dyn,
        format!(
            "none {t_none:.2}s, gap-dynamic {t_dyn:.2}s, ratio {:.2}x; all converged: {}",
            t_none / t_dyn,
            c_none && c_dyn
        ),
    )
}

fn coarse_strong() -> Outcome {
    let mut steps = 0;
    let mut failures = Vec::new();
    for (label, prob) in [("lasso", lasso(50, 200, 77)), ("group-lasso", grouped(50, 200, 5, None, 78))] {
        let grid = make_grid(prob.lambda_max(), 10, 3.0).unwrap();
        if grid.windows(2).any(|w| 2.0 * w[1] >= w[0]) {
            return Err("grid is not coarse".into());
        }
        let res = run_path(
            &prob,
            &PathConfig {
                grid: Grid::Explicit(grid.clone()),
                warm_start: WarmStart::Strong,
                solver: cfg(RuleKind::Strong),
            },
        )
        .unwrap();
        for t in 1..grid.len() {
            steps += 1;
            let prev = primal_of(&res.points[t - 1]).map_err(|e| format!("{label}: {e}"))?;
            let set = strong_rule(&prob, &prev.theta, grid[t], grid[t - 1]).unwrap();
            let pt = &res.points[t];
            let first_event = pt.outcome.as_ref().ok().and_then(|r| r.trace.first()).map(|e| e.active_groups);
            if set.n_active_groups() != prob.n_groups()
                || pt.init_active_groups != prob.n_groups()
                || first_event != Some(prob.n_groups())
            {
                failures.push(format!(
                    "{label} step {t}: strong set {} of {} groups",
                    set.n_active_groups(),
                    prob.n_groups()
                ));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{steps} steps on lasso and group-lasso, strong set = all groups at each{}",
            first(&failures).unwrap_or_default()
        ),
    )
}
