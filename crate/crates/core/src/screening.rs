//! Safe regions in the dual, the screening tests they induce, and the unsafe
//! heuristics (strong rules, SIS) used for comparison.

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::penalties::{gather_active_block, l2, linf, soft_threshold, PenaltyKind};
use crate::problem::{clamp_gap, Problem};

/// Scores within this distance below the screening threshold keep the variable.
const BOUNDARY: f64 = 1e-15;

/// Groups and features that may still be nonzero.
///
/// For ℓ1 and ℓ1/ℓ2 penalties the feature mask mirrors the group mask. An
/// active feature always belongs to an active group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    groups: Vec<bool>,
    features: Vec<bool>,
}

impl ActiveSet {
    pub fn full(partition: &GroupPartition) -> Self {
        Self {
            groups: vec![true; partition.n_groups()],
            features: vec![true; partition.n_features()],
        }
    }

    pub fn empty(partition: &GroupPartition) -> Self {
        Self {
            groups: vec![false; partition.n_groups()],
            features: vec![false; partition.n_features()],
        }
    }

    /// Active groups given by `mask`, with all of their features.
    pub fn from_group_mask(partition: &GroupPartition, mask: &[bool]) -> Self {
        let mut set = Self::empty(partition);
        for (g, &on) in mask.iter().enumerate() {
            if on {
                set.insert_group(partition, g);
            }
        }
        set
    }

    pub fn group_active(&self, g: usize) -> bool {
        self.groups[g]
    }

    pub fn feature_active(&self, j: usize) -> bool {
        self.features[j]
    }

    pub fn group_mask(&self) -> &[bool] {
        &self.groups
    }

    pub fn feature_mask(&self) -> &[bool] {
        &self.features
    }

    pub fn n_active_groups(&self) -> usize {
        self.groups.iter().filter(|&&b| b).count()
    }

    pub fn n_active_features(&self) -> usize {
        self.features.iter().filter(|&&b| b).count()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn is_full(&self) -> bool {
        self.features.iter().all(|&b| b)
    }

    pub fn active_groups(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().enumerate().filter(|(_, &b)| b).map(|(g, _)| g)
    }

    pub fn inactive_groups(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().enumerate().filter(|(_, &b)| !b).map(|(g, _)| g)
    }

    pub fn remove_group(&mut self, partition: &GroupPartition, g: usize) {
        self.groups[g] = false;
        for &j in partition.group(g) {
            self.features[j] = false;
        }
    }

    /// Deactivates feature `j`, and its group once no feature of it is left.
    pub fn remove_feature(&mut self, partition: &GroupPartition, j: usize) {
        self.features[j] = false;
        let g = partition.group_of(j);
        if partition.group(g).iter().all(|&k| !self.features[k]) {
            self.groups[g] = false;
        }
    }

    pub fn insert_group(&mut self, partition: &GroupPartition, g: usize) {
        self.groups[g] = true;
        for &j in partition.group(g) {
            self.features[j] = true;
        }
    }

    /// Keeps only what is active in both sets.
    pub fn intersect(&mut self, other: &ActiveSet) {
        for (a, b) in self.features.iter_mut().zip(&other.features) {
            *a &= *b;
        }
        for (a, b) in self.groups.iter_mut().zip(&other.groups) {
            *a &= *b;
        }
    }

    pub fn is_subset_of(&self, other: &ActiveSet) -> bool {
        self.features.iter().zip(&other.features).all(|(&a, &b)| !a || b)
            && self.groups.iter().zip(&other.groups).all(|(&a, &b)| !a || b)
    }
}

/// A ball in the dual that contains `θ̂^{(λ)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSphere {
    pub center: Vec<f64>,
    pub radius: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    NoScreening,
    Static,
    SequentialGapSafe,
    DynamicGapSafe,
    Dst3,
    Strong,
    Sis,
}

impl RuleKind {
    pub const ALL: [RuleKind; 7] = [
        RuleKind::NoScreening,
        RuleKind::Static,
        RuleKind::SequentialGapSafe,
        RuleKind::DynamicGapSafe,
        RuleKind::Dst3,
        RuleKind::Strong,
        RuleKind::Sis,
    ];

    /// Whether screened variables are guaranteed to be zero at the optimum.
    pub fn is_safe(self) -> bool {
        !matches!(self, RuleKind::Strong | RuleKind::Sis)
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::NoScreening => "none",
            RuleKind::Static => "static",
            RuleKind::SequentialGapSafe => "gap-sequential",
            RuleKind::DynamicGapSafe => "gap-dynamic",
            RuleKind::Dst3 => "dst3",
            RuleKind::Strong => "strong",
            RuleKind::Sis => "sis",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }
}

impl std::fmt::Display for RuleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `X^⊤v` computed only for features active in `active` (others are 0).
pub fn correlations(prob: &Problem, v: &[f64], active: Option<&ActiveSet>) -> Vec<f64> {
    let q = prob.n_outputs();
    let mut out = vec![0.0; prob.n_features() * q];
    for j in 0..prob.n_features() {
        if active.is_none_or(|a| a.feature_active(j)) {
            let col = prob.x().column(j);
            if q == 1 {
                out[j] = col.dot(v);
            } else {
                col.dot_rows(v, q, &mut out[j * q..(j + 1) * q]);
            }
        }
    }
    out
}

/// `Θ(z) = z / max(1, Ω^D(X^⊤z))`; returns the rescaled point and the divisor.
///
/// With `restrict`, the dual norm is taken over the active groups only, which
/// is exact whenever the set is safe.
pub fn dual_scale(prob: &Problem, z: &[f64], restrict: Option<&ActiveSet>) -> (Vec<f64>, f64) {
    let xi = correlations(prob, z, restrict);
    let alpha = prob
        .penalty()
        .dual_norm_global(&xi, prob.n_outputs(), restrict)
        .max(1.0);
    (z.iter().map(|v| v / alpha).collect(), alpha)
}

/// `√(2·gap / (γλ²))`
pub fn gap_safe_radius(gap: f64, gamma: f64, lambda: f64) -> f64 {
    (2.0 * gap.max(0.0) / (gamma * lambda * lambda)).sqrt()
}

/// Allowance for rounding in a gap evaluated as the difference of two sums.
pub(crate) fn gap_slack(primal: f64, dual: f64) -> f64 {
    8.0 * f64::EPSILON * (primal.abs() + dual.abs())
}

/// The Gap Safe sphere centred at a feasible `θ`.
pub fn gap_safe_sphere(prob: &Problem, beta: &[f64], theta: &[f64], lambda: f64) -> Result<SafeSphere> {
    let gap = prob.gap(beta, theta, lambda)?;
    let primal = prob.primal_objective(beta, lambda)?;
    let slack = gap_slack(primal, primal - gap);
    Ok(SafeSphere {
        center: theta.to_vec(),
        radius: gap_safe_radius(gap + slack, prob.gamma(), lambda),
        lambda,
    })
}

/// `T_g` in the group-level Sparse-Group Lasso test, given `ξ = X_g^⊤θ` and
/// `r‖X_g‖₂`.
pub fn sgl_group_bound(xi: &[f64], r_spectral: f64, tau: f64) -> f64 {
    let m = linf(xi);
    if m > tau {
        l2(&soft_threshold(xi, tau)) + r_spectral
    } else {
        (m + r_spectral - tau).max(0.0)
    }
}

fn below(score: f64, threshold: f64) -> bool {
    score < threshold - BOUNDARY * threshold.abs().max(1.0)
}

/// Outcome of testing one group against a sphere.
enum GroupVerdict {
    Keep,
    Screen,
    /// Sparse-Group Lasso: group kept, these features screened.
    Partial(Vec<usize>),
}

/// `xi` is the block `X_g^⊤c` with inactive features zeroed.
fn test_group(prob: &Problem, g: usize, xi: &[f64], r: f64, active: Option<&ActiveSet>) -> GroupVerdict {
    let pen = prob.penalty();
    match pen.kind() {
        PenaltyKind::SparseGroupLasso { tau } => {
            let wg = (1.0 - tau) * pen.partition().weight(g);
            let bound = sgl_group_bound(xi, r * prob.spectral_norm(g), tau);
            if below(bound, wg) {
                return GroupVerdict::Screen;
            }
            let screened: Vec<usize> = pen
                .partition()
                .group(g)
                .iter()
                .zip(xi)
                .filter(|(&j, &v)| {
                    active.is_none_or(|a| a.feature_active(j))
                        && below(v.abs() + r * prob.column_norm(j), tau)
                })
                .map(|(&j, _)| j)
                .collect();
            if screened.is_empty() {
                GroupVerdict::Keep
            } else {
                GroupVerdict::Partial(screened)
            }
        }
        _ => {
            let score = pen.dual_norm_group(g, xi) + r * prob.group_operator_norm(g);
            if below(score, 1.0) {
                GroupVerdict::Screen
            } else {
                GroupVerdict::Keep
            }
        }
    }
}

/// Applies the sphere test with centre correlations `xi_center = X^⊤c`
/// (valid on active features) to every active group; returns how many
/// features were newly deactivated.
pub(crate) fn screen_in_place(
    prob: &Problem,
    xi_center: &[f64],
    r: f64,
    active: &mut ActiveSet,
) -> usize {
    let part = prob.penalty().partition();
    let q = prob.n_outputs();
    let before = active.n_active_features();
    let mut block = Vec::new();
    for g in 0..part.n_groups() {
        if !active.group_active(g) {
            continue;
        }
        gather_active_block(part, g, q, xi_center, active, &mut block);
        match test_group(prob, g, &block, r, Some(active)) {
            GroupVerdict::Keep => {}
            GroupVerdict::Screen => active.remove_group(part, g),
            GroupVerdict::Partial(js) => {
                for j in js {
                    active.remove_feature(part, j);
                }
            }
        }
    }
    before - active.n_active_features()
}

/// `true` when the sphere proves `β̂_g = 0`. For the Sparse-Group Lasso this
/// is the group-level test only.
pub fn sphere_test(prob: &Problem, sphere: &SafeSphere, g: usize) -> Result<bool> {
    let xi = prob.group_transpose_matvec(g, &sphere.center)?;
    Ok(matches!(test_group(prob, g, &xi, sphere.radius, None), GroupVerdict::Screen))
}

/// Group- and feature-level tests for the Sparse-Group Lasso. Returns whether
/// the whole group is screened and, if not, which of its features are.
pub fn sgl_two_level_test(prob: &Problem, sphere: &SafeSphere, g: usize) -> Result<(bool, Vec<usize>)> {
    if prob.penalty().tau().is_none() {
        return Err(Error::UnsupportedRule(
            "two-level test needs a sparse-group lasso penalty".into(),
        ));
    }
    let xi = prob.group_transpose_matvec(g, &sphere.center)?;
    Ok(match test_group(prob, g, &xi, sphere.radius, None) {
        GroupVerdict::Keep => (false, Vec::new()),
        GroupVerdict::Screen => (true, prob.penalty().partition().group(g).to_vec()),
        GroupVerdict::Partial(js) => (false, js),
    })
}

/// Everything not screened by the sphere.
pub fn active_set_from_sphere(prob: &Problem, sphere: &SafeSphere) -> ActiveSet {
    let xi = correlations(prob, &sphere.center, None);
    let mut active = ActiveSet::full(prob.penalty().partition());
    screen_in_place(prob, &xi, sphere.radius, &mut active);
    active
}

/// The sphere built from `β = 0` and `θ_max = −G(0)/λ_max`.
pub fn static_rule(prob: &Problem, lambda: f64) -> Result<SafeSphere> {
    if lambda <= 0.0 {
        return Err(Error::InvalidConfig("lambda must be positive".into()));
    }
    let theta = prob.theta_max();
    let zero = vec![0.0; prob.n_features() * prob.n_outputs()];
    gap_safe_sphere(prob, &zero, &theta, lambda)
}

/// Active set of the static rule; empty above `λ_max`, where `β̂ = 0`.
pub fn static_active_set(prob: &Problem, lambda: f64) -> Result<ActiveSet> {
    if lambda > prob.lambda_max() {
        return Ok(ActiveSet::empty(prob.penalty().partition()));
    }
    Ok(active_set_from_sphere(prob, &static_rule(prob, lambda)?))
}

/// The largest `λ` below which the static sphere screens nothing, for the
/// single-output quadratic loss with an ℓ1 or ℓ1/ℓ2 penalty:
/// `min_g λ_max‖y‖ Ω_g^D(X_g) / (λ_max + ‖y‖ Ω_g^D(X_g) − Ω_g^D(X_g^⊤y))`.
pub fn lambda_critic(prob: &Problem) -> Option<f64> {
    if !prob.is_single_quadratic() || prob.penalty().tau().is_some() {
        return None;
    }
    let lmax = prob.lambda_max();
    let ynorm = l2(prob.loss().y());
    let xi = prob.correlations_at_zero();
    (0..prob.n_groups())
        .map(|g| {
            let a = prob.penalty().dual_norm_group(g, &prob.block(g, xi));
            let b = ynorm * prob.group_operator_norm(g);
            lmax * b / (lmax + b - a)
        })
        .reduce(f64::min)
}

/// The Gap Safe sphere at `λ` seeded with a previous primal point.
pub fn sequential_init(prob: &Problem, beta_prev: &[f64], lambda: f64) -> Result<SafeSphere> {
    prob.check_beta(beta_prev)?;
    let z = prob.x().matvec(beta_prev, prob.n_outputs())?;
    let grad = prob.loss().gradient_map(&z);
    let cand: Vec<f64> = grad.iter().map(|g| -g / lambda).collect();
    let (theta, _) = dual_scale(prob, &cand, None);
    gap_safe_sphere(prob, beta_prev, &theta, lambda)
}

/// Normal `η` of the supporting half-space `{θ : ⟨η, θ⟩ ≤ 1}` of `Δ_X` at `θ_max`.
fn dst3_normal(prob: &Problem) -> Vec<f64> {
    let xi = prob.correlations_at_zero();
    let pen = prob.penalty();
    let mut best = (0, f64::NEG_INFINITY);
    for g in 0..prob.n_groups() {
        let v = pen.dual_norm_group(g, &prob.block(g, xi));
        if v > best.1 {
            best = (g, v);
        }
    }
    let g = best.0;
    // X_g^⊤ y / λ_max = −X_g^⊤ G(0) / λ_max
    let arg: Vec<f64> = prob.block(g, xi).iter().map(|v| -v / prob.lambda_max()).collect();
    let grad = pen.dual_norm_gradient(g, &arg);
    let mut eta = vec![0.0; prob.n_samples()];
    for (&j, &c) in pen.partition().group(g).iter().zip(&grad) {
        prob.x().column(j).axpy(c, &mut eta);
    }
    eta
}

/// Sphere obtained by intersecting the ball around `y/λ` through a feasible
/// `θ_k` with the supporting half-space at `θ_max` (quadratic loss only).
pub fn dst3_sphere(prob: &Problem, lambda: f64, theta_k: &[f64]) -> Result<SafeSphere> {
    if !prob.is_single_quadratic() {
        return Err(Error::UnsupportedRule("dst3 requires the single-output quadratic loss".into()));
    }
    let y = prob.loss().y();
    let eta = dst3_normal(prob);
    let y_l: Vec<f64> = y.iter().map(|v| v / lambda).collect();
    let eta_sq: f64 = eta.iter().map(|e| e * e).sum();
    let shift = (y_l.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>() - 1.0) / eta_sq;
    let center: Vec<f64> = y_l.iter().zip(&eta).map(|(a, e)| a - shift * e).collect();
    // ‖y/λ − θ_k‖² − ‖y/λ − c‖², expanded around c to avoid cancellation.
    let to_center: f64 = theta_k.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum();
    let height = 1.0 - theta_k.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>();
    let slack = 16.0 * f64::EPSILON * y_l.iter().map(|v| v * v).sum::<f64>();
    Ok(SafeSphere {
        center,
        radius: (to_center + 2.0 * shift * height + slack).max(0.0).sqrt(),
        lambda,
    })
}

/// Groups kept by the strong rule: `Ω_g^D(X_g^⊤θ') ≥ (2λ − λ')/λ'`. Unsafe.
pub fn strong_rule(prob: &Problem, theta_prev: &[f64], lambda: f64, lambda_prev: f64) -> Result<ActiveSet> {
    if lambda > lambda_prev || lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "strong rule needs 0 < lambda <= lambda_prev (got {lambda}, {lambda_prev})"
        )));
    }
    let threshold = (2.0 * lambda - lambda_prev) / lambda_prev;
    let xi = correlations(prob, theta_prev, None);
    let part = prob.penalty().partition();
    let mask: Vec<bool> = (0..prob.n_groups())
        .map(|g| prob.penalty().dual_norm_group(g, &prob.block(g, &xi)) >= threshold)
        .collect();
    Ok(ActiveSet::from_group_mask(part, &mask))
}

/// Discarded groups whose optimality condition is violated by more than `eps`.
///
/// `theta` should be the unscaled point `−G(Xβ)/λ`: a rescaled point is
/// feasible by construction and would hide violations.
pub fn kkt_postcheck(
    prob: &Problem,
    beta: &[f64],
    theta: &[f64],
    discarded: &[usize],
    eps: f64,
) -> Result<Vec<usize>> {
    prob.check_beta(beta)?;
    let mut out = Vec::new();
    for &g in discarded {
        let xi = prob.group_transpose_matvec(g, theta)?;
        let b = prob.block(g, beta);
        if prob.penalty().subdiff_distance(g, &b, &xi) > eps {
            out.push(g);
        }
    }
    Ok(out)
}

/// KKT tolerance that turns a target gap `eps_target` into a check on the
/// residual: `eps_target / P_λ(β) − (1 − λ/α)²` with
/// `α = max(λ, Ω^D(X^⊤(−G(Xβ))))`, clamped at 0.
pub fn kkt_default_eps(prob: &Problem, beta: &[f64], lambda: f64, eps_target: f64) -> Result<f64> {
    let q = prob.n_outputs();
    let z = prob.x().matvec(beta, q)?;
    let grad = prob.loss().gradient_map(&z);
    let xi = prob.x().transpose_matvec(&grad, q)?;
    let alpha = prob.penalty().dual_norm_global(&xi, q, None).max(lambda);
    let primal = prob.primal_objective_from(beta, &z, lambda);
    if primal <= 0.0 {
        return Ok(0.0);
    }
    Ok((eps_target / primal - (1.0 - lambda / alpha).powi(2)).max(0.0))
}

/// Sure Independence Screening: drop groups with `Ω_g^D(X_g^⊤y) < γ`. Unsafe.
pub fn sis_rule(prob: &Problem, gamma: f64) -> Result<ActiveSet> {
    if !prob.is_quadratic() {
        return Err(Error::UnsupportedRule("sis requires a quadratic loss".into()));
    }
    // X^⊤G(0) = −X^⊤y and dual norms are symmetric.
    let xi = prob.correlations_at_zero();
    let mask: Vec<bool> = (0..prob.n_groups())
        .map(|g| !(prob.penalty().dual_norm_group(g, &prob.block(g, xi)) < gamma))
        .collect();
    Ok(ActiveSet::from_group_mask(prob.penalty().partition(), &mask))
}

/// Gap of `(β, θ)` plus its rounding allowance; used by the solver.
pub(crate) fn padded_gap(primal: f64, dual: f64) -> (f64, f64) {
    let gap = clamp_gap(primal - dual);
    (gap, gap + gap_slack(primal, dual))
}
