//! Group-decomposable norms: ℓ1, weighted ℓ1/ℓ2 and the Sparse-Group Lasso mix.
//!
//! Every operation works on a *block*: the coefficients (or dual correlations)
//! of one group, flattened feature-major. For single-output models a block has
//! `|g|` entries; for multi-output models it has `|g|·q` entries.

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::screening::ActiveSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    /// `‖β‖₁`; requires a singleton partition. Group weights are ignored.
    L1,
    /// `Σ_g w_g ‖β_g‖₂`
    L1L2,
    /// `τ‖β‖₁ + (1−τ) Σ_g w_g ‖β_g‖₂`
    SparseGroupLasso { tau: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    kind: PenaltyKind,
    partition: GroupPartition,
}

/// Per-group parameters of the ε-norm form of the Sparse-Group Lasso dual norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsNormParam {
    /// `ε_g = (1−τ)w_g / (τ + (1−τ)w_g)`
    pub eps: f64,
    /// `τ + (1−τ)w_g`
    pub scale: f64,
}

impl Penalty {
    pub fn new(kind: PenaltyKind, partition: GroupPartition) -> Result<Self> {
        match kind {
            PenaltyKind::L1 => {
                if !partition.is_singletons() {
                    return Err(Error::InvalidPenalty(
                        "the l1 penalty requires a singleton partition".into(),
                    ));
                }
            }
            PenaltyKind::L1L2 => {
                if partition.weights().iter().any(|&w| w <= 0.0) {
                    return Err(Error::InvalidPenalty(
                        "group lasso weights must be positive".into(),
                    ));
                }
            }
            PenaltyKind::SparseGroupLasso { tau } => {
                if !(0.0..=1.0).contains(&tau) {
                    return Err(Error::InvalidPenalty(format!("tau = {tau} outside [0, 1]")));
                }
                if tau == 0.0 && partition.weights().iter().any(|&w| w == 0.0) {
                    return Err(Error::InvalidPenalty(
                        "tau = 0 with a zero group weight is not a norm".into(),
                    ));
                }
            }
        }
        Ok(Self { kind, partition })
    }

    pub fn lasso(p: usize) -> Self {
        Self {
            kind: PenaltyKind::L1,
            partition: GroupPartition::singletons(p),
        }
    }

    pub fn group_lasso(partition: GroupPartition) -> Result<Self> {
        Self::new(PenaltyKind::L1L2, partition)
    }

    pub fn sparse_group_lasso(tau: f64, partition: GroupPartition) -> Result<Self> {
        Self::new(PenaltyKind::SparseGroupLasso { tau }, partition)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn n_groups(&self) -> usize {
        self.partition.n_groups()
    }

    pub fn tau(&self) -> Option<f64> {
        match self.kind {
            PenaltyKind::SparseGroupLasso { tau } => Some(tau),
            _ => None,
        }
    }

    pub fn eps_param(&self, g: usize) -> EpsNormParam {
        match self.kind {
            PenaltyKind::L1 => EpsNormParam { eps: 0.0, scale: 1.0 },
            PenaltyKind::L1L2 => EpsNormParam {
                eps: 1.0,
                scale: self.partition.weight(g),
            },
            PenaltyKind::SparseGroupLasso { tau } => {
                let w = self.partition.weight(g);
                let scale = tau + (1.0 - tau) * w;
                EpsNormParam {
                    eps: (1.0 - tau) * w / scale,
                    scale,
                }
            }
        }
    }

    /// `Ω_g(b)` for one block.
    pub fn group_value(&self, g: usize, block: &[f64]) -> f64 {
        match self.kind {
            PenaltyKind::L1 => l1(block),
            PenaltyKind::L1L2 => self.partition.weight(g) * l2(block),
            PenaltyKind::SparseGroupLasso { tau } => {
                tau * l1(block) + (1.0 - tau) * self.partition.weight(g) * l2(block)
            }
        }
    }

    /// `Ω(β)` for `β` of shape `p × q`.
    pub fn value(&self, beta: &[f64], q: usize) -> f64 {
        let mut block = Vec::new();
        (0..self.n_groups())
            .map(|g| {
                gather_block(&self.partition, g, q, beta, &mut block);
                self.group_value(g, &block)
            })
            .sum()
    }

    /// `Ω_g^D(ξ_g)`
    pub fn dual_norm_group(&self, g: usize, xi: &[f64]) -> f64 {
        match self.kind {
            PenaltyKind::L1 => linf(xi),
            PenaltyKind::L1L2 => l2(xi) / self.partition.weight(g),
            PenaltyKind::SparseGroupLasso { .. } => {
                let param = self.eps_param(g);
                eps_norm(xi, param.eps) / param.scale
            }
        }
    }

    /// `Ω^D(ξ) = max_g Ω_g^D(ξ_g)` for `ξ` of shape `p × q`.
    ///
    /// With `restrict`, only active groups are visited and entries of inactive
    /// features are treated as zero.
    pub fn dual_norm_global(&self, xi: &[f64], q: usize, restrict: Option<&ActiveSet>) -> f64 {
        let mut block = Vec::new();
        let mut best = 0.0f64;
        for g in 0..self.n_groups() {
            if let Some(active) = restrict {
                if !active.group_active(g) {
                    continue;
                }
                gather_active_block(&self.partition, g, q, xi, active, &mut block);
            } else {
                gather_block(&self.partition, g, q, xi, &mut block);
            }
            let v = self.dual_norm_group(g, &block);
            if v > best {
                best = v;
            }
        }
        best
    }

    /// `argmin_b ½‖b − v‖² + step·Ω_g(b)`
    pub fn block_prox(&self, g: usize, v: &[f64], step: f64) -> Vec<f64> {
        let mut out = v.to_vec();
        self.block_prox_in_place(g, &mut out, step);
        out
    }

    pub fn block_prox_in_place(&self, g: usize, v: &mut [f64], step: f64) {
        match self.kind {
            PenaltyKind::L1 => soft_threshold_in_place(v, step),
            PenaltyKind::L1L2 => group_shrink(v, step * self.partition.weight(g)),
            PenaltyKind::SparseGroupLasso { tau } => {
                soft_threshold_in_place(v, step * tau);
                group_shrink(v, step * (1.0 - tau) * self.partition.weight(g));
            }
        }
    }

    /// Euclidean distance from `ξ_g` to `∂Ω_g(β_g)`; zero iff the group's
    /// optimality condition `ξ_g ∈ ∂Ω_g(β_g)` holds.
    pub fn subdiff_distance(&self, g: usize, beta: &[f64], xi: &[f64]) -> f64 {
        match self.kind {
            PenaltyKind::L1 => l1_subdiff_residual(beta, xi, 1.0),
            PenaltyKind::L1L2 => {
                let w = self.partition.weight(g);
                let nb = l2(beta);
                if nb == 0.0 {
                    (l2(xi) - w).max(0.0)
                } else {
                    beta.iter()
                        .zip(xi)
                        .map(|(b, x)| (x - w * b / nb).powi(2))
                        .sum::<f64>()
                        .sqrt()
                }
            }
            PenaltyKind::SparseGroupLasso { tau } => {
                let wg = (1.0 - tau) * self.partition.weight(g);
                let nb = l2(beta);
                if nb == 0.0 {
                    let st = soft_threshold(xi, tau);
                    (l2(&st) - wg).max(0.0)
                } else {
                    let shifted: Vec<f64> =
                        beta.iter().zip(xi).map(|(b, x)| x - wg * b / nb).collect();
                    l1_subdiff_residual(beta, &shifted, tau)
                }
            }
        }
    }

    /// Gradient of `Ω_g^D` at `ξ_g`, where it is differentiable (at an argmax
    /// tie of an ℓ∞ part, the first maximiser is used).
    pub fn dual_norm_gradient(&self, g: usize, xi: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; xi.len()];
        let param = self.eps_param(g);
        let nu = eps_norm(xi, param.eps);
        if nu == 0.0 {
            return grad;
        }
        if param.eps <= 0.0 {
            let (k, _) = xi
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
            grad[k] = xi[k].signum();
        } else {
            // Implicit differentiation of Σ(|ξ_i| − (1−ε)ν)₊² = ε²ν².
            let c = 1.0 - param.eps;
            let st = soft_threshold(xi, c * nu);
            let denom = c * l1(&st) + param.eps * param.eps * nu;
            for (g, s) in grad.iter_mut().zip(&st) {
                *g = s / denom;
            }
        }
        grad.iter_mut().for_each(|g| *g /= param.scale);
        grad
    }
}

/// Copies the block of group `g` out of a `p × q` buffer.
pub(crate) fn gather_block(
    partition: &GroupPartition,
    g: usize,
    q: usize,
    full: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    for &j in partition.group(g) {
        out.extend_from_slice(&full[j * q..(j + 1) * q]);
    }
}

/// Like [`gather_block`] but zeroes the entries of inactive features.
pub(crate) fn gather_active_block(
    partition: &GroupPartition,
    g: usize,
    q: usize,
    full: &[f64],
    active: &ActiveSet,
    out: &mut Vec<f64>,
) {
    out.clear();
    for &j in partition.group(g) {
        if active.feature_active(j) {
            out.extend_from_slice(&full[j * q..(j + 1) * q]);
        } else {
            out.extend(std::iter::repeat_n(0.0, q));
        }
    }
}

/// Residual of `ξ ∈ level·∂‖·‖₁(β)`, measured coordinate-wise then in ℓ2.
fn l1_subdiff_residual(beta: &[f64], xi: &[f64], level: f64) -> f64 {
    beta.iter()
        .zip(xi)
        .map(|(&b, &x)| {
            if b == 0.0 {
                (x.abs() - level).max(0.0)
            } else {
                (x - level * b.signum()).abs()
            }
        })
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `[ST_τ(x)]_j = sign(x_j)(|x_j| − τ)₊`
pub fn soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    let mut out = x.to_vec();
    soft_threshold_in_place(&mut out, tau);
    out
}

pub fn soft_threshold_scalar(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

fn soft_threshold_in_place(x: &mut [f64], tau: f64) {
    for v in x.iter_mut() {
        *v = soft_threshold_scalar(*v, tau);
    }
}

/// `(1 − level/‖v‖₂)₊ v`
fn group_shrink(v: &mut [f64], level: f64) {
    let norm = l2(v);
    if norm <= level {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let factor = 1.0 - level / norm;
        v.iter_mut().for_each(|x| *x *= factor);
    }
}

/// The ε-norm: the unique `ν ≥ 0` with `Σ_i (|x_i| − (1−ε)ν)₊² = (εν)²`.
///
/// `ε = 0` gives `‖x‖_∞` and `ε = 1` gives `‖x‖₂`. In between, the magnitudes
/// are sorted in decreasing order; on the range of `ν` where exactly the `k`
/// largest entries exceed `(1−ε)ν` the equation is a quadratic in `ν` whose
/// coefficients are prefix sums, and the first `k` whose root keeps entry
/// `k+1` below the threshold is the answer.
pub fn eps_norm(x: &[f64], eps: f64) -> f64 {
    if eps <= 0.0 {
        return linf(x);
    }
    if eps >= 1.0 {
        return l2(x);
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_unstable_by(|a, b| b.total_cmp(a));

    let c = 1.0 - eps;
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut nu = 0.0;
    for (k, &a) in mags.iter().enumerate() {
        s1 += a;
        s2 += a * a;
        // (k c² − ε²) ν² − 2 c S₁ ν + S₂ = 0, smaller positive root written
        // in the cancellation-free form S₂ / (c S₁ + √disc).
        let quad = (k + 1) as f64 * c * c - eps * eps;
        let half_lin = c * s1;
        let disc = (half_lin * half_lin - quad * s2).max(0.0);
        nu = s2 / (half_lin + disc.sqrt());
        let next = mags.get(k + 1).copied().unwrap_or(0.0);
        if c * nu >= next {
            return nu;
        }
    }
    nu
}
