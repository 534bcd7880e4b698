use crate::error::{Error, Result};
use crate::losses::{LossKind, LossModel};
use crate::matrix::DesignMatrix;
use crate::penalties::{gather_block, Penalty, PenaltyKind};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 1000;
/// Multiplicative slack applied to iterative spectral norms so that the cached
/// value is an upper bound.
const NORM_INFLATION: f64 = 1.0 + 1e-9;

/// How `σ_max(X_g)` is obtained for groups with more than one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralMode {
    #[default]
    PowerIteration,
    /// `‖X_g‖_F`; cheaper for very wide groups, looser.
    Frobenius,
}

/// A design matrix, a loss and a penalty, with every λ-independent quantity
/// the solver and the screening rules need.
#[derive(Debug, Clone)]
pub struct Problem {
    x: DesignMatrix,
    loss: LossModel,
    penalty: Penalty,
    col_norms: Vec<f64>,
    spectral: Vec<f64>,
    op_norms: Vec<f64>,
    lipschitz: Vec<f64>,
    grad0: Vec<f64>,
    xi0: Vec<f64>,
    lambda_max: f64,
}

impl Problem {
    pub fn new(x: DesignMatrix, loss: LossModel, penalty: Penalty) -> Result<Self> {
        Self::with_mode(x, loss, penalty, SpectralMode::PowerIteration)
    }

    pub fn with_mode(
        x: DesignMatrix,
        loss: LossModel,
        penalty: Penalty,
        mode: SpectralMode,
    ) -> Result<Self> {
        if x.n_samples() != loss.n_samples() {
            return Err(Error::DimensionMismatch {
                expected: x.n_samples(),
                got: loss.n_samples(),
            });
        }
        if penalty.partition().n_features() != x.n_features() {
            return Err(Error::DimensionMismatch {
                expected: x.n_features(),
                got: penalty.partition().n_features(),
            });
        }
        let q = loss.n_outputs();
        if q > 1 && penalty.kind() != PenaltyKind::L1L2 {
            return Err(Error::InvalidPenalty(
                "multi-output models require the l1/l2 penalty".into(),
            ));
        }

        let col_norms = x.column_norms();
        let part = penalty.partition();
        let spectral: Vec<f64> = part
            .groups()
            .iter()
            .map(|cols| match (cols.len(), mode) {
                (1, _) => col_norms[cols[0]],
                (_, SpectralMode::Frobenius) => {
                    cols.iter().map(|&j| col_norms[j].powi(2)).sum::<f64>().sqrt()
                }
                (_, SpectralMode::PowerIteration) => spectral_norm(&x, cols) * NORM_INFLATION,
            })
            .collect();
        let op_norms = (0..part.n_groups())
            .map(|g| {
                let cols = part.group(g);
                match penalty.kind() {
                    PenaltyKind::L1 => col_norms[cols[0]],
                    PenaltyKind::L1L2 => spectral[g] / part.weight(g),
                    PenaltyKind::SparseGroupLasso { .. } => {
                        spectral[g] / penalty.eps_param(g).scale
                    }
                }
            })
            .collect();
        let curvature = loss.curvature_bound();
        let lipschitz = spectral.iter().map(|s| curvature * s * s).collect();

        let grad0 = loss.gradient_map(&vec![0.0; loss.n_samples() * q]);
        let xi0 = x.transpose_matvec(&grad0, q)?;
        let lambda_max = penalty.dual_norm_global(&xi0, q, None);
        if lambda_max <= 0.0 || !lambda_max.is_finite() {
            return Err(Error::DegenerateProblem);
        }

        Ok(Self {
            x,
            loss,
            penalty,
            col_norms,
            spectral,
            op_norms,
            lipschitz,
            grad0,
            xi0,
            lambda_max,
        })
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn loss(&self) -> &LossModel {
        &self.loss
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn n_samples(&self) -> usize {
        self.x.n_samples()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_features()
    }

    pub fn n_outputs(&self) -> usize {
        self.loss.n_outputs()
    }

    pub fn n_groups(&self) -> usize {
        self.penalty.n_groups()
    }

    pub fn gamma(&self) -> f64 {
        self.loss.gamma()
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.col_norms[j]
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// Certified upper bound on `σ_max(X_g)` (exact for singletons).
    pub fn spectral_norm(&self, g: usize) -> f64 {
        self.spectral[g]
    }

    /// `Ω_g^D(X_g) = sup_u Ω_g^D(X_g^⊤u)/‖u‖₂` (an upper bound).
    pub fn group_operator_norm(&self, g: usize) -> f64 {
        self.op_norms[g]
    }

    /// Block Lipschitz constant of the data-fit gradient.
    pub fn lipschitz(&self, g: usize) -> f64 {
        self.lipschitz[g]
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `G(0)`
    pub fn gradient_at_zero(&self) -> &[f64] {
        &self.grad0
    }

    /// `X^⊤G(0)`
    pub fn correlations_at_zero(&self) -> &[f64] {
        &self.xi0
    }

    /// `θ_max = −G(0)/λ_max`
    pub fn theta_max(&self) -> Vec<f64> {
        self.grad0.iter().map(|g| -g / self.lambda_max).collect()
    }

    pub fn primal_objective(&self, beta: &[f64], lambda: f64) -> Result<f64> {
        let z = self.x.matvec(beta, self.n_outputs())?;
        Ok(self.primal_objective_from(beta, &z, lambda))
    }

    /// `P_λ(β)` given `z = Xβ`.
    pub fn primal_objective_from(&self, beta: &[f64], z: &[f64], lambda: f64) -> f64 {
        self.loss.fit_value(z) + lambda * self.penalty.value(beta, self.n_outputs())
    }

    pub fn dual_objective(&self, theta: &[f64], lambda: f64) -> Result<f64> {
        self.loss.conjugate_sum(theta, lambda)
    }

    /// `P_λ(β) − D_λ(θ)`, after checking that `θ ∈ Δ_X`.
    pub fn gap(&self, beta: &[f64], theta: &[f64], lambda: f64) -> Result<f64> {
        let q = self.n_outputs();
        let xi = self.x.transpose_matvec(theta, q)?;
        let dn = self.penalty.dual_norm_global(&xi, q, None);
        if dn > 1.0 + 1e-12 {
            return Err(Error::InfeasibleDual {
                violation: dn - 1.0,
            });
        }
        let raw = self.primal_objective(beta, lambda)? - self.dual_objective(theta, lambda)?;
        Ok(clamp_gap(raw))
    }

    /// `X_g^⊤v` (`|g|·q` entries, feature-major).
    pub fn group_transpose_matvec(&self, g: usize, v: &[f64]) -> Result<Vec<f64>> {
        group_transpose_matvec(&self.x, self.penalty.partition().groups(), g, v, self.n_outputs())
    }

    /// Validates a primal vector's length.
    pub fn check_beta(&self, beta: &[f64]) -> Result<()> {
        let expected = self.n_features() * self.n_outputs();
        if beta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: beta.len(),
            });
        }
        Ok(())
    }

    /// Gathers group `g`'s block from a `p × q` buffer.
    pub fn block(&self, g: usize, full: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        gather_block(self.penalty.partition(), g, self.n_outputs(), full, &mut out);
        out
    }

    pub fn is_quadratic(&self) -> bool {
        self.loss.kind().is_quadratic()
    }

    pub fn is_single_quadratic(&self) -> bool {
        self.loss.kind() == LossKind::Quadratic
    }
}

/// Rounding can push a gap computed at (near) optimality slightly below zero.
pub(crate) fn clamp_gap(raw: f64) -> f64 {
    raw.max(0.0)
}

/// `X_g^⊤v` for the columns listed in `groups[g]`.
pub fn group_transpose_matvec(
    x: &DesignMatrix,
    groups: &[Vec<usize>],
    g: usize,
    v: &[f64],
    q: usize,
) -> Result<Vec<f64>> {
    let cols = groups.get(g).ok_or(Error::UnknownGroup(g))?;
    if v.len() != x.n_samples() * q {
        return Err(Error::DimensionMismatch {
            expected: x.n_samples() * q,
            got: v.len(),
        });
    }
    let mut out = vec![0.0; cols.len() * q];
    for (k, &j) in cols.iter().enumerate() {
        x.column(j).dot_rows(v, q, &mut out[k * q..(k + 1) * q]);
    }
    Ok(out)
}

/// Largest singular value of the columns `cols` of `x` by power iteration on
/// `X_g^⊤X_g`, stopped when the Rayleigh quotient changes by less than 1e−10
/// (relative) or after 1000 iterations.
pub fn spectral_norm(x: &DesignMatrix, cols: &[usize]) -> f64 {
    let k = cols.len();
    if k == 0 {
        return 0.0;
    }
    // Deterministic start with no special alignment.
    let mut v: Vec<f64> = (0..k)
        .map(|i| 1.0 + (i as f64 * 0.618_033_988_749_895).fract())
        .collect();
    normalize(&mut v);
    let mut u = vec![0.0; x.n_samples()];
    let mut mu = 0.0;
    for _ in 0..POWER_MAX_ITER {
        u.iter_mut().for_each(|e| *e = 0.0);
        for (&j, &vj) in cols.iter().zip(&v) {
            x.column(j).axpy(vj, &mut u);
        }
        let next_mu: f64 = u.iter().map(|e| e * e).sum();
        for (vj, &j) in v.iter_mut().zip(cols) {
            *vj = x.column(j).dot(&u);
        }
        if normalize(&mut v) == 0.0 {
            return 0.0;
        }
        let done = (next_mu - mu).abs() <= POWER_TOL * next_mu;
        mu = next_mu;
        if done {
            break;
        }
    }
    // One more Rayleigh quotient with the final vector.
    u.iter_mut().for_each(|e| *e = 0.0);
    for (&j, &vj) in cols.iter().zip(&v) {
        x.column(j).axpy(vj, &mut u);
    }
    let last: f64 = u.iter().map(|e| e * e).sum();
    mu.max(last).sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|e| e * e).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|e| *e /= n);
    }
    n
}
