//! Data-fit terms `F(β) = Σ_i f_i(x_i^⊤β)`, their Fenchel conjugates and the
//! gradient map `G`.
//!
//! | kind        | f_i(z)                     | f_i*(u)              | γ |
//! |-------------|----------------------------|----------------------|---|
//! | Quadratic   | (y_i − z)²/2               | ((u+y_i)² − y_i²)/2  | 1 |
//! | MultiTask   | ‖Y_i − z‖²/2               | (‖u+Y_i‖² − ‖Y_i‖²)/2| 1 |
//! | Logistic    | log(1+e^z) − y_i z         | Nh(u + y_i)          | 4 |
//! | Multinomial | logΣ_k e^{z_k} − Y_i^⊤ z   | NH(u + Y_i)          | 1 |
//!
//! All arrays are `n × q` row-major (`q = 1` for the scalar models).

use crate::error::{Error, Result};

/// Entries of a conjugate argument may leave `[0,1]` or the simplex by this
/// much before the point is declared infeasible; within it they are clamped.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Quadratic,
    Logistic,
    MultiTaskQuadratic,
    Multinomial,
}

impl LossKind {
    /// Strong concavity constant of the conjugates (`f_i` has a `1/γ`-Lipschitz gradient).
    pub fn gamma(self) -> f64 {
        match self {
            LossKind::Logistic => 4.0,
            _ => 1.0,
        }
    }

    pub fn is_quadratic(self) -> bool {
        matches!(self, LossKind::Quadratic | LossKind::MultiTaskQuadratic)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    y: Vec<f64>,
    n: usize,
    q: usize,
}

impl LossModel {
    pub fn quadratic(y: Vec<f64>) -> Result<Self> {
        check_finite(&y)?;
        Ok(Self {
            kind: LossKind::Quadratic,
            n: y.len(),
            q: 1,
            y,
        })
    }

    /// Binary logistic regression; labels must be 0 or 1.
    pub fn logistic(y: Vec<f64>) -> Result<Self> {
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidLabels(format!("logistic label {v} not in {{0, 1}}")));
        }
        Ok(Self {
            kind: LossKind::Logistic,
            n: y.len(),
            q: 1,
            y,
        })
    }

    /// Multi-task regression with an `n × q` row-major target matrix.
    pub fn multi_task(y: Vec<f64>, q: usize) -> Result<Self> {
        check_finite(&y)?;
        let n = rows_of(&y, q)?;
        Ok(Self {
            kind: LossKind::MultiTaskQuadratic,
            y,
            n,
            q,
        })
    }

    /// Multinomial regression with an `n × q` one-hot row-major matrix.
    pub fn multinomial(y: Vec<f64>, q: usize) -> Result<Self> {
        let n = rows_of(&y, q)?;
        for (i, row) in y.chunks(q).enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidLabels(format!("row {i} is not one-hot")));
            }
        }
        Ok(Self {
            kind: LossKind::Multinomial,
            y,
            n,
            q,
        })
    }

    /// Multinomial model from class indices in `0..q`.
    pub fn multinomial_from_classes(classes: &[usize], q: usize) -> Result<Self> {
        let mut y = vec![0.0; classes.len() * q];
        for (i, &c) in classes.iter().enumerate() {
            if c >= q {
                return Err(Error::InvalidLabels(format!("class {c} out of range (q = {q})")));
            }
            y[i * q + c] = 1.0;
        }
        Self::multinomial(y, q)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.kind.gamma()
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_outputs(&self) -> usize {
        self.q
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Upper bound on the curvature of `f_i` (the block step uses `L_g = c·σ_max(X_g)²`).
    pub fn curvature_bound(&self) -> f64 {
        1.0 / self.gamma()
    }

    /// `f_i(z_i)`
    pub fn sample_value(&self, i: usize, z: &[f64]) -> f64 {
        let y = &self.y[i * self.q..(i + 1) * self.q];
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => {
                0.5 * y.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            }
            LossKind::Logistic => softplus(z[0]) - y[0] * z[0],
            LossKind::Multinomial => {
                log_sum_exp(z) - y.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
            }
        }
    }

    /// `Σ_i f_i(z_i)`
    pub fn fit_value(&self, z: &[f64]) -> f64 {
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => {
                0.5 * self.y.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            }
            _ => (0..self.n)
                .map(|i| self.sample_value(i, &z[i * self.q..(i + 1) * self.q]))
                .sum(),
        }
    }

    /// Writes `∇f_i(z_i)` into `out`.
    #[inline]
    pub fn gradient_row(&self, i: usize, z: &[f64], out: &mut [f64]) {
        let y = &self.y[i * self.q..(i + 1) * self.q];
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => {
                for ((o, zk), yk) in out.iter_mut().zip(z).zip(y) {
                    *o = zk - yk;
                }
            }
            LossKind::Logistic => out[0] = sigmoid(z[0]) - y[0],
            LossKind::Multinomial => {
                let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let mut total = 0.0;
                for (o, &zk) in out.iter_mut().zip(z) {
                    *o = (zk - m).exp();
                    total += *o;
                }
                for (o, yk) in out.iter_mut().zip(y) {
                    *o = *o / total - yk;
                }
            }
        }
    }

    /// `G(z)`, same shape as `z`.
    pub fn gradient_map(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for i in 0..self.n {
            let r = i * self.q..(i + 1) * self.q;
            self.gradient_row(i, &z[r.clone()], &mut out[r]);
        }
        out
    }

    /// `f_i*(u)`; `+∞` outside the conjugate domain.
    pub fn sample_conjugate(&self, i: usize, u: &[f64]) -> f64 {
        let y = &self.y[i * self.q..(i + 1) * self.q];
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => {
                0.5 * u
                    .iter()
                    .zip(y)
                    .map(|(uk, yk)| (uk + yk).powi(2) - yk * yk)
                    .sum::<f64>()
            }
            LossKind::Logistic => neg_entropy_binary(u[0] + y[0]),
            LossKind::Multinomial => {
                let x: Vec<f64> = u.iter().zip(y).map(|(a, b)| a + b).collect();
                neg_entropy_simplex(&x)
            }
        }
    }

    /// Largest amount by which some `y_i − λθ_i` leaves the conjugate domain
    /// (`[0,1]` for logistic, the simplex for multinomial; always 0 otherwise).
    pub fn domain_violation(&self, theta: &[f64], lambda: f64) -> f64 {
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => 0.0,
            LossKind::Logistic => self
                .y
                .iter()
                .zip(theta)
                .map(|(y, t)| {
                    let x = y - lambda * t;
                    (-x).max(x - 1.0).max(0.0)
                })
                .fold(0.0, f64::max),
            LossKind::Multinomial => self
                .y
                .chunks(self.q)
                .zip(theta.chunks(self.q))
                .map(|(y, t)| {
                    let mut sum = 0.0;
                    let mut neg = 0.0f64;
                    for (yk, tk) in y.iter().zip(t) {
                        let x = yk - lambda * tk;
                        sum += x;
                        neg = neg.max(-x);
                    }
                    neg.max((sum - 1.0).abs())
                })
                .fold(0.0, f64::max),
        }
    }

    /// The dual objective `D_λ(θ) = −Σ_i f_i*(−λθ_i)`.
    pub fn conjugate_sum(&self, theta: &[f64], lambda: f64) -> Result<f64> {
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => Ok(0.5
                * self
                    .y
                    .iter()
                    .zip(theta)
                    .map(|(y, t)| {
                        let r = y - lambda * t;
                        y * y - r * r
                    })
                    .sum::<f64>()),
            LossKind::Logistic | LossKind::Multinomial => {
                let violation = self.domain_violation(theta, lambda);
                if violation > DOMAIN_TOLERANCE {
                    return Err(Error::InfeasibleDual { violation });
                }
                let mut total = 0.0;
                let mut x = vec![0.0; self.q];
                for (y, t) in self.y.chunks(self.q).zip(theta.chunks(self.q)) {
                    for ((xk, yk), tk) in x.iter_mut().zip(y).zip(t) {
                        *xk = (yk - lambda * tk).clamp(0.0, 1.0);
                    }
                    total += if self.kind == LossKind::Logistic {
                        neg_entropy_binary(x[0])
                    } else {
                        x.iter().map(|&v| xlogx(v)).sum()
                    };
                }
                Ok(-total)
            }
        }
    }

    /// `∇D_λ(θ)`, defined on the interior of the domain.
    pub fn dual_gradient(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        self.y
            .iter()
            .zip(theta)
            .map(|(y, t)| {
                let x = y - lambda * t;
                lambda
                    * match self.kind {
                        LossKind::Quadratic | LossKind::MultiTaskQuadratic => x,
                        LossKind::Logistic => (x / (1.0 - x)).ln(),
                        LossKind::Multinomial => x.ln() + 1.0,
                    }
            })
            .collect()
    }

    /// Magnitude used to make the stopping tolerance scale-free:
    /// `‖y‖²` (regression), `min(n₁, n₂)/n` (logistic), `n·log q` (multinomial).
    pub fn tolerance_scale(&self) -> f64 {
        match self.kind {
            LossKind::Quadratic | LossKind::MultiTaskQuadratic => {
                self.y.iter().map(|v| v * v).sum()
            }
            LossKind::Logistic => {
                let n1 = self.y.iter().filter(|&&v| v == 1.0).count();
                let n0 = self.n - n1;
                n1.min(n0) as f64 / self.n as f64
            }
            LossKind::Multinomial => self.n as f64 * (self.q as f64).ln(),
        }
    }
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLabels("non-finite target".into()));
    }
    Ok(())
}

fn rows_of(y: &[f64], q: usize) -> Result<usize> {
    if q == 0 || y.len() % q != 0 {
        return Err(Error::DimensionMismatch {
            expected: q.max(1) * (y.len() / q.max(1) + 1),
            got: y.len(),
        });
    }
    Ok(y.len() / q)
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log Σ_k e^{z_k}` with the max subtracted first.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `x log x` with `0 log 0 = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `Nh(x) = x log x + (1−x) log(1−x)` on `[0,1]`, `+∞` elsewhere.
pub fn neg_entropy_binary(x: f64) -> f64 {
    if !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&x) {
        return f64::INFINITY;
    }
    let x = x.clamp(0.0, 1.0);
    xlogx(x) + xlogx(1.0 - x)
}

/// `NH(x) = Σ x_k log x_k` on the simplex, `+∞` elsewhere.
pub fn neg_entropy_simplex(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > DOMAIN_TOLERANCE || x.iter().any(|&v| v < -DOMAIN_TOLERANCE) {
        return f64::INFINITY;
    }
    x.iter().map(|&v| xlogx(v.max(0.0))).sum()
}
