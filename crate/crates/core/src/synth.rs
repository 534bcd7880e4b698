//! Seeded synthetic problems for tests and benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::matrix::DesignMatrix;

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// `p × q` coefficients used to generate the targets.
    pub beta_true: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Number of outputs (tasks or classes); 1 for scalar models.
    pub q: usize,
    /// Consecutive features sharing support; 1 for unstructured sparsity.
    pub group_size: usize,
    /// Fraction of groups carrying signal.
    pub support: f64,
    /// `‖Xβ‖ / ‖noise‖` for regression targets.
    pub snr: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 100,
            p: 1000,
            q: 1,
            group_size: 1,
            support: 0.05,
            snr: 3.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 || self.group_size == 0 {
            return Err(Error::InvalidConfig("synthetic sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.support) {
            return Err(Error::InvalidConfig("support fraction must lie in [0, 1]".into()));
        }
        if !(self.snr > 0.0) {
            return Err(Error::InvalidConfig("snr must be positive".into()));
        }
        Ok(())
    }
}

/// Gaussian design with unit-norm columns.
fn design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Result<DesignMatrix> {
    let mut vals: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    for col in vals.chunks_mut(n) {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
    DesignMatrix::dense_col_major(n, p, vals)
}

/// Sparse coefficients: a random subset of groups, Gaussian entries.
fn coefficients(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<f64> {
    let n_groups = spec.p.div_ceil(spec.group_size);
    let k = ((spec.support * n_groups as f64).round() as usize).clamp(1, n_groups);
    let mut beta = vec![0.0; spec.p * spec.q];
    for g in sample(rng, n_groups, k) {
        let start = g * spec.group_size;
        let end = (start + spec.group_size).min(spec.p);
        for v in &mut beta[start * spec.q..end * spec.q] {
            let s: f64 = rng.sample(StandardNormal);
            *v = s + s.signum();
        }
    }
    beta
}

fn centered_unit_variance(y: &mut [f64], q: usize) {
    let n = y.len() / q;
    for k in 0..q {
        let mean = (0..n).map(|i| y[i * q + k]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (y[i * q + k] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        (0..n).for_each(|i| y[i * q + k] = (y[i * q + k] - mean) / sd);
    }
}

/// `Y = XB + noise` at the requested SNR, then centred and scaled to unit variance
/// (per output).
pub fn regression(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = design(&mut rng, spec.n, spec.p)?;
    let beta = coefficients(&mut rng, spec);
    let signal = x.matvec(&beta, spec.q)?;
    let noise: Vec<f64> = (0..signal.len()).map(|_| rng.sample(StandardNormal)).collect();
    let sn = signal.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if nn > 0.0 { sn / (spec.snr * nn) } else { 0.0 };
    let mut y: Vec<f64> = signal.iter().zip(&noise).map(|(s, e)| s + scale * e).collect();
    centered_unit_variance(&mut y, spec.q);
    Ok(Synthetic {
        dataset: Dataset {
            x,
            y,
            q: spec.q,
            feature_names: None,
        },
        beta_true: beta,
    })
}

/// Labels drawn from `Bernoulli(σ(x_i^⊤β))`, in `{0, 1}`. Both classes are
/// guaranteed to appear.
pub fn logistic(spec: &SynthSpec) -> Result<Synthetic> {
    let spec = SynthSpec { q: 1, ..*spec };
    spec.validate()?;
    if spec.n < 2 {
        return Err(Error::InvalidConfig("logistic data needs at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = design(&mut rng, spec.n, spec.p)?;
    let beta: Vec<f64> = coefficients(&mut rng, &spec).iter().map(|b| 3.0 * b).collect();
    let z = x.matvec(&beta, 1)?;
    let mut y: Vec<f64> = z
        .iter()
        .map(|&v| if rng.random::<f64>() < sigmoid(v) { 1.0 } else { 0.0 })
        .collect();
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 {
        y[0] = 1.0;
    } else if ones == y.len() {
        y[0] = 0.0;
    }
    Ok(Synthetic {
        dataset: Dataset {
            x,
            y,
            q: 1,
            feature_names: None,
        },
        beta_true: beta,
    })
}

/// One-hot labels drawn from the softmax of `XB`; every class appears.
pub fn multinomial(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let q = spec.q;
    if q < 2 || spec.n < q {
        return Err(Error::InvalidConfig("multinomial data needs q >= 2 and n >= q".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = design(&mut rng, spec.n, spec.p)?;
    let beta: Vec<f64> = coefficients(&mut rng, spec).iter().map(|b| 3.0 * b).collect();
    let z = x.matvec(&beta, q)?;
    let mut classes: Vec<usize> = z
        .chunks(q)
        .map(|row| {
            let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let w: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (k, wk) in w.iter().enumerate() {
                if u < *wk {
                    return k;
                }
                u -= wk;
            }
            q - 1
        })
        .collect();
    for (k, c) in classes.iter_mut().take(q).enumerate() {
        *c = k;
    }
    let mut y = vec![0.0; spec.n * q];
    for (i, &c) in classes.iter().enumerate() {
        y[i * q + c] = 1.0;
    }
    Ok(Synthetic {
        dataset: Dataset {
            x,
            y,
            q,
            feature_names: None,
        },
        beta_true: beta,
    })
}
