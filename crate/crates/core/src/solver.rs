//! Block coordinate descent with duality-gap stopping and interleaved screening.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::penalties::gather_active_block;
use crate::problem::Problem;
use crate::screening::{
    correlations, dst3_sphere, gap_safe_radius, kkt_default_eps, kkt_postcheck, padded_gap,
    screen_in_place, sis_rule, static_active_set, static_rule, strong_rule, ActiveSet, RuleKind,
    SafeSphere,
};

/// Number of restricted solve / KKT check rounds before giving up on an
/// unsafe working set and solving the full problem.
pub const MAX_KKT_ROUNDS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target duality gap, before scaling.
    pub eps: f64,
    /// Maximum number of epochs `K`.
    pub max_epochs: usize,
    /// Gap evaluation / screening period `f_ce`, in epochs.
    pub screen_every: usize,
    pub rule: RuleKind,
    /// Multiply `eps` by the loss-dependent scale (see [`scaled_tolerance`]).
    pub scale_tolerance: bool,
    /// Shuffle the block order every epoch with this seed.
    pub shuffle_seed: Option<u64>,
    /// Keep the sphere and active set of every screening event.
    pub record_spheres: bool,
    /// SIS threshold; defaults to `λ`.
    pub sis_threshold: Option<f64>,
    /// KKT tolerance for unsafe rules; defaults to the gap-derived value.
    pub kkt_eps: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_epochs: 10_000,
            screen_every: 10,
            rule: RuleKind::DynamicGapSafe,
            scale_tolerance: true,
            shuffle_seed: None,
            record_spheres: false,
            sis_threshold: None,
            kkt_eps: None,
        }
    }
}

impl SolverConfig {
    pub fn with_rule(rule: RuleKind) -> Self {
        Self {
            rule,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive (got {})", self.eps)));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if self.screen_every == 0 {
            return Err(Error::InvalidConfig("screen_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// `ε·‖y‖²` for regression, `ε·min(n₁, n₂)/n` for logistic, `ε·n·log q` for
/// multinomial; `ε` itself when `scale` is false or the scale vanishes.
pub fn scaled_tolerance(loss: &LossModel, eps: f64, scale: bool) -> f64 {
    let s = loss.tolerance_scale();
    if scale && s > 0.0 {
        eps * s
    } else {
        eps
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningEvent {
    pub epoch: usize,
    pub active_groups: usize,
    pub active_features: usize,
    /// `None` for unsafe rules, which have no certificate.
    pub radius: Option<f64>,
    pub gap: f64,
    pub sphere: Option<SafeSphere>,
    pub active: Option<ActiveSet>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCheck {
    pub epoch: usize,
    pub gap: f64,
    pub primal: f64,
    pub dual: f64,
    /// Distance of the rescaled dual point from the conjugate domain.
    pub domain_violation: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub gap: f64,
    pub primal: f64,
    pub dual: f64,
    pub tolerance: f64,
    pub epochs: usize,
    pub converged: bool,
    /// The gap refers to the problem restricted to a working set, not the full one.
    pub restricted: bool,
    pub active: ActiveSet,
    pub trace: Vec<ScreeningEvent>,
    pub gap_checks: Vec<GapCheck>,
}

impl SolveResult {
    pub fn nnz(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }
}

/// A solution at a previous, larger `λ`.
#[derive(Debug, Clone)]
pub struct PreviousPoint {
    pub theta: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub beta0: Option<Vec<f64>>,
    pub previous: Option<PreviousPoint>,
    /// Restrict the problem to these groups/features.
    pub domain: Option<ActiveSet>,
    /// Extra epochs at which a gap check and screening pass are forced.
    pub checkpoints: Vec<usize>,
}

pub fn solve(prob: &Problem, lambda: f64, beta0: Option<&[f64]>, config: &SolverConfig) -> Result<SolveResult> {
    let opts = SolveOptions {
        beta0: beta0.map(<[f64]>::to_vec),
        ..SolveOptions::default()
    };
    solve_with(prob, lambda, config, &opts)
}

pub fn solve_with(prob: &Problem, lambda: f64, config: &SolverConfig, opts: &SolveOptions) -> Result<SolveResult> {
    config.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be positive (got {lambda})")));
    }
    if let Some(b) = &opts.beta0 {
        prob.check_beta(b)?;
    }
    match config.rule {
        RuleKind::Strong | RuleKind::Sis => solve_unsafe(prob, lambda, config, opts),
        _ => Engine::new(prob, lambda, config, opts)?.run(),
    }
}

/// Restricted solve on a heuristic working set, grown by KKT checks, then a
/// final pass on the full domain.
fn solve_unsafe(prob: &Problem, lambda: f64, config: &SolverConfig, opts: &SolveOptions) -> Result<SolveResult> {
    let part = prob.penalty().partition();
    let domain = opts.domain.clone().unwrap_or_else(|| ActiveSet::full(part));
    let mut working = match config.rule {
        RuleKind::Strong => match &opts.previous {
            Some(prev) => strong_rule(prob, &prev.theta, lambda, prev.lambda.max(lambda))?,
            None => strong_rule(prob, &prob.theta_max(), lambda, prob.lambda_max().max(lambda))?,
        },
        _ => sis_rule(prob, config.sis_threshold.unwrap_or(lambda))?,
    };
    working.intersect(&domain);
    let inner = SolverConfig {
        rule: RuleKind::NoScreening,
        ..config.clone()
    };
    let mut beta = opts.beta0.clone();
    let mut epochs = 0;
    let mut events = Vec::new();
    let mut checks = Vec::new();
    for round in 0..MAX_KKT_ROUNDS {
        events.push(ScreeningEvent {
            epoch: epochs,
            active_groups: working.n_active_groups(),
            active_features: working.n_active_features(),
            radius: None,
            gap: f64::NAN,
            sphere: None,
            active: config.record_spheres.then(|| working.clone()),
        });
        let sub = Engine::new(
            prob,
            lambda,
            &inner,
            &SolveOptions {
                beta0: beta.take(),
                previous: None,
                domain: Some(working.clone()),
                checkpoints: Vec::new(),
            },
        )?
        .run()?;
        epochs += sub.epochs;
        checks.extend(sub.gap_checks.iter().copied());
        let discarded: Vec<usize> = (0..prob.n_groups())
            .filter(|&g| domain.group_active(g) && !working.group_active(g))
            .collect();
        let z = prob.x().matvec(&sub.beta, prob.n_outputs())?;
        let resid: Vec<f64> = prob.loss().gradient_map(&z).iter().map(|g| -g / lambda).collect();
        let eps = match config.kkt_eps {
            Some(e) => e,
            None if prob.is_quadratic() => kkt_default_eps(prob, &sub.beta, lambda, sub.tolerance)?,
            None => 0.0,
        };
        let violators = kkt_postcheck(prob, &sub.beta, &resid, &discarded, eps)?;
        beta = Some(sub.beta);
        if violators.is_empty() || round + 1 == MAX_KKT_ROUNDS {
            break;
        }
        for g in violators {
            working.insert_group(part, g);
        }
        working.intersect(&domain);
    }
    let mut last = Engine::new(
        prob,
        lambda,
        &inner,
        &SolveOptions {
            beta0: beta,
            previous: None,
            domain: opts.domain.clone(),
            checkpoints: Vec::new(),
        },
    )?
    .run()?;
    last.epochs += epochs;
    events.append(&mut last.trace);
    checks.append(&mut last.gap_checks);
    last.trace = events;
    last.gap_checks = checks;
    last.active = working;
    Ok(last)
}

struct Engine<'a> {
    prob: &'a Problem,
    lambda: f64,
    config: &'a SolverConfig,
    q: usize,
    tol: f64,
    beta: Vec<f64>,
    z: Vec<f64>,
    grad: Vec<f64>,
    domain: ActiveSet,
    active: ActiveSet,
    restricted: bool,
    checkpoints: Vec<usize>,
    trace: Vec<ScreeningEvent>,
    checks: Vec<GapCheck>,
    rng: Option<ChaCha8Rng>,
}

/// State of one gap evaluation.
struct DualState {
    theta: Vec<f64>,
    /// `X^⊤θ` on active features.
    xi: Vec<f64>,
    primal: f64,
    dual: f64,
    gap: f64,
    padded: f64,
}

impl<'a> Engine<'a> {
    fn new(prob: &'a Problem, lambda: f64, config: &'a SolverConfig, opts: &SolveOptions) -> Result<Self> {
        let q = prob.n_outputs();
        let n = prob.n_samples();
        let p = prob.n_features();
        let part = prob.penalty().partition();
        let domain = opts.domain.clone().unwrap_or_else(|| ActiveSet::full(part));
        let restricted = !domain.is_full();
        let mut beta = opts.beta0.clone().unwrap_or_else(|| vec![0.0; p * q]);
        for j in 0..p {
            if !domain.feature_active(j) {
                beta[j * q..(j + 1) * q].iter_mut().for_each(|b| *b = 0.0);
            }
        }
        let active = domain.clone();
        let mut checkpoints = opts.checkpoints.clone();
        checkpoints.sort_unstable();
        let mut engine = Self {
            prob,
            lambda,
            config,
            q,
            tol: scaled_tolerance(prob.loss(), config.eps, config.scale_tolerance),
            beta,
            z: vec![0.0; n * q],
            grad: vec![0.0; n * q],
            domain,
            active,
            restricted,
            checkpoints,
            trace: Vec::new(),
            checks: Vec::new(),
            rng: config.shuffle_seed.map(ChaCha8Rng::seed_from_u64),
        };
        engine.refresh_predictions();
        Ok(engine)
    }

    fn run(mut self) -> Result<SolveResult> {
        if self.config.rule == RuleKind::Static {
            self.apply_static()?;
        }
        let mut order: Vec<usize> = Vec::new();
        let mut epoch = 0;
        let mut first_check = true;
        loop {
            let at_check = epoch % self.config.screen_every == 0
                || epoch == self.config.max_epochs
                || self.checkpoints.binary_search(&epoch).is_ok();
            if at_check {
                self.refresh_predictions();
                let mut state = self.dual_state(epoch)?;
                if self.screen(epoch, &state, first_check)? {
                    state = self.dual_state(epoch)?;
                }
                first_check = false;
                if state.gap <= self.tol {
                    if let Some(done) = self.try_finish(epoch, &state)? {
                        return Ok(done);
                    }
                }
                if epoch == self.config.max_epochs {
                    return self.finish(epoch, false);
                }
            }
            order.clear();
            order.extend(self.active.active_groups());
            if let Some(rng) = self.rng.as_mut() {
                order.shuffle(rng);
            }
            for &g in &order {
                self.update_block(g);
            }
            epoch += 1;
        }
    }

    /// Recomputes `z = Xβ` and `G(z)` from scratch.
    fn refresh_predictions(&mut self) {
        let q = self.q;
        self.z.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.prob.n_features() {
            let b = &self.beta[j * q..(j + 1) * q];
            if b.iter().any(|&v| v != 0.0) {
                self.prob.x().column(j).axpy_rows(b, q, &mut self.z);
            }
        }
        self.grad = self.prob.loss().gradient_map(&self.z);
    }

    /// `θ = −G(Xβ)/max(λ, Ω^D(X^⊤G(Xβ)))` over the active set, and the gap.
    fn dual_state(&mut self, epoch: usize) -> Result<DualState> {
        let prob = self.prob;
        let mut xi = correlations(prob, &self.grad, Some(&self.active));
        let dn = prob.penalty().dual_norm_global(&xi, self.q, Some(&self.active));
        let alpha = dn.max(self.lambda);
        let theta: Vec<f64> = self.grad.iter().map(|g| -g / alpha).collect();
        xi.iter_mut().for_each(|v| *v /= -alpha);
        self.evaluate(epoch, theta, xi)
    }

    fn evaluate(&mut self, epoch: usize, theta: Vec<f64>, xi: Vec<f64>) -> Result<DualState> {
        let prob = self.prob;
        let primal = prob.primal_objective_from(&self.beta, &self.z, self.lambda);
        if !primal.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let violation = prob.loss().domain_violation(&theta, self.lambda);
        let dual = prob.loss().conjugate_sum(&theta, self.lambda)?;
        let (gap, padded) = padded_gap(primal, dual);
        self.checks.push(GapCheck {
            epoch,
            gap,
            primal,
            dual,
            domain_violation: violation,
        });
        Ok(DualState {
            theta,
            xi,
            primal,
            dual,
            gap,
            padded,
        })
    }

    /// Dual point scaled over the whole domain (not only the active set).
    fn domain_state(&mut self, epoch: usize) -> Result<DualState> {
        let prob = self.prob;
        let mut xi = correlations(prob, &self.grad, Some(&self.domain));
        let dn = prob.penalty().dual_norm_global(&xi, self.q, Some(&self.domain));
        let alpha = dn.max(self.lambda);
        let theta: Vec<f64> = self.grad.iter().map(|g| -g / alpha).collect();
        xi.iter_mut().for_each(|v| *v /= -alpha);
        self.evaluate(epoch, theta, xi)
    }

    /// Confirms a small active-set gap on the whole domain.
    fn try_finish(&mut self, epoch: usize, state: &DualState) -> Result<Option<SolveResult>> {
        if self.active == self.domain {
            return Ok(Some(self.result(epoch, true, state)));
        }
        let full = self.domain_state(epoch)?;
        if full.gap <= self.tol {
            return Ok(Some(self.result(epoch, true, &full)));
        }
        Ok(None)
    }

    fn finish(&mut self, epoch: usize, converged: bool) -> Result<SolveResult> {
        let state = self.domain_state(epoch)?;
        let ok = converged || state.gap <= self.tol;
        Ok(self.result(epoch, ok, &state))
    }

    fn result(&self, epoch: usize, converged: bool, state: &DualState) -> SolveResult {
        SolveResult {
            lambda: self.lambda,
            beta: self.beta.clone(),
            theta: state.theta.clone(),
            gap: state.gap,
            primal: state.primal,
            dual: state.dual,
            tolerance: self.tol,
            epochs: epoch,
            converged,
            restricted: self.restricted,
            active: self.active.clone(),
            trace: self.trace.clone(),
            gap_checks: self.checks.clone(),
        }
    }

    fn apply_static(&mut self) -> Result<()> {
        let prob = self.prob;
        let before = self.active.clone();
        let sphere = static_rule(prob, self.lambda)?;
        let mut set = static_active_set(prob, self.lambda)?;
        set.intersect(&self.domain);
        self.active = set;
        self.zero_screened(&before);
        self.record(0, Some(sphere.radius), f64::NAN, Some(sphere));
        Ok(())
    }

    /// Returns whether a nonzero coefficient was screened.
    fn screen(&mut self, epoch: usize, state: &DualState, first: bool) -> Result<bool> {
        let before = self.active.clone();
        match self.config.rule {
            RuleKind::DynamicGapSafe => {
                let r = gap_safe_radius(state.padded, self.prob.gamma(), self.lambda);
                screen_in_place(self.prob, &state.xi, r, &mut self.active);
                let sphere = self.sphere_record(&state.theta, r);
                self.record(epoch, Some(r), state.gap, sphere);
            }
            RuleKind::SequentialGapSafe if first => {
                let r = gap_safe_radius(state.padded, self.prob.gamma(), self.lambda);
                screen_in_place(self.prob, &state.xi, r, &mut self.active);
                let sphere = self.sphere_record(&state.theta, r);
                self.record(epoch, Some(r), state.gap, sphere);
            }
            RuleKind::Dst3 if !self.restricted => {
                let sphere = dst3_sphere(self.prob, self.lambda, &state.theta)?;
                let xi = correlations(self.prob, &sphere.center, Some(&self.active));
                screen_in_place(self.prob, &xi, sphere.radius, &mut self.active);
                let r = sphere.radius;
                let rec = self.config.record_spheres.then_some(sphere);
                self.record(epoch, Some(r), state.gap, rec);
            }
            _ => return Ok(false),
        }
        Ok(self.zero_screened(&before))
    }

    fn sphere_record(&self, theta: &[f64], r: f64) -> Option<SafeSphere> {
        self.config.record_spheres.then(|| SafeSphere {
            center: theta.to_vec(),
            radius: r,
            lambda: self.lambda,
        })
    }

    fn record(&mut self, epoch: usize, radius: Option<f64>, gap: f64, sphere: Option<SafeSphere>) {
        self.trace.push(ScreeningEvent {
            epoch,
            active_groups: self.active.n_active_groups(),
            active_features: self.active.n_active_features(),
            radius,
            gap,
            sphere,
            active: self.config.record_spheres.then(|| self.active.clone()),
        });
    }

    /// Sets newly screened coefficients to exactly zero and updates `z`, `G`.
    fn zero_screened(&mut self, before: &ActiveSet) -> bool {
        let q = self.q;
        let mut changed = false;
        let mut delta = vec![0.0; q];
        for j in 0..self.prob.n_features() {
            if before.feature_active(j) && !self.active.feature_active(j) {
                let b = &mut self.beta[j * q..(j + 1) * q];
                if b.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for (d, v) in delta.iter_mut().zip(b.iter_mut()) {
                    *d = -*v;
                    *v = 0.0;
                }
                self.shift_predictions(j, &delta);
                changed = true;
            }
        }
        changed
    }

    /// `z += X_j δ` and refreshes the affected rows of `G`.
    fn shift_predictions(&mut self, j: usize, delta: &[f64]) {
        let q = self.q;
        let loss = self.prob.loss();
        let z = &mut self.z;
        let grad = &mut self.grad;
        self.prob.x().column(j).for_each(|i, x| {
            let r = i * q..(i + 1) * q;
            for (zk, dk) in z[r.clone()].iter_mut().zip(delta) {
                *zk += x * dk;
            }
            loss.gradient_row(i, &z[r.clone()], &mut grad[r]);
        });
    }

    /// One proximal-gradient step on group `g` with step `1/L_g`.
    fn update_block(&mut self, g: usize) {
        let prob = self.prob;
        let lip = prob.lipschitz(g);
        if lip <= 0.0 {
            return;
        }
        let q = self.q;
        let part = prob.penalty().partition();
        let cols = part.group(g);
        let mut old = Vec::with_capacity(cols.len() * q);
        gather_active_block(part, g, q, &self.beta, &self.active, &mut old);
        let mut v = vec![0.0; cols.len() * q];
        for (k, &j) in cols.iter().enumerate() {
            if !self.active.feature_active(j) {
                continue;
            }
            let slot = &mut v[k * q..(k + 1) * q];
            let col = prob.x().column(j);
            if q == 1 {
                slot[0] = col.dot(&self.grad);
            } else {
                col.dot_rows(&self.grad, q, slot);
            }
            for (s, b) in slot.iter_mut().zip(&old[k * q..(k + 1) * q]) {
                *s = b - *s / lip;
            }
        }
        prob.penalty().block_prox_in_place(g, &mut v, self.lambda / lip);
        let mut delta = vec![0.0; q];
        for (k, &j) in cols.iter().enumerate() {
            if !self.active.feature_active(j) {
                continue;
            }
            let mut changed = false;
            for c in 0..q {
                delta[c] = v[k * q + c] - old[k * q + c];
                changed |= delta[c] != 0.0;
            }
            if changed {
                self.beta[j * q..(j + 1) * q].copy_from_slice(&v[k * q..(k + 1) * q]);
                self.shift_predictions(j, &delta);
            }
        }
    }
}
