//! L1-regularized minimization by majorizer minimization.
//!
//! Each iteration replaces the smooth cost `L` by its separable quadratic
//! upper bound around the current point, with curvature `L_J` for the
//! couplings and `L_h` for the biases, and minimizes bound plus penalty in
//! closed form by soft thresholding. The curvatures are found by
//! backtracking; FISTA momentum is optional.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IsingError, Result};
use crate::model::{IsingModel, SpinDataset};
use crate::objectives::{Objective, ObjectiveGradient, ObjectiveKind};

/// Backtracking gives up once a Lipschitz constant exceeds this.
pub const MAX_LIPSCHITZ: f64 = 1e12;

/// Constants are scaled by this at the start of every outer iteration so
/// they can shrink again after a steep region.
pub const LIPSCHITZ_DECAY: f64 = 0.9;

/// Below this relative change in `L` the value-based majorizer test is
/// dominated by rounding and the gradient form of the test is used instead.
const ROUNDING_LEVEL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    pub lambda_couplings: f64,
    pub lambda_biases: f64,
}

impl RegularizationConfig {
    pub fn new(lambda_couplings: f64, lambda_biases: f64) -> Self {
        Self {
            lambda_couplings,
            lambda_biases,
        }
    }

    /// Same weight on couplings and biases.
    pub fn uniform(lambda: f64) -> Self {
        Self::new(lambda, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_couplings", self.lambda_couplings),
            ("lambda_biases", self.lambda_biases),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// `lambda_J * |K|_1 + lambda_h * |h|_1`
    pub fn penalty(&self, model: &IsingModel) -> f64 {
        self.lambda_couplings * model.couplings_l1() + self.lambda_biases * model.biases_l1()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub regularization: RegularizationConfig,
    pub max_iterations: usize,
    /// Stop once the largest absolute parameter change falls below this.
    pub tolerance: f64,
    /// FISTA momentum on/off.
    pub accelerated: bool,
    pub lipschitz_init: f64,
    pub backtrack_factor: f64,
    /// Starting point; `None` means the all-zero model.
    pub initial_model: Option<IsingModel>,
    pub deterministic_reduction: bool,
}

impl FitConfig {
    /// Defaults for `kind`: tolerance 1e-6, `L_0 = 1`, factor 2, plain ISTA,
    /// and the objective's iteration budget.
    pub fn new(kind: ObjectiveKind, regularization: RegularizationConfig) -> Self {
        Self {
            regularization,
            max_iterations: kind.default_max_iterations(),
            tolerance: 1e-6,
            accelerated: false,
            lipschitz_init: 1.0,
            backtrack_factor: 2.0,
            initial_model: None,
            deterministic_reduction: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.regularization.validate()?;
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(invalid("tolerance must be positive"));
        }
        if !(self.lipschitz_init > 0.0 && self.lipschitz_init.is_finite()) {
            return Err(invalid("lipschitz_init must be positive"));
        }
        if !(self.backtrack_factor > 1.0 && self.backtrack_factor.is_finite()) {
            return Err(invalid("backtrack_factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// `L + lambda_J |K|_1 + lambda_h |h|_1` at the new iterate.
    pub composite: f64,
    pub lipschitz_couplings: f64,
    pub lipschitz_biases: f64,
    pub max_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: IsingModel,
    pub trace: Vec<TraceRecord>,
    pub iterations_run: usize,
    pub converged: bool,
    pub overflow_warnings: u64,
    /// Composite value at the starting point.
    pub initial_composite: f64,
}

impl FitResult {
    pub fn final_composite(&self) -> f64 {
        self.trace.last().map_or(self.initial_composite, |r| r.composite)
    }

    /// First iteration (1-based) whose composite value is within `rel_tol`
    /// of the final one, relative to the total decrease of the run.
    pub fn iterations_to_settle(&self, rel_tol: f64) -> usize {
        let last = self.final_composite();
        let span = (self.initial_composite - last).abs().max(f64::MIN_POSITIVE);
        self.trace
            .iter()
            .position(|r| (r.composite - last).abs() <= rel_tol * span)
            .map_or(0, |p| p + 1)
    }
}

/// FISTA momentum state.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelState {
    pub beta: f64,
    pub previous_prox_point: IsingModel,
}

impl AccelState {
    /// `beta_0 = 1`.
    pub fn new(start: IsingModel) -> Self {
        Self {
            beta: 1.0,
            previous_prox_point: start,
        }
    }

    /// `beta_{t+1} = (1 + sqrt(1 + 4 beta_t^2)) / 2`
    pub fn next_beta(beta: f64) -> f64 {
        0.5 * (1.0 + (1.0 + 4.0 * beta * beta).sqrt())
    }

    /// Advances the momentum and returns the extrapolated point
    /// `x + (beta_t - 1) / beta_{t+1} * (x - x_prev)` for the new prox point `x`.
    pub fn extrapolate(&mut self, prox_point: &IsingModel) -> IsingModel {
        let next = Self::next_beta(self.beta);
        let coef = (self.beta - 1.0) / next;
        let mut y = prox_point.clone();
        for (v, &p) in y.couplings_mut().iter_mut().zip(self.previous_prox_point.couplings()) {
            *v += coef * (*v - p);
        }
        for (v, &p) in y.biases_mut().iter_mut().zip(self.previous_prox_point.biases()) {
            *v += coef * (*v - p);
        }
        self.beta = next;
        self.previous_prox_point = prox_point.clone();
        y
    }
}

/// `sign(x) * max(|x| - a, 0)`, the proximal map of `a |.|`.
#[inline]
pub fn soft_threshold(x: f64, a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    if x > a {
        x - a
    } else if x < -a {
        x + a
    } else {
        0.0
    }
}

/// One proximal gradient step with per-block step sizes `1/L_J`, `1/L_h`.
pub fn ista_step(
    model: &IsingModel,
    grad: &ObjectiveGradient,
    lipschitz_couplings: f64,
    lipschitz_biases: f64,
    reg: &RegularizationConfig,
) -> Result<IsingModel> {
    if !(lipschitz_couplings > 0.0 && lipschitz_biases > 0.0) {
        return Err(invalid(format!(
            "Lipschitz constants must be positive, got {lipschitz_couplings} and {lipschitz_biases}"
        )));
    }
    if grad.grad_couplings.len() != model.couplings().len() || grad.grad_biases.len() != model.n_spins() {
        return Err(IsingError::DimensionMismatch {
            expected: model.n_spins(),
            found: grad.grad_biases.len(),
        });
    }
    let mut next = model.clone();
    let tj = reg.lambda_couplings / lipschitz_couplings;
    for (k, &g) in next.couplings_mut().iter_mut().zip(&grad.grad_couplings) {
        *k = soft_threshold(*k - g / lipschitz_couplings, tj);
    }
    let th = reg.lambda_biases / lipschitz_biases;
    for (h, &g) in next.biases_mut().iter_mut().zip(&grad.grad_biases) {
        *h = soft_threshold(*h - g / lipschitz_biases, th);
    }
    Ok(next)
}

/// Value of the quadratic majorizer `G(candidate | current)`.
pub fn majorizer(
    value_current: f64,
    grad: &ObjectiveGradient,
    current: &IsingModel,
    candidate: &IsingModel,
    lipschitz_couplings: f64,
    lipschitz_biases: f64,
) -> f64 {
    let mut linear = 0.0;
    let mut sq_j = 0.0;
    for ((&c, &x), &g) in candidate
        .couplings()
        .iter()
        .zip(current.couplings())
        .zip(&grad.grad_couplings)
    {
        let d = c - x;
        linear += g * d;
        sq_j += d * d;
    }
    let mut sq_h = 0.0;
    for ((&c, &x), &g) in candidate.biases().iter().zip(current.biases()).zip(&grad.grad_biases) {
        let d = c - x;
        linear += g * d;
        sq_h += d * d;
    }
    value_current + linear + 0.5 * lipschitz_couplings * sq_j + 0.5 * lipschitz_biases * sq_h
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktrackOutcome {
    pub lipschitz_couplings: f64,
    pub lipschitz_biases: f64,
    pub candidate: IsingModel,
    /// Smooth cost at the candidate.
    pub candidate_value: f64,
}

/// Grows both constants by `factor` until the ISTA candidate satisfies
/// `L(candidate) <= G(candidate | current)`.
///
/// When `L(candidate)` and `L(current)` agree to within rounding, the value
/// test cannot resolve the curvature term; the equivalent condition on
/// gradients, `<grad(candidate) - grad(current), d> <= L_J |dK|^2 + L_h |dh|^2`,
/// decides instead.
#[allow(clippy::too_many_arguments)]
pub fn backtrack(
    objective: &dyn Objective,
    current: &IsingModel,
    value_current: f64,
    grad: &ObjectiveGradient,
    lipschitz_couplings: f64,
    lipschitz_biases: f64,
    reg: &RegularizationConfig,
    factor: f64,
) -> Result<BacktrackOutcome> {
    if factor.is_nan() || factor <= 1.0 {
        return Err(invalid(format!("backtrack factor must exceed 1, got {factor}")));
    }
    let (mut lj, mut lh) = (lipschitz_couplings, lipschitz_biases);
    let rounding = ROUNDING_LEVEL * value_current.abs().max(1.0);
    loop {
        if lj > MAX_LIPSCHITZ || lh > MAX_LIPSCHITZ {
            return Err(IsingError::NonConvergence { lipschitz: lj.max(lh) });
        }
        let candidate = ista_step(current, grad, lj, lh, reg)?;
        let value = objective.value(&candidate)?;
        let accepted = if !value.is_finite() {
            false
        } else if (value - value_current).abs() > rounding {
            value <= majorizer(value_current, grad, current, &candidate, lj, lh)
        } else {
            curvature_test(objective, grad, current, &candidate, lj, lh)?
        };
        if accepted {
            return Ok(BacktrackOutcome {
                lipschitz_couplings: lj,
                lipschitz_biases: lh,
                candidate,
                candidate_value: value,
            });
        }
        lj *= factor;
        lh *= factor;
    }
}

fn curvature_test(
    objective: &dyn Objective,
    grad: &ObjectiveGradient,
    current: &IsingModel,
    candidate: &IsingModel,
    lj: f64,
    lh: f64,
) -> Result<bool> {
    if candidate == current {
        return Ok(true);
    }
    let next = objective.gradient(candidate)?;
    let mut lhs = 0.0;
    let mut sq_j = 0.0;
    for (((&c, &x), &g1), &g0) in candidate
        .couplings()
        .iter()
        .zip(current.couplings())
        .zip(&next.grad_couplings)
        .zip(&grad.grad_couplings)
    {
        lhs += (g1 - g0) * (c - x);
        sq_j += (c - x) * (c - x);
    }
    let mut sq_h = 0.0;
    for (((&c, &x), &g1), &g0) in candidate
        .biases()
        .iter()
        .zip(current.biases())
        .zip(&next.grad_biases)
        .zip(&grad.grad_biases)
    {
        lhs += (g1 - g0) * (c - x);
        sq_h += (c - x) * (c - x);
    }
    Ok(lhs <= lj * sq_j + lh * sq_h)
}

/// Runs ISTA (or FISTA) with backtracking on any smooth objective.
pub fn minimize(objective: &dyn Objective, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = objective.n_spins();
    let start = match &cfg.initial_model {
        Some(m) if m.n_spins() != n => {
            return Err(IsingError::DimensionMismatch {
                expected: n,
                found: m.n_spins(),
            })
        }
        Some(m) => m.clone(),
        None => IsingModel::zeros(n),
    };
    let reg = cfg.regularization;
    let initial_composite = objective.value(&start)? + reg.penalty(&start);

    let mut x = start.clone();
    let mut y = start.clone();
    let mut accel = cfg.accelerated.then(|| AccelState::new(start));
    let (mut lj, mut lh) = (cfg.lipschitz_init, cfg.lipschitz_init);
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        lj *= LIPSCHITZ_DECAY;
        lh *= LIPSCHITZ_DECAY;
        let (value_y, grad_y) = objective.value_and_gradient(&y)?;
        let step = backtrack(objective, &y, value_y, &grad_y, lj, lh, &reg, cfg.backtrack_factor)?;
        lj = step.lipschitz_couplings;
        lh = step.lipschitz_biases;

        let next = step.candidate;
        // step length from the point the gradient was taken at; equal to the
        // iterate change for plain ISTA
        let max_change = next.max_abs_diff(&y);
        trace.push(TraceRecord {
            composite: step.candidate_value + reg.penalty(&next),
            lipschitz_couplings: lj,
            lipschitz_biases: lh,
            max_change,
        });
        y = match accel.as_mut() {
            Some(state) => state.extrapolate(&next),
            None => next.clone(),
        };
        x = next;
        if max_change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        model: x,
        iterations_run: trace.len(),
        trace,
        converged,
        overflow_warnings: objective.overflow_warnings(),
        initial_composite,
    })
}

/// Fits `kind` to `data` under `cfg`.
pub fn fit(kind: ObjectiveKind, data: &SpinDataset, cfg: &FitConfig) -> Result<FitResult> {
    if data.is_empty() {
        return Err(invalid("cannot fit an empty dataset"));
    }
    let objective = kind.bind(data, cfg.deterministic_reduction)?;
    minimize(objective.as_ref(), cfg)
}
