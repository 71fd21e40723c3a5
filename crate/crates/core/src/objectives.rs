//! Differentiable costs over the [`IsingModel`] parameters: negative
//! pseudo-likelihood and minimum probability flow.
//!
//! Both costs are normalized by the number of configurations `D`, and both
//! decompose into per-site terms of the local field `theta_i`:
//!
//! | cost | site term | `d term / d theta_i` |
//! |------|-----------|----------------------|
//! | PL   | `log(2 cosh theta_i) - x_i theta_i` | `tanh(theta_i) - x_i` |
//! | MPF  | `exp(-x_i theta_i)` | `-x_i exp(-x_i theta_i)` |
//!
//! `theta_i` depends on `K_ij` through `x_j`, so with `r_i` the derivative
//! column above, `dL/dh_i = <r_i>` and `dL/dK_ij = <r_i x_j + r_j x_i>`.
//!
//! The MPF site term is `exp(-dE_i / 2)` with `dE_i` the one-flip energy
//! difference from [`crate::model::flip_energy_delta`].

use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{fields_into, pairs, IsingModel, SpinDataset};

/// Exponents of the MPF site terms are clamped to this magnitude.
pub const MPF_EXPONENT_LIMIT: f64 = 500.0;

/// Rows per block in the parallel reduction. Blocks are summed in index
/// order, so results do not depend on the thread count.
const BLOCK_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveKind {
    #[serde(alias = "pl")]
    PseudoLikelihood,
    #[serde(alias = "mpf")]
    MinimumProbabilityFlow {
        /// Skip flip neighbours that are themselves present in the data.
        #[serde(default)]
        exclude_data_neighbors: bool,
    },
}

impl ObjectiveKind {
    pub const PL: ObjectiveKind = ObjectiveKind::PseudoLikelihood;
    pub const MPF: ObjectiveKind = ObjectiveKind::MinimumProbabilityFlow {
        exclude_data_neighbors: false,
    };

    pub fn label(&self) -> &'static str {
        match self {
            ObjectiveKind::PseudoLikelihood => "pl",
            ObjectiveKind::MinimumProbabilityFlow { .. } => "mpf",
        }
    }

    /// Iteration budget used when none is given: 200 for PL, 50 for MPF.
    pub fn default_max_iterations(&self) -> usize {
        match self {
            ObjectiveKind::PseudoLikelihood => 200,
            ObjectiveKind::MinimumProbabilityFlow { .. } => 50,
        }
    }

    /// Binds the objective to a dataset.
    pub fn bind<'a>(&self, data: &'a SpinDataset, deterministic: bool) -> Result<Box<dyn Objective + 'a>> {
        Ok(match *self {
            ObjectiveKind::PseudoLikelihood => Box::new(PseudoLikelihood::new(data)?.deterministic(deterministic)),
            ObjectiveKind::MinimumProbabilityFlow { exclude_data_neighbors } => {
                Box::new(MinimumProbabilityFlow::new(data, exclude_data_neighbors)?.deterministic(deterministic))
            }
        })
    }
}

/// Gradient laid out like the model: upper-triangular couplings, then biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub grad_couplings: Vec<f64>,
    pub grad_biases: Vec<f64>,
}

impl ObjectiveGradient {
    pub fn zeros(n_spins: usize) -> Self {
        Self {
            grad_couplings: vec![0.0; crate::model::n_pairs(n_spins)],
            grad_biases: vec![0.0; n_spins],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.grad_couplings.iter().chain(&self.grad_biases)
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// A smooth cost over Ising parameters.
pub trait Objective: Sync {
    fn n_spins(&self) -> usize;

    fn value(&self, model: &IsingModel) -> Result<f64>;

    fn value_and_gradient(&self, model: &IsingModel) -> Result<(f64, ObjectiveGradient)>;

    fn gradient(&self, model: &IsingModel) -> Result<ObjectiveGradient> {
        Ok(self.value_and_gradient(model)?.1)
    }

    /// Number of clamped exponent evaluations so far.
    fn overflow_warnings(&self) -> u64 {
        0
    }
}

/// Per-block partial sums.
struct Partial {
    value: f64,
    bias: Vec<f64>,
    /// `outer[i * n + j] = sum_k r_i x_j`
    outer: Vec<f64>,
}

impl Partial {
    fn new(n: usize, with_grad: bool) -> Self {
        Self {
            value: 0.0,
            bias: if with_grad { vec![0.0; n] } else { Vec::new() },
            outer: if with_grad { vec![0.0; n * n] } else { Vec::new() },
        }
    }

    fn merge(&mut self, other: Partial) {
        self.value += other.value;
        for (a, b) in self.bias.iter_mut().zip(other.bias) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().zip(other.outer) {
            *a += b;
        }
    }
}

/// Shared evaluation loop. `site(k, i, x_i, theta_i)` returns the site term
/// and its derivative with respect to `theta_i`.
fn evaluate<F>(
    data: &SpinDataset,
    model: &IsingModel,
    with_grad: bool,
    deterministic: bool,
    site: F,
) -> Result<(f64, Option<ObjectiveGradient>)>
where
    F: Fn(usize, usize, i8, f64) -> (f64, f64) + Sync,
{
    data.check_model(model)?;
    if data.is_empty() {
        return Err(invalid("objective needs at least one configuration"));
    }
    let n = model.n_spins();
    let matrix = model.coupling_matrix();
    let biases = model.biases();

    let block = |start: usize, rows: &[i8]| -> Partial {
        let mut acc = Partial::new(n, with_grad);
        let mut theta = vec![0.0; n];
        let mut resid = vec![0.0; n];
        for (offset, x) in rows.chunks_exact(n).enumerate() {
            let k = start + offset;
            fields_into(&matrix, biases, x, &mut theta);
            for i in 0..n {
                let (v, r) = site(k, i, x[i], theta[i]);
                acc.value += v;
                resid[i] = r;
            }
            if with_grad {
                for (i, &r) in resid.iter().enumerate() {
                    acc.bias[i] += r;
                    if r != 0.0 {
                        let row = &mut acc.outer[i * n..(i + 1) * n];
                        for (o, &s) in row.iter_mut().zip(x) {
                            *o += r * f64::from(s);
                        }
                    }
                }
            }
        }
        acc
    };

    let total = if deterministic {
        block(0, data.as_flat())
    } else {
        let parts: Vec<Partial> = data
            .as_flat()
            .par_chunks(BLOCK_ROWS * n)
            .enumerate()
            .map(|(b, rows)| block(b * BLOCK_ROWS, rows))
            .collect();
        let mut it = parts.into_iter();
        let mut total = it.next().unwrap_or_else(|| Partial::new(n, with_grad));
        for p in it {
            total.merge(p);
        }
        total
    };

    let d = data.len() as f64;
    let value = total.value / d;
    let grad = with_grad.then(|| {
        let grad_couplings = pairs(n)
            .map(|(i, j)| (total.outer[i * n + j] + total.outer[j * n + i]) / d)
            .collect();
        let grad_biases = total.bias.iter().map(|b| b / d).collect();
        ObjectiveGradient {
            grad_couplings,
            grad_biases,
        }
    });
    Ok((value, grad))
}

/// `log(2 cosh t)` without overflow.
#[inline]
pub fn log_two_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Negative log pseudo-likelihood per configuration.
pub struct PseudoLikelihood<'a> {
    data: &'a SpinDataset,
    deterministic: bool,
}

impl<'a> PseudoLikelihood<'a> {
    pub fn new(data: &'a SpinDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("pseudo-likelihood needs at least one configuration"));
        }
        Ok(Self {
            data,
            deterministic: false,
        })
    }

    /// Sequential reduction in configuration order.
    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }

    fn site(_k: usize, _i: usize, x: i8, theta: f64) -> (f64, f64) {
        let x = f64::from(x);
        (log_two_cosh(theta) - x * theta, theta.tanh() - x)
    }
}

impl Objective for PseudoLikelihood<'_> {
    fn n_spins(&self) -> usize {
        self.data.n_spins()
    }

    fn value(&self, model: &IsingModel) -> Result<f64> {
        Ok(evaluate(self.data, model, false, self.deterministic, Self::site)?.0)
    }

    fn value_and_gradient(&self, model: &IsingModel) -> Result<(f64, ObjectiveGradient)> {
        let (v, g) = evaluate(self.data, model, true, self.deterministic, Self::site)?;
        Ok((v, g.expect("gradient requested")))
    }
}

/// Minimum probability flow under single-spin-flip connectivity.
pub struct MinimumProbabilityFlow<'a> {
    data: &'a SpinDataset,
    /// Row-major `D x N` mask of flip neighbours found in the data.
    excluded: Option<Vec<bool>>,
    deterministic: bool,
    overflows: AtomicU64,
}

impl<'a> MinimumProbabilityFlow<'a> {
    pub fn new(data: &'a SpinDataset, exclude_data_neighbors: bool) -> Result<Self> {
        if data.is_empty() {
            return Err(invalid("minimum probability flow needs at least one configuration"));
        }
        let excluded = exclude_data_neighbors.then(|| data_neighbor_mask(data));
        Ok(Self {
            data,
            excluded,
            deterministic: false,
            overflows: AtomicU64::new(0),
        })
    }

    pub fn deterministic(mut self, on: bool) -> Self {
        self.deterministic = on;
        self
    }

    fn run(&self, model: &IsingModel, with_grad: bool) -> Result<(f64, Option<ObjectiveGradient>)> {
        let n = self.data.n_spins();
        let clamped = AtomicU64::new(0);
        let site = |k: usize, i: usize, x: i8, theta: f64| -> (f64, f64) {
            if let Some(mask) = &self.excluded {
                if mask[k * n + i] {
                    return (0.0, 0.0);
                }
            }
            let x = f64::from(x);
            let mut exponent = -x * theta;
            if exponent.abs() > MPF_EXPONENT_LIMIT {
                clamped.fetch_add(1, Ordering::Relaxed);
                exponent = exponent.clamp(-MPF_EXPONENT_LIMIT, MPF_EXPONENT_LIMIT);
            }
            let w = exponent.exp();
            (w, -x * w)
        };
        let out = evaluate(self.data, model, with_grad, self.deterministic, site)?;
        self.overflows.fetch_add(clamped.into_inner(), Ordering::Relaxed);
        Ok(out)
    }
}

impl Objective for MinimumProbabilityFlow<'_> {
    fn n_spins(&self) -> usize {
        self.data.n_spins()
    }

    fn value(&self, model: &IsingModel) -> Result<f64> {
        Ok(self.run(model, false)?.0)
    }

    fn value_and_gradient(&self, model: &IsingModel) -> Result<(f64, ObjectiveGradient)> {
        let (v, g) = self.run(model, true)?;
        Ok((v, g.expect("gradient requested")))
    }

    fn overflow_warnings(&self) -> u64 {
        self.overflows.load(Ordering::Relaxed)
    }
}

fn data_neighbor_mask(data: &SpinDataset) -> Vec<bool> {
    let n = data.n_spins();
    let present: HashSet<&[i8]> = data.rows().collect();
    let mut mask = vec![false; data.len() * n];
    let mut buf = vec![0i8; n];
    for (k, row) in data.rows().enumerate() {
        buf.copy_from_slice(row);
        for i in 0..n {
            buf[i] = -buf[i];
            mask[k * n + i] = present.contains(buf.as_slice());
            buf[i] = -buf[i];
        }
    }
    mask
}

pub fn pl_value(model: &IsingModel, data: &SpinDataset) -> Result<f64> {
    PseudoLikelihood::new(data)?.value(model)
}

pub fn pl_gradient(model: &IsingModel, data: &SpinDataset) -> Result<ObjectiveGradient> {
    PseudoLikelihood::new(data)?.gradient(model)
}

/// `opts` must be the MPF variant; PL is rejected.
pub fn mpf_value(model: &IsingModel, data: &SpinDataset, opts: ObjectiveKind) -> Result<f64> {
    MinimumProbabilityFlow::new(data, mpf_exclusion(opts)?)?.value(model)
}

pub fn mpf_gradient(model: &IsingModel, data: &SpinDataset, opts: ObjectiveKind) -> Result<ObjectiveGradient> {
    MinimumProbabilityFlow::new(data, mpf_exclusion(opts)?)?.gradient(model)
}

fn mpf_exclusion(opts: ObjectiveKind) -> Result<bool> {
    match opts {
        ObjectiveKind::MinimumProbabilityFlow { exclude_data_neighbors } => Ok(exclude_data_neighbors),
        ObjectiveKind::PseudoLikelihood => Err(invalid("expected a minimum probability flow objective")),
    }
}
