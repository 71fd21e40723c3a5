//! Ground-truth generators and the single-site MCMC sampler.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{n_pairs, pair_index, pairs, IsingModel, SpinDataset};
use crate::rng::{derive_seed, stream_rng, STREAM_MODEL, STREAM_SAMPLER};

/// Structure of the true coupling graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruthKind {
    /// `round(density * N(N-1)/2)` pairs chosen uniformly at random.
    RandomSparse { n_spins: usize, density: f64 },
    /// Nearest neighbours on an `L x L` torus.
    SquareLattice { linear_size: usize },
}

impl TruthKind {
    pub fn n_spins(&self) -> usize {
        match *self {
            TruthKind::RandomSparse { n_spins, .. } => n_spins,
            TruthKind::SquareLattice { linear_size } => linear_size * linear_size,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TruthKind::RandomSparse { .. } => "random-sparse",
            TruthKind::SquareLattice { .. } => "square-lattice",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TruthKind::RandomSparse { n_spins, density } => {
                if n_spins < 2 {
                    return Err(invalid("random-sparse truth needs at least 2 spins"));
                }
                if !(density > 0.0 && density <= 1.0) {
                    return Err(invalid(format!("density {density} outside (0, 1]")));
                }
            }
            TruthKind::SquareLattice { linear_size } => {
                if linear_size < 2 {
                    return Err(invalid("linear size must be at least 2"));
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth recipe. Coupling and bias values are i.i.d. standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSpec {
    pub kind: TruthKind,
    pub seed: u64,
}

impl GroundTruthSpec {
    pub fn random_sparse(n_spins: usize, density: f64, seed: u64) -> Self {
        Self {
            kind: TruthKind::RandomSparse { n_spins, density },
            seed,
        }
    }

    pub fn square_lattice(linear_size: usize, seed: u64) -> Self {
        Self {
            kind: TruthKind::SquareLattice { linear_size },
            seed,
        }
    }
}

/// Dispatches on the truth kind.
pub fn generate(spec: &GroundTruthSpec) -> Result<IsingModel> {
    match spec.kind {
        TruthKind::RandomSparse { .. } => generate_random_sparse(spec),
        TruthKind::SquareLattice { .. } => generate_square_lattice(spec),
    }
}

/// Number of nonzero pairs the random-sparse generator emits.
pub fn random_sparse_pair_count(n_spins: usize, density: f64) -> usize {
    (density * n_pairs(n_spins) as f64).round() as usize
}

pub fn generate_random_sparse(spec: &GroundTruthSpec) -> Result<IsingModel> {
    let TruthKind::RandomSparse { n_spins, density } = spec.kind else {
        return Err(invalid("generate_random_sparse called with a lattice spec"));
    };
    spec.kind.validate()?;
    let count = random_sparse_pair_count(n_spins, density);
    if count == 0 {
        return Err(invalid(format!(
            "density {density} selects no pairs among {n_spins} spins"
        )));
    }
    let mut rng = stream_rng(spec.seed, STREAM_MODEL);
    let mut chosen = index::sample(&mut rng, n_pairs(n_spins), count).into_vec();
    chosen.sort_unstable();
    let mut couplings = vec![0.0; n_pairs(n_spins)];
    for idx in chosen {
        couplings[idx] = rng.sample(StandardNormal);
    }
    let biases = (0..n_spins).map(|_| rng.sample(StandardNormal)).collect();
    IsingModel::new(n_spins, couplings, biases)
}

/// Torus edges in generation order: for each site in row-major order, its
/// right neighbour then its down neighbour. `L = 2` yields parallel edges.
pub fn torus_edges(linear_size: usize) -> Vec<(usize, usize)> {
    let l = linear_size;
    let mut edges = Vec::with_capacity(2 * l * l);
    for r in 0..l {
        for c in 0..l {
            let site = r * l + c;
            edges.push((site, r * l + (c + 1) % l));
            edges.push((site, ((r + 1) % l) * l + c));
        }
    }
    edges
}

pub fn generate_square_lattice(spec: &GroundTruthSpec) -> Result<IsingModel> {
    let TruthKind::SquareLattice { linear_size } = spec.kind else {
        return Err(invalid("generate_square_lattice called with a random-sparse spec"));
    };
    spec.kind.validate()?;
    let n = linear_size * linear_size;
    let mut rng = stream_rng(spec.seed, STREAM_MODEL);
    let mut couplings = vec![0.0; n_pairs(n)];
    for (a, b) in torus_edges(linear_size) {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        // duplicate parallel edges (L = 2) are merged by summation
        let v: f64 = rng.sample(StandardNormal);
        couplings[pair_index(n, i, j)] += v;
    }
    let biases = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    IsingModel::new(n, couplings, biases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Set the spin to +1 with probability `(1 + tanh(theta_i)) / 2`.
    #[default]
    HeatBath,
    /// Flip with probability `min(1, exp(-dE))`.
    Metropolis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_samples: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in_sweeps: usize,
    #[serde(default = "default_thinning")]
    pub thinning_sweeps: usize,
    pub seed: u64,
    #[serde(default)]
    pub update_rule: UpdateRule,
}

fn default_burn_in() -> usize {
    1000
}

fn default_thinning() -> usize {
    10
}

impl SamplerConfig {
    /// Default schedule: 1000 burn-in sweeps, one record every 10 sweeps, heat bath.
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            burn_in_sweeps: default_burn_in(),
            thinning_sweeps: default_thinning(),
            seed,
            update_rule: UpdateRule::HeatBath,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be at least 1"));
        }
        if self.thinning_sweeps == 0 {
            return Err(invalid("thinning_sweeps must be at least 1"));
        }
        Ok(())
    }
}

struct Chain<'a> {
    matrix: Vec<f64>,
    biases: &'a [f64],
    state: Vec<i8>,
    rule: UpdateRule,
    rng: ChaCha8Rng,
}

impl<'a> Chain<'a> {
    fn new(model: &'a IsingModel, rule: UpdateRule, mut rng: ChaCha8Rng) -> Self {
        let state = (0..model.n_spins())
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        Self {
            matrix: model.coupling_matrix(),
            biases: model.biases(),
            state,
            rule,
            rng,
        }
    }

    fn field(&self, i: usize) -> f64 {
        let n = self.biases.len();
        let row = &self.matrix[i * n..(i + 1) * n];
        self.biases[i]
            + row
                .iter()
                .zip(&self.state)
                .map(|(&k, &s)| k * f64::from(s))
                .sum::<f64>()
    }

    fn sweep(&mut self) {
        for i in 0..self.state.len() {
            let theta = self.field(i);
            match self.rule {
                UpdateRule::HeatBath => {
                    let p_up = 0.5 * (1.0 + theta.tanh());
                    self.state[i] = if self.rng.random::<f64>() < p_up { 1 } else { -1 };
                }
                UpdateRule::Metropolis => {
                    let delta = 2.0 * f64::from(self.state[i]) * theta;
                    if delta <= 0.0 || self.rng.random::<f64>() < (-delta).exp() {
                        self.state[i] = -self.state[i];
                    }
                }
            }
        }
    }
}

/// Runs one chain: `burn_in_sweeps` discarded sweeps, then one recorded
/// configuration every `thinning_sweeps` sweeps until `n_samples` are kept.
/// One sweep visits sites `0..N` in order. The initial state is uniform random.
pub fn sample(model: &IsingModel, cfg: &SamplerConfig) -> Result<SpinDataset> {
    cfg.validate()?;
    let rng = stream_rng(cfg.seed, STREAM_SAMPLER);
    let mut chain = Chain::new(model, cfg.update_rule, rng);
    for _ in 0..cfg.burn_in_sweeps {
        chain.sweep();
    }
    let mut spins = Vec::with_capacity(cfg.n_samples * model.n_spins());
    for _ in 0..cfg.n_samples {
        for _ in 0..cfg.thinning_sweeps {
            chain.sweep();
        }
        spins.extend_from_slice(&chain.state);
    }
    SpinDataset::from_flat(model.n_spins(), spins)
}

/// Runs `n_chains` independent chains concurrently and concatenates their
/// output in chain order. Chain `c` uses seed `derive_seed(cfg.seed, c)` and
/// collects `n_samples / n_chains` configurations, the first
/// `n_samples % n_chains` chains taking one extra.
pub fn sample_chains(model: &IsingModel, cfg: &SamplerConfig, n_chains: usize) -> Result<SpinDataset> {
    cfg.validate()?;
    if n_chains == 0 {
        return Err(invalid("n_chains must be at least 1"));
    }
    let base = cfg.n_samples / n_chains;
    let extra = cfg.n_samples % n_chains;
    let parts: Vec<Result<SpinDataset>> = (0..n_chains)
        .into_par_iter()
        .filter_map(|c| {
            let n = base + usize::from(c < extra);
            (n > 0).then(|| {
                let chain_cfg = SamplerConfig {
                    n_samples: n,
                    seed: derive_seed(cfg.seed, c as u64),
                    ..*cfg
                };
                sample(model, &chain_cfg)
            })
        })
        .collect();
    let mut spins = Vec::with_capacity(cfg.n_samples * model.n_spins());
    for part in parts {
        spins.extend_from_slice(part?.as_flat());
    }
    SpinDataset::from_flat(model.n_spins(), spins)
}

/// Degree of each spin in the nonzero-coupling graph.
pub fn degrees(model: &IsingModel) -> Vec<usize> {
    let mut deg = vec![0; model.n_spins()];
    for ((i, j), &v) in pairs(model.n_spins()).zip(model.couplings()) {
        if v != 0.0 {
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    deg
}
