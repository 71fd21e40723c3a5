//! Sparse inverse-Ising inference.
//!
//! Generate spin data from a known Ising model by MCMC, then recover the
//! couplings and biases with an L1-regularized pseudo-likelihood or minimum
//! probability flow fit, solved by proximal gradient descent (ISTA/FISTA)
//! with backtracking.
//!
//! ```
//! use ising_core::{fit, generate, sample, FitConfig, GroundTruthSpec, ObjectiveKind,
//!                  RegularizationConfig, SamplerConfig};
//!
//! let truth = generate(&GroundTruthSpec::square_lattice(3, 1)).unwrap();
//! let data = sample(&truth, &SamplerConfig::new(500, 2)).unwrap();
//! let cfg = FitConfig::new(ObjectiveKind::MPF, RegularizationConfig::uniform(0.02));
//! let result = fit(ObjectiveKind::MPF, &data, &cfg).unwrap();
//! assert_eq!(result.model.n_spins(), 9);
//! ```

pub mod enumerate;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod objectives;
pub mod prox;
pub mod rng;
pub mod synthgen;

pub use enumerate::{exact_mle_oracle, sample_exact};
pub use error::{IsingError, Result};
pub use harness::{recovery_report, run_sweep, run_sweep_with_jobs, RecoveryReport, SweepSpec, SweepTable};
pub use io::DatasetFile;
pub use model::{energy, flip_energy_delta, local_fields, IsingModel, LocalFieldTable, SpinConfiguration, SpinDataset};
pub use objectives::{
    mpf_gradient, mpf_value, pl_gradient, pl_value, MinimumProbabilityFlow, Objective, ObjectiveGradient,
    ObjectiveKind, PseudoLikelihood,
};
pub use prox::{
    backtrack, fit, ista_step, minimize, soft_threshold, AccelState, FitConfig, FitResult, RegularizationConfig,
    TraceRecord,
};
pub use synthgen::{generate, sample, GroundTruthSpec, SamplerConfig, TruthKind, UpdateRule};
