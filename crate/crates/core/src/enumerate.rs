//! Exact computations by enumerating all `2^N` configurations. Small `N` only.

use rand::Rng;

use crate::error::{invalid, IsingError, Result};
use crate::model::{energy_unchecked, n_pairs, pairs, IsingModel, SpinDataset};
use crate::rng::{stream_rng, STREAM_EXACT};

/// Largest system handled by the enumeration routines.
pub const MAX_ENUMERATION_SPINS: usize = 16;

/// Largest system accepted by [`exact_mle_oracle`].
pub const MAX_MLE_SPINS: usize = 10;

/// Configuration number `s`: spin `i` is +1 iff bit `i` is set.
pub fn state(n: usize, s: usize) -> Vec<i8> {
    (0..n).map(|i| if s >> i & 1 == 1 { 1 } else { -1 }).collect()
}

fn check_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(invalid(format!("{n} spins exceeds the enumeration limit of {limit}")));
    }
    Ok(())
}

/// Boltzmann probabilities `exp(-E(x)) / Z` indexed as in [`state`].
pub fn boltzmann_probabilities(model: &IsingModel) -> Result<Vec<f64>> {
    let n = model.n_spins();
    check_size(n, MAX_ENUMERATION_SPINS)?;
    let neg_e: Vec<f64> = (0..1usize << n)
        .map(|s| -energy_unchecked(model, &state(n, s)))
        .collect();
    let top = neg_e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = neg_e.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Model expectations `<x_i>` and `<x_i x_j>` (storage order).
pub fn model_moments(model: &IsingModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.n_spins();
    let p = boltzmann_probabilities(model)?;
    let mut mean = vec![0.0; n];
    let mut corr = vec![0.0; n_pairs(n)];
    for (s, &ps) in p.iter().enumerate() {
        let x = state(n, s);
        for i in 0..n {
            mean[i] += ps * f64::from(x[i]);
        }
        for ((i, j), c) in pairs(n).zip(corr.iter_mut()) {
            *c += ps * f64::from(x[i] * x[j]);
        }
    }
    Ok((mean, corr))
}

/// Independent draws from the exact Boltzmann distribution by inverse CDF.
pub fn sample_exact(model: &IsingModel, d: usize, seed: u64) -> Result<SpinDataset> {
    let n = model.n_spins();
    let p = boltzmann_probabilities(model)?;
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for v in p {
        acc += v;
        cdf.push(acc);
    }
    let mut rng = stream_rng(seed, STREAM_EXACT);
    let mut spins = Vec::with_capacity(n * d);
    for _ in 0..d {
        let u: f64 = rng.random::<f64>() * acc;
        let s = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        spins.extend(state(n, s));
    }
    SpinDataset::from_flat(n, spins)
}

/// Exact maximum-likelihood fit by gradient ascent on the average
/// log-likelihood, with the partition function computed by enumeration.
///
/// The step is `1/P` for `P` parameters: the Hessian is minus the feature
/// covariance, whose largest eigenvalue is at most its trace `<= P`, so the
/// ascent is monotone. Stops when the gradient norm drops below `1e-8`.
pub fn exact_mle_oracle(data: &SpinDataset) -> Result<IsingModel> {
    const GRAD_TOL: f64 = 1e-8;
    const MAX_STEPS: usize = 2_000_000;

    let n = data.n_spins();
    check_size(n, MAX_MLE_SPINS)?;
    if data.is_empty() {
        return Err(invalid("maximum likelihood needs at least one configuration"));
    }
    let target_mean = data.mean_spins();
    let target_corr = data.mean_pair_products();
    if target_mean.iter().chain(&target_corr).any(|m| m.abs() >= 1.0) {
        return Err(invalid(
            "an empirical moment sits at +-1; the likelihood has no finite maximizer",
        ));
    }
    let step = 1.0 / (n + n_pairs(n)) as f64;
    let mut model = IsingModel::zeros(n);
    for _ in 0..MAX_STEPS {
        let (mean, corr) = model_moments(&model)?;
        let gk: Vec<f64> = target_corr.iter().zip(&corr).map(|(t, m)| t - m).collect();
        let gh: Vec<f64> = target_mean.iter().zip(&mean).map(|(t, m)| t - m).collect();
        let norm = gk.iter().chain(&gh).map(|g| g * g).sum::<f64>().sqrt();
        if norm < GRAD_TOL {
            return Ok(model);
        }
        for (k, g) in model.couplings_mut().iter_mut().zip(&gk) {
            *k += step * g;
        }
        for (h, g) in model.biases_mut().iter_mut().zip(&gh) {
            *h += step * g;
        }
    }
    Err(IsingError::NonConvergence { lipschitz: 1.0 / step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn probabilities_normalize_and_match_two_spin_closed_form() {
        let m = IsingModel::new(2, vec![0.5], vec![0.0, 0.0]).unwrap();
        let p = boltzmann_probabilities(&m).unwrap();
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let (_, corr) = model_moments(&m).unwrap();
        assert_relative_eq!(corr[0], 0.5f64.tanh(), epsilon = 1e-15);
    }

    #[test]
    fn single_spin_mle_is_atanh() {
        for (ups, d) in [(7usize, 10usize), (3, 10), (50, 100)] {
            let spins = (0..d).map(|k| if k < ups { 1 } else { -1 }).collect();
            let data = SpinDataset::from_flat(1, spins).unwrap();
            let m = exact_mle_oracle(&data).unwrap();
            let p = ups as f64 / d as f64;
            assert_relative_eq!(m.biases()[0], (2.0 * p - 1.0).atanh(), epsilon = 1e-7);
        }
    }

    #[test]
    fn mle_matches_moments() {
        let truth = IsingModel::new(3, vec![0.4, -0.3, 0.2], vec![0.1, -0.2, 0.3]).unwrap();
        let data = sample_exact(&truth, 2000, 4).unwrap();
        let m = exact_mle_oracle(&data).unwrap();
        let (mean, corr) = model_moments(&m).unwrap();
        for (a, b) in mean.iter().zip(data.mean_spins()) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in corr.iter().zip(data.mean_pair_products()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_data_gives_near_zero_model() {
        let data = sample_exact(&IsingModel::zeros(3), 100_000, 9).unwrap();
        let m = exact_mle_oracle(&data).unwrap();
        let norm = m
            .couplings()
            .iter()
            .chain(m.biases())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!(norm < 0.05, "norm {norm}");
    }

    #[test]
    fn exact_sampler_matches_probabilities() {
        let m = IsingModel::new(2, vec![-0.7], vec![0.3, 0.1]).unwrap();
        let p = boltzmann_probabilities(&m).unwrap();
        let data = sample_exact(&m, 200_000, 1).unwrap();
        let mut counts = [0f64; 4];
        for r in data.rows() {
            let s = (0..2).filter(|&i| r[i] == 1).map(|i| 1 << i).sum::<usize>();
            counts[s] += 1.0;
        }
        for (c, q) in counts.iter().zip(&p) {
            assert!((c / 200_000.0 - q).abs() < 0.005);
        }
    }

    #[test]
    fn rejects_degenerate_or_large_inputs() {
        let data = SpinDataset::from_flat(1, vec![1; 5]).unwrap();
        assert!(exact_mle_oracle(&data).is_err());
        let big = SpinDataset::from_flat(11, vec![1; 11]).unwrap();
        assert!(exact_mle_oracle(&big).is_err());
        assert!(boltzmann_probabilities(&IsingModel::zeros(17)).is_err());
    }
}
