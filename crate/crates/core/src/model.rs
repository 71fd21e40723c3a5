//! Parameter and data representations shared by every other module.
//!
//! Energy convention: each unordered pair `(i, j)`, `i < j`, carries one
//! coupling `K_ij` that is counted once,
//!
//! ```text
//! E(x) = -sum_{i<j} K_ij x_i x_j - sum_i h_i x_i
//! ```
//!
//! Couplings are stored as a dense upper-triangular array in row-major order
//! over `i < j`: `(0,1), (0,2), ..., (0,N-1), (1,2), ..., (N-2,N-1)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IsingError, Result};

/// Number of unordered pairs among `n` spins.
#[inline]
pub fn n_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Flat index of the unordered pair `(i, j)` with `i < j < n`.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Iterates `(i, j)` pairs in storage order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Pairwise Ising model: symmetric couplings plus per-spin biases.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n_spins: usize,
    couplings: Vec<f64>,
    biases: Vec<f64>,
}

impl IsingModel {
    /// All-zero model on `n_spins` spins.
    pub fn zeros(n_spins: usize) -> Self {
        Self {
            n_spins,
            couplings: vec![0.0; n_pairs(n_spins)],
            biases: vec![0.0; n_spins],
        }
    }

    /// Builds a model from the flat upper-triangular coupling array and the bias vector.
    pub fn new(n_spins: usize, couplings: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if n_spins == 0 {
            return Err(invalid("model needs at least one spin"));
        }
        if couplings.len() != n_pairs(n_spins) {
            return Err(invalid(format!(
                "expected {} couplings for {} spins, got {}",
                n_pairs(n_spins),
                n_spins,
                couplings.len()
            )));
        }
        if biases.len() != n_spins {
            return Err(IsingError::DimensionMismatch {
                expected: n_spins,
                found: biases.len(),
            });
        }
        if couplings.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(invalid("model parameters must be finite"));
        }
        Ok(Self {
            n_spins,
            couplings,
            biases,
        })
    }

    /// Builds a model from sparse `(i, j, value)` triples with `i < j`.
    /// Repeated pairs are rejected.
    pub fn from_pairs(n_spins: usize, entries: &[(usize, usize, f64)], biases: Vec<f64>) -> Result<Self> {
        let mut couplings = vec![0.0; n_pairs(n_spins)];
        let mut seen = vec![false; couplings.len()];
        for &(i, j, v) in entries {
            if i >= j {
                return Err(invalid(format!("coupling ({i}, {j}) must satisfy i < j")));
            }
            if j >= n_spins {
                return Err(IsingError::IndexOutOfRange { index: j, n_spins });
            }
            let idx = pair_index(n_spins, i, j);
            if seen[idx] {
                return Err(invalid(format!("coupling ({i}, {j}) listed twice")));
            }
            seen[idx] = true;
            couplings[idx] = v;
        }
        Self::new(n_spins, couplings, biases)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Upper-triangular coupling array in storage order.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub(crate) fn couplings_mut(&mut self) -> &mut [f64] {
        &mut self.couplings
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Symmetric coupling lookup; zero on the diagonal.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.couplings[pair_index(self.n_spins, i, j)],
            std::cmp::Ordering::Greater => self.couplings[pair_index(self.n_spins, j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    /// Sets `K_ij` (order of `i`, `j` is irrelevant).
    pub fn set_coupling(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i == j {
            return Err(invalid("self-coupling is not representable"));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if b >= self.n_spins {
            return Err(IsingError::IndexOutOfRange {
                index: b,
                n_spins: self.n_spins,
            });
        }
        if !value.is_finite() {
            return Err(invalid("coupling must be finite"));
        }
        self.couplings[pair_index(self.n_spins, a, b)] = value;
        Ok(())
    }

    /// Dense symmetric `N x N` coupling matrix, row-major, zero diagonal.
    pub fn coupling_matrix(&self) -> Vec<f64> {
        let n = self.n_spins;
        let mut m = vec![0.0; n * n];
        for ((i, j), &v) in pairs(n).zip(&self.couplings) {
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
        m
    }

    /// Nonzero couplings as `(i, j, value)`.
    pub fn nonzero_couplings(&self) -> Vec<(usize, usize, f64)> {
        pairs(self.n_spins)
            .zip(&self.couplings)
            .filter(|(_, &v)| v != 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect()
    }

    pub fn couplings_l1(&self) -> f64 {
        self.couplings.iter().map(|v| v.abs()).sum()
    }

    pub fn biases_l1(&self) -> f64 {
        self.biases.iter().map(|v| v.abs()).sum()
    }

    /// Largest absolute parameter difference against another model of the same size.
    pub fn max_abs_diff(&self, other: &IsingModel) -> f64 {
        self.couplings
            .iter()
            .zip(&other.couplings)
            .chain(self.biases.iter().zip(&other.biases))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Serializes to the model file schema. Zero couplings are omitted unless `dense`.
    pub fn to_json(&self, dense: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{{");
        let _ = writeln!(out, "  \"n_spins\": {},", self.n_spins);
        let entries: Vec<String> = pairs(self.n_spins)
            .zip(&self.couplings)
            .filter(|(_, &v)| dense || v != 0.0)
            .map(|((i, j), &v)| format!("    [{i}, {j}, {}]", fmt_f64(v)))
            .collect();
        if entries.is_empty() {
            let _ = writeln!(out, "  \"couplings\": [],");
        } else {
            let _ = writeln!(out, "  \"couplings\": [\n{}\n  ],", entries.join(",\n"));
        }
        let biases: Vec<String> = self.biases.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "  \"biases\": [{}]", biases.join(", "));
        out.push_str("}\n");
        out
    }

    /// Parses the model file schema; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| IsingError::Parse(e.to_string()))?;
        if file.biases.len() != file.n_spins {
            return Err(IsingError::Parse(format!(
                "n_spins is {} but {} biases given",
                file.n_spins,
                file.biases.len()
            )));
        }
        Self::from_pairs(file.n_spins, &file.couplings, file.biases)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n_spins: usize,
    couplings: Vec<(usize, usize, f64)>,
    biases: Vec<f64>,
}

/// Shortest round-trip decimal representation.
pub(crate) fn fmt_f64(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

/// One configuration of `N` spins, each exactly -1 or +1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(invalid(format!("spin value {bad} is not +1 or -1")));
        }
        Ok(Self(spins))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    /// Copy with spin `i` reversed.
    pub fn flipped(&self, i: usize) -> Result<Self> {
        if i >= self.0.len() {
            return Err(IsingError::IndexOutOfRange {
                index: i,
                n_spins: self.0.len(),
            });
        }
        let mut s = self.0.clone();
        s[i] = -s[i];
        Ok(Self(s))
    }
}

/// `D` configurations of `N` spins, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinDataset {
    n_spins: usize,
    spins: Vec<i8>,
}

impl SpinDataset {
    pub fn new(n_spins: usize, configurations: &[SpinConfiguration]) -> Result<Self> {
        let mut spins = Vec::with_capacity(n_spins * configurations.len());
        for c in configurations {
            if c.len() != n_spins {
                return Err(IsingError::DimensionMismatch {
                    expected: n_spins,
                    found: c.len(),
                });
            }
            spins.extend_from_slice(c.spins());
        }
        Ok(Self { n_spins, spins })
    }

    /// Builds a dataset from a flat row-major buffer of +1/-1 values.
    pub fn from_flat(n_spins: usize, spins: Vec<i8>) -> Result<Self> {
        if n_spins == 0 {
            return Err(invalid("dataset needs at least one spin"));
        }
        if !spins.len().is_multiple_of(n_spins) {
            return Err(invalid(format!(
                "buffer of {} spins is not a multiple of n_spins={n_spins}",
                spins.len()
            )));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("spin values must be +1 or -1"));
        }
        Ok(Self { n_spins, spins })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Number of configurations `D`.
    pub fn len(&self) -> usize {
        self.spins.len().checked_div(self.n_spins).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.spins[k * self.n_spins..(k + 1) * self.n_spins]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, i8> {
        self.spins.chunks_exact(self.n_spins)
    }

    pub fn as_flat(&self) -> &[i8] {
        &self.spins
    }

    pub fn configuration(&self, k: usize) -> SpinConfiguration {
        SpinConfiguration(self.row(k).to_vec())
    }

    /// The first `d` configurations.
    pub fn prefix(&self, d: usize) -> Result<Self> {
        if d > self.len() {
            return Err(invalid(format!("prefix of {d} exceeds dataset size {}", self.len())));
        }
        Ok(Self {
            n_spins: self.n_spins,
            spins: self.spins[..d * self.n_spins].to_vec(),
        })
    }

    /// Empirical magnetizations `<x_i>`.
    pub fn mean_spins(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_spins];
        for row in self.rows() {
            for (acc, &s) in m.iter_mut().zip(row) {
                *acc += f64::from(s);
            }
        }
        let d = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= d);
        m
    }

    /// Empirical pair correlations `<x_i x_j>` in coupling storage order.
    pub fn mean_pair_products(&self) -> Vec<f64> {
        let n = self.n_spins;
        let mut c = vec![0.0; n_pairs(n)];
        for row in self.rows() {
            for ((i, j), acc) in pairs(n).zip(c.iter_mut()) {
                *acc += f64::from(row[i] * row[j]);
            }
        }
        let d = self.len().max(1) as f64;
        c.iter_mut().for_each(|v| *v /= d);
        c
    }

    pub(crate) fn check_model(&self, model: &IsingModel) -> Result<()> {
        if model.n_spins() != self.n_spins {
            return Err(IsingError::DimensionMismatch {
                expected: model.n_spins(),
                found: self.n_spins,
            });
        }
        Ok(())
    }
}

/// Per-configuration, per-site local fields `theta[k][i] = sum_{j != i} K_ij x_j + h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFieldTable {
    n_spins: usize,
    theta: Vec<f64>,
}

impl LocalFieldTable {
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.theta[k * self.n_spins + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.theta[k * self.n_spins..(k + 1) * self.n_spins]
    }

    pub fn n_rows(&self) -> usize {
        self.theta.len().checked_div(self.n_spins).unwrap_or(0)
    }
}

/// Writes the local fields of configuration `x` into `out`, given the dense
/// coupling matrix from [`IsingModel::coupling_matrix`].
#[inline]
pub(crate) fn fields_into(matrix: &[f64], biases: &[f64], x: &[i8], out: &mut [f64]) {
    let n = biases.len();
    for i in 0..n {
        let row = &matrix[i * n..(i + 1) * n];
        let mut acc = biases[i];
        for (&k, &s) in row.iter().zip(x) {
            acc += k * f64::from(s);
        }
        out[i] = acc;
    }
}

fn check_config(model: &IsingModel, x: &[i8]) -> Result<()> {
    if x.len() != model.n_spins() {
        return Err(IsingError::DimensionMismatch {
            expected: model.n_spins(),
            found: x.len(),
        });
    }
    Ok(())
}

/// `E(x) = -sum_{i<j} K_ij x_i x_j - sum_i h_i x_i`.
pub fn energy(model: &IsingModel, x: &SpinConfiguration) -> Result<f64> {
    check_config(model, x.spins())?;
    Ok(energy_unchecked(model, x.spins()))
}

pub(crate) fn energy_unchecked(model: &IsingModel, x: &[i8]) -> f64 {
    let pair_term: f64 = pairs(model.n_spins())
        .zip(model.couplings())
        .map(|((i, j), &k)| k * f64::from(x[i] * x[j]))
        .sum();
    let bias_term: f64 = model.biases().iter().zip(x).map(|(&h, &s)| h * f64::from(s)).sum();
    -pair_term - bias_term
}

/// Local fields for every configuration in `data`.
pub fn local_fields(model: &IsingModel, data: &SpinDataset) -> Result<LocalFieldTable> {
    data.check_model(model)?;
    let n = model.n_spins();
    let matrix = model.coupling_matrix();
    let mut theta = vec![0.0; data.len() * n];
    for (row, out) in data.rows().zip(theta.chunks_exact_mut(n)) {
        fields_into(&matrix, model.biases(), row, out);
    }
    Ok(LocalFieldTable { n_spins: n, theta })
}

/// `E(x with spin i flipped) - E(x) = 2 x_i (sum_{j != i} K_ij x_j + h_i)`.
pub fn flip_energy_delta(model: &IsingModel, x: &SpinConfiguration, i: usize) -> Result<f64> {
    check_config(model, x.spins())?;
    if i >= model.n_spins() {
        return Err(IsingError::IndexOutOfRange {
            index: i,
            n_spins: model.n_spins(),
        });
    }
    let s = x.spins();
    let field = model.biases()[i]
        + (0..model.n_spins())
            .filter(|&j| j != i)
            .map(|j| model.coupling(i, j) * f64::from(s[j]))
            .sum::<f64>();
    Ok(2.0 * f64::from(s[i]) * field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_spin(k: f64, h: (f64, f64)) -> IsingModel {
        IsingModel::new(2, vec![k], vec![h.0, h.1]).unwrap()
    }

    fn cfg(s: &[i8]) -> SpinConfiguration {
        SpinConfiguration::new(s.to_vec()).unwrap()
    }

    fn random_model(rng: &mut impl Rng, n: usize) -> IsingModel {
        let k = (0..n_pairs(n)).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        IsingModel::new(n, k, h).unwrap()
    }

    fn random_config(rng: &mut impl Rng, n: usize) -> SpinConfiguration {
        cfg(&(0..n)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect::<Vec<_>>())
    }

    #[test]
    fn pair_layout_is_row_major() {
        let n = 5;
        for (idx, (i, j)) in pairs(n).enumerate() {
            assert_eq!(pair_index(n, i, j), idx);
        }
        assert_eq!(pairs(n).count(), n_pairs(n));
        assert_eq!(pair_index(4, 0, 1), 0);
        assert_eq!(pair_index(4, 1, 2), 3);
        assert_eq!(pair_index(4, 2, 3), 5);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy(&two_spin(1.0, (0.0, 0.0)), &cfg(&[1, 1])).unwrap(), -1.0);
        assert_eq!(energy(&two_spin(1.0, (0.0, 0.0)), &cfg(&[1, -1])).unwrap(), 1.0);
        assert_eq!(energy(&two_spin(1.0, (0.5, 0.0)), &cfg(&[1, 1])).unwrap(), -1.5);
    }

    #[test]
    fn energy_dimension_mismatch() {
        let err = energy(&two_spin(1.0, (0.0, 0.0)), &cfg(&[1, 1, 1])).unwrap_err();
        assert!(matches!(err, IsingError::DimensionMismatch { .. }));
    }

    #[test]
    fn local_field_examples() {
        let data = SpinDataset::new(2, &[cfg(&[1, 1])]).unwrap();
        let t = local_fields(&two_spin(1.0, (0.0, 0.0)), &data).unwrap();
        assert_eq!(t.row(0), &[1.0, 1.0]);

        let m = IsingModel::new(2, vec![0.0], vec![0.3, -0.2]).unwrap();
        let data = SpinDataset::new(2, &[cfg(&[1, -1]), cfg(&[-1, -1])]).unwrap();
        let t = local_fields(&m, &data).unwrap();
        assert_eq!(t.row(0), &[0.3, -0.2]);
        assert_eq!(t.row(1), &[0.3, -0.2]);
    }

    #[test]
    fn local_fields_match_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(&mut rng, 3);
        let configs: Vec<_> = (0..6).map(|_| random_config(&mut rng, 3)).collect();
        let data = SpinDataset::new(3, &configs).unwrap();
        let t = local_fields(&m, &data).unwrap();
        for (k, c) in configs.iter().enumerate() {
            for i in 0..3 {
                // Independent O(N^2) re-summation straight from the triangular storage.
                let mut direct = m.biases()[i];
                for ((a, b), &v) in pairs(3).zip(m.couplings()) {
                    if a == i {
                        direct += v * f64::from(c.spins()[b]);
                    } else if b == i {
                        direct += v * f64::from(c.spins()[a]);
                    }
                }
                assert_relative_eq!(t.get(k, i), direct, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn flip_delta_examples() {
        let m = IsingModel::new(1, vec![], vec![1.0]).unwrap();
        assert_eq!(flip_energy_delta(&m, &cfg(&[1]), 0).unwrap(), 2.0);
        assert!(matches!(
            flip_energy_delta(&m, &cfg(&[1]), 1),
            Err(IsingError::IndexOutOfRange { .. })
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_model(&mut rng, 4);
        for _ in 0..10 {
            let x = random_config(&mut rng, 4);
            for i in 0..4 {
                let fx = x.flipped(i).unwrap();
                let oracle = energy(&m, &fx).unwrap() - energy(&m, &x).unwrap();
                assert_relative_eq!(flip_energy_delta(&m, &x, i).unwrap(), oracle, epsilon = 1e-12);
                // involution
                assert_relative_eq!(
                    flip_energy_delta(&m, &x, i).unwrap(),
                    -flip_energy_delta(&m, &fx, i).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn rejects_invalid_models_and_spins() {
        assert!(IsingModel::new(2, vec![f64::NAN], vec![0.0, 0.0]).is_err());
        assert!(IsingModel::new(3, vec![0.0], vec![0.0; 3]).is_err());
        assert!(IsingModel::from_pairs(3, &[(1, 1, 0.5)], vec![0.0; 3]).is_err());
        assert!(IsingModel::from_pairs(3, &[(2, 1, 0.5)], vec![0.0; 3]).is_err());
        assert!(IsingModel::from_pairs(3, &[(0, 3, 0.5)], vec![0.0; 3]).is_err());
        assert!(IsingModel::from_pairs(3, &[(0, 1, 0.5), (0, 1, 0.1)], vec![0.0; 3]).is_err());
        assert!(SpinConfiguration::new(vec![1, 0, -1]).is_err());
        assert!(SpinDataset::from_flat(2, vec![1, -1, 1]).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let m = IsingModel::from_pairs(3, &[(0, 2, -0.75), (1, 2, 1e-3)], vec![0.1, 0.0, -2.5]).unwrap();
        let text = m.to_json(false);
        assert!(!text.contains("[0, 1,"));
        let back = IsingModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(false), text);
        assert!(m.to_json(true).contains("[0, 1, 0.0]"));

        let extra = r#"{"n_spins": 1, "couplings": [], "biases": [0.0], "beta": 1.0}"#;
        assert!(IsingModel::from_json(extra).is_err());
        let short = r#"{"n_spins": 2, "couplings": [], "biases": [0.0]}"#;
        assert!(IsingModel::from_json(short).is_err());
    }

    proptest! {
        #[test]
        fn flip_delta_consistent_with_energy(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, n);
            let x = random_config(&mut rng, n);
            let i = rng.random_range(0..n);
            let oracle = energy(&m, &x.flipped(i).unwrap()).unwrap() - energy(&m, &x).unwrap();
            let d = flip_energy_delta(&m, &x, i).unwrap();
            prop_assert!((d - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        }

        #[test]
        fn energy_field_identity(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, n);
            let x = random_config(&mut rng, n);
            let data = SpinDataset::new(n, std::slice::from_ref(&x)).unwrap();
            let t = local_fields(&m, &data).unwrap();
            let s = x.spins();
            let rhs: f64 = (0..n)
                .map(|i| -0.5 * f64::from(s[i]) * t.get(0, i) - 0.5 * m.biases()[i] * f64::from(s[i]))
                .sum();
            prop_assert!((energy(&m, &x).unwrap() - rhs).abs() < 1e-12);
        }

        #[test]
        fn energy_invariant_under_relabeling(seed in any::<u64>(), n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, n);
            let x = random_config(&mut rng, n);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            // spin i of the original sits at position perm[i] in the relabeled system
            let mut px = vec![0i8; n];
            let mut ph = vec![0.0; n];
            for i in 0..n {
                px[perm[i]] = x.spins()[i];
                ph[perm[i]] = m.biases()[i];
            }
            let mut pm = IsingModel::new(n, vec![0.0; n_pairs(n)], ph).unwrap();
            for (i, j) in pairs(n) {
                pm.set_coupling(perm[i], perm[j], m.coupling(i, j)).unwrap();
            }
            let e0 = energy(&m, &x).unwrap();
            let e1 = energy(&pm, &cfg(&px)).unwrap();
            prop_assert!((e0 - e1).abs() < 1e-12);
        }
    }
}
