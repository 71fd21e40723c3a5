use approx::assert_abs_diff_eq;
use ising_core::{
    fit, generate, sample, FitConfig, FitResult, GroundTruthSpec, IsingModel, ObjectiveKind, RegularizationConfig,
    SamplerConfig, SpinDataset,
};
use proptest::prelude::*;

fn sparse_data(n: usize, d: usize, seed: u64) -> (IsingModel, SpinDataset) {
    let truth = generate(&GroundTruthSpec::random_sparse(n, 0.3, seed)).unwrap();
    let data = sample(&truth, &SamplerConfig::new(d, seed + 1)).unwrap();
    (truth, data)
}

fn tight(kind: ObjectiveKind, lambda: f64, accelerated: bool) -> FitConfig {
    FitConfig {
        max_iterations: 20_000,
        tolerance: 1e-10,
        accelerated,
        ..FitConfig::new(kind, RegularizationConfig::uniform(lambda))
    }
}

fn first_within(result: &FitResult, target: f64, slack: f64) -> usize {
    result
        .trace
        .iter()
        .position(|r| r.composite <= target + slack)
        .map_or(usize::MAX, |p| p + 1)
}

#[test]
fn ista_and_fista_agree_and_fista_is_not_slower() {
    let (_, data) = sparse_data(8, 400, 3);
    for (kind, lambda) in [(ObjectiveKind::PL, 0.05), (ObjectiveKind::MPF, 0.02)] {
        let ista = fit(kind, &data, &tight(kind, lambda, false)).unwrap();
        let fista = fit(kind, &data, &tight(kind, lambda, true)).unwrap();
        assert!(fista.converged, "{}", kind.label());
        let (a, b) = (ista.final_composite(), fista.final_composite());
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        let target = a.min(b);
        assert!(first_within(&fista, target, 1e-6) <= first_within(&ista, target, 1e-6));
    }
}

#[test]
fn l1_norm_shrinks_along_lambda_path() {
    let (_, data) = sparse_data(6, 300, 8);
    for kind in [ObjectiveKind::PL, ObjectiveKind::MPF] {
        let mut previous = f64::INFINITY;
        for lambda in [0.0025, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5] {
            let model = fit(kind, &data, &tight(kind, lambda, true)).unwrap().model;
            let norm = model.couplings_l1() + model.biases_l1();
            assert!(
                norm <= previous + 1e-8,
                "{} lambda {lambda}: {norm} > {previous}",
                kind.label()
            );
            previous = norm;
        }
    }
}

#[test]
fn one_spin_closed_forms() {
    let ups = SpinDataset::from_flat(1, vec![1; 7]).unwrap();
    let cfg = |kind, lambda_h| FitConfig {
        max_iterations: 100_000,
        tolerance: 1e-12,
        ..FitConfig::new(kind, RegularizationConfig::new(0.0, lambda_h))
    };
    let pl = fit(ObjectiveKind::PL, &ups, &cfg(ObjectiveKind::PL, 0.5)).unwrap();
    assert_abs_diff_eq!(pl.model.biases()[0], 0.5f64.atanh(), epsilon = 1e-4);
    let mpf = fit(ObjectiveKind::MPF, &ups, &cfg(ObjectiveKind::MPF, 0.1)).unwrap();
    assert_abs_diff_eq!(mpf.model.biases()[0], 10f64.ln(), epsilon = 1e-3);

    // Mixed data: 6 up, 4 down gives mean 0.2; PL solves tanh h = 0.2 - lambda.
    let mixed = SpinDataset::from_flat(1, [1, 1, 1, 1, 1, 1, -1, -1, -1, -1].to_vec()).unwrap();
    let pl = fit(ObjectiveKind::PL, &mixed, &cfg(ObjectiveKind::PL, 0.05)).unwrap();
    assert_abs_diff_eq!(pl.model.biases()[0], 0.15f64.atanh(), epsilon = 1e-6);
    // With lambda above |mean| the bias stays at zero.
    let pl = fit(ObjectiveKind::PL, &mixed, &cfg(ObjectiveKind::PL, 0.3)).unwrap();
    assert_eq!(pl.model.biases()[0], 0.0);
}

#[test]
fn huge_lambda_returns_zero_model() {
    let (_, data) = sparse_data(7, 200, 1);
    for kind in [ObjectiveKind::PL, ObjectiveKind::MPF] {
        let result = fit(kind, &data, &FitConfig::new(kind, RegularizationConfig::uniform(1e9))).unwrap();
        assert_eq!(result.model, IsingModel::zeros(7));
        assert!(result.converged);
    }
}

#[test]
fn warm_start_at_optimum_stays_put() {
    let (_, data) = sparse_data(6, 300, 4);
    let kind = ObjectiveKind::MPF;
    let first = fit(kind, &data, &tight(kind, 0.03, true)).unwrap();
    let cfg = FitConfig {
        initial_model: Some(first.model.clone()),
        ..FitConfig::new(kind, RegularizationConfig::uniform(0.03))
    };
    let again = fit(kind, &data, &cfg).unwrap();
    assert!(again.iterations_run <= 5);
    assert!(again.model.max_abs_diff(&first.model) < 1e-6);
}

#[test]
fn ista_descends_on_lattice_data() {
    let truth = generate(&GroundTruthSpec::square_lattice(4, 6)).unwrap();
    let data = sample(&truth, &SamplerConfig::new(800, 7)).unwrap();
    for (kind, lambda) in [(ObjectiveKind::PL, 0.1), (ObjectiveKind::MPF, 0.018)] {
        let result = fit(
            kind,
            &data,
            &FitConfig::new(kind, RegularizationConfig::uniform(lambda)),
        )
        .unwrap();
        let mut prev = result.initial_composite;
        for r in &result.trace {
            assert!(r.composite <= prev + 1e-10);
            prev = r.composite;
        }
    }
}

#[test]
fn fista_final_value_bounded_by_start() {
    let truth = generate(&GroundTruthSpec::square_lattice(4, 2)).unwrap();
    let data = sample(&truth, &SamplerConfig::new(500, 3)).unwrap();
    for (kind, lambda) in [(ObjectiveKind::PL, 0.1), (ObjectiveKind::MPF, 0.018)] {
        let cfg = FitConfig {
            accelerated: true,
            ..FitConfig::new(kind, RegularizationConfig::uniform(lambda))
        };
        let result = fit(kind, &data, &cfg).unwrap();
        assert!(result.final_composite() <= result.initial_composite);
        assert!(result
            .trace
            .iter()
            .all(|r| r.composite.is_finite() && r.composite <= result.initial_composite));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ista_composite_never_increases(seed in 0u64..10_000, lambda in 0.0f64..0.3, pl in any::<bool>()) {
        let kind = if pl { ObjectiveKind::PL } else { ObjectiveKind::MPF };
        let (_, data) = sparse_data(5, 60, seed);
        let cfg = FitConfig { max_iterations: 60, ..FitConfig::new(kind, RegularizationConfig::uniform(lambda)) };
        let result = fit(kind, &data, &cfg).unwrap();
        prop_assert_eq!(result.trace.len(), result.iterations_run);
        let mut prev = result.initial_composite;
        for r in &result.trace {
            prop_assert!(r.composite <= prev + 1e-10);
            prop_assert!(r.lipschitz_couplings > 0.0 && r.lipschitz_biases > 0.0);
            prev = r.composite;
        }
    }
}
