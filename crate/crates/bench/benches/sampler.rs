use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ising_core::{
    fit, generate, sample, FitConfig, GroundTruthSpec, ObjectiveKind, RegularizationConfig, SamplerConfig, UpdateRule,
};
use std::hint::black_box;

fn sampling(c: &mut Criterion) {
    let truth = generate(&GroundTruthSpec::square_lattice(5, 1)).unwrap();
    let mut group = c.benchmark_group("sample_n25_d1000");
    for rule in [UpdateRule::HeatBath, UpdateRule::Metropolis] {
        let cfg = SamplerConfig {
            update_rule: rule,
            ..SamplerConfig::new(1000, 3)
        };
        group.bench_function(BenchmarkId::from_parameter(format!("{rule:?}")), |b| {
            b.iter(|| black_box(sample(&truth, &cfg).unwrap()))
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let truth = generate(&GroundTruthSpec::square_lattice(5, 1)).unwrap();
    let data = sample(&truth, &SamplerConfig::new(1000, 2)).unwrap();
    let mut group = c.benchmark_group("fit_n25_d1000");
    group.sample_size(10);
    for (kind, lambda) in [(ObjectiveKind::PL, 0.1), (ObjectiveKind::MPF, 0.018)] {
        let cfg = FitConfig {
            accelerated: true,
            ..FitConfig::new(kind, RegularizationConfig::uniform(lambda))
        };
        group.bench_function(kind.label(), |b| b.iter(|| black_box(fit(kind, &data, &cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, sampling, fitting);
criterion_main!(benches);
