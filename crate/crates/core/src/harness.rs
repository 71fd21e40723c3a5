//! Recovery experiments: draw a ground truth, sample it, fit across a grid
//! of data sizes and regularization strengths, and score the estimates.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, IsingError, Result};
use crate::model::{fmt_f64, IsingModel, SpinDataset};
use crate::objectives::ObjectiveKind;
use crate::prox::{fit, FitConfig, RegularizationConfig};
use crate::rng::derive_seed;
use crate::synthgen::{generate, sample, GroundTruthSpec, SamplerConfig, TruthKind, UpdateRule};

/// Default cutoff on `|K|` for counting a coupling as present.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 0.05;

/// Parameter recovery scores. Relative errors are `None` when the true
/// parameters of that block are all zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport {
    pub err_couplings: Option<f64>,
    pub err_biases: Option<f64>,
    pub err_total: Option<f64>,
    pub support_precision: f64,
    pub support_recall: f64,
    pub support_threshold: f64,
}

fn relative_error(estimate: &[f64], truth: &[f64]) -> Option<f64> {
    let denom: f64 = truth.iter().map(|t| t * t).sum();
    if denom == 0.0 {
        return None;
    }
    let num: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    Some((num / denom).sqrt())
}

/// Relative root-sum-square errors, normalized by the true parameters, plus
/// support precision and recall of `{|K_est| > threshold}` against the true
/// nonzero couplings. Precision is 1 when nothing is selected; recall is 1
/// when the truth has no couplings.
pub fn recovery_report(truth: &IsingModel, estimate: &IsingModel, support_threshold: f64) -> Result<RecoveryReport> {
    if truth.n_spins() != estimate.n_spins() {
        return Err(IsingError::DimensionMismatch {
            expected: truth.n_spins(),
            found: estimate.n_spins(),
        });
    }
    if support_threshold.is_nan() || support_threshold < 0.0 {
        return Err(invalid("support threshold must be nonnegative"));
    }
    let err_couplings = relative_error(estimate.couplings(), truth.couplings());
    let err_biases = relative_error(estimate.biases(), truth.biases());
    let err_total = err_couplings.zip(err_biases).map(|(a, b)| a + b);

    let (mut hit, mut selected, mut actual) = (0usize, 0usize, 0usize);
    for (&e, &t) in estimate.couplings().iter().zip(truth.couplings()) {
        let sel = e.abs() > support_threshold;
        let act = t != 0.0;
        selected += usize::from(sel);
        actual += usize::from(act);
        hit += usize::from(sel && act);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(RecoveryReport {
        err_couplings,
        err_biases,
        err_total,
        support_precision: ratio(hit, selected),
        support_recall: ratio(hit, actual),
        support_threshold,
    })
}

/// Optimizer settings shared by every cell of a sweep. Unset fields take the
/// [`FitConfig::new`] defaults for the sweep's objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitTemplate {
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub accelerated: bool,
    #[serde(default)]
    pub lipschitz_init: Option<f64>,
    #[serde(default)]
    pub backtrack_factor: Option<f64>,
    #[serde(default)]
    pub deterministic_reduction: bool,
}

impl FitTemplate {
    pub fn config(&self, kind: ObjectiveKind, lambda: f64) -> FitConfig {
        let base = FitConfig::new(kind, RegularizationConfig::uniform(lambda));
        FitConfig {
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
            tolerance: self.tolerance.unwrap_or(base.tolerance),
            accelerated: self.accelerated,
            lipschitz_init: self.lipschitz_init.unwrap_or(base.lipschitz_init),
            backtrack_factor: self.backtrack_factor.unwrap_or(base.backtrack_factor),
            deterministic_reduction: self.deterministic_reduction,
            ..base
        }
    }
}

/// MCMC schedule for a sweep; the sample count and seed come from the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerTemplate {
    #[serde(default = "default_burn_in")]
    pub burn_in_sweeps: usize,
    #[serde(default = "default_thinning")]
    pub thinning_sweeps: usize,
    #[serde(default)]
    pub update_rule: UpdateRule,
}

fn default_burn_in() -> usize {
    SamplerConfig::new(1, 0).burn_in_sweeps
}

fn default_thinning() -> usize {
    SamplerConfig::new(1, 0).thinning_sweeps
}

impl Default for SamplerTemplate {
    fn default() -> Self {
        Self {
            burn_in_sweeps: default_burn_in(),
            thinning_sweeps: default_thinning(),
            update_rule: UpdateRule::HeatBath,
        }
    }
}

/// One sweep: `n_repeats` independent truth/data replicas, each fitted for
/// every `(D, lambda)` cell with `lambda_J = lambda_h = lambda`.
///
/// Replica `r` draws its truth with seed `derive_seed(seed, 2r)` and its data
/// with `derive_seed(seed, 2r + 1)`. A single chain of `max(D)`
/// configurations is drawn per replica and each cell fits its first `D`
/// rows. Two sweeps sharing `truth`, `sampler`, `data_sizes` and `seed`
/// therefore see identical truths and data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub truth: TruthKind,
    pub data_sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub fit: FitTemplate,
    #[serde(default)]
    pub sampler: SamplerTemplate,
    pub n_repeats: usize,
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub support_threshold: f64,
    /// Fill the `seconds` column. Off by default: timings are not reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_threshold() -> f64 {
    DEFAULT_SUPPORT_THRESHOLD
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        if self.data_sizes.is_empty() || self.lambdas.is_empty() {
            return Err(invalid("data_sizes and lambdas must be nonempty"));
        }
        if self.data_sizes.contains(&0) {
            return Err(invalid("data sizes must be positive"));
        }
        if self.n_repeats == 0 {
            return Err(invalid("n_repeats must be at least 1"));
        }
        for &l in &self.lambdas {
            RegularizationConfig::uniform(l).validate()?;
        }
        if self.sampler.thinning_sweeps == 0 {
            return Err(invalid("thinning_sweeps must be at least 1"));
        }
        self.fit.config(self.objective, 0.0).validate()
    }

    /// Parses one spec or a JSON array of specs.
    pub fn parse_many(text: &str) -> Result<Vec<SweepSpec>> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IsingError::Parse(e.to_string()))?;
        let specs = if value.is_array() {
            serde_json::from_value::<Vec<SweepSpec>>(value)
        } else {
            serde_json::from_value::<SweepSpec>(value).map(|s| vec![s])
        }
        .map_err(|e| IsingError::Parse(e.to_string()))?;
        if specs.is_empty() {
            return Err(IsingError::Parse("no sweep specs given".into()));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(specs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub repeat: usize,
    pub objective: &'static str,
    pub truth_kind: &'static str,
    pub n_spins: usize,
    pub d: usize,
    pub lambda: f64,
    /// `Err` holds the failure message of a cell whose fit errored.
    pub outcome: std::result::Result<CellOutcome, String>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub report: RecoveryReport,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub estimate: IsingModel,
}

/// Mean and standard error of one metric over the successful repeats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, stderr })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub objective: &'static str,
    pub truth_kind: &'static str,
    pub n_spins: usize,
    pub d: usize,
    pub lambda: f64,
    pub n_ok: usize,
    pub err_j: Option<Stat>,
    pub err_h: Option<Stat>,
    pub err_total: Option<Stat>,
    pub support_precision: Option<Stat>,
    pub support_recall: Option<Stat>,
    pub iterations: Option<Stat>,
    pub converged_fraction: Option<f64>,
    pub final_objective: Option<Stat>,
    pub seconds: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// CSV column order. The first fifteen columns are the per-cell record; the
/// trailing columns carry standard errors (aggregate rows only) and status.
pub const CSV_HEADER: &[&str] = &[
    "repeat",
    "objective",
    "truth_kind",
    "n_spins",
    "d",
    "lambda",
    "err_j",
    "err_h",
    "err_total",
    "support_precision",
    "support_recall",
    "iterations",
    "converged",
    "final_objective",
    "seconds",
    "err_j_se",
    "err_h_se",
    "err_total_se",
    "status",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

fn stat_mean(s: Option<Stat>) -> String {
    opt(s.map(|s| s.mean))
}

fn stat_se(s: Option<Stat>) -> String {
    opt(s.map(|s| s.stderr))
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

impl SweepTable {
    pub fn write_csv(&self, out: &mut String, with_header: bool) {
        if with_header {
            out.push_str(&CSV_HEADER.join(","));
            out.push('\n');
        }
        for r in &self.rows {
            let seconds = r.seconds.map(fmt_f64).unwrap_or_default();
            let cells: Vec<String> = match &r.outcome {
                Ok(c) => vec![
                    opt(c.report.err_couplings),
                    opt(c.report.err_biases),
                    opt(c.report.err_total),
                    fmt_f64(c.report.support_precision),
                    fmt_f64(c.report.support_recall),
                    c.iterations.to_string(),
                    c.converged.to_string(),
                    fmt_f64(c.final_objective),
                    seconds,
                    String::new(),
                    String::new(),
                    String::new(),
                    "ok".into(),
                ],
                Err(msg) => {
                    let mut v = vec!["NA".to_string(); 8];
                    v.push(seconds);
                    v.extend([String::new(), String::new(), String::new()]);
                    v.push(csv_escape(&format!("failed: {msg}")));
                    v
                }
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.repeat,
                r.objective,
                r.truth_kind,
                r.n_spins,
                r.d,
                fmt_f64(r.lambda),
                cells.join(",")
            );
        }
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "mean,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},n_ok={}",
                a.objective,
                a.truth_kind,
                a.n_spins,
                a.d,
                fmt_f64(a.lambda),
                stat_mean(a.err_j),
                stat_mean(a.err_h),
                stat_mean(a.err_total),
                stat_mean(a.support_precision),
                stat_mean(a.support_recall),
                stat_mean(a.iterations),
                opt(a.converged_fraction),
                stat_mean(a.final_objective),
                a.seconds.map(|s| fmt_f64(s.mean)).unwrap_or_default(),
                stat_se(a.err_j),
                stat_se(a.err_h),
                stat_se(a.err_total),
                a.n_ok
            );
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        self.write_csv(&mut s, true);
        s
    }

    /// Aggregate row for `(d, lambda)`.
    pub fn aggregate(&self, d: usize, lambda: f64) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.d == d && a.lambda == lambda)
    }
}

/// Truth and data for one replica.
pub struct Replica {
    pub truth: IsingModel,
    pub data: SpinDataset,
}

/// Draws replica `repeat` of `spec` (see [`SweepSpec`] for the seed rule).
pub fn draw_replica(spec: &SweepSpec, repeat: usize) -> Result<Replica> {
    let r = repeat as u64;
    let truth = generate(&GroundTruthSpec {
        kind: spec.truth,
        seed: derive_seed(spec.seed, 2 * r),
    })?;
    let d_max = *spec.data_sizes.iter().max().ok_or_else(|| invalid("no data sizes"))?;
    let cfg = SamplerConfig {
        n_samples: d_max,
        burn_in_sweeps: spec.sampler.burn_in_sweeps,
        thinning_sweeps: spec.sampler.thinning_sweeps,
        seed: derive_seed(spec.seed, 2 * r + 1),
        update_rule: spec.sampler.update_rule,
    };
    let data = sample(&truth, &cfg)?;
    Ok(Replica { truth, data })
}

fn run_cell(spec: &SweepSpec, replica: &Replica, d: usize, lambda: f64) -> Result<CellOutcome> {
    let data = replica.data.prefix(d)?;
    let cfg = spec.fit.config(spec.objective, lambda);
    let result = fit(spec.objective, &data, &cfg)?;
    let report = recovery_report(&replica.truth, &result.model, spec.support_threshold)?;
    Ok(CellOutcome {
        report,
        iterations: result.iterations_run,
        converged: result.converged,
        final_objective: result.final_composite(),
        estimate: result.model,
    })
}

/// Runs every `(repeat, D, lambda)` cell on the current rayon pool. Rows come
/// out ordered by repeat, then `data_sizes`, then `lambdas`, regardless of
/// scheduling; a failing cell is recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let replicas: Vec<Replica> = (0..spec.n_repeats)
        .into_par_iter()
        .map(|r| draw_replica(spec, r))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for r in 0..spec.n_repeats {
        for &d in &spec.data_sizes {
            for &lambda in &spec.lambdas {
                cells.push((r, d, lambda));
            }
        }
    }
    let n_spins = spec.truth.n_spins();
    let rows: Vec<SweepRow> = cells
        .into_par_iter()
        .map(|(r, d, lambda)| {
            let start = Instant::now();
            let outcome = run_cell(spec, &replicas[r], d, lambda).map_err(|e| e.to_string());
            SweepRow {
                repeat: r,
                objective: spec.objective.label(),
                truth_kind: spec.truth.label(),
                n_spins,
                d,
                lambda,
                outcome,
                seconds: spec.record_timing.then(|| start.elapsed().as_secs_f64()),
            }
        })
        .collect();

    let mut aggregates = Vec::new();
    for &d in &spec.data_sizes {
        for &lambda in &spec.lambdas {
            let ok: Vec<(&CellOutcome, Option<f64>)> = rows
                .iter()
                .filter(|r| r.d == d && r.lambda == lambda)
                .filter_map(|r| r.outcome.as_ref().ok().map(|c| (c, r.seconds)))
                .collect();
            let collect = |f: &dyn Fn(&CellOutcome) -> Option<f64>| -> Option<Stat> {
                let v: Vec<f64> = ok.iter().filter_map(|(c, _)| f(c)).collect();
                Stat::of(&v)
            };
            let secs: Vec<f64> = ok.iter().filter_map(|(_, s)| *s).collect();
            aggregates.push(AggregateRow {
                objective: spec.objective.label(),
                truth_kind: spec.truth.label(),
                n_spins,
                d,
                lambda,
                n_ok: ok.len(),
                err_j: collect(&|c| c.report.err_couplings),
                err_h: collect(&|c| c.report.err_biases),
                err_total: collect(&|c| c.report.err_total),
                support_precision: collect(&|c| Some(c.report.support_precision)),
                support_recall: collect(&|c| Some(c.report.support_recall)),
                iterations: collect(&|c| Some(c.iterations as f64)),
                converged_fraction: (!ok.is_empty())
                    .then(|| ok.iter().filter(|(c, _)| c.converged).count() as f64 / ok.len() as f64),
                final_objective: collect(&|c| Some(c.final_objective)),
                seconds: Stat::of(&secs),
            });
        }
    }
    Ok(SweepTable { rows, aggregates })
}

/// Runs the sweep on a dedicated pool of `jobs` threads.
pub fn run_sweep_with_jobs(spec: &SweepSpec, jobs: usize) -> Result<SweepTable> {
    if jobs == 0 {
        return Err(invalid("jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    pool.install(|| run_sweep(spec))
}

/// Runs several sweeps and writes one CSV with a single header.
pub fn sweeps_to_csv(specs: &[SweepSpec], jobs: usize) -> Result<String> {
    let mut out = String::new();
    for (i, spec) in specs.iter().enumerate() {
        run_sweep_with_jobs(spec, jobs)?.write_csv(&mut out, i == 0);
    }
    Ok(out)
}
