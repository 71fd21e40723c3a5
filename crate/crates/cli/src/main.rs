use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ising_core::harness::{self, SweepSpec};
use ising_core::io::{read_model, write_model};
use ising_core::{
    fit, generate, recovery_report, sample, DatasetFile, FitConfig, FitResult, GroundTruthSpec, IsingError,
    ObjectiveKind, RecoveryReport, RegularizationConfig, SamplerConfig, UpdateRule,
};

#[derive(Parser, Debug)]
#[command(name = "ising", version, about = "Sparse inverse-Ising inference toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a ground-truth model.
    GenModel(GenModelArgs),
    /// Sample spin configurations from a model by MCMC.
    Sample(SampleArgs),
    /// Fit a model to a dataset.
    Fit(FitArgs),
    /// Score an estimate against the true model.
    Eval(EvalArgs),
    /// Run a (D, lambda) sweep from a spec file.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    SquareLattice,
    RandomSparse,
}

#[derive(clap::Args, Debug)]
struct GenModelArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Lattice side length (square-lattice).
    #[arg(long)]
    n_linear: Option<usize>,
    /// Number of spins (random-sparse).
    #[arg(long)]
    n_spins: Option<usize>,
    /// Fraction of pairs that are coupled (random-sparse).
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rule {
    HeatBath,
    Metropolis,
}

#[derive(clap::Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    num: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, value_enum, default_value = "heat-bath")]
    rule: Rule,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Objective {
    Pl,
    Mpf,
}

#[derive(clap::Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    objective: Objective,
    /// Penalty for both couplings and biases.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_j: Option<f64>,
    #[arg(long)]
    lambda_h: Option<f64>,
    /// Defaults to 200 for pl and 50 for mpf.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    fista: bool,
    /// Sum over the data in a fixed sequential order.
    #[arg(long)]
    deterministic: bool,
    /// Skip flip neighbours that occur in the data (mpf only).
    #[arg(long)]
    exclude_data_neighbors: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write zero couplings too.
    #[arg(long)]
    dense: bool,
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long, default_value_t = harness::DEFAULT_SUPPORT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type Outcome = std::result::Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::GenModel(a) => gen_model(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn gen_model(a: GenModelArgs) -> Outcome {
    let spec = match a.kind {
        Kind::SquareLattice => {
            if a.n_spins.is_some() || a.density.is_some() {
                return Err(usage(anyhow!("--n-spins and --density apply to random-sparse only")));
            }
            let n = a
                .n_linear
                .ok_or_else(|| usage(anyhow!("square-lattice needs --n-linear")))?;
            GroundTruthSpec::square_lattice(n, a.seed)
        }
        Kind::RandomSparse => {
            if a.n_linear.is_some() {
                return Err(usage(anyhow!("--n-linear applies to square-lattice only")));
            }
            let n = a
                .n_spins
                .ok_or_else(|| usage(anyhow!("random-sparse needs --n-spins")))?;
            let density = a
                .density
                .ok_or_else(|| usage(anyhow!("random-sparse needs --density")))?;
            GroundTruthSpec::random_sparse(n, density, a.seed)
        }
    };
    let model = generate(&spec).map_err(usage)?;
    write_model(&a.out, &model, false).map_err(|e| runtime(with_path(e, &a.out)))
}

fn sample_cmd(a: SampleArgs) -> Outcome {
    let model = read_model(&a.model).map_err(|e| runtime(with_path(e, &a.model)))?;
    let cfg = SamplerConfig {
        n_samples: a.num,
        burn_in_sweeps: a.burn_in,
        thinning_sweeps: a.thin,
        seed: a.seed,
        update_rule: match a.rule {
            Rule::HeatBath => UpdateRule::HeatBath,
            Rule::Metropolis => UpdateRule::Metropolis,
        },
    };
    cfg.validate().map_err(usage)?;
    let data = sample(&model, &cfg).map_err(runtime)?;
    DatasetFile { data, seed: a.seed }
        .write(&a.out)
        .map_err(|e| runtime(with_path(e, &a.out)))
}

fn fit_config(a: &FitArgs, kind: ObjectiveKind) -> std::result::Result<FitConfig, Failure> {
    let lambda_j = a.lambda_j.or(a.lambda);
    let lambda_h = a.lambda_h.or(a.lambda);
    let (Some(lambda_j), Some(lambda_h)) = (lambda_j, lambda_h) else {
        return Err(usage(anyhow!("give --lambda, or both --lambda-j and --lambda-h")));
    };
    let base = FitConfig::new(kind, RegularizationConfig::new(lambda_j, lambda_h));
    let cfg = FitConfig {
        max_iterations: a.max_iter.unwrap_or(base.max_iterations),
        tolerance: a.tol,
        accelerated: a.fista,
        deterministic_reduction: a.deterministic,
        ..base
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn fit_cmd(a: FitArgs) -> Outcome {
    let kind = match a.objective {
        Objective::Pl if a.exclude_data_neighbors => {
            return Err(usage(anyhow!("--exclude-data-neighbors applies to mpf only")));
        }
        Objective::Pl => ObjectiveKind::PseudoLikelihood,
        Objective::Mpf => ObjectiveKind::MinimumProbabilityFlow {
            exclude_data_neighbors: a.exclude_data_neighbors,
        },
    };
    let cfg = fit_config(&a, kind)?;
    let data = DatasetFile::read(&a.data)
        .map_err(|e| runtime(with_path(e, &a.data)))?
        .data;
    let result = fit(kind, &data, &cfg).map_err(runtime)?;
    write_model(&a.out, &result.model, a.dense).map_err(|e| runtime(with_path(e, &a.out)))?;
    if let Some(path) = &a.trace_out {
        std::fs::write(path, trace_csv(&result))
            .with_context(|| path.display().to_string())
            .map_err(runtime)?;
    }
    if result.overflow_warnings > 0 {
        eprintln!(
            "warning: {} exponent evaluations were clamped",
            result.overflow_warnings
        );
    }
    println!("objective {}", kind.label());
    println!("iterations {}", result.iterations_run);
    println!("converged {}", result.converged);
    println!("final_objective {}", result.final_composite());
    Ok(())
}

fn trace_csv(result: &FitResult) -> String {
    let mut out = String::from("iteration,composite,lipschitz_j,lipschitz_h,max_change\n");
    for (t, r) in result.trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t + 1,
            r.composite,
            r.lipschitz_couplings,
            r.lipschitz_biases,
            r.max_change
        );
    }
    out
}

fn eval_cmd(a: EvalArgs) -> Outcome {
    let truth = read_model(&a.truth).map_err(|e| runtime(with_path(e, &a.truth)))?;
    let estimate = read_model(&a.estimate).map_err(|e| runtime(with_path(e, &a.estimate)))?;
    let report = recovery_report(&truth, &estimate, a.threshold).map_err(usage)?;
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    println!("err_j {}", na(report.err_couplings));
    println!("err_h {}", na(report.err_biases));
    println!("err_total {}", na(report.err_total));
    println!("support_precision {}", report.support_precision);
    println!("support_recall {}", report.support_recall);
    if let Some(path) = &a.csv_out {
        std::fs::write(path, eval_csv(&report))
            .with_context(|| path.display().to_string())
            .map_err(runtime)?;
    }
    Ok(())
}

fn eval_csv(r: &RecoveryReport) -> String {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    format!(
        "err_j,err_h,err_total,support_precision,support_recall,support_threshold\n{},{},{},{},{},{}\n",
        na(r.err_couplings),
        na(r.err_biases),
        na(r.err_total),
        r.support_precision,
        r.support_recall,
        r.support_threshold
    )
}

fn sweep_cmd(a: SweepArgs) -> Outcome {
    let jobs = match a.jobs {
        Some(0) => return Err(usage(anyhow!("--jobs must be at least 1"))),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let text = std::fs::read_to_string(&a.spec)
        .with_context(|| a.spec.display().to_string())
        .map_err(runtime)?;
    let specs = SweepSpec::parse_many(&text).map_err(|e| usage(with_path(e, &a.spec)))?;
    for spec in &specs {
        spec.validate().map_err(|e| usage(with_path(e, &a.spec)))?;
    }
    let csv = harness::sweeps_to_csv(&specs, jobs).map_err(runtime)?;
    match &a.out {
        Some(path) => std::fs::write(path, csv)
            .with_context(|| path.display().to_string())
            .map_err(runtime),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn with_path(e: IsingError, path: &Path) -> anyhow::Error {
    anyhow::Error::new(e).context(path.display().to_string())
}
