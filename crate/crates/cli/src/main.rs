use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use klnmf::baselines::Method;
use klnmf::harness::{run_experiment, synth_matrix, write_matrix, ExperimentReport, ExperimentSpec, MatrixFormat, ProblemKind};
use klnmf::random::RandomSeed;

/// KL-divergence NMF: primal-dual solver, baselines and experiment runner.
///
/// Set KLNMF_THREADS to bound the threads used by matrix kernels.
#[derive(Parser, Debug)]
#[command(name = "klnmf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a matrix with i.i.d. uniform entries.
    Synth(SynthArgs),
    /// Convex decomposition against a fixed reference factor, with certificates.
    Nd(NdArgs),
    /// Full factorization.
    Nmf(RunArgs),
    /// Factorize at --rank, pad to --rank2, keep going.
    Warm(WarmArgs),
    /// Run several methods on one problem from a shared initialization.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 750.0)]
    hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// text or binary
    #[arg(long, default_value = "text")]
    format: MatrixFormat,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Solver(s); repeat or comma-separate. Defaults depend on the subcommand.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// ADMM penalty; several values run ADMM once per value.
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    /// Inner FPA iterations per block.
    #[arg(long, default_value_t = 5)]
    iter_nd: usize,
    /// Data-access budget.
    #[arg(long, default_value_t = 3000)]
    budget: u64,
    /// Relative duality-gap tolerance (FPA); off by default.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Trace row every this many outer iterations.
    #[arg(long, default_value_t = 1)]
    trace_stride: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rank: usize,
    /// Data matrix; synthetic uniform data is generated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Format of --input: text or binary.
    #[arg(long, default_value = "text")]
    format: MatrixFormat,
    /// Rows of the synthetic matrix.
    #[arg(long, default_value_t = 50)]
    rows: usize,
    /// Columns of the synthetic matrix.
    #[arg(long, default_value_t = 200)]
    cols: usize,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 750.0)]
    hi: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Experiment name recorded in the summary.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args, Debug)]
struct NdArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Which factor is held fixed: W, H, or topic (simplex-constrained H).
    #[arg(long, default_value = "W")]
    side: String,
    /// Length of the reference MU solve.
    #[arg(long, default_value_t = 5000)]
    reference_iters: u64,
}

#[derive(Args, Debug)]
struct WarmArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    rank2: usize,
    /// Value of the new W columns.
    #[arg(long, default_value_t = 0.0)]
    pad_c: f64,
    /// Budget after the restart; defaults to --budget.
    #[arg(long)]
    budget2: Option<u64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// nmf, nd_fix_W, nd_fix_H, warm_restart or topic.
    #[arg(long, default_value = "nmf")]
    problem: ProblemKind,
    #[arg(long)]
    rank2: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pad_c: f64,
    #[arg(long, default_value_t = 5000)]
    reference_iters: u64,
}

fn spec_from(run: RunArgs, problem: ProblemKind, default_methods: &[Method]) -> ExperimentSpec {
    let name = run.name.unwrap_or_else(|| problem.name().to_string());
    let mut spec = ExperimentSpec::new(name, problem, run.rows, run.cols, run.rank, run.out);
    spec.methods = if run.method.is_empty() {
        default_methods.to_vec()
    } else {
        run.method
    };
    if !run.rho.is_empty() {
        spec.rho = run.rho;
    }
    spec.seed = run.seed;
    spec.input = run.input;
    spec.input_format = run.format;
    spec.synth_range = (run.lo, run.hi);
    spec.cfg.iter_nd = run.iter_nd;
    spec.cfg.max_data_access = run.budget;
    spec.cfg.trace_stride = run.trace_stride;
    if let Some(tol) = run.gap_tol {
        spec.cfg.gap_tol = tol;
    }
    spec
}

fn print_report(report: &ExperimentReport) {
    println!(
        "{} ({}), {}x{} r={}{}, seed {}, init {}",
        report.name,
        report.problem,
        report.n,
        report.m,
        report.r,
        report.r2.map(|r2| format!("->{r2}")).unwrap_or_default(),
        report.seed,
        &report.init_sha256[..12],
    );
    if let Some(reference) = &report.reference {
        println!("reference p* = {:.10e}", reference.p_star);
    }
    for run in &report.runs {
        let gap = run.final_gap.map(|g| format!(" gap {g:.3e}")).unwrap_or_default();
        println!(
            "{:<14} objective {:.10e}{gap}  accesses {:>6}  {:.3}s  -> {}",
            run.label, run.final_objective, run.data_accesses, run.wall_seconds, run.trace_file
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    klnmf::init_threads_from_env()?;
    let spec = match cli.command {
        Command::Synth(a) => {
            let v = synth_matrix(a.rows, a.cols, a.lo, a.hi, RandomSeed(a.seed))?;
            write_matrix(&a.out, &v, a.format).with_context(|| format!("writing {}", a.out.display()))?;
            println!("wrote {}x{} matrix to {}", a.rows, a.cols, a.out.display());
            return Ok(());
        }
        Command::Nd(a) => {
            let problem = match a.side.to_ascii_lowercase().as_str() {
                "w" => ProblemKind::NdFixW,
                "h" => ProblemKind::NdFixH,
                "topic" => ProblemKind::Topic,
                other => bail!("--side must be W, H or topic, got '{other}'"),
            };
            let mut spec = spec_from(a.run, problem, &[Method::Fpa]);
            spec.reference_iters = a.reference_iters;
            spec
        }
        Command::Nmf(a) => spec_from(a, ProblemKind::Nmf, &[Method::Fpa]),
        Command::Warm(a) => {
            let mut spec = spec_from(a.run, ProblemKind::WarmRestart, &[Method::Fpa, Method::Mu]);
            spec.r2 = Some(a.rank2);
            spec.pad_c = a.pad_c;
            spec.phase2_budget = a.budget2;
            spec
        }
        Command::Bench(a) => {
            let defaults: &[Method] = if a.problem == ProblemKind::Topic {
                &[Method::Fpa]
            } else {
                &Method::ALL
            };
            let mut spec = spec_from(a.run, a.problem, defaults);
            spec.r2 = a.rank2;
            spec.pad_c = a.pad_c;
            spec.reference_iters = a.reference_iters;
            spec
        }
    };
    let report = run_experiment(&spec)?;
    print_report(&report);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
