use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use alsfem::adaptivity::{AaThreshold, AdaptiveParams, Algorithm};
use alsfem::benchmarks::Problem;
use alsfem::mesh::RefineMode;
use alsfem::runner::{fit_rate_csv, run, RunOptions};

#[derive(Parser)]
#[command(name = "alsfem", version, about = "Adaptive least-squares FEM for the Poisson model problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an adaptive loop and write convergence.csv
    Run(RunArgs),
    /// Fit the decay rate of a CSV column against ndof
    FitRate(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Nalsfem,
    Calsfem,
    Salsfem,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefineArg {
    Edge,
    Bisec3,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    MuMax,
    MuTildeMax,
}

#[derive(Args)]
struct RunArgs {
    /// `lshape`, `micro:<eps>` (e.g. `micro:3^-3`) or `waterfall`
    #[arg(long)]
    problem: String,
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 0.3)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.8)]
    rho: f64,
    #[arg(long, default_value_t = 1.0 - 1e-6)]
    varrho: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_ndof: usize,
    #[arg(long, default_value_t = 1800.0)]
    time_budget_sec: f64,
    /// Number of runs whose timings are averaged
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repeat: u32,
    /// Quadrature parameter for smooth data
    #[arg(long)]
    quad_k: Option<usize>,
    #[arg(long, value_enum)]
    refine_mode: Option<RefineArg>,
    #[arg(long, value_enum, default_value = "mu-max")]
    aa_threshold: ThresholdArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    dump_meshes: bool,
}

#[derive(Args)]
struct FitArgs {
    csv: PathBuf,
    #[arg(long)]
    column: String,
    #[arg(long, default_value_t = 0.0)]
    ndof_min: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    ndof_max: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_command(args),
        Command::FitRate(args) => fit_command(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_command(args: RunArgs) -> Result<(), Box<dyn std::error::Error>> {
    let mut problem = Problem::parse(&args.problem)?;
    if let Some(k) = args.quad_k {
        problem = problem.with_quad_k(k)?;
    }
    let algorithm = match args.algo {
        AlgoArg::Nalsfem => Algorithm::Nalsfem,
        AlgoArg::Calsfem => Algorithm::Calsfem,
        AlgoArg::Salsfem => Algorithm::Salsfem,
        AlgoArg::Uniform => Algorithm::Uniform,
    };
    if !(args.time_budget_sec >= 0.0 && args.time_budget_sec.is_finite()) {
        return Err("time budget must be a non-negative number of seconds".into());
    }
    let params = AdaptiveParams {
        theta: args.theta,
        kappa: args.kappa,
        rho: args.rho,
        varrho: args.varrho,
        max_ndof: args.max_ndof,
        time_budget: Duration::from_secs_f64(args.time_budget_sec),
        refine_mode: args.refine_mode.map(|m| match m {
            RefineArg::Edge => RefineMode::RefinementEdge,
            RefineArg::Bisec3 => RefineMode::Bisec3,
        }),
        aa_threshold: match args.aa_threshold {
            ThresholdArg::MuMax => AaThreshold::MuMax,
            ThresholdArg::MuTildeMax => AaThreshold::MuTildeMax,
        },
        ..AdaptiveParams::new(algorithm)
    };
    let options = RunOptions { out_dir: Some(args.out), dump_meshes: args.dump_meshes, repeat: args.repeat as usize };
    let records = run(&problem, &params, &options)?;
    if let Some(last) = records.last() {
        eprintln!(
            "{} levels, final ndof {}, eta_nat {:.3e}, mu {:.3e}",
            records.len(),
            last.ndof,
            last.eta_nat,
            last.mu
        );
    }
    Ok(())
}

fn fit_command(args: FitArgs) -> Result<(), Box<dyn std::error::Error>> {
    let rate = fit_rate_csv(File::open(&args.csv)?, &args.column, (args.ndof_min, args.ndof_max))?;
    println!("{rate:.6}");
    Ok(())
}
