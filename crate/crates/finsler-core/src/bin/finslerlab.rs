//! finslerlab: config-driven Finsler-geometry evaluation, classification,
//! identity verification and geodesic integration.
//!
//! Exit codes: 0 all checks passed, 1 numeric/identity failure, 2 config
//! or usage error.

use clap::{Parser, Subcommand};
use finsler_core::commands::{
    cmd_classify, cmd_eval, cmd_geodesic, cmd_verify, CmdOptions, OutputFormat,
};
use finsler_core::config::RunConfig;
use finsler_core::FinslerError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "finslerlab", version, about = "Numerical Finsler-geometry engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
    /// Override the sample seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sample count from the config.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the tensor battery at sampled chart points.
    Eval(CommonArgs),
    /// Classify the metric by vanishing-tensor predicates.
    Classify(CommonArgs),
    /// Verify process/curvature identities.
    Verify(CommonArgs),
    /// Integrate a geodesic and emit the trajectory with fit diagnostics.
    Geodesic(CommonArgs),
}

fn init_threads() {
    if let Ok(v) = std::env::var("FINSLERLAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(args: &CommonArgs, f: impl Fn(&RunConfig, &CmdOptions) -> finsler_core::Result<finsler_core::report::Report>) -> ExitCode {
    let cfg = match RunConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {}", e);
            return ExitCode::from(2);
        }
    };
    let format_str = args
        .format
        .clone()
        .or_else(|| cfg.format.clone())
        .unwrap_or_else(|| "json".to_string());
    let format = match OutputFormat::parse(&format_str) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("config error: {}", e);
            return ExitCode::from(2);
        }
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let opts = CmdOptions {
        out_dir,
        format,
        seed: args.seed,
        samples: args.samples,
    };
    match f(&cfg, &opts) {
        Ok(report) => {
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("numeric failure: see report in {}", opts.out_dir.display());
                ExitCode::from(1)
            }
        }
        Err(FinslerError::Config(msg)) => {
            eprintln!("config error: {}", msg);
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("numeric failure: {}", e);
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match &cli.command {
        Command::Eval(args) => run(args, cmd_eval),
        Command::Classify(args) => run(args, cmd_classify),
        Command::Verify(args) => run(args, cmd_verify),
        Command::Geodesic(args) => run(args, cmd_geodesic),
    }
}
