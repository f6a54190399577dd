use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use epsmc::cli::{load_config, run_job, workers_from_env, JobConfig, RunOptions, Subcommand, THREADS_ENV};

/// EPS Monte Carlo for 1D quantum densities.
#[derive(Parser, Debug)]
#[command(version, after_help = format!("Set {THREADS_ENV} to cap the number of worker threads."))]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Result files to compare (compare only).
    inputs: Vec<PathBuf>,
    /// TOML job configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `out`, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run `sample` even when the predicted variance is unusable.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> epsmc::Result<()> {
    let config = match &args.config {
        Some(p) => load_config(p)?,
        None => JobConfig::default(),
    };
    let opts = RunOptions {
        seed: args.seed,
        out: args.out.clone(),
        force: args.force,
        workers: workers_from_env()?,
        inputs: args.inputs.clone(),
    };
    let output = run_job(&config, args.subcommand, &opts)?;
    print!("{}", output.summary);
    for f in &output.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
