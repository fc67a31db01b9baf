mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::gradcheck::GradcheckArgs;
use commands::metrics::MetricsArgs;
use commands::reconstruct::ReconArgs;
use commands::Context;
use error::{CliError, CliResult};

pub const SEED_ENV: &str = "SURFELGRAD_SEED";

#[derive(Debug, Parser)]
#[command(name = "surfelgrad", version, about = "Differentiable surfel rendering toolkit")]
struct Cli {
    /// Master seed; SURFELGRAD_SEED overrides it when set.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate random scenes with RGB, depth and normal renders.
    GenScenes {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Render a scene file, optionally from another camera.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        camera: Option<PathBuf>,
        #[arg(long, default_value = "")]
        prefix: String,
    },
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Time the forward and backward passes.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "128")]
        resolution: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        iters: usize,
    },
    /// Recover a depth map from an image by gradient descent.
    Reconstruct(ReconArgs),
    /// Chamfer, Hausdorff and depth MSE between two reconstructions.
    Metrics(MetricsArgs),
    /// Generate mental-rotation questions.
    GenIqtt {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

fn resolve_seed(flag: u64) -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: not an unsigned integer: {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(CliError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let ctx = Context {
        seed: resolve_seed(cli.seed)?,
        threads,
        out: cli.out,
        config: cli.config,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::GenScenes { count } => commands::scenes::run(&ctx, *count),
        Command::Render { scene, camera, prefix } => commands::render::run(&ctx, scene, camera.as_deref(), prefix),
        Command::Gradcheck(args) => commands::gradcheck::run(&ctx, args),
        Command::Bench { resolution, iters } => commands::bench::run(&ctx, resolution, *iters),
        Command::Reconstruct(args) => commands::reconstruct::run(&ctx, args),
        Command::Metrics(args) => commands::metrics::run(&ctx, args),
        Command::GenIqtt { count } => commands::iqtt::run(&ctx, *count),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn demo_and_scene_conflict() {
        assert!(Cli::try_parse_from(["surfelgrad", "reconstruct", "--demo"]).is_ok());
        assert!(Cli::try_parse_from(["surfelgrad", "reconstruct"]).is_err());
        assert!(Cli::try_parse_from(["surfelgrad", "reconstruct", "--demo", "--scene", "s.json"]).is_err());
    }

    #[test]
    fn bench_takes_a_resolution_list() {
        let cli = Cli::try_parse_from(["surfelgrad", "bench", "--resolution", "64,128", "--threads", "2"]).unwrap();
        match cli.command {
            Command::Bench { resolution, iters } => assert_eq!((resolution, iters), (vec![64, 128], 50)),
            _ => unreachable!(),
        }
        assert_eq!(cli.threads, Some(2));
    }
}
