use surfelgrad_core::grad::{run_gradcheck, GradcheckConfig};

use super::{print_json, Context};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct GradcheckArgs {
    /// Number of random problems.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Smallest image side.
    #[arg(long)]
    pub min_size: Option<usize>,
    /// Largest image side.
    #[arg(long)]
    pub max_size: Option<usize>,
    /// Largest accepted relative error.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Relative finite-difference step.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

pub fn run(ctx: &Context, args: &GradcheckArgs) -> CliResult<()> {
    let mut config: GradcheckConfig = ctx.load_config()?;
    config.seed = ctx.seed;
    if let Some(v) = args.trials {
        config.trials = v;
    }
    if let Some(v) = args.min_size {
        config.min_size = v;
    }
    if let Some(v) = args.max_size {
        config.max_size = v;
    }
    if let Some(v) = args.tolerance {
        config.tolerance = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if !(config.tolerance >= 0.0 && config.epsilon > 0.0) {
        return Err(CliError::Config("tolerance must be >= 0 and epsilon > 0".into()));
    }
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new("gradcheck", ctx.seed, &config)?;
    let report = manifest.time("gradcheck", || run_gradcheck(&config))?;
    ctx.write_json("gradcheck.json", &report)?;
    manifest.output("gradcheck.json");
    manifest.write(&ctx.out, MANIFEST_FILE)?;
    print_json(&report)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "max relative error {:e} exceeds tolerance {:e}",
            report.max_rel_err, report.tolerance
        )))
    }
}
