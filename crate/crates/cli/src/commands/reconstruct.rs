use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use surfelgrad_core::io::{
    depth_preview, hstack, read_pfm_gray, read_pfm_rgb, read_png_linear, srgb_to_linear, write_pfm_gray, write_png_srgb,
};
use surfelgrad_core::metrics::{mse_depth, ReconMetrics};
use surfelgrad_core::recon::MIN_RECON_DEPTH;
use surfelgrad_core::recon::{reconstruct_depth, LossTerms, Optimizer, ReconConfig};
use surfelgrad_core::scenegen::{demo_scene, trace_depth, SceneSpec};
use surfelgrad_core::shading::render;
use surfelgrad_core::surfel::{backproject, estimate_normals};
use surfelgrad_core::{DepthMap, Image};

use super::{parse_json, print_json, read_json, Context};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const DEMO_RESOLUTION: usize = 64;
pub const DEMO_MAX_IMAGE_MSE: f64 = 1e-3;
pub const DEMO_MIN_DEPTH_IMPROVEMENT: f64 = 10.0;

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ReconArgs {
    /// Scene JSON supplying camera, material and lights.
    #[arg(long, required_unless_present = "demo")]
    pub scene: Option<PathBuf>,
    /// Target image (PNG or PFM); rendered from the scene's traced depth when omitted.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Ground-truth depth PFM used for metrics when a target is given.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Built-in sphere-in-room scene at 64x64.
    #[arg(long, conflicts_with = "scene")]
    pub demo: bool,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Smoothness weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum OptimizerArg {
    Plain,
    Momentum,
    Adaptive,
}

impl From<OptimizerArg> for Optimizer {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Plain => Optimizer::Plain,
            OptimizerArg::Momentum => Optimizer::Momentum,
            OptimizerArg::Adaptive => Optimizer::Adaptive,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconSummary {
    pub iterations: usize,
    pub best_iteration: usize,
    pub converged: bool,
    pub best_loss: LossTerms,
    /// Mean squared image error of the best iterate.
    pub image_mse: f64,
    pub metrics: Option<ReconMetrics>,
    /// Depth error of the constant initialization.
    pub baseline_mse_depth: Option<f64>,
    /// `baseline_mse_depth / metrics.mse_depth`
    pub depth_improvement: Option<f64>,
}

/// Defaults tied to the scene, then `--config` keys, then flags.
fn effective_config(ctx: &Context, scene: &SceneSpec, args: &ReconArgs) -> CliResult<ReconConfig> {
    let base = ReconConfig::default().with_room(&scene.room, &scene.camera);
    let mut config = match ctx.config_text()? {
        Some((path, text)) => {
            parse_json::<ReconConfig>(&path, &text)?;
            let mut merged = serde_json::to_value(&base).map_err(|e| CliError::Config(e.to_string()))?;
            let user: Value = parse_json(&path, &text)?;
            match (merged.as_object_mut(), user) {
                (Some(m), Value::Object(u)) => m.extend(u),
                _ => return Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
            }
            serde_json::from_value(merged).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => base,
    };
    if let Some(v) = args.iters {
        config.max_iters = v;
    }
    if let Some(v) = args.lambda {
        config.smoothness_weight = v;
    }
    if let Some(v) = args.step_size {
        config.step_size = v;
    }
    if let Some(v) = args.optimizer {
        config.optimizer = v.into();
    }
    config.validate()?;
    Ok(config)
}

fn read_target(path: &Path) -> CliResult<Image> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pfm") => Ok(read_pfm_rgb(path)?),
        Some("png") => Ok(read_png_linear(path)?),
        _ => Err(CliError::Config(format!(
            "{}: target must be .png or .pfm",
            path.display()
        ))),
    }
}

fn loss_csv(trace: &[LossTerms]) -> String {
    let mut out = String::from("iteration,data,smoothness,total\n");
    for (i, t) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{:e},{:e},{:e}", t.data, t.smoothness, t.total());
    }
    out
}

/// target | rendered | depth | normals
fn side_by_side(target: &Image, rendered: &Image, depth: &DepthMap, scene: &SceneSpec) -> CliResult<Image> {
    let normals = estimate_normals(&backproject(depth, &scene.camera)?)?.normals;
    let normals = normals.map(|n| n.map(|x| srgb_to_linear((x + 1.0) * 0.5)));
    Ok(hstack(&[target, rendered, &depth_preview(depth.as_grid()), &normals])?)
}

fn demo_calibration(summary: &ReconSummary, max_iters: usize) -> Value {
    let improvement = summary.depth_improvement.unwrap_or(0.0);
    serde_json::json!({
        "thresholds": {
            "image_mse_below": DEMO_MAX_IMAGE_MSE,
            "depth_improvement_at_least": DEMO_MIN_DEPTH_IMPROVEMENT,
            "max_iterations": max_iters,
        },
        "observed": {
            "image_mse": summary.image_mse,
            "depth_improvement": improvement,
            "iterations": summary.iterations,
            "best_iteration": summary.best_iteration,
        },
        "pass": summary.image_mse < DEMO_MAX_IMAGE_MSE
            && improvement >= DEMO_MIN_DEPTH_IMPROVEMENT
            && summary.iterations <= max_iters,
    })
}

pub fn run(ctx: &Context, args: &ReconArgs) -> CliResult<()> {
    let scene = match (&args.scene, args.demo) {
        (_, true) => demo_scene(DEMO_RESOLUTION)?,
        (Some(path), false) => {
            let scene: SceneSpec = read_json(path)?;
            scene.validate()?;
            scene
        }
        (None, false) => return Err(CliError::Config("either --scene or --demo is required".into())),
    };
    let camera = &scene.camera;
    let config = effective_config(ctx, &scene, args)?;
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new(
        "reconstruct",
        ctx.seed,
        &serde_json::json!({ "demo": args.demo, "recon": config }),
    )?;
    for p in [&args.scene, &args.target, &args.ground_truth].into_iter().flatten() {
        manifest.input(p);
    }

    let (target, truth) = match &args.target {
        Some(path) => {
            let truth = match &args.ground_truth {
                Some(gt) => Some(DepthMap::new(read_pfm_gray(gt)?)?),
                None => None,
            };
            (read_target(path)?, truth)
        }
        None => {
            let truth = manifest.time("trace", || trace_depth(&scene, camera))?;
            (render(&truth, camera, &scene.material, &scene.lights)?, Some(truth))
        }
    };

    let mut report = manifest.time("optimize", || {
        reconstruct_depth(&target, camera, &scene.material, &scene.lights, &config)
    })?;
    let (rows, cols) = camera.resolution();
    let baseline = match &truth {
        Some(gt) => {
            report.evaluate(gt, camera, &scene.material)?;
            let init = DepthMap::constant(rows, cols, config.init_depth.clamp(MIN_RECON_DEPTH, config.max_depth))?;
            Some(mse_depth(gt.as_grid(), init.as_grid(), None)?)
        }
        None => None,
    };
    let best = report.best_loss();
    let summary = ReconSummary {
        iterations: report.trace.len(),
        best_iteration: report.best_iteration,
        converged: report.converged,
        best_loss: best,
        image_mse: best.data,
        metrics: report.metrics,
        baseline_mse_depth: baseline,
        depth_improvement: match (baseline, report.metrics) {
            (Some(b), Some(m)) => Some(b / m.mse_depth),
            _ => None,
        },
    };

    manifest.time("write", || -> CliResult<()> {
        write_pfm_gray(ctx.out.join("depth.pfm"), report.depth.as_grid())?;
        let csv = ctx.out.join("loss.csv");
        std::fs::write(&csv, loss_csv(&report.trace)).map_err(|e| CliError::io(&csv, e))?;
        let rendered = render(&report.depth, camera, &scene.material, &scene.lights)?;
        write_png_srgb(
            ctx.out.join("side_by_side.png"),
            &side_by_side(&target, &rendered, &report.depth, &scene)?,
        )?;
        ctx.write_json("recon.json", &summary)
    })?;
    for f in ["depth.pfm", "loss.csv", "side_by_side.png", "recon.json"] {
        manifest.output(f);
    }
    if args.demo {
        manifest.calibration = Some(demo_calibration(&summary, config.max_iters));
    }
    manifest.write(&ctx.out, MANIFEST_FILE)?;
    print_json(&summary)
}
