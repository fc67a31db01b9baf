use std::path::{Path, PathBuf};

use serde::Serialize;
use surfelgrad_core::io::read_pfm_gray;
use surfelgrad_core::metrics::{chamfer, directed_hausdorff, hausdorff, mse_depth, PointSet};
use surfelgrad_core::surfel::backproject;
use surfelgrad_core::{DepthMap, Vec3};

use super::{print_json, read_camera, read_text, Context};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct MetricsArgs {
    /// First depth map (PFM).
    #[arg(long, requires_all = ["depth_b", "camera"], conflicts_with_all = ["points_a", "points_b"])]
    pub depth_a: Option<PathBuf>,
    #[arg(long, requires = "depth_a")]
    pub depth_b: Option<PathBuf>,
    /// Camera JSON, or a scene JSON whose camera is used.
    #[arg(long, requires = "depth_a")]
    pub camera: Option<PathBuf>,
    /// First point set: one "x y z" triple per line.
    #[arg(long, requires = "points_b", required_unless_present = "depth_a")]
    pub points_a: Option<PathBuf>,
    #[arg(long, requires = "points_a")]
    pub points_b: Option<PathBuf>,
    /// Also report both directed Hausdorff distances.
    #[arg(long)]
    pub directed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub chamfer: f64,
    pub hausdorff: f64,
    /// Depth-map inputs only.
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hausdorff_forward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hausdorff_reverse: Option<f64>,
}

/// Whitespace-separated triples; blank lines and `#` comments are skipped.
pub fn parse_points(path: &Path, text: &str) -> CliResult<PointSet> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        if values.len() != 3 || values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!(
                "{}: line {}: expected three finite numbers",
                path.display(),
                i + 1
            )));
        }
        points.push(Vec3::new(values[0], values[1], values[2]));
    }
    Ok(PointSet::new(points)?)
}

pub fn compute(args: &MetricsArgs) -> CliResult<MetricsReport> {
    let (a, b, mse) = match (&args.depth_a, &args.depth_b, &args.camera) {
        (Some(da), Some(db), Some(cam)) => {
            let camera = read_camera(cam)?;
            let da = DepthMap::new(read_pfm_gray(da)?)?;
            let db = DepthMap::new(read_pfm_gray(db)?)?;
            let mse = mse_depth(da.as_grid(), db.as_grid(), None)?;
            let a = PointSet::new(backproject(&da, &camera)?.into_vec())?;
            let b = PointSet::new(backproject(&db, &camera)?.into_vec())?;
            (a, b, Some(mse))
        }
        _ => match (&args.points_a, &args.points_b) {
            (Some(pa), Some(pb)) => (
                parse_points(pa, &read_text(pa)?)?,
                parse_points(pb, &read_text(pb)?)?,
                None,
            ),
            _ => {
                return Err(CliError::Config(
                    "give two depth maps with a camera, or two point sets".into(),
                ))
            }
        },
    };
    Ok(MetricsReport {
        chamfer: chamfer(&a, &b),
        hausdorff: hausdorff(&a, &b),
        mse,
        hausdorff_forward: args.directed.then(|| directed_hausdorff(&a, &b)),
        hausdorff_reverse: args.directed.then(|| directed_hausdorff(&b, &a)),
    })
}

pub fn run(ctx: &Context, args: &MetricsArgs) -> CliResult<()> {
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new("metrics", ctx.seed, &serde_json::json!({ "directed": args.directed }))?;
    for p in [
        &args.depth_a,
        &args.depth_b,
        &args.camera,
        &args.points_a,
        &args.points_b,
    ]
    .into_iter()
    .flatten()
    {
        manifest.input(p);
    }
    let report = manifest.time("metrics", || compute(args))?;
    ctx.write_json("metrics.json", &report)?;
    manifest.output("metrics.json");
    manifest.write(&ctx.out, MANIFEST_FILE)?;
    print_json(&report)
}
