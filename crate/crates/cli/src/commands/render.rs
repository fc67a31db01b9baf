use std::path::Path;

use serde_json::json;
use surfelgrad_core::io::{write_pfm_gray, write_pfm_rgb, write_png_srgb};
use surfelgrad_core::scenegen::{render_scene, SceneSpec};
use surfelgrad_core::Camera;

use super::{read_camera, read_json, Context};
use crate::error::CliResult;
use crate::manifest::RunManifest;

pub fn run(ctx: &Context, scene_path: &Path, camera_path: Option<&Path>, prefix: &str) -> CliResult<()> {
    let scene: SceneSpec = read_json(scene_path)?;
    scene.validate()?;
    let camera: Camera = match camera_path {
        Some(p) => read_camera(p)?,
        None => scene.camera.clone(),
    };
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new("render", ctx.seed, &json!({ "prefix": prefix, "camera": camera }))?;
    manifest.input(scene_path);
    if let Some(p) = camera_path {
        manifest.input(p);
    }
    let view = manifest.time("render", || render_scene(&scene, &camera))?;
    let rgb = format!("{prefix}rgb.png");
    let depth = format!("{prefix}depth.pfm");
    let normals = format!("{prefix}normals.pfm");
    manifest.time("write", || -> CliResult<()> {
        write_png_srgb(ctx.out.join(&rgb), &view.image)?;
        write_pfm_gray(ctx.out.join(&depth), view.trace.depth.as_grid())?;
        write_pfm_rgb(ctx.out.join(&normals), &view.normals.normals)?;
        Ok(())
    })?;
    for f in [rgb, depth, normals] {
        manifest.output(f);
    }
    manifest.write(&ctx.out, &format!("{prefix}manifest.json"))?;
    Ok(())
}
