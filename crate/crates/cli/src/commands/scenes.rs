use rayon::prelude::*;
use serde_json::json;
use surfelgrad_core::io::{write_pfm_gray, write_pfm_rgb, write_png_srgb};
use surfelgrad_core::rng::{child_seed, item_rng};
use surfelgrad_core::scenegen::{render_scene, sample_scene, SceneConfig};

use super::Context;
use crate::error::CliResult;
use crate::manifest::{RunManifest, MANIFEST_FILE};

fn write_scene(ctx: &Context, config: &SceneConfig, index: usize) -> CliResult<Vec<String>> {
    let mut rng = item_rng(ctx.seed, index as u64);
    let scene = sample_scene(&mut rng, config, child_seed(ctx.seed, index as u64))?;
    let view = render_scene(&scene, &scene.camera)?;
    let names = [
        format!("scene_{index:06}.json"),
        format!("rgb_{index:06}.png"),
        format!("depth_{index:06}.pfm"),
        format!("normals_{index:06}.pfm"),
    ];
    ctx.write_json(&names[0], &scene)?;
    write_png_srgb(ctx.out.join(&names[1]), &view.image)?;
    write_pfm_gray(ctx.out.join(&names[2]), view.trace.depth.as_grid())?;
    write_pfm_rgb(ctx.out.join(&names[3]), &view.normals.normals)?;
    Ok(names.into())
}

pub fn run(ctx: &Context, count: usize) -> CliResult<()> {
    let config: SceneConfig = ctx.load_config()?;
    config.validate()?;
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new("gen-scenes", ctx.seed, &json!({ "count": count, "scene": config }))?;
    if let Some(path) = &ctx.config {
        manifest.input(path);
    }
    let written: Vec<CliResult<Vec<String>>> = manifest.time("generate", || {
        (0..count)
            .into_par_iter()
            .map(|i| write_scene(ctx, &config, i))
            .collect()
    });
    for files in written {
        for f in files? {
            manifest.output(f);
        }
    }
    manifest.write(&ctx.out, MANIFEST_FILE)?;
    Ok(())
}
