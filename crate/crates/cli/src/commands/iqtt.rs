use std::fmt::Write as _;
use std::fs;

use rayon::prelude::*;
use serde::Serialize;
use surfelgrad_core::io::write_png_srgb;
use surfelgrad_core::rng::item_rng;
use surfelgrad_core::scenegen::{plan_iqtt, render_iqtt, IqttConfig, Provenance};

use super::Context;
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Clone, Serialize)]
pub struct Label {
    pub id: String,
    pub answer: usize,
    pub provenance: Provenance,
}

fn write_question(ctx: &Context, config: &IqttConfig, index: usize) -> CliResult<(Label, Vec<String>)> {
    let plan = plan_iqtt(&mut item_rng(ctx.seed, index as u64), config)?;
    let question = render_iqtt(&plan, config)?;
    let id = format!("question_{index:06}");
    let dir = ctx.out.join(&id);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let images = [
        &question.reference,
        &question.candidates[0],
        &question.candidates[1],
        &question.candidates[2],
    ];
    let mut files = Vec::with_capacity(4);
    for (name, image) in ["ref", "a0", "a1", "a2"].iter().zip(images) {
        write_png_srgb(dir.join(format!("{name}.png")), image)?;
        files.push(format!("{id}/{name}.png"));
    }
    Ok((
        Label {
            id,
            answer: question.answer_index,
            provenance: question.provenance,
        },
        files,
    ))
}

pub fn run(ctx: &Context, count: usize) -> CliResult<()> {
    let config: IqttConfig = ctx.load_config()?;
    config.validate()?;
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new(
        "gen-iqtt",
        ctx.seed,
        &serde_json::json!({ "count": count, "iqtt": config }),
    )?;
    if let Some(path) = &ctx.config {
        manifest.input(path);
    }
    let written: Vec<CliResult<(Label, Vec<String>)>> = manifest.time("generate", || {
        (0..count)
            .into_par_iter()
            .map(|i| write_question(ctx, &config, i))
            .collect()
    });
    let mut labels = String::new();
    for item in written {
        let (label, files) = item?;
        let line = serde_json::to_string(&label).map_err(|e| CliError::Config(e.to_string()))?;
        let _ = writeln!(labels, "{line}");
        for f in files {
            manifest.output(f);
        }
    }
    let path = ctx.out.join(LABELS_FILE);
    fs::write(&path, labels).map_err(|e| CliError::io(&path, e))?;
    manifest.output(LABELS_FILE);
    manifest.write(&ctx.out, MANIFEST_FILE)?;
    Ok(())
}
