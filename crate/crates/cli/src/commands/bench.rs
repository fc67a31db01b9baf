use std::time::Instant;

use serde::Serialize;
use surfelgrad_core::grad::{render_backward, GradcheckCase};
use surfelgrad_core::shading::render;

use super::{print_json, Context};
use crate::error::{CliError, CliResult};
use crate::manifest::{RunManifest, MANIFEST_FILE};

const WARMUP: usize = 3;

/// Milliseconds.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PassTimings {
    pub threads: usize,
    pub forward: Timing,
    pub forward_backward: Timing,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionTimings {
    pub resolution: usize,
    pub pixels: usize,
    pub single_thread: PassTimings,
    pub multi_thread: PassTimings,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub profile: &'static str,
    pub iters: usize,
    pub seed: u64,
    /// GPU forward-pass figure quoted for context only.
    pub gpu_reference_forward_ms: f64,
    pub results: Vec<ResolutionTimings>,
}

fn build_profile() -> &'static str {
    if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    }
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn summarize(mut samples: Vec<f64>) -> Timing {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    };
    Timing {
        median_ms: median,
        p95_ms: percentile(&samples, 95.0),
    }
}

fn time_ms(iters: usize, mut f: impl FnMut() -> CliResult<()>) -> CliResult<Timing> {
    for _ in 0..WARMUP {
        f()?;
    }
    let mut samples = Vec::with_capacity(iters);
    for _ in 0..iters {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(summarize(samples))
}

fn measure(case: &GradcheckCase, iters: usize, threads: usize) -> CliResult<PassTimings> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| {
        let forward = time_ms(iters, || {
            render(&case.depth, &case.camera, &case.material, &case.lights)?;
            Ok(())
        })?;
        let forward_backward = time_ms(iters, || {
            render(&case.depth, &case.camera, &case.material, &case.lights)?;
            render_backward(&case.depth, &case.camera, &case.material, &case.lights, &case.upstream)?;
            Ok(())
        })?;
        Ok(PassTimings {
            threads,
            forward,
            forward_backward,
        })
    })
}

pub fn bench(seed: u64, resolutions: &[usize], iters: usize, threads: usize) -> CliResult<BenchReport> {
    if iters == 0 || resolutions.iter().any(|&r| r < 2) {
        return Err(CliError::Config(
            "iters must be positive and resolutions at least 2".into(),
        ));
    }
    let results = resolutions
        .iter()
        .map(|&res| {
            let case = GradcheckCase::sample(seed, res)?;
            Ok(ResolutionTimings {
                resolution: res,
                pixels: res * res,
                single_thread: measure(&case, iters, 1)?,
                multi_thread: measure(&case, iters, threads)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(BenchReport {
        profile: build_profile(),
        iters,
        seed,
        gpu_reference_forward_ms: 1.4,
        results,
    })
}

pub fn run(ctx: &Context, resolutions: &[usize], iters: usize) -> CliResult<()> {
    ctx.ensure_out()?;
    let mut manifest = RunManifest::new(
        "bench",
        ctx.seed,
        &serde_json::json!({ "resolutions": resolutions, "iters": iters, "threads": ctx.threads }),
    )?;
    let report = manifest.time("bench", || bench(ctx.seed, resolutions, iters, ctx.threads))?;
    ctx.write_json("bench.json", &report)?;
    manifest.output("bench.json");
    manifest.write(&ctx.out, MANIFEST_FILE)?;
    print_json(&report)
}
