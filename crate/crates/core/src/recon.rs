//! Depth recovery from a single image by projected first-order descent through
//! the renderer and its backward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;
use crate::grad::{image_loss_and_grad, render_backward, GradMap};
use crate::grid::{check_shape, Grid};
use crate::metrics::{chamfer, hausdorff, mse_depth, surfels_to_pointset, ReconMetrics};
use crate::scenegen::Room;
use crate::shading::{render, Image, LightingRig, Material};
use crate::surfel::{DepthMap, SurfelField};

/// Lower bound of the depth box used for projection.
pub const MIN_RECON_DEPTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Plain,
    Momentum,
    /// Per-coordinate step scaling by running gradient moments.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub max_iters: usize,
    pub step_size: f64,
    /// Step size reached at the last iteration; the schedule decays
    /// geometrically from `step_size`. `None` keeps the step constant.
    pub final_step_size: Option<f64>,
    /// Weight of the per-pixel mean total variation.
    pub smoothness_weight: f64,
    pub init_depth: f64,
    /// Upper end of the projection box; the lower end is [`MIN_RECON_DEPTH`].
    pub max_depth: f64,
    pub optimizer: Optimizer,
    /// Momentum coefficient, also the first-moment decay of the adaptive method.
    pub beta1: f64,
    /// Second-moment decay of the adaptive method.
    pub beta2: f64,
    /// Stops once the total loss falls to this value.
    pub convergence_tol: f64,
    /// Number of pyramid levels in the depth parametrization; 1 optimizes raw pixels.
    pub levels: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_size: 0.05,
            final_step_size: Some(0.005),
            smoothness_weight: 1e-3,
            init_depth: 5.0,
            max_depth: 2.0 * 10.0 * 3f64.sqrt(),
            optimizer: Optimizer::Adaptive,
            beta1: 0.9,
            beta2: 0.99,
            convergence_tol: 1e-12,
            levels: 7,
        }
    }
}

impl ReconConfig {
    /// Starts at the camera-to-room-center distance and bounds depth by twice
    /// the room diagonal.
    pub fn with_room(self, room: &Room, camera: &Camera) -> Self {
        Self {
            init_depth: (camera.position() - room.center()).norm(),
            max_depth: 2.0 * room.diagonal(),
            ..self
        }
    }

    /// Step size used at iteration `it`.
    pub fn step_at(&self, it: usize) -> f64 {
        match self.final_step_size {
            Some(end) if self.max_iters > 1 => {
                let frac = it as f64 / (self.max_iters - 1) as f64;
                self.step_size * (end / self.step_size).powf(frac)
            }
            _ => self.step_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParam(format!("{name} must be positive, got {v}")))
            }
        };
        positive("step_size", self.step_size)?;
        if let Some(s) = self.final_step_size {
            positive("final_step_size", s)?;
        }
        positive("init_depth", self.init_depth)?;
        if !(self.max_depth > MIN_RECON_DEPTH) {
            return Err(Error::InvalidParam(format!(
                "max_depth must exceed {MIN_RECON_DEPTH}, got {}",
                self.max_depth
            )));
        }
        if !(self.smoothness_weight >= 0.0 && self.smoothness_weight.is_finite()) {
            return Err(Error::InvalidParam("smoothness_weight must be non-negative".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::InvalidParam("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if self.levels == 0 {
            return Err(Error::InvalidParam("levels must be at least 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidParam("convergence_tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub data: f64,
    pub smoothness: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.data + self.smoothness
    }
}

#[derive(Debug, Clone)]
pub struct ReconReport {
    /// Iterate with the lowest total loss.
    pub depth: DepthMap,
    pub best_iteration: usize,
    /// Loss at each evaluated iterate, starting with the initial depth.
    pub trace: Vec<LossTerms>,
    pub converged: bool,
    pub metrics: Option<ReconMetrics>,
}

impl ReconReport {
    pub fn best_loss(&self) -> LossTerms {
        self.trace[self.best_iteration]
    }

    /// Fills in depth and point-set metrics against a ground-truth depth map.
    pub fn evaluate(&mut self, ground_truth: &DepthMap, camera: &Camera, material: &Material) -> Result<ReconMetrics> {
        let m = compare_depths(&self.depth, ground_truth, camera, material)?;
        self.metrics = Some(m);
        Ok(m)
    }
}

pub fn compare_depths(
    estimate: &DepthMap,
    ground_truth: &DepthMap,
    camera: &Camera,
    material: &Material,
) -> Result<ReconMetrics> {
    let a = surfels_to_pointset(
        &SurfelField::from_depth(estimate, camera, material.albedo.clone())?,
        None,
    )?;
    let b = surfels_to_pointset(
        &SurfelField::from_depth(ground_truth, camera, material.albedo.clone())?,
        None,
    )?;
    Ok(ReconMetrics {
        mse_depth: mse_depth(estimate.as_grid(), ground_truth.as_grid(), None)?,
        chamfer: chamfer(&a, &b),
        hausdorff: hausdorff(&a, &b),
    })
}

/// One bilinear tap set mapping a fine index onto a coarse axis.
#[derive(Debug, Clone, Copy)]
struct Tap {
    lo: usize,
    hi: usize,
    w_hi: f64,
}

fn taps(fine: usize, coarse: usize) -> Vec<Tap> {
    (0..fine)
        .map(|i| {
            let u = ((i as f64 + 0.5) * coarse as f64 / fine as f64 - 0.5).clamp(0.0, (coarse - 1) as f64);
            let lo = u.floor() as usize;
            let hi = (lo + 1).min(coarse - 1);
            Tap {
                lo,
                hi,
                w_hi: u - lo as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Level {
    rows: usize,
    cols: usize,
    offset: usize,
    row_taps: Vec<Tap>,
    col_taps: Vec<Tap>,
}

/// Depth as a sum of bilinearly upsampled grids of halving resolution.
/// Level 0 is the full-resolution grid and comes first in `params`.
#[derive(Debug, Clone)]
struct Pyramid {
    rows: usize,
    cols: usize,
    levels: Vec<Level>,
    params: Vec<f64>,
}

impl Pyramid {
    fn new(rows: usize, cols: usize, levels: usize, init: f64) -> Self {
        let mut out = Vec::new();
        let (mut r, mut c, mut offset) = (rows, cols, 0);
        for l in 0..levels {
            if l > 0 {
                if r == 1 && c == 1 {
                    break;
                }
                r = r.div_ceil(2);
                c = c.div_ceil(2);
            }
            out.push(Level {
                rows: r,
                cols: c,
                offset,
                row_taps: taps(rows, r),
                col_taps: taps(cols, c),
            });
            offset += r * c;
        }
        let mut params = vec![0.0; offset];
        params[..rows * cols].fill(init);
        Self {
            rows,
            cols,
            levels: out,
            params,
        }
    }

    fn len(&self) -> usize {
        self.params.len()
    }

    fn compose(&self) -> Vec<f64> {
        let mut out = self.params[..self.rows * self.cols].to_vec();
        for lv in &self.levels[1..] {
            let p = &self.params[lv.offset..lv.offset + lv.rows * lv.cols];
            for (r, rt) in lv.row_taps.iter().enumerate() {
                for (c, ct) in lv.col_taps.iter().enumerate() {
                    let at = |i: usize, j: usize| p[i * lv.cols + j];
                    let top = at(rt.lo, ct.lo) * (1.0 - ct.w_hi) + at(rt.lo, ct.hi) * ct.w_hi;
                    let bottom = at(rt.hi, ct.lo) * (1.0 - ct.w_hi) + at(rt.hi, ct.hi) * ct.w_hi;
                    out[r * self.cols + c] += top * (1.0 - rt.w_hi) + bottom * rt.w_hi;
                }
            }
        }
        out
    }

    /// Transpose of [`Pyramid::compose`].
    fn backward(&self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.params.len()];
        out[..grad.len()].copy_from_slice(grad);
        for lv in &self.levels[1..] {
            let p = &mut out[lv.offset..lv.offset + lv.rows * lv.cols];
            for (r, rt) in lv.row_taps.iter().enumerate() {
                for (c, ct) in lv.col_taps.iter().enumerate() {
                    let g = grad[r * self.cols + c];
                    let (g_top, g_bottom) = (g * (1.0 - rt.w_hi), g * rt.w_hi);
                    p[rt.lo * lv.cols + ct.lo] += g_top * (1.0 - ct.w_hi);
                    p[rt.lo * lv.cols + ct.hi] += g_top * ct.w_hi;
                    p[rt.hi * lv.cols + ct.lo] += g_bottom * (1.0 - ct.w_hi);
                    p[rt.hi * lv.cols + ct.hi] += g_bottom * ct.w_hi;
                }
            }
        }
        out
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Anisotropic total variation `sum |d(r,c+1) - d(r,c)| + |d(r+1,c) - d(r,c)|`
/// and its subgradient, with `sign(0) = 0`.
pub fn total_variation(depth: &DepthMap) -> (f64, GradMap) {
    let g = depth.as_grid();
    let (rows, cols) = g.shape();
    let mut tv = 0.0;
    let mut grad = Grid::filled(rows, cols, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            let d = g[(r, c)];
            if c + 1 < cols {
                let diff = g[(r, c + 1)] - d;
                tv += diff.abs();
                grad[(r, c + 1)] += sign(diff);
                grad[(r, c)] -= sign(diff);
            }
            if r + 1 < rows {
                let diff = g[(r + 1, c)] - d;
                tv += diff.abs();
                grad[(r + 1, c)] += sign(diff);
                grad[(r, c)] -= sign(diff);
            }
        }
    }
    (tv, grad)
}

/// Total objective and gradient at `depth`.
pub fn objective(
    depth: &DepthMap,
    target: &Image,
    camera: &Camera,
    material: &Material,
    lights: &LightingRig,
    smoothness_weight: f64,
) -> Result<(LossTerms, GradMap)> {
    let rendered = render(depth, camera, material, lights)?;
    let (data, upstream) = image_loss_and_grad(&rendered, target)?;
    let mut grad = render_backward(depth, camera, material, lights, &upstream)?;
    let mut smoothness = 0.0;
    if smoothness_weight > 0.0 {
        let scale = smoothness_weight / depth.as_grid().len() as f64;
        let (tv, tv_grad) = total_variation(depth);
        smoothness = scale * tv;
        for (g, t) in grad.as_mut_slice().iter_mut().zip(tv_grad.iter()) {
            *g += scale * t;
        }
    }
    Ok((LossTerms { data, smoothness }, grad))
}

/// Minimizes image MSE plus weighted total variation from a constant depth,
/// keeping every iterate inside `[MIN_RECON_DEPTH, max_depth]`.
pub fn reconstruct_depth(
    target: &Image,
    camera: &Camera,
    material: &Material,
    lights: &LightingRig,
    config: &ReconConfig,
) -> Result<ReconReport> {
    config.validate()?;
    check_shape(camera.resolution(), target.shape())?;
    let (rows, cols) = camera.resolution();
    let init = config.init_depth.clamp(MIN_RECON_DEPTH, config.max_depth);
    let mut pyramid = Pyramid::new(rows, cols, config.levels, init);
    let n_params = pyramid.len();
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut depth = pyramid.compose();
    let mut trace = Vec::with_capacity(config.max_iters.min(1 << 16));
    let mut best: Option<(usize, Vec<f64>)> = None;
    let mut converged = false;

    for it in 0..config.max_iters {
        let current = DepthMap::from_vec(rows, cols, depth.clone())?;
        let (loss, grad) = objective(&current, target, camera, material, lights, config.smoothness_weight)?;
        if !loss.total().is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration: it });
        }
        trace.push(loss);
        if best.as_ref().is_none_or(|(b, _)| loss.total() < trace[*b].total()) {
            best = Some((it, depth.clone()));
        }
        if loss.total() <= config.convergence_tol {
            converged = true;
            break;
        }
        let grad = pyramid.backward(grad.as_slice());
        let t = (it + 1) as i32;
        let lr = config.step_at(it);
        for (i, &g) in grad.iter().enumerate() {
            let step = match config.optimizer {
                Optimizer::Plain => g,
                Optimizer::Momentum => {
                    m[i] = config.beta1 * m[i] + g;
                    m[i]
                }
                Optimizer::Adaptive => {
                    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                    let m_hat = m[i] / (1.0 - config.beta1.powi(t));
                    let v_hat = v[i] / (1.0 - config.beta2.powi(t));
                    m_hat / (v_hat.sqrt() + 1e-12)
                }
            };
            pyramid.params[i] -= lr * step;
        }
        // project onto the depth box through the finest level
        for (i, x) in pyramid.compose().into_iter().enumerate() {
            let clamped = x.clamp(MIN_RECON_DEPTH, config.max_depth);
            pyramid.params[i] += clamped - x;
            depth[i] = clamped;
        }
    }

    let (best_iteration, best_depth) =
        best.ok_or_else(|| Error::InvalidParam("max_iters must be at least 1".into()))?;
    Ok(ReconReport {
        depth: DepthMap::from_vec(rows, cols, best_depth)?,
        best_iteration,
        trace,
        converged,
        metrics: None,
    })
}
