//! Reverse-mode derivative of the render pipeline with respect to depth, and
//! finite-difference oracles used to check it.
//!
//! The chain is shading -> normals -> back-projection. Conventions at
//! non-smooth points: `max(0, x)` has derivative 0 at `x = 0`, the normal sign
//! flip is held fixed, and pixels with a degenerate tangent frame get zero
//! gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Rgb, Vec3};
use crate::grid::{check_shape, Grid};
use crate::rng::child_seed;
use crate::shading::{
    render, Albedo, CameraLight, Image, LightingRig, Material, PointLight, Specular, MIN_LIGHT_DISTANCE,
};
use crate::surfel::{backproject, orient, stencil, tangents, DepthMap};

/// `dL/d depth` per pixel.
pub type GradMap = Grid<f64>;

/// Gradient of `g . shade(P, N)` with respect to the surfel position and normal.
#[inline]
pub(crate) fn shade_surfel_backward(
    p: &Vec3,
    n: &Vec3,
    rho: &Rgb,
    lights: &[CameraLight],
    specular: Option<&Specular>,
    upstream: &Rgb,
) -> Option<(Vec3, Vec3)> {
    let mut grad_p = Vec3::zeros();
    let mut grad_n = Vec3::zeros();
    let p_len = p.norm();
    let view = -p / p_len;
    for light in lights {
        let d = light.position - p;
        let dist = d.norm();
        if dist < MIN_LIGHT_DISTANCE {
            return None;
        }
        let l = d / dist;
        let atten = light.attenuation(dist);
        let datten = -(light.k_l + 2.0 * light.k_q * dist) * atten * atten;
        let cos = n.dot(&l);
        if cos <= 0.0 {
            continue;
        }
        let w = upstream.dot(&rho.component_mul(&light.color));
        grad_n += l * (w * atten);
        let mut grad_d = (l * (datten * cos) + (n - l * cos) * (atten / dist)) * w;

        if let Some(spec) = specular {
            let reflected = n * (2.0 * cos) - l;
            let m = reflected.dot(&view);
            if m > 0.0 {
                let u = upstream.dot(&spec.k_s.component_mul(&light.color));
                let lobe = m.powf(spec.shininess);
                grad_d += l * (u * datten * lobe);
                let s = u * atten * spec.shininess * m.powf(spec.shininess - 1.0);
                let nv = n.dot(&view);
                grad_n += (l * (2.0 * nv) + view * (2.0 * cos)) * s;
                let a = n * (2.0 * nv) - view;
                grad_d += (a - l * a.dot(&l)) * (s / dist);
                grad_p -= (reflected - view * m) * (s / p_len);
            }
        }
        grad_p -= grad_d;
    }
    Some((grad_p, grad_n))
}

/// Vector-Jacobian product of [`render`] at `depth` with an image-shaped upstream gradient.
pub fn render_backward(
    depth: &DepthMap,
    camera: &Camera,
    material: &Material,
    lights: &LightingRig,
    upstream: &Image,
) -> Result<GradMap> {
    check_shape(depth.shape(), upstream.shape())?;
    material.validate()?;
    lights.validate()?;
    material.albedo.check_shape(depth.shape())?;
    let positions = backproject(depth, camera)?;
    let (rows, cols) = depth.shape();
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidParam(format!(
            "render needs at least a 2x2 grid, got {rows}x{cols}"
        )));
    }
    let cam_lights = lights.to_camera(camera);
    let specular = material.specular.as_ref();

    struct Local {
        grad_p: Vec3,
        grad_tx: Vec3,
        grad_ty: Vec3,
        degenerate: bool,
    }

    let locals: Vec<Result<Local>> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let p = positions[(row, col)];
            let (tx, ty) = tangents(&positions, row, col);
            let raw = tx.cross(&ty);
            let oriented = orient(&raw);
            let n = match oriented {
                Some((sign, len)) => raw * (sign / len),
                None => Vec3::z(),
            };
            let rho = material.albedo.at(row, col);
            let g = upstream[(row, col)];
            let (grad_p, grad_n) = shade_surfel_backward(&p, &n, &rho, &cam_lights, specular, &g)
                .ok_or(Error::LightAtSurfel { row, col })?;
            let (grad_tx, grad_ty) = match oriented {
                Some((sign, len)) => {
                    let grad_c = (grad_n - n * grad_n.dot(&n)) * (sign / len);
                    (ty.cross(&grad_c), grad_c.cross(&tx))
                }
                None => (Vec3::zeros(), Vec3::zeros()),
            };
            Ok(Local {
                grad_p,
                grad_tx,
                grad_ty,
                degenerate: oriented.is_none(),
            })
        })
        .collect();
    let locals = locals.into_iter().collect::<Result<Vec<_>>>()?;

    // Scatter in fixed row-major order so the sum is schedule independent.
    let mut grad_pos = vec![Vec3::zeros(); rows * cols];
    for (i, local) in locals.iter().enumerate() {
        let (row, col) = (i / cols, i % cols);
        let (cl, cr, ru, rd) = stencil(row, col, rows, cols);
        grad_pos[i] += local.grad_p;
        grad_pos[row * cols + cr] += local.grad_tx;
        grad_pos[row * cols + cl] -= local.grad_tx;
        grad_pos[ru * cols + col] += local.grad_ty;
        grad_pos[rd * cols + col] -= local.grad_ty;
    }

    let grad: Vec<f64> = grad_pos
        .iter()
        .zip(&locals)
        .enumerate()
        .map(|(i, (gp, local))| {
            if local.degenerate {
                0.0
            } else {
                gp.dot(&camera.pixel_ray(i / cols, i % cols))
            }
        })
        .collect();
    Grid::from_vec(rows, cols, grad)
}

/// Step used by the finite-difference oracles: `epsilon * max(depth, 1)`.
#[inline]
pub fn fd_step(epsilon: f64, depth: f64) -> f64 {
    epsilon * depth.max(1.0)
}

/// Central differences of a scalar loss, one pixel at a time.
pub fn finite_diff_grad<F>(loss: F, depth: &DepthMap, epsilon: f64) -> Result<GradMap>
where
    F: Fn(&DepthMap) -> Result<f64> + Sync,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParam("epsilon must be positive".into()));
    }
    let (rows, cols) = depth.shape();
    let grads: Vec<Result<f64>> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let d = depth.as_slice()[i];
            let h = fd_step(epsilon, d);
            let mut plus = depth.as_slice().to_vec();
            plus[i] = d + h;
            let mut minus = depth.as_slice().to_vec();
            minus[i] = d - h;
            let lp = loss(&DepthMap::from_vec(rows, cols, plus)?)?;
            let lm = loss(&DepthMap::from_vec(rows, cols, minus)?)?;
            Ok((lp - lm) / (2.0 * h))
        })
        .collect();
    Grid::from_vec(rows, cols, grads.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Finite-difference vector-Jacobian product of [`render`], differencing the
/// two images pixel by pixel before contracting with `upstream`. Avoids the
/// cancellation of forming two full scalar losses first.
pub fn render_vjp_finite_diff(
    depth: &DepthMap,
    camera: &Camera,
    material: &Material,
    lights: &LightingRig,
    upstream: &Image,
    epsilon: f64,
) -> Result<GradMap> {
    check_shape(depth.shape(), upstream.shape())?;
    let (rows, cols) = depth.shape();
    let grads: Vec<Result<f64>> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let d = depth.as_slice()[i];
            let h = fd_step(epsilon, d);
            let mut plus = depth.as_slice().to_vec();
            plus[i] = d + h;
            let mut minus = depth.as_slice().to_vec();
            minus[i] = d - h;
            let ip = render(&DepthMap::from_vec(rows, cols, plus)?, camera, material, lights)?;
            let im = render(&DepthMap::from_vec(rows, cols, minus)?, camera, material, lights)?;
            let mut acc = 0.0;
            for ((a, b), g) in ip.iter().zip(im.iter()).zip(upstream.iter()) {
                acc += g.dot(&(a - b));
            }
            Ok(acc / (2.0 * h))
        })
        .collect();
    Grid::from_vec(rows, cols, grads.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Mean squared error over pixels and channels and its gradient with respect to `rendered`.
pub fn image_loss_and_grad(rendered: &Image, target: &Image) -> Result<(f64, Image)> {
    check_shape(target.shape(), rendered.shape())?;
    let count = (rendered.len() * 3) as f64;
    let mut loss = 0.0;
    for (a, b) in rendered.iter().zip(target.iter()) {
        loss += (a - b).norm_squared();
    }
    let grad = Grid::from_vec(
        rendered.rows(),
        rendered.cols(),
        rendered
            .iter()
            .zip(target.iter())
            .map(|(a, b)| (a - b) * (2.0 / count))
            .collect(),
    )?;
    Ok((loss / count, grad))
}

/// `|a - b| / max(|a|, |b|, 1e-8)`
#[inline]
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Inclusive range of square image sides.
    pub min_size: usize,
    pub max_size: usize,
    pub trials: usize,
    pub tolerance: f64,
    /// Relative finite-difference step.
    pub epsilon: f64,
    /// Pixels whose perturbation lands within this distance of a shading kink are skipped.
    pub kink_margin: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            min_size: 8,
            max_size: 32,
            trials: 100,
            tolerance: 1e-4,
            epsilon: 1e-5,
            kink_margin: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub tolerance: f64,
    pub pixels_checked: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub kink_excluded_count: usize,
    pub pass: bool,
}

/// One randomized gradient-check problem.
#[derive(Debug, Clone)]
pub struct GradcheckCase {
    pub depth: DepthMap,
    pub camera: Camera,
    pub material: Material,
    pub lights: LightingRig,
    pub upstream: Image,
}

impl GradcheckCase {
    /// Random depth in `[1, 3]`, one point light in front of the surface, uniform albedo.
    pub fn sample(seed: u64, side: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let focal = rng.gen_range(18.0..25.0);
        let camera = Camera::new(Vec3::zeros(), -Vec3::z(), Vec3::y(), focal, 24.0, (side, side))?;
        let depth = DepthMap::from_vec(side, side, (0..side * side).map(|_| rng.gen_range(1.0..3.0)).collect())?;
        let albedo = Rgb::from_fn(|_, _| rng.gen_range(0.2..1.0));
        let light = PointLight {
            position: Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-0.5..1.0),
            ),
            color: Rgb::from_fn(|_, _| rng.gen_range(0.5..1.0)),
            k_l: rng.gen_range(0.0..0.5),
            k_q: rng.gen_range(0.2..1.0),
        };
        let upstream = Grid::from_fn(side, side, |_, _| Rgb::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
        Ok(Self {
            depth,
            camera,
            material: Material {
                albedo: Albedo::Uniform(albedo),
                specular: None,
            },
            lights: LightingRig {
                ambient: Rgb::repeat(0.05),
                lights: vec![light],
            },
            upstream,
        })
    }

    /// Quantities whose sign switches a branch of the forward pass at pixel `(r, c)`:
    /// normal z before orientation, and for every light the diffuse cosine and
    /// the specular reflection term.
    fn branch_values(&self, positions: &Grid<Vec3>, r: usize, c: usize, out: &mut Vec<f64>) {
        let (tx, ty) = tangents(positions, r, c);
        let raw = tx.cross(&ty);
        let len = raw.norm();
        out.push(raw.z / len);
        let n = match orient(&raw) {
            Some((sign, len)) => raw * (sign / len),
            None => Vec3::z(),
        };
        let p = positions[(r, c)];
        for light in self.lights.to_camera(&self.camera) {
            let d = light.position - p;
            let l = d / d.norm();
            let cos = n.dot(&l);
            out.push(cos);
            if self.material.specular.is_some() {
                let reflected = n * (2.0 * cos) - l;
                out.push(reflected.dot(&(-p / p.norm())));
            }
        }
    }

    /// True when perturbing pixel `i` by `±h` moves some dependent pixel across
    /// a branch, or starts within `margin` of one.
    fn near_kink(&self, i: usize, h: f64, margin: f64) -> Result<bool> {
        let (rows, cols) = self.depth.shape();
        let (row, col) = (i / cols, i % cols);
        let base = backproject(&self.depth, &self.camera)?;
        let shifted = |delta: f64| -> Grid<Vec3> {
            let mut g = base.clone();
            g[(row, col)] = self.camera.pixel_ray(row, col) * (self.depth.get(row, col) + delta);
            g
        };
        let plus = shifted(h);
        let minus = shifted(-h);
        let (mut v0, mut vp, mut vm) = (Vec::new(), Vec::new(), Vec::new());
        for r in row.saturating_sub(1)..(row + 2).min(rows) {
            for c in col.saturating_sub(1)..(col + 2).min(cols) {
                self.branch_values(&base, r, c, &mut v0);
                self.branch_values(&plus, r, c, &mut vp);
                self.branch_values(&minus, r, c, &mut vm);
            }
        }
        Ok(v0
            .iter()
            .zip(&vp)
            .zip(&vm)
            .any(|((a, b), c)| a.abs() < margin || a.signum() != b.signum() || a.signum() != c.signum()))
    }
}

/// Cross-checks [`render_backward`] against [`render_vjp_finite_diff`] on
/// randomized problems.
pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    if config.min_size < 2 || config.max_size < config.min_size {
        return Err(Error::InvalidParam(format!(
            "invalid size range {}..={}",
            config.min_size, config.max_size
        )));
    }
    let mut seeds = Vec::with_capacity(config.trials);
    let mut max_err: f64 = 0.0;
    let mut sum_err = 0.0;
    let mut checked = 0usize;
    let mut excluded = 0usize;
    for trial in 0..config.trials {
        let seed = child_seed(config.seed, trial as u64);
        seeds.push(seed);
        let side = config.min_size + (seed % (config.max_size - config.min_size + 1) as u64) as usize;
        let case = GradcheckCase::sample(seed, side)?;
        let analytic = render_backward(&case.depth, &case.camera, &case.material, &case.lights, &case.upstream)?;
        let numeric = render_vjp_finite_diff(
            &case.depth,
            &case.camera,
            &case.material,
            &case.lights,
            &case.upstream,
            config.epsilon,
        )?;
        let errors: Vec<Result<Option<f64>>> = (0..side * side)
            .into_par_iter()
            .map(|i| {
                let h = fd_step(config.epsilon, case.depth.as_slice()[i]);
                if case.near_kink(i, h, config.kink_margin)? {
                    return Ok(None);
                }
                Ok(Some(relative_error(analytic.as_slice()[i], numeric.as_slice()[i])))
            })
            .collect();
        for e in errors {
            match e? {
                Some(e) => {
                    max_err = max_err.max(e);
                    sum_err += e;
                    checked += 1;
                }
                None => excluded += 1,
            }
        }
    }
    let mean = if checked > 0 { sum_err / checked as f64 } else { 0.0 };
    Ok(GradcheckReport {
        seed: config.seed,
        seeds,
        tolerance: config.tolerance,
        pixels_checked: checked,
        max_rel_err: max_err,
        mean_rel_err: mean,
        kink_excluded_count: excluded,
        pass: checked > 0 && max_err <= config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(side: usize, seed: u64) -> GradcheckCase {
        GradcheckCase::sample(seed, side).unwrap()
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let case = setup(8, 1);
        let zero = Grid::filled(8, 8, Rgb::zeros());
        let g = render_backward(&case.depth, &case.camera, &case.material, &case.lights, &zero).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ambient_only_gives_zero_gradient() {
        let case = setup(8, 2);
        let rig = LightingRig::ambient_only(Rgb::repeat(0.3));
        let g = render_backward(&case.depth, &case.camera, &case.material, &rig, &case.upstream).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_loss_fd_is_exact() {
        let case = setup(5, 3);
        let weights: Vec<f64> = (0..25).map(|i| i as f64 * 0.1 - 1.0).collect();
        let w = weights.clone();
        let loss = move |d: &DepthMap| Ok(d.as_slice().iter().zip(&w).map(|(a, b)| a * b).sum());
        let g = finite_diff_grad(loss, &case.depth, 1e-5).unwrap();
        for (a, b) in g.iter().zip(&weights) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn quadratic_loss_fd() {
        let case = setup(3, 4);
        let loss = |d: &DepthMap| Ok(d.as_slice().iter().map(|x| x * x).sum());
        let g = finite_diff_grad(loss, &case.depth, 1e-6).unwrap();
        for (a, d) in g.iter().zip(case.depth.as_slice()) {
            assert!((a - 2.0 * d).abs() < 1e-8);
        }
    }

    #[test]
    fn image_loss_hand_cases() {
        let a = Grid::filled(2, 3, Rgb::new(0.1, 0.2, 0.3));
        let (l, g) = image_loss_and_grad(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|x| *x == Rgb::zeros()));
        let mut b = a.clone();
        b[(1, 2)].y += 0.5;
        let (l, g) = image_loss_and_grad(&a, &b).unwrap();
        assert!((l - 0.25 / 18.0).abs() < 1e-15);
        assert!((g[(1, 2)].y - 2.0 * -0.5 / 18.0).abs() < 1e-15);
        assert!(image_loss_and_grad(&a, &Grid::filled(3, 2, Rgb::zeros())).is_err());
    }

    #[test]
    fn image_loss_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Grid::from_fn(3, 4, |_, _| Rgb::from_fn(|_, _| rng.gen_range(0.0..1.0)));
        let b = Grid::from_fn(3, 4, |_, _| Rgb::from_fn(|_, _| rng.gen_range(0.0..1.0)));
        let (_, g) = image_loss_and_grad(&a, &b).unwrap();
        let h = 1e-6;
        for i in 0..12 {
            for ch in 0..3 {
                let mut p = a.clone();
                p.as_mut_slice()[i][ch] += h;
                let mut m = a.clone();
                m.as_mut_slice()[i][ch] -= h;
                let fd = (image_loss_and_grad(&p, &b).unwrap().0 - image_loss_and_grad(&m, &b).unwrap().0) / (2.0 * h);
                assert!((fd - g.as_slice()[i][ch]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn backward_matches_fd_on_small_case() {
        let case = setup(8, 5);
        let a = render_backward(&case.depth, &case.camera, &case.material, &case.lights, &case.upstream).unwrap();
        let n = render_vjp_finite_diff(
            &case.depth,
            &case.camera,
            &case.material,
            &case.lights,
            &case.upstream,
            1e-5,
        )
        .unwrap();
        for i in 0..64 {
            let h = fd_step(1e-5, case.depth.as_slice()[i]);
            if case.near_kink(i, h, 1e-6).unwrap() {
                continue;
            }
            let e = relative_error(a.as_slice()[i], n.as_slice()[i]);
            assert!(e < 1e-4, "pixel {i}: {} vs {}", a.as_slice()[i], n.as_slice()[i]);
        }
    }

    #[test]
    fn backward_with_specular_matches_fd() {
        let mut case = setup(10, 6);
        case.material.specular = Some(Specular {
            k_s: Rgb::new(0.6, 0.5, 0.4),
            shininess: 12.0,
        });
        case.lights.lights[0].position = Vec3::new(0.3, 0.2, 0.5);
        let a = render_backward(&case.depth, &case.camera, &case.material, &case.lights, &case.upstream).unwrap();
        let n = render_vjp_finite_diff(
            &case.depth,
            &case.camera,
            &case.material,
            &case.lights,
            &case.upstream,
            1e-5,
        )
        .unwrap();
        let mut checked = 0;
        for i in 0..100 {
            let h = fd_step(1e-5, case.depth.as_slice()[i]);
            if case.near_kink(i, h, 1e-6).unwrap() {
                continue;
            }
            checked += 1;
            let e = relative_error(a.as_slice()[i], n.as_slice()[i]);
            assert!(e < 1e-4, "pixel {i}: {} vs {}", a.as_slice()[i], n.as_slice()[i]);
        }
        assert!(checked > 50);
    }

    #[test]
    fn scalar_fd_agrees_with_backward() {
        let case = setup(6, 7);
        let up = case.upstream.clone();
        let loss = |d: &DepthMap| -> Result<f64> {
            let img = render(d, &case.camera, &case.material, &case.lights)?;
            Ok(img.iter().zip(up.iter()).map(|(a, g)| a.dot(g)).sum())
        };
        let fd = finite_diff_grad(loss, &case.depth, 1e-5).unwrap();
        let a = render_backward(&case.depth, &case.camera, &case.material, &case.lights, &case.upstream).unwrap();
        for i in 0..36 {
            let h = fd_step(1e-5, case.depth.as_slice()[i]);
            if case.near_kink(i, h, 1e-6).unwrap() {
                continue;
            }
            assert!(relative_error(a.as_slice()[i], fd.as_slice()[i]) < 1e-4);
        }
    }

    #[test]
    fn vjp_is_linear_in_upstream() {
        let case = setup(9, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let v = Grid::from_fn(9, 9, |_, _| Rgb::from_fn(|_, _| rng.gen_range(-1.0..1.0)));
        let (alpha, beta) = (0.7, -1.3);
        let mix = Grid::from_vec(
            9,
            9,
            case.upstream
                .iter()
                .zip(v.iter())
                .map(|(u, v)| u * alpha + v * beta)
                .collect(),
        )
        .unwrap();
        let b = |u: &Image| render_backward(&case.depth, &case.camera, &case.material, &case.lights, u).unwrap();
        let (gu, gv, gm) = (b(&case.upstream), b(&v), b(&mix));
        for i in 0..81 {
            let expect = alpha * gu.as_slice()[i] + beta * gv.as_slice()[i];
            assert!((gm.as_slice()[i] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn upstream_at_one_pixel_has_local_support() {
        let case = setup(12, 11);
        let mut up = Grid::filled(12, 12, Rgb::zeros());
        up[(6, 5)] = Rgb::new(0.3, -0.8, 1.0);
        let g = render_backward(&case.depth, &case.camera, &case.material, &case.lights, &up).unwrap();
        for (r, c, &v) in g.indexed() {
            if (r as i64 - 6).abs() > 2 || (c as i64 - 5).abs() > 2 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn backward_is_thread_count_independent() {
        let case = setup(16, 12);
        let run = || render_backward(&case.depth, &case.camera, &case.material, &case.lights, &case.upstream).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(run);
        assert_eq!(serial, run());
    }

    #[test]
    fn small_gradcheck_passes() {
        let report = run_gradcheck(&GradcheckConfig {
            trials: 4,
            max_size: 12,
            ..Default::default()
        })
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.seeds.len(), 4);
    }
}
