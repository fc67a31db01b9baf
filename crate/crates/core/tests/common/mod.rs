//! Independent reference implementations and measurement routines shared by
//! the integration tests and the acceptance harness.

#![allow(dead_code)]

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfelgrad_core::metrics::{chamfer, hausdorff, PointSet};
use surfelgrad_core::rng::item_rng;
use surfelgrad_core::scenegen::{
    plan_iqtt, render_iqtt, sample_scene, trace, IqttConfig, IqttPlan, Primitive, PrimitiveKind, Room, SceneConfig,
    SceneSpec, ShapeView, Surface,
};
use surfelgrad_core::shading::render;
use surfelgrad_core::surfel::{backproject, estimate_normals, estimate_normals_lsq_oracle};
use surfelgrad_core::{Albedo, Camera, DepthMap, Grid, Image, LightingRig, Material, PointLight, Rgb, Specular, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

pub fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

// ---------------------------------------------------------------- metrics

pub fn brute_nearest(q: &Vec3, set: &[Vec3]) -> f64 {
    set.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

pub fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab: f64 = a.iter().map(|p| brute_nearest(p, b)).sum::<f64>() / a.len() as f64;
    let ba: f64 = b.iter().map(|p| brute_nearest(p, a)).sum::<f64>() / b.len() as f64;
    ab + ba
}

pub fn brute_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab = a.iter().map(|p| brute_nearest(p, b)).fold(0.0, f64::max);
    let ba = b.iter().map(|p| brute_nearest(p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Uniform cloud, tight clusters, a spherical shell or a thin slab.
pub fn random_point_set<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec3> {
    let offset = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
    match rng.gen_range(0..4) {
        0 => (0..n)
            .map(|_| offset + Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0)))
            .collect(),
        1 => {
            let centers: Vec<Vec3> = (0..5).map(|_| Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0))).collect();
            (0..n)
                .map(|i| offset + centers[i % 5] + Vec3::from_fn(|_, _| rng.gen_range(-0.01..0.01)))
                .collect()
        }
        2 => (0..n)
            .map(|_| {
                let v = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                offset + v.normalize() * 1.5
            })
            .collect(),
        _ => (0..n)
            .map(|_| {
                offset
                    + Vec3::new(
                        rng.gen_range(-4.0..4.0),
                        rng.gen_range(-4.0..4.0),
                        rng.gen_range(0.0..1e-3),
                    )
            })
            .collect(),
    }
}

/// Largest absolute differences `(chamfer, hausdorff)` between the indexed
/// metrics and brute force over `pairs` random pairs of `n`-point sets.
pub fn metric_max_errors(seed: u64, pairs: usize, n: usize) -> (f64, f64) {
    let mut worst: (f64, f64) = (0.0, 0.0);
    for i in 0..pairs {
        let mut rng = item_rng(seed, i as u64);
        let a = random_point_set(&mut rng, n);
        let b = random_point_set(&mut rng, n);
        let (pa, pb) = (PointSet::new(a.clone()).unwrap(), PointSet::new(b.clone()).unwrap());
        worst.0 = worst.0.max((chamfer(&pa, &pb) - brute_chamfer(&a, &b)).abs());
        worst.1 = worst.1.max((hausdorff(&pa, &pb) - brute_hausdorff(&a, &b)).abs());
    }
    worst
}

// ---------------------------------------------------------------- normals

fn axis_camera(rows: usize, cols: usize, focal: f64) -> Camera {
    Camera::new(Vec3::zeros(), -Vec3::z(), Vec3::y(), focal, 24.0, (rows, cols)).unwrap()
}

/// Random camera-facing plane sampled as a z-depth field.
pub fn plane_depth<R: Rng>(rng: &mut R) -> (DepthMap, Camera, Vec3) {
    let side = rng.gen_range(8..=32);
    let camera = axis_camera(side, side, rng.gen_range(18.0..25.0));
    let normal = loop {
        let v = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let n = v.normalize();
        if v.norm() <= 1.0 && n.z >= 0.8 {
            break n;
        }
    };
    let anchor = Vec3::new(0.0, 0.0, -rng.gen_range(2.0..5.0));
    let offset = normal.dot(&anchor);
    let depth = Grid::from_fn(side, side, |r, c| offset / normal.dot(&camera.pixel_ray(r, c)));
    (DepthMap::new(depth).unwrap(), camera, normal)
}

/// Largest component error of both estimators against the analytic normal,
/// over interior pixels of `count` random planes.
pub fn plane_normal_max_error(seed: u64, count: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..count {
        let (depth, camera, normal) = plane_depth(&mut item_rng(seed, i as u64));
        let positions = backproject(&depth, &camera).unwrap();
        let cross = estimate_normals(&positions).unwrap();
        let lsq = estimate_normals_lsq_oracle(&positions).unwrap();
        let (rows, cols) = depth.shape();
        for r in 1..rows - 1 {
            for c in 1..cols - 1 {
                assert!(!cross.degenerate[(r, c)] && !lsq.degenerate[(r, c)]);
                worst = worst.max((cross.normals[(r, c)] - normal).amax());
                worst = worst.max((lsq.normals[(r, c)] - normal).amax());
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct SphereNormalStats {
    pub pixels: usize,
    pub mean_vs_analytic_deg: f64,
    pub mean_vs_lsq_deg: f64,
    pub max_vs_lsq_deg: f64,
    /// Share of pixels where the two estimators differ by 1 degree or more.
    pub lsq_outlier_fraction: f64,
    /// Largest gap over pixels whose surface is within 60 degrees of facing the camera.
    pub max_vs_lsq_facing_deg: f64,
}

/// Unit sphere at the origin of a large room, traced from an off-axis camera.
pub fn sphere_scene(resolution: usize) -> SceneSpec {
    let camera = Camera::new(
        Vec3::new(1.5, 1.0, 4.5),
        Vec3::zeros(),
        Vec3::y(),
        20.0,
        24.0,
        (resolution, resolution),
    )
    .unwrap();
    SceneSpec {
        room: Room {
            min: Vec3::repeat(-10.0),
            max: Vec3::repeat(10.0),
        },
        objects: vec![Primitive::new(
            PrimitiveKind::Sphere,
            Vec3::zeros(),
            Vec3::repeat(1.0),
            UnitQuaternion::identity(),
        )
        .unwrap()],
        material: Material::diffuse(Rgb::repeat(0.8)),
        lights: LightingRig {
            ambient: Rgb::repeat(0.1),
            lights: vec![PointLight {
                position: Vec3::new(3.0, 3.0, 3.0),
                color: Rgb::repeat(1.0),
                k_l: 0.0,
                k_q: 0.05,
            }],
        },
        camera,
        seed: 0,
    }
}

/// Pixels on the object whose whole 3x3 neighborhood is on the object.
pub fn interior_object_pixels(surface: &Grid<Surface>) -> Vec<(usize, usize)> {
    let (rows, cols) = surface.shape();
    let mut out = Vec::new();
    for r in 1..rows - 1 {
        for c in 1..cols - 1 {
            let all =
                (r - 1..=r + 1).all(|rr| (c - 1..=c + 1).all(|cc| matches!(surface[(rr, cc)], Surface::Object(_))));
            if all {
                out.push((r, c));
            }
        }
    }
    out
}

pub fn sphere_normal_stats(resolution: usize) -> SphereNormalStats {
    let scene = sphere_scene(resolution);
    let camera = &scene.camera;
    let traced = trace(&scene, camera).unwrap();
    let positions = backproject(&traced.depth, camera).unwrap();
    let cross = estimate_normals(&positions).unwrap();
    let lsq = estimate_normals_lsq_oracle(&positions).unwrap();
    let pixels = interior_object_pixels(&traced.surface);
    let mut sum = 0.0;
    let mut sum_lsq = 0.0;
    let mut max_lsq: f64 = 0.0;
    let mut max_facing: f64 = 0.0;
    let mut outliers = 0usize;
    for &(r, c) in &pixels {
        let world = camera.camera_to_world(&positions[(r, c)]);
        let analytic = camera.direction_to_camera(&world.normalize());
        let facing = angle_deg(&analytic, &-positions[(r, c)]) < 60.0;
        sum += angle_deg(&cross.normals[(r, c)], &analytic);
        let gap = angle_deg(&cross.normals[(r, c)], &lsq.normals[(r, c)]);
        sum_lsq += gap;
        max_lsq = max_lsq.max(gap);
        if facing {
            max_facing = max_facing.max(gap);
        }
        if gap >= 1.0 {
            outliers += 1;
        }
    }
    let n = pixels.len() as f64;
    SphereNormalStats {
        pixels: pixels.len(),
        mean_vs_analytic_deg: sum / n,
        mean_vs_lsq_deg: sum_lsq / n,
        max_vs_lsq_deg: max_lsq,
        lsq_outlier_fraction: outliers as f64 / n,
        max_vs_lsq_facing_deg: max_facing,
    }
}

// ---------------------------------------------------------------- shading

/// Random smooth depth field, camera, lights and material.
pub struct ShadingConfig {
    pub depth: DepthMap,
    pub camera: Camera,
    pub material: Material,
    pub lights: LightingRig,
}

pub fn random_shading_config<R: Rng>(rng: &mut R, specular: bool) -> ShadingConfig {
    let side = rng.gen_range(8..=16);
    let position = Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
    let forward = loop {
        let v = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 && (v.y / v.norm()).abs() < 0.9 {
            break v.normalize();
        }
    };
    let camera = Camera::new(
        position,
        position + forward,
        Vec3::y(),
        rng.gen_range(18.0..25.0),
        24.0,
        (side, side),
    )
    .unwrap();
    let base = rng.gen_range(2.0..3.0);
    let (gx, gy) = (rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
    let (fx, fy, amp) = (
        rng.gen_range(0.2..0.8),
        rng.gen_range(0.2..0.8),
        rng.gen_range(0.0..0.3),
    );
    let depth = Grid::from_fn(side, side, |r, c| {
        base + gx * c as f64 + gy * r as f64 + amp * (fx * c as f64).sin() * (fy * r as f64).cos()
    });
    let n_lights = rng.gen_range(2..=3);
    let lights = (0..n_lights)
        .map(|_| PointLight {
            position: camera.camera_to_world(&Vec3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-0.5..0.5),
            )),
            color: Rgb::from_fn(|_, _| rng.gen_range(0.0..1.0)),
            k_l: rng.gen_range(0.0..0.5),
            k_q: rng.gen_range(0.1..1.0),
        })
        .collect();
    ShadingConfig {
        depth: DepthMap::new(depth).unwrap(),
        camera,
        material: Material {
            albedo: Albedo::Uniform(Rgb::from_fn(|_, _| rng.gen_range(0.2..1.0))),
            specular: specular.then(|| Specular {
                k_s: Rgb::from_fn(|_, _| rng.gen_range(0.0..1.0)),
                shininess: rng.gen_range(1.0..64.0),
            }),
        },
        lights: LightingRig {
            ambient: Rgb::from_fn(|_, _| rng.gen_range(0.0..0.3)),
            lights,
        },
    }
}

fn ambient_term(material: &Material, lights: &LightingRig) -> Rgb {
    match &material.albedo {
        Albedo::Uniform(rho) => rho.component_mul(&lights.ambient),
        Albedo::PerPixel(_) => unreachable!("uniform albedo only"),
    }
}

fn map2(a: &Image, b: &Image, f: impl Fn(&Rgb, &Rgb) -> Rgb) -> Image {
    Grid::from_vec(
        a.rows(),
        a.cols(),
        a.iter().zip(b.iter()).map(|(x, y)| f(x, y)).collect(),
    )
    .unwrap()
}

fn rotate_camera(camera: &Camera, q: &UnitQuaternion<f64>, pivot: &Vec3, shift: &Vec3) -> Camera {
    let move_point = |p: Vec3| q * (p - pivot) + pivot + shift;
    Camera::new(
        move_point(camera.position()),
        move_point(camera.look_at()),
        q * camera.up(),
        camera.focal_mm(),
        camera.sensor_mm(),
        camera.resolution(),
    )
    .unwrap()
}

/// Largest violations of light linearity, light additivity, albedo scaling and
/// rigid-motion equivariance over `count` random configurations.
pub fn shading_identity_errors(seed: u64, count: usize) -> [f64; 4] {
    let mut worst = [0.0f64; 4];
    for i in 0..count {
        let mut rng = item_rng(seed, i as u64);
        let cfg = random_shading_config(&mut rng, i % 2 == 1);
        let base = render(&cfg.depth, &cfg.camera, &cfg.material, &cfg.lights).unwrap();
        let amb = ambient_term(&cfg.material, &cfg.lights);

        let s = rng.gen_range(0.0..3.0);
        let mut scaled = cfg.lights.clone();
        for l in &mut scaled.lights {
            l.color *= s;
        }
        let img = render(&cfg.depth, &cfg.camera, &cfg.material, &scaled).unwrap();
        let expected = base.map(|p| amb + (p - amb) * s);
        worst[0] = worst[0].max(max_abs_diff(&img, &expected));

        let (first, rest) = cfg.lights.lights.split_at(1);
        let part = |ls: &[PointLight]| {
            let rig = LightingRig {
                ambient: cfg.lights.ambient,
                lights: ls.to_vec(),
            };
            render(&cfg.depth, &cfg.camera, &cfg.material, &rig).unwrap()
        };
        let sum = map2(&part(first), &part(rest), |a, b| a + b - amb);
        worst[1] = worst[1].max(max_abs_diff(&base, &sum));

        let diffuse = Material {
            specular: None,
            ..cfg.material.clone()
        };
        let plain = render(&cfg.depth, &cfg.camera, &diffuse, &cfg.lights).unwrap();
        let k = rng.gen_range(0.0..1.0);
        let dim = Material {
            albedo: diffuse.albedo.scaled(k),
            specular: None,
        };
        let img = render(&cfg.depth, &cfg.camera, &dim, &cfg.lights).unwrap();
        worst[2] = worst[2].max(max_abs_diff(&img, &plain.map(|p| p * k)));

        let q = UnitQuaternion::from_quaternion(Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        let pivot = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        let shift = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
        let camera = rotate_camera(&cfg.camera, &q, &pivot, &shift);
        let mut moved = cfg.lights.clone();
        for l in &mut moved.lights {
            l.position = q * (l.position - pivot) + pivot + shift;
        }
        let img = render(&cfg.depth, &camera, &cfg.material, &moved).unwrap();
        worst[3] = worst[3].max(max_abs_diff(&img, &base));
    }
    worst
}

/// Per-pixel transcription of the local illumination model in world space.
pub fn oracle_shade(
    positions: &Grid<Vec3>,
    normals: &Grid<Vec3>,
    camera: &Camera,
    material: &Material,
    rig: &LightingRig,
) -> Image {
    let rho = match &material.albedo {
        Albedo::Uniform(rho) => *rho,
        Albedo::PerPixel(_) => unreachable!("uniform albedo only"),
    };
    let eye = camera.position();
    Grid::from_fn(positions.rows(), positions.cols(), |r, c| {
        let p = camera.camera_to_world(&positions[(r, c)]);
        let n = camera.direction_to_world(&normals[(r, c)]);
        let v = (eye - p).normalize();
        let mut diffuse = rig.ambient;
        let mut highlight = Rgb::zeros();
        for light in &rig.lights {
            let d = light.position - p;
            let dist = d.norm();
            let l = d / dist;
            let falloff = light.k_l * dist + light.k_q * dist * dist;
            let cos = n.dot(&l);
            if cos > 0.0 {
                diffuse += light.color * cos / falloff;
                if let Some(spec) = &material.specular {
                    let reflected = 2.0 * cos * n - l;
                    let rv = reflected.dot(&v).max(0.0);
                    highlight += spec.k_s.component_mul(&light.color) * rv.powf(spec.shininess) / falloff;
                }
            }
        }
        rho.component_mul(&diffuse) + highlight
    })
}

/// Sphere scene with two lights: largest relative gap between the renderer
/// and [`oracle_shade`].
pub fn oracle_shading_error(specular: Option<Specular>) -> f64 {
    let mut scene = sphere_scene(64);
    scene.material.specular = specular;
    scene.lights.lights.push(PointLight {
        position: Vec3::new(-2.0, 1.0, 4.0),
        color: Rgb::new(0.9, 0.6, 0.3),
        k_l: 0.2,
        k_q: 0.1,
    });
    let camera = &scene.camera;
    let depth = trace(&scene, camera).unwrap().depth;
    let image = render(&depth, camera, &scene.material, &scene.lights).unwrap();
    let positions = backproject(&depth, camera).unwrap();
    let normals = estimate_normals(&positions).unwrap().normals;
    let oracle = oracle_shade(&positions, &normals, camera, &scene.material, &scene.lights);
    image
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).amax() / b.amax().max(1.0))
        .fold(0.0, f64::max)
}

/// Number of pixels whose specular-only response exceeds half its maximum.
pub fn phong_lobe_area(shininess: f64) -> usize {
    let mut scene = sphere_scene(96);
    scene.material = Material {
        albedo: Albedo::Uniform(Rgb::zeros()),
        specular: Some(Specular {
            k_s: Rgb::repeat(1.0),
            shininess,
        }),
    };
    scene.lights = LightingRig {
        ambient: Rgb::zeros(),
        lights: vec![PointLight {
            position: Vec3::new(3.0, 2.0, 4.0),
            color: Rgb::repeat(1.0),
            k_l: 0.0,
            k_q: 0.05,
        }],
    };
    let depth = trace(&scene, &scene.camera).unwrap().depth;
    let image = render(&depth, &scene.camera, &scene.material, &scene.lights).unwrap();
    let peak = image.iter().map(|p| p.x).fold(0.0, f64::max);
    assert!(peak > 0.0);
    image.iter().filter(|p| p.x > 0.5 * peak).count()
}

// ---------------------------------------------------------------- tracer

/// 1-Lipschitz function of the unit-frame point, non-positive exactly inside the solid.
fn local_bound(kind: PrimitiveKind, q: &Vec3) -> f64 {
    let radial = (q.x * q.x + q.y * q.y).sqrt();
    match kind {
        PrimitiveKind::Sphere => q.norm() - 1.0,
        PrimitiveKind::Box => q.x.abs().max(q.y.abs()).max(q.z.abs()) - 1.0,
        PrimitiveKind::Cylinder => (radial - 1.0).max(q.z.abs() - 1.0),
        PrimitiveKind::Cone => ((2.0 * radial + q.z - 1.0) / 5f64.sqrt()).max(-1.0 - q.z),
    }
}

/// Lower bound on the world distance from `p` to the primitive, non-positive inside.
fn primitive_bound(obj: &Primitive, p: &Vec3) -> f64 {
    let r: Matrix3<f64> = obj.orientation().to_rotation_matrix().into_inner();
    let s = obj.scale();
    let rel = r.transpose() * (p - obj.center());
    let q = Vec3::new(rel.x / s.x, rel.y / s.y, rel.z / s.z);
    local_bound(obj.kind(), &q) * s.min()
}

/// Distance from `p` to the nearest wall, non-positive outside the room.
fn room_bound(room: &Room, p: &Vec3) -> f64 {
    (0..3)
        .map(|i| (p[i] - room.min[i]).min(room.max[i] - p[i]))
        .fold(f64::INFINITY, f64::min)
}

fn free_space_bound(scene: &SceneSpec, p: &Vec3) -> f64 {
    scene
        .objects
        .iter()
        .map(|o| primitive_bound(o, p))
        .fold(room_bound(&scene.room, p), f64::min)
}

/// First ray parameter where the ray enters solid matter, found by marching
/// with steps that never cross a surface, then bisecting the bracket.
pub fn march_depth(scene: &SceneSpec, origin: &Vec3, dir: &Vec3) -> f64 {
    const MIN_STEP: f64 = 1e-6;
    let speed = dir.norm();
    let solid = |t: f64| free_space_bound(scene, &(origin + dir * t)) <= 0.0;
    let (mut lo, mut t) = (0.0, 0.0);
    for _ in 0..10_000_000 {
        let b = free_space_bound(scene, &(origin + dir * t));
        if b <= 0.0 {
            let mut hi = t;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if solid(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        lo = t;
        t += b.max(MIN_STEP) / speed;
    }
    panic!("ray march did not terminate");
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TracerStats {
    pub pixels: usize,
    pub max_depth_error: f64,
    pub max_surface_residual: f64,
}

pub fn scene_config(resolution: usize) -> SceneConfig {
    SceneConfig {
        resolution: [resolution, resolution],
        ..SceneConfig::default()
    }
}

/// Analytic tracer vs [`march_depth`] on every pixel of `scenes` random scenes,
/// plus the implicit-surface residual of each back-projected surfel.
pub fn tracer_stats(seed: u64, scenes: usize, resolution: usize) -> TracerStats {
    let config = scene_config(resolution);
    let mut stats = TracerStats::default();
    for i in 0..scenes {
        let scene = sample_scene(&mut item_rng(seed, i as u64), &config, seed).unwrap();
        let camera = &scene.camera;
        let traced = trace(&scene, camera).unwrap();
        let origin = camera.position();
        for (r, c, &d) in traced.depth.as_grid().indexed() {
            let dir = camera.direction_to_world(&camera.pixel_ray(r, c));
            let marched = march_depth(&scene, &origin, &dir);
            stats.max_depth_error = stats.max_depth_error.max((marched - d).abs());
            let p = origin + dir * d;
            let residual = match traced.surface[(r, c)] {
                Surface::Wall => scene.room.surface_residual(&p),
                Surface::Object(k) => scene.objects[k].surface_residual(&p),
            };
            stats.max_surface_residual = stats.max_surface_residual.max(residual.abs());
            stats.pixels += 1;
        }
    }
    stats
}

/// Camera on the -z axis at distance 5 from a unit sphere; depth at the center pixel.
pub fn on_axis_sphere_depth() -> f64 {
    let camera = Camera::new(
        Vec3::new(0.0, 0.0, -5.0),
        Vec3::zeros(),
        Vec3::y(),
        20.0,
        24.0,
        (65, 65),
    )
    .unwrap();
    let mut scene = sphere_scene(65);
    scene.camera = camera.clone();
    trace(&scene, &camera).unwrap().depth.get(32, 32)
}

// ---------------------------------------------------------------- iqtt

/// The 24 proper rotations of the cube as signed permutation matrices.
pub fn cube_rotations() -> Vec<Matrix3<f64>> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (row, &col) in p.iter().enumerate() {
                m[(row, col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    assert_eq!(out.len(), 24);
    out
}

fn parse_cells(id: &str) -> Vec<Vec3> {
    id.split(';')
        .map(|cell| {
            let v: Vec<f64> = cell.split(',').map(|x| x.trim().parse().unwrap()).collect();
            Vec3::new(v[0], v[1], v[2])
        })
        .collect()
}

/// Cube centers of a view, mirrored if flagged and centered on their mean,
/// before rotation.
pub fn view_cells(view: &ShapeView) -> Vec<Vec3> {
    let mut cells = parse_cells(&view.shape_id);
    if view.mirrored {
        for c in &mut cells {
            c.x = -c.x;
        }
    }
    let mean = cells.iter().fold(Vec3::zeros(), |a, c| a + c) / cells.len() as f64;
    cells.iter().map(|c| c - mean).collect()
}

fn view_rotation(view: &ShapeView) -> UnitQuaternion<f64> {
    let [w, x, y, z] = view.rotation;
    UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
}

fn same_set(a: &[Vec3], b: &[Vec3]) -> bool {
    a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| (p - q).amax() < 1e-6))
}

/// True when undoing the candidate's rotation, applying some cube rotation and
/// then the reference rotation lands exactly on the reference cubes.
pub fn rotation_oracle(reference: &ShapeView, candidate: &ShapeView) -> bool {
    let r0 = view_rotation(reference).to_rotation_matrix().into_inner();
    let rc = view_rotation(candidate).to_rotation_matrix().into_inner();
    let target: Vec<Vec3> = view_cells(reference).iter().map(|p| r0 * p).collect();
    let shown: Vec<Vec3> = view_cells(candidate).iter().map(|p| rc * p).collect();
    cube_rotations().iter().any(|g| {
        let m = r0 * g * rc.transpose();
        same_set(&shown.iter().map(|p| m * p).collect::<Vec<_>>(), &target)
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IqttStats {
    pub questions: usize,
    pub oracle_failures: usize,
    pub slot_counts: [usize; 3],
    pub regeneration_mismatches: usize,
}

pub fn iqtt_plan(seed: u64, index: usize, config: &IqttConfig) -> IqttPlan {
    plan_iqtt(&mut item_rng(seed, index as u64), config).unwrap()
}

/// Oracle and slot counts over `count` plans; the first `rendered` questions are
/// also rendered twice from a fresh generator and compared bit for bit.
pub fn iqtt_stats(seed: u64, count: usize, rendered: usize, config: &IqttConfig) -> IqttStats {
    let mut stats = IqttStats::default();
    for i in 0..count {
        let plan = iqtt_plan(seed, i, config);
        stats.questions += 1;
        stats.slot_counts[plan.answer] += 1;
        let p = &plan.provenance;
        let ok = p
            .candidates
            .iter()
            .enumerate()
            .all(|(k, c)| rotation_oracle(&p.reference, c) == (k == plan.answer));
        if !ok {
            stats.oracle_failures += 1;
        }
        let again = iqtt_plan(seed, i, config);
        let mut same = serde_json::to_string(&plan).unwrap() == serde_json::to_string(&again).unwrap();
        if i < rendered {
            let a = render_iqtt(&plan, config).unwrap();
            let b = render_iqtt(&again, config).unwrap();
            let bits = |q: &surfelgrad_core::scenegen::IqttQuestion| -> Vec<u64> {
                std::iter::once(&q.reference)
                    .chain(q.candidates.iter())
                    .flat_map(|img| {
                        img.iter()
                            .flat_map(|p| p.iter().map(|x| x.to_bits()))
                            .collect::<Vec<_>>()
                    })
                    .collect()
            };
            same &= bits(&a) == bits(&b);
        }
        if !same {
            stats.regeneration_mismatches += 1;
        }
    }
    stats
}
