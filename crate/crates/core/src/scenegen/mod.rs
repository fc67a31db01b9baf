//! Procedural room scenes with analytic ground-truth depth, camera and light
//! sampling, and mental-rotation question generation.

mod iqtt;
mod polycube;
mod primitive;

pub use iqtt::{
    gen_iqtt, plan_iqtt, render_iqtt, voxel_oracle_matches, IqttConfig, IqttPlan, IqttQuestion, Provenance, ShapeView,
};
pub use polycube::{
    grid_rotation_matrix, grid_rotation_quaternion, grid_rotations, rotate_cell, sample_polycube, Cell, GridRotation,
    Polycube, MAX_POLYCUBE_ATTEMPTS,
};
pub use primitive::{Primitive, PrimitiveKind, MIN_HIT_T};

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Rgb, Vec3};
use crate::grid::Grid;
use crate::shading::{render, Albedo, Image, LightingRig, Material, PointLight, Specular};
use crate::surfel::{DepthMap, NormalField, SurfelField};

/// Rejections tolerated by the scene samplers before reporting failure.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

pub const DEFAULT_FOCAL_RANGE_MM: [f64; 2] = [18.0, 25.0];
pub const DEFAULT_SENSOR_MM: f64 = 24.0;

/// Largest `y` component of an octant-patch direction; keeps the `+y` up
/// vector away from the view axis.
pub const OCTANT_PATCH_MAX_Y: f64 = 0.95;

/// Axis-aligned room interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub min: Vec3,
    pub max: Vec3,
}

impl Default for Room {
    fn default() -> Self {
        Self {
            min: Vec3::repeat(-5.0),
            max: Vec3::repeat(5.0),
        }
    }
}

impl Room {
    pub fn validate(&self) -> Result<()> {
        let finite = self.min.iter().chain(self.max.iter()).all(|x| x.is_finite());
        if !finite || (0..3).any(|i| self.min[i] >= self.max[i]) {
            return Err(Error::InvalidParam(format!(
                "room min {:?} must be below max {:?} on every axis",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// True when the ball of radius `margin` about `p` lies inside the room.
    pub fn contains(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|i| p[i] - margin > self.min[i] && p[i] + margin < self.max[i])
    }

    /// Distance to the nearest wall along the ray, for an origin inside the room.
    pub fn intersect(&self, origin: &Vec3, direction: &Vec3) -> Option<f64> {
        let mut best = f64::INFINITY;
        for i in 0..3 {
            let t = if direction[i] > 0.0 {
                (self.max[i] - origin[i]) / direction[i]
            } else if direction[i] < 0.0 {
                (self.min[i] - origin[i]) / direction[i]
            } else {
                continue;
            };
            best = best.min(t);
        }
        (best.is_finite() && best > MIN_HIT_T).then_some(best)
    }

    /// Signed distance to the nearest wall, negative inside.
    pub fn surface_residual(&self, p: &Vec3) -> f64 {
        (0..3)
            .map(|i| -(p[i] - self.min[i]).min(self.max[i] - p[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A room with objects, one material, a light rig and a camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: Room,
    pub objects: Vec<Primitive>,
    pub material: Material,
    pub lights: LightingRig,
    pub camera: Camera,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        for (i, obj) in self.objects.iter().enumerate() {
            if !self.room.contains(&obj.center(), obj.bounding_radius()) {
                return Err(Error::InvalidParam(format!("object {i} is not inside the room")));
            }
        }
        self.material.validate()?;
        self.lights.validate()?;
        self.check_camera(&self.camera)
    }

    fn check_camera(&self, camera: &Camera) -> Result<()> {
        if !self.room.contains(&camera.position(), 0.0) {
            return Err(Error::InvalidParam(format!(
                "camera at {:?} is outside the room",
                camera.position()
            )));
        }
        Ok(())
    }

    /// Mean of the object centers, or the room center when empty.
    pub fn center_of_mass(&self) -> Vec3 {
        center_of_mass(&self.objects).unwrap_or_else(|| self.room.center())
    }
}

fn center_of_mass(objects: &[Primitive]) -> Option<Vec3> {
    if objects.is_empty() {
        return None;
    }
    let sum = objects.iter().fold(Vec3::zeros(), |acc, o| acc + o.center());
    Some(sum / objects.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraMode {
    /// Directions in the positive octant with `y <= OCTANT_PATCH_MAX_Y`.
    OctantPatch,
    FullSphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_objects: usize,
    pub kinds: Vec<PrimitiveKind>,
    pub room: Room,
    /// Per-axis scale bounds of each primitive.
    pub scale_range: [f64; 2],
    /// Object centers are drawn from the room box shrunk about its center by this factor.
    pub placement_fraction: f64,
    /// `[rows, cols]`
    pub resolution: [usize; 2],
    pub camera_mode: CameraMode,
    pub camera_radius: [f64; 2],
    pub focal_range_mm: [f64; 2],
    pub n_lights: usize,
    pub light_radius: [f64; 2],
    pub ambient: f64,
    pub albedo: Rgb,
    pub specular: Option<Specular>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_objects: 3,
            kinds: PrimitiveKind::ALL.to_vec(),
            room: Room::default(),
            scale_range: [0.4, 1.0],
            placement_fraction: 0.5,
            resolution: [128, 128],
            camera_mode: CameraMode::OctantPatch,
            camera_radius: [3.5, 6.0],
            focal_range_mm: DEFAULT_FOCAL_RANGE_MM,
            n_lights: 1,
            light_radius: [2.0, 4.5],
            ambient: 0.1,
            albedo: Rgb::repeat(0.8),
            specular: None,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
        return Err(Error::InvalidParam(format!(
            "{name} must satisfy 0 < min <= max, got {r:?}"
        )));
    }
    Ok(())
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_objects == 0 {
            return Err(Error::InvalidParam("n_objects must be at least 1".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidParam("kinds must not be empty".into()));
        }
        self.room.validate()?;
        check_range("scale_range", self.scale_range)?;
        check_range("camera_radius", self.camera_radius)?;
        check_range("focal_range_mm", self.focal_range_mm)?;
        check_range("light_radius", self.light_radius)?;
        if !(self.placement_fraction > 0.0 && self.placement_fraction <= 1.0) {
            return Err(Error::InvalidParam("placement_fraction must be in (0, 1]".into()));
        }
        if self.resolution[0] < 2 || self.resolution[1] < 2 {
            return Err(Error::InvalidParam("resolution must be at least 2x2".into()));
        }
        if !(self.ambient >= 0.0 && self.ambient.is_finite()) {
            return Err(Error::InvalidParam("ambient must be non-negative".into()));
        }
        Material {
            albedo: Albedo::Uniform(self.albedo),
            specular: self.specular.clone(),
        }
        .validate()
    }
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(
        b * (2.0 * PI * u3).cos(),
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q)
}

/// Uniform direction over the sampling domain of `mode`.
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R, mode: CameraMode) -> Vec3 {
    match mode {
        CameraMode::FullSphere => random_unit_vector(rng),
        CameraMode::OctantPatch => loop {
            let u = random_unit_vector(rng).abs();
            if u.y <= OCTANT_PATCH_MAX_Y && u.iter().all(|&x| x > 0.0) {
                break u;
            }
        },
    }
}

fn up_for(direction: &Vec3) -> Vec3 {
    if direction.y.abs() > 0.99 {
        Vec3::z()
    } else {
        Vec3::y()
    }
}

/// Camera at `target + r * u` looking at `target`, with `u` drawn from `mode`'s
/// domain, `r` uniform in `radius_range` and the focal length uniform in the
/// default range. Sensor width is 24 mm.
pub fn sample_camera_pose<R: Rng + ?Sized>(
    rng: &mut R,
    mode: CameraMode,
    radius_range: [f64; 2],
    target: Vec3,
    resolution: (usize, usize),
) -> Result<Camera> {
    sample_camera_with_focal(rng, mode, radius_range, DEFAULT_FOCAL_RANGE_MM, target, resolution)
}

fn sample_camera_with_focal<R: Rng + ?Sized>(
    rng: &mut R,
    mode: CameraMode,
    radius_range: [f64; 2],
    focal_range: [f64; 2],
    target: Vec3,
    resolution: (usize, usize),
) -> Result<Camera> {
    check_range("radius_range", radius_range)?;
    check_range("focal_range", focal_range)?;
    let u = sample_direction(rng, mode);
    let r = rng.gen_range(radius_range[0]..=radius_range[1]);
    let focal = rng.gen_range(focal_range[0]..=focal_range[1]);
    Camera::new(target + u * r, target, up_for(&u), focal, DEFAULT_SENSOR_MM, resolution)
}

/// Point light with a random color whose quadratic falloff is normalized to 1
/// at the distance to `target`.
pub fn sample_light<R: Rng + ?Sized>(
    rng: &mut R,
    mode: CameraMode,
    radius_range: [f64; 2],
    target: Vec3,
) -> Result<PointLight> {
    check_range("light radius", radius_range)?;
    let u = sample_direction(rng, mode);
    let r = rng.gen_range(radius_range[0]..=radius_range[1]);
    let color = Rgb::from_fn(|_, _| rng.gen_range(0.5..=1.0));
    Ok(PointLight {
        position: target + u * r,
        color,
        k_l: 0.0,
        k_q: 1.0 / (r * r),
    })
}

fn clear_of_objects(p: &Vec3, objects: &[Primitive], margin: f64) -> bool {
    objects
        .iter()
        .all(|o| (p - o.center()).norm() > o.bounding_radius() + margin)
}

/// Non-overlapping random primitives inside the room, seen by a camera and lit
/// by lights that are both placed inside the room.
pub fn sample_scene<R: Rng + ?Sized>(rng: &mut R, config: &SceneConfig, seed: u64) -> Result<SceneSpec> {
    config.validate()?;
    let room = config.room;
    let half = (room.max - room.min) * (0.5 * config.placement_fraction);
    let center = room.center();

    let mut objects: Vec<Primitive> = Vec::with_capacity(config.n_objects);
    let mut rejections = 0;
    while objects.len() < config.n_objects {
        let kind = config.kinds[rng.gen_range(0..config.kinds.len())];
        let scale = Vec3::from_fn(|_, _| rng.gen_range(config.scale_range[0]..=config.scale_range[1]));
        let orientation = random_rotation(rng);
        let c = Vec3::from_fn(|i, _| center[i] + rng.gen_range(-half[i]..=half[i]));
        let obj = Primitive::new(kind, c, scale, orientation)?;
        let r = obj.bounding_radius();
        let fits = room.contains(&c, r)
            && objects
                .iter()
                .all(|o| (o.center() - c).norm() >= o.bounding_radius() + r);
        if fits {
            objects.push(obj);
        } else {
            rejections += 1;
            if rejections >= MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementFailure { attempts: rejections });
            }
        }
    }

    let target = center_of_mass(&objects).unwrap_or(center);
    let resolution = (config.resolution[0], config.resolution[1]);
    let margin = 0.05 * room.diagonal();
    let mut rejections = 0;
    let camera = loop {
        let cam = sample_camera_with_focal(
            rng,
            config.camera_mode,
            config.camera_radius,
            config.focal_range_mm,
            target,
            resolution,
        )?;
        if room.contains(&cam.position(), margin) && clear_of_objects(&cam.position(), &objects, margin) {
            break cam;
        }
        rejections += 1;
        if rejections >= MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementFailure { attempts: rejections });
        }
    };

    let mut lights = Vec::with_capacity(config.n_lights);
    let mut rejections = 0;
    while lights.len() < config.n_lights {
        let light = sample_light(rng, config.camera_mode, config.light_radius, target)?;
        if room.contains(&light.position, margin) && clear_of_objects(&light.position, &objects, margin) {
            lights.push(light);
        } else {
            rejections += 1;
            if rejections >= MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementFailure { attempts: rejections });
            }
        }
    }

    let scene = SceneSpec {
        room,
        objects,
        material: Material {
            albedo: Albedo::Uniform(config.albedo),
            specular: config.specular.clone(),
        },
        lights: LightingRig {
            ambient: Rgb::repeat(config.ambient),
            lights,
        },
        camera,
        seed,
    };
    scene.validate()?;
    Ok(scene)
}

/// What a primary ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    Wall,
    Object(usize),
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub depth: DepthMap,
    pub surface: Grid<Surface>,
}

impl Trace {
    /// Pixels that landed on an object.
    pub fn object_mask(&self) -> Grid<bool> {
        self.surface.map(|s| matches!(s, Surface::Object(_)))
    }
}

/// Nearest intersection of a world ray with the scene.
pub fn intersect_scene(scene: &SceneSpec, origin: &Vec3, direction: &Vec3) -> Option<(f64, Surface)> {
    let mut best = scene.room.intersect(origin, direction).map(|t| (t, Surface::Wall));
    for (i, obj) in scene.objects.iter().enumerate() {
        if let Some(t) = obj.intersect(origin, direction) {
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, Surface::Object(i)));
            }
        }
    }
    best
}

/// Ray-traced z-depth and hit surface per pixel.
pub fn trace(scene: &SceneSpec, camera: &Camera) -> Result<Trace> {
    scene.room.validate()?;
    scene.check_camera(camera)?;
    let (rows, cols) = camera.resolution();
    let origin = camera.position();
    let hits: Vec<(f64, Surface)> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            // camera-space z of the direction is -1, so t is the z-depth
            let dir = camera.direction_to_world(&camera.pixel_ray(r, c));
            intersect_scene(scene, &origin, &dir).ok_or(Error::NoHit { row: r, col: c })
        })
        .collect::<Result<_>>()?;
    let (depth, surface): (Vec<f64>, Vec<Surface>) = hits.into_iter().unzip();
    Ok(Trace {
        depth: DepthMap::from_vec(rows, cols, depth)?,
        surface: Grid::from_vec(rows, cols, surface)?,
    })
}

pub fn trace_depth(scene: &SceneSpec, camera: &Camera) -> Result<DepthMap> {
    Ok(trace(scene, camera)?.depth)
}

/// Ground truth for one view of a scene.
#[derive(Debug, Clone)]
pub struct SceneView {
    pub trace: Trace,
    pub image: Image,
    pub normals: NormalField,
}

/// Traces the scene and shades the resulting surfels.
pub fn render_scene(scene: &SceneSpec, camera: &Camera) -> Result<SceneView> {
    let trace = trace(scene, camera)?;
    let image = render(&trace.depth, camera, &scene.material, &scene.lights)?;
    let field = SurfelField::from_depth(&trace.depth, camera, scene.material.albedo.clone())?;
    Ok(SceneView {
        trace,
        image,
        normals: NormalField {
            normals: field.normals,
            degenerate: field.degenerate,
        },
    })
}

/// Unit sphere resting on the floor of the default room, seen from above and
/// lit by a point light at the camera.
pub fn demo_scene(resolution: usize) -> Result<SceneSpec> {
    let room = Room::default();
    let center = Vec3::new(0.0, room.min.y + 1.001, 0.0);
    let eye = Vec3::new(2.5, -1.0, 3.0);
    let camera = Camera::new(
        eye,
        center,
        Vec3::y(),
        20.0,
        DEFAULT_SENSOR_MM,
        (resolution, resolution),
    )?;
    let dist = (eye - center).norm();
    let scene = SceneSpec {
        room,
        objects: vec![Primitive::new(
            PrimitiveKind::Sphere,
            center,
            Vec3::repeat(1.0),
            UnitQuaternion::identity(),
        )?],
        material: Material::diffuse(Rgb::repeat(0.8)),
        lights: LightingRig {
            ambient: Rgb::repeat(0.1),
            lights: vec![PointLight {
                position: eye,
                color: Rgb::repeat(1.0),
                k_l: 0.0,
                k_q: 1.0 / (dist * dist),
            }],
        },
        camera,
        seed: 0,
    };
    scene.validate()?;
    Ok(scene)
}
