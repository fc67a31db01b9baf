use nalgebra::{Quaternion, UnitQuaternion};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    grid_rotation_matrix, grid_rotations, random_rotation, sample_camera_pose, sample_light, sample_polycube,
    CameraMode, Polycube, Primitive, PrimitiveKind, Room, SceneSpec, Surface,
};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Rgb, Vec3};
use crate::shading::{render, Image, LightingRig, Material};

/// Tolerance used when matching rotated cell centers.
const POINT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IqttConfig {
    /// Cubes per shape.
    pub k: usize,
    pub image_size: usize,
    pub camera_radius: [f64; 2],
    pub n_lights: usize,
    pub light_radius: [f64; 2],
    pub ambient: f64,
    pub albedo: f64,
    /// Smallest angle between the reference and correct-candidate rotations.
    pub min_rotation_deg: f64,
}

impl Default for IqttConfig {
    fn default() -> Self {
        Self {
            k: 8,
            image_size: 128,
            camera_radius: [14.0, 16.0],
            n_lights: 1,
            light_radius: [10.0, 14.0],
            ambient: 0.1,
            albedo: 0.8,
            min_rotation_deg: 15.0,
        }
    }
}

impl IqttConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 4 {
            return Err(Error::InvalidParam(format!("k must be at least 4, got {}", self.k)));
        }
        if self.image_size < 2 {
            return Err(Error::InvalidParam("image_size must be at least 2".into()));
        }
        if !(self.ambient >= 0.0 && (0.0..=1.0).contains(&self.albedo)) {
            return Err(Error::InvalidParam("ambient must be >= 0 and albedo in [0, 1]".into()));
        }
        if !(0.0..180.0).contains(&self.min_rotation_deg) {
            return Err(Error::InvalidParam("min_rotation_deg must be in [0, 180)".into()));
        }
        // the camera must stay outside every shape
        if !(self.camera_radius[0] > self.k as f64 && self.camera_radius[0] <= self.camera_radius[1]) {
            return Err(Error::InvalidParam(format!(
                "camera_radius must satisfy k < min <= max, got {:?}",
                self.camera_radius
            )));
        }
        if !(self.light_radius[0] > 0.0 && self.light_radius[0] <= self.light_radius[1]) {
            return Err(Error::InvalidParam("light_radius must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }

    fn backdrop(&self) -> Room {
        let h = 4.0 * (self.camera_radius[1] + self.light_radius[1]);
        Room {
            min: Vec3::repeat(-h),
            max: Vec3::repeat(h),
        }
    }
}

/// One rendered shape: the canonical cells of `shape_id`, optionally mirrored
/// through `x = 0`, centered on their centroid and rotated by `rotation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeView {
    pub shape_id: String,
    /// `[w, x, y, z]`
    pub rotation: [f64; 4],
    pub mirrored: bool,
}

impl ShapeView {
    fn new(shape: &Polycube, rotation: &UnitQuaternion<f64>, mirrored: bool) -> Self {
        let q = rotation.quaternion();
        Self {
            shape_id: shape.shape_id(),
            rotation: [q.w, q.i, q.j, q.k],
            mirrored,
        }
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }

    /// Cells before rotation.
    pub fn cells(&self) -> Result<Polycube> {
        let canonical = Polycube::parse_cells(&self.shape_id)?;
        Ok(if self.mirrored { canonical.mirrored() } else { canonical })
    }

    /// World-space cube centers.
    pub fn world_points(&self) -> Result<Vec<Vec3>> {
        let q = self.rotation();
        Ok(self.cells()?.centered_points().iter().map(|p| q * p).collect())
    }

    fn primitives(&self) -> Result<Vec<Primitive>> {
        let q = self.rotation();
        self.world_points()?
            .into_iter()
            .map(|c| Primitive::new(PrimitiveKind::Box, c, Vec3::repeat(0.5), q))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub reference: ShapeView,
    pub candidates: [ShapeView; 3],
}

/// Everything that determines a question except the pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqttPlan {
    pub answer: usize,
    pub provenance: Provenance,
    pub camera: Camera,
    pub lights: LightingRig,
}

#[derive(Debug, Clone)]
pub struct IqttQuestion {
    pub reference: Image,
    pub candidates: [Image; 3],
    pub answer_index: usize,
    pub provenance: Provenance,
}

/// Samples shapes, rotations, camera, lights and the answer slot.
pub fn plan_iqtt<R: Rng + ?Sized>(rng: &mut R, config: &IqttConfig) -> Result<IqttPlan> {
    config.validate()?;
    let shape = sample_polycube(rng, config.k)?.canonical();
    let other = (0..super::MAX_PLACEMENT_ATTEMPTS)
        .map(|_| sample_polycube(rng, config.k).map(|s| s.canonical()))
        .find(|s| match s {
            Ok(s) => !s.same_shape(&shape) && !s.same_shape(&shape.mirrored()),
            Err(_) => true,
        })
        .unwrap_or_else(|| Err(Error::SamplingFailure("no distinct distractor shape".into())))?;

    let r0 = random_rotation(rng);
    let min_angle = config.min_rotation_deg.to_radians();
    let r1 = loop {
        let r = random_rotation(rng);
        if r0.angle_to(&r) >= min_angle {
            break r;
        }
    };
    let r_mirror = random_rotation(rng);
    let r_other = random_rotation(rng);

    let correct = ShapeView::new(&shape, &r1, false);
    let mut distractors = [
        ShapeView::new(&shape, &r_mirror, true),
        ShapeView::new(&other, &r_other, false),
    ];
    distractors.shuffle(rng);
    let answer = rng.gen_range(0..3);
    let mut rest = distractors.into_iter();
    let candidates: [ShapeView; 3] = std::array::from_fn(|i| {
        if i == answer {
            correct.clone()
        } else {
            rest.next().expect("two distractors")
        }
    });

    let size = (config.image_size, config.image_size);
    let camera = sample_camera_pose(rng, CameraMode::FullSphere, config.camera_radius, Vec3::zeros(), size)?;
    let lights = (0..config.n_lights)
        .map(|_| sample_light(rng, CameraMode::FullSphere, config.light_radius, Vec3::zeros()))
        .collect::<Result<Vec<_>>>()?;
    Ok(IqttPlan {
        answer,
        provenance: Provenance {
            reference: ShapeView::new(&shape, &r0, false),
            candidates,
        },
        camera,
        lights: LightingRig {
            ambient: Rgb::repeat(config.ambient),
            lights,
        },
    })
}

/// Renders one shape view in front of a distant backdrop, then blacks out the backdrop.
fn render_view(view: &ShapeView, plan: &IqttPlan, config: &IqttConfig) -> Result<Image> {
    let scene = SceneSpec {
        room: config.backdrop(),
        objects: view.primitives()?,
        material: Material::diffuse(Rgb::repeat(config.albedo)),
        lights: plan.lights.clone(),
        camera: plan.camera.clone(),
        seed: 0,
    };
    let trace = super::trace(&scene, &plan.camera)?;
    let mut image = render(&trace.depth, &plan.camera, &scene.material, &scene.lights)?;
    for (px, s) in image.as_mut_slice().iter_mut().zip(trace.surface.iter()) {
        if *s == Surface::Wall {
            *px = Rgb::zeros();
        }
    }
    Ok(image)
}

pub fn render_iqtt(plan: &IqttPlan, config: &IqttConfig) -> Result<IqttQuestion> {
    let prov = &plan.provenance;
    let reference = render_view(&prov.reference, plan, config)?;
    let c0 = render_view(&prov.candidates[0], plan, config)?;
    let c1 = render_view(&prov.candidates[1], plan, config)?;
    let c2 = render_view(&prov.candidates[2], plan, config)?;
    Ok(IqttQuestion {
        reference,
        candidates: [c0, c1, c2],
        answer_index: plan.answer,
        provenance: prov.clone(),
    })
}

pub fn gen_iqtt<R: Rng + ?Sized>(rng: &mut R, config: &IqttConfig) -> Result<IqttQuestion> {
    render_iqtt(&plan_iqtt(rng, config)?, config)
}

fn same_point_set(a: &[Vec3], b: &[Vec3]) -> bool {
    a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| (p - q).amax() < POINT_TOLERANCE))
}

/// True when some grid rotation, composed with the stored rotations, maps the
/// candidate's cubes exactly onto the reference's.
pub fn voxel_oracle_matches(reference: &ShapeView, candidate: &ShapeView) -> Result<bool> {
    let target = reference.world_points()?;
    let r0 = reference.rotation();
    let rc_inv = candidate.rotation().inverse();
    let local: Vec<Vec3> = candidate.world_points()?.iter().map(|p| rc_inv * p).collect();
    Ok(grid_rotations().iter().any(|m| {
        let g = grid_rotation_matrix(m);
        let mapped: Vec<Vec3> = local.iter().map(|p| r0 * (g * p)).collect();
        same_point_set(&mapped, &target)
    }))
}
