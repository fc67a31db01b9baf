//! Local shading of surfels: ambient plus attenuated Lambertian point lights,
//! with an optional Phong specular lobe.
//!
//! For a surfel at `P` with normal `N` and reflectance `rho`, each light `j` at
//! camera-space position `L_j` contributes through `d = L_j - P`:
//!
//! ```text
//! I = rho * (L_a + sum_j L_j * max(0, N.d / |d|) / (k_l |d| + k_q |d|^2))
//!     + sum_j k_s * L_j * max(0, R.V)^alpha / (k_l |d| + k_q |d|^2)
//! ```
//!
//! where `R` reflects the incoming light direction about `N` and `V` points
//! from `P` to the camera. All radiance stays linear and unclamped here.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Camera, Rgb, Vec3};
use crate::grid::{check_shape, Grid};
use crate::surfel::{DepthMap, SurfelField};

/// Surfels closer than this to a light are rejected.
pub const MIN_LIGHT_DISTANCE: f64 = 1e-8;

pub type Image = Grid<Rgb>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLight {
    /// World-space position.
    pub position: Vec3,
    pub color: Rgb,
    /// Linear attenuation coefficient.
    pub k_l: f64,
    /// Quadratic attenuation coefficient.
    pub k_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightingRig {
    pub ambient: Rgb,
    #[serde(default)]
    pub lights: Vec<PointLight>,
}

/// Diffuse reflectance, either shared by every surfel or given per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Albedo {
    Uniform(Rgb),
    PerPixel(Grid<Rgb>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Specular {
    pub k_s: Rgb,
    pub shininess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: Albedo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specular: Option<Specular>,
}

fn non_negative(v: &Rgb) -> bool {
    v.iter().all(|&x| x >= 0.0 && x.is_finite())
}

fn unit_interval(v: &Rgb) -> bool {
    v.iter().all(|&x| (0.0..=1.0).contains(&x))
}

impl PointLight {
    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParam("light position is not finite".into()));
        }
        if !non_negative(&self.color) {
            return Err(Error::InvalidParam("light color must be non-negative".into()));
        }
        let ok = |k: f64| k >= 0.0 && k.is_finite();
        if !(ok(self.k_l) && ok(self.k_q) && self.k_l + self.k_q > 0.0) {
            return Err(Error::InvalidParam(format!(
                "attenuation needs k_l, k_q >= 0 and k_l + k_q > 0, got k_l={} k_q={}",
                self.k_l, self.k_q
            )));
        }
        Ok(())
    }
}

impl LightingRig {
    pub fn ambient_only(ambient: Rgb) -> Self {
        Self {
            ambient,
            lights: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !non_negative(&self.ambient) {
            return Err(Error::InvalidParam("ambient light must be non-negative".into()));
        }
        self.lights.iter().try_for_each(PointLight::validate)
    }

    /// Lights expressed in the camera frame, ready for per-pixel evaluation.
    pub(crate) fn to_camera(&self, camera: &Camera) -> Vec<CameraLight> {
        self.lights
            .iter()
            .map(|l| CameraLight {
                position: camera.world_to_camera(&l.position),
                color: l.color,
                k_l: l.k_l,
                k_q: l.k_q,
            })
            .collect()
    }
}

impl Albedo {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Rgb {
        match self {
            Albedo::Uniform(rho) => *rho,
            Albedo::PerPixel(g) => g[(row, col)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Albedo::Uniform(rho) => unit_interval(rho),
            Albedo::PerPixel(g) => g.iter().all(unit_interval),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam("albedo channels must lie in [0, 1]".into()))
        }
    }

    pub(crate) fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        match self {
            Albedo::Uniform(_) => Ok(()),
            Albedo::PerPixel(g) => check_shape(shape, g.shape()),
        }
    }

    pub fn scaled(&self, s: f64) -> Albedo {
        match self {
            Albedo::Uniform(rho) => Albedo::Uniform(rho * s),
            Albedo::PerPixel(g) => Albedo::PerPixel(g.map(|rho| rho * s)),
        }
    }
}

impl Specular {
    pub fn validate(&self) -> Result<()> {
        if !unit_interval(&self.k_s) {
            return Err(Error::InvalidParam("k_s channels must lie in [0, 1]".into()));
        }
        if !(self.shininess > 0.0 && self.shininess.is_finite()) {
            return Err(Error::InvalidParam("shininess must be positive".into()));
        }
        Ok(())
    }
}

impl Material {
    pub fn diffuse(albedo: Rgb) -> Self {
        Self {
            albedo: Albedo::Uniform(albedo),
            specular: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.albedo.validate()?;
        if let Some(s) = &self.specular {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CameraLight {
    pub position: Vec3,
    pub color: Rgb,
    pub k_l: f64,
    pub k_q: f64,
}

impl CameraLight {
    #[inline]
    pub fn attenuation(&self, dist: f64) -> f64 {
        1.0 / (self.k_l * dist + self.k_q * dist * dist)
    }
}

/// Shading of a single surfel. `None` if a light sits on the surfel.
#[inline]
pub(crate) fn shade_surfel(
    p: &Vec3,
    n: &Vec3,
    rho: &Rgb,
    ambient: &Rgb,
    lights: &[CameraLight],
    specular: Option<&Specular>,
) -> Option<Rgb> {
    let mut diffuse = *ambient;
    let mut highlight = Rgb::zeros();
    let view = if specular.is_some() {
        -p.normalize()
    } else {
        Vec3::zeros()
    };
    for light in lights {
        let d = light.position - p;
        let dist = d.norm();
        if dist < MIN_LIGHT_DISTANCE {
            return None;
        }
        let atten = light.attenuation(dist);
        let cos = n.dot(&d) / dist;
        diffuse += light.color * (atten * cos.max(0.0));
        if let Some(spec) = specular {
            if cos > 0.0 {
                let l = d / dist;
                let reflected = n * (2.0 * cos) - l;
                let rv = reflected.dot(&view);
                if rv > 0.0 {
                    highlight += spec.k_s.component_mul(&light.color) * (atten * rv.powf(spec.shininess));
                }
            }
        }
    }
    Some(rho.component_mul(&diffuse) + highlight)
}

fn shade_with(field: &SurfelField, camera: &Camera, rig: &LightingRig, specular: Option<&Specular>) -> Result<Image> {
    check_shape(camera.resolution(), field.shape())?;
    rig.validate()?;
    field.albedo.validate()?;
    field.albedo.check_shape(field.shape())?;
    let lights = rig.to_camera(camera);
    let (rows, cols) = field.shape();
    let pixels: Vec<Result<Rgb>> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let rho = field.albedo.at(row, col);
            let color = shade_surfel(
                &field.positions[(row, col)],
                &field.normals[(row, col)],
                &rho,
                &rig.ambient,
                &lights,
                specular,
            )
            .ok_or(Error::LightAtSurfel { row, col })?;
            if color.iter().all(|x| x.is_finite()) {
                Ok(color)
            } else {
                Err(Error::NonFiniteOutput { row, col })
            }
        })
        .collect();
    let pixels = pixels.into_iter().collect::<Result<Vec<_>>>()?;
    Grid::from_vec(rows, cols, pixels)
}

/// Lambertian shading of every surfel; light positions are given in world space.
pub fn shade(field: &SurfelField, camera: &Camera, lights: &LightingRig) -> Result<Image> {
    shade_with(field, camera, lights, None)
}

/// Lambertian shading plus a classic Phong lobe `k_s * L_j * max(0, R.V)^alpha`.
///
/// The lobe is only lit where the diffuse term is, so lights behind the
/// surface never produce highlights.
pub fn shade_phong(field: &SurfelField, camera: &Camera, lights: &LightingRig, specular: &Specular) -> Result<Image> {
    specular.validate()?;
    shade_with(field, camera, lights, Some(specular))
}

/// Full forward pass: back-project, estimate normals, shade.
pub fn render(depth: &DepthMap, camera: &Camera, material: &Material, lights: &LightingRig) -> Result<Image> {
    material.validate()?;
    let field = SurfelField::from_depth(depth, camera, material.albedo.clone())?;
    match &material.specular {
        Some(spec) => shade_phong(&field, camera, lights, spec),
        None => shade(&field, camera, lights),
    }
}
