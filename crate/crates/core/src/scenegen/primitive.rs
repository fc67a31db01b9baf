use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Smallest ray parameter accepted as a hit.
pub const MIN_HIT_T: f64 = 1e-9;

/// Shapes in their local frame:
/// sphere `|p| = 1`; box `[-1, 1]^3`; cylinder of radius 1 over `z in [-1, 1]`;
/// cone with apex at `z = 1` and a unit-radius base at `z = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Sphere,
    Box,
    Cone,
    Cylinder,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] = [Self::Sphere, Self::Box, Self::Cone, Self::Cylinder];

    fn local_radius(self) -> f64 {
        match self {
            Self::Sphere => 1.0,
            Self::Box => 3f64.sqrt(),
            Self::Cone | Self::Cylinder => 2f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PrimitiveDesc {
    kind: PrimitiveKind,
    center: Vec3,
    scale: Vec3,
    /// `[w, x, y, z]`
    orientation: [f64; 4],
}

/// A scaled, rotated and translated analytic shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PrimitiveDesc", into = "PrimitiveDesc")]
pub struct Primitive {
    kind: PrimitiveKind,
    center: Vec3,
    scale: Vec3,
    orientation: UnitQuaternion<f64>,
}

impl TryFrom<PrimitiveDesc> for Primitive {
    type Error = Error;

    fn try_from(d: PrimitiveDesc) -> Result<Self> {
        let [w, x, y, z] = d.orientation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "orientation must be a unit quaternion, norm is {}",
                q.norm()
            )));
        }
        Primitive::new(d.kind, d.center, d.scale, UnitQuaternion::new_unchecked(q))
    }
}

impl From<Primitive> for PrimitiveDesc {
    fn from(p: Primitive) -> Self {
        let q = p.orientation.quaternion();
        Self {
            kind: p.kind,
            center: p.center,
            scale: p.scale,
            orientation: [q.w, q.i, q.j, q.k],
        }
    }
}

#[inline]
fn smallest_positive(t0: f64, t1: f64) -> Option<f64> {
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    if lo > MIN_HIT_T {
        Some(lo)
    } else if hi > MIN_HIT_T {
        Some(hi)
    } else {
        None
    }
}

/// Real roots of `a t^2 + b t + c = 0`, evaluated without cancellation.
#[inline]
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a == 0.0 {
        if b == 0.0 {
            return None;
        }
        let t = -c / b;
        return Some((t, t));
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((q / a, c / q))
}

#[inline]
fn keep_min(best: &mut Option<f64>, t: f64) {
    if t > MIN_HIT_T && best.is_none_or(|b| t < b) {
        *best = Some(t);
    }
}

fn hit_sphere(o: &Vec3, d: &Vec3) -> Option<f64> {
    let (t0, t1) = quadratic_roots(d.dot(d), 2.0 * o.dot(d), o.dot(o) - 1.0)?;
    smallest_positive(t0, t1)
}

fn hit_box(o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut near = f64::NEG_INFINITY;
    let mut far = f64::INFINITY;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i].abs() > 1.0 {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let (a, b) = ((-1.0 - o[i]) * inv, (1.0 - o[i]) * inv);
        near = near.max(a.min(b));
        far = far.min(a.max(b));
    }
    if near > far {
        return None;
    }
    smallest_positive(near, far)
}

/// Intersection of the ray with the plane `z = z0` inside the unit disc.
#[inline]
fn hit_cap(o: &Vec3, d: &Vec3, z0: f64, radius: f64) -> Option<f64> {
    if d.z == 0.0 {
        return None;
    }
    let t = (z0 - o.z) / d.z;
    let (x, y) = (o.x + t * d.x, o.y + t * d.y);
    (x * x + y * y <= radius * radius).then_some(t)
}

fn hit_cylinder(o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut best = None;
    let a = d.x * d.x + d.y * d.y;
    if let Some((t0, t1)) = quadratic_roots(a, 2.0 * (o.x * d.x + o.y * d.y), o.x * o.x + o.y * o.y - 1.0) {
        for t in [t0, t1] {
            if (o.z + t * d.z).abs() <= 1.0 {
                keep_min(&mut best, t);
            }
        }
    }
    for z0 in [-1.0, 1.0] {
        if let Some(t) = hit_cap(o, d, z0, 1.0) {
            keep_min(&mut best, t);
        }
    }
    best
}

fn hit_cone(o: &Vec3, d: &Vec3) -> Option<f64> {
    // x^2 + y^2 = ((1 - z) / 2)^2 with z in [-1, 1]
    let mut best = None;
    let (wz, dz) = ((1.0 - o.z) * 0.5, -d.z * 0.5);
    let a = d.x * d.x + d.y * d.y - dz * dz;
    let b = 2.0 * (o.x * d.x + o.y * d.y - wz * dz);
    let c = o.x * o.x + o.y * o.y - wz * wz;
    if let Some((t0, t1)) = quadratic_roots(a, b, c) {
        for t in [t0, t1] {
            let z = o.z + t * d.z;
            if (-1.0..=1.0).contains(&z) {
                keep_min(&mut best, t);
            }
        }
    }
    if let Some(t) = hit_cap(o, d, -1.0, 1.0) {
        keep_min(&mut best, t);
    }
    best
}

impl Primitive {
    pub fn new(kind: PrimitiveKind, center: Vec3, scale: Vec3, orientation: UnitQuaternion<f64>) -> Result<Self> {
        if !center.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParam("primitive center must be finite".into()));
        }
        if !scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "primitive scale must be positive, got {scale:?}"
            )));
        }
        Ok(Self {
            kind,
            center,
            scale,
            orientation,
        })
    }

    pub fn kind(&self) -> PrimitiveKind {
        self.kind
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn scale(&self) -> Vec3 {
        self.scale
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    /// Radius of a sphere about `center` that encloses the shape.
    pub fn bounding_radius(&self) -> f64 {
        self.kind.local_radius() * self.scale.max()
    }

    /// Maps a world point into the shape's unit frame.
    #[inline]
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.orientation
            .inverse_transform_vector(&(p - self.center))
            .component_div(&self.scale)
    }

    #[inline]
    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.orientation * p.component_mul(&self.scale) + self.center
    }

    /// Smallest `t > 0` with `origin + t * direction` on the surface.
    /// `direction` need not be normalized.
    pub fn intersect(&self, origin: &Vec3, direction: &Vec3) -> Option<f64> {
        let o = self.to_local(origin);
        let d = self
            .orientation
            .inverse_transform_vector(direction)
            .component_div(&self.scale);
        match self.kind {
            PrimitiveKind::Sphere => hit_sphere(&o, &d),
            PrimitiveKind::Box => hit_box(&o, &d),
            PrimitiveKind::Cylinder => hit_cylinder(&o, &d),
            PrimitiveKind::Cone => hit_cone(&o, &d),
        }
    }

    /// Implicit surface function in the local frame: zero on the surface,
    /// negative inside.
    pub fn surface_residual(&self, p: &Vec3) -> f64 {
        let l = self.to_local(p);
        let radial = (l.x * l.x + l.y * l.y).sqrt();
        match self.kind {
            PrimitiveKind::Sphere => l.norm() - 1.0,
            PrimitiveKind::Box => l.abs().max() - 1.0,
            PrimitiveKind::Cylinder => (radial - 1.0).max(l.z.abs() - 1.0),
            PrimitiveKind::Cone => (radial - (1.0 - l.z) * 0.5).max(-1.0 - l.z),
        }
    }
}
