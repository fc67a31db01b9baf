//! Pinhole camera model and the rigid transforms between world and camera frames.
//!
//! The camera frame is right-handed: `x` points right, `y` up and the view
//! direction is `-z`. Pixel `(row, col)` is addressed with rows growing
//! downward; primary rays pass through pixel centers.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Radiance or reflectance triple in linear RGB.
pub type Rgb = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Serialized form of a [`Camera`]; field names are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraDesc {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub focal_mm: f64,
    pub sensor_mm: f64,
    /// `[rows, cols]`
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraDesc", into = "CameraDesc")]
pub struct Camera {
    position: Vec3,
    look_at: Vec3,
    up: Vec3,
    focal_mm: f64,
    sensor_mm: f64,
    rows: usize,
    cols: usize,
    /// Columns are the camera axes (right, up, backward) expressed in world space.
    rotation: Matrix3<f64>,
}

fn check_finite(name: &str, v: &Vec3) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} has non-finite components")))
    }
}

impl Camera {
    pub fn new(
        position: Vec3,
        look_at: Vec3,
        up: Vec3,
        focal_mm: f64,
        sensor_mm: f64,
        resolution: (usize, usize),
    ) -> Result<Self> {
        check_finite("position", &position)?;
        check_finite("look_at", &look_at)?;
        check_finite("up", &up)?;
        if !(focal_mm > 0.0 && focal_mm.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "focal length must be positive, got {focal_mm}"
            )));
        }
        if !(sensor_mm > 0.0 && sensor_mm.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "sensor width must be positive, got {sensor_mm}"
            )));
        }
        let (rows, cols) = resolution;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParam(format!(
                "resolution must be positive, got {rows}x{cols}"
            )));
        }

        let view = look_at - position;
        let view_len = view.norm();
        let up_len = up.norm();
        if view_len == 0.0 || up_len == 0.0 {
            return Err(Error::DegenerateFrame);
        }
        let forward = view / view_len;
        let up = up / up_len;
        let right = forward.cross(&up);
        let right_len = right.norm();
        if right_len < 1e-9 {
            return Err(Error::DegenerateFrame);
        }
        let right = right / right_len;
        let true_up = right.cross(&forward);
        let rotation = Matrix3::from_columns(&[right, true_up, -forward]);

        Ok(Self {
            position,
            look_at,
            up,
            focal_mm,
            sensor_mm,
            rows,
            cols,
            rotation,
        })
    }

    #[inline]
    pub fn position(&self) -> Vec3 {
        self.position
    }

    #[inline]
    pub fn look_at(&self) -> Vec3 {
        self.look_at
    }

    #[inline]
    pub fn up(&self) -> Vec3 {
        self.up
    }

    #[inline]
    pub fn focal_mm(&self) -> f64 {
        self.focal_mm
    }

    #[inline]
    pub fn sensor_mm(&self) -> f64 {
        self.sensor_mm
    }

    /// Sensor height in millimeters; pixels are square.
    #[inline]
    pub fn sensor_height_mm(&self) -> f64 {
        self.sensor_mm * self.rows as f64 / self.cols as f64
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn resolution(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Camera-to-world rotation (columns: right, up, backward).
    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// The camera's local `-z` axis in world coordinates.
    #[inline]
    pub fn view_direction(&self) -> Vec3 {
        -self.rotation.column(2).into_owned()
    }

    pub fn horizontal_fov(&self) -> f64 {
        2.0 * (0.5 * self.sensor_mm / self.focal_mm).atan()
    }

    #[inline]
    pub fn world_to_camera(&self, point: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(point - self.position))
    }

    #[inline]
    pub fn camera_to_world(&self, point: &Vec3) -> Vec3 {
        self.rotation * point + self.position
    }

    #[inline]
    pub fn direction_to_world(&self, dir: &Vec3) -> Vec3 {
        self.rotation * dir
    }

    #[inline]
    pub fn direction_to_camera(&self, dir: &Vec3) -> Vec3 {
        self.rotation.tr_mul(dir)
    }

    /// Camera-space vector through the center of pixel `(row, col)`, scaled so
    /// its z component is exactly `-1`. A point at z-depth `d` on that pixel's
    /// ray is `d * pixel_ray(row, col)`.
    ///
    /// No bounds check; see [`Camera::primary_ray`].
    #[inline]
    pub fn pixel_ray(&self, row: usize, col: usize) -> Vec3 {
        let pitch = self.sensor_mm / self.cols as f64;
        let x = -0.5 * self.sensor_mm + (col as f64 + 0.5) * pitch;
        let y = 0.5 * self.sensor_height_mm() - (row as f64 + 0.5) * pitch;
        Vec3::new(x / self.focal_mm, y / self.focal_mm, -1.0)
    }

    /// World-space ray from the camera center through the center of a pixel.
    pub fn primary_ray(&self, row: usize, col: usize) -> Result<Ray> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        let dir_cam = self.pixel_ray(row, col).normalize();
        Ok(Ray {
            origin: self.position,
            direction: self.direction_to_world(&dir_cam),
        })
    }

    /// Continuous pixel coordinates `(row, col)` of a camera-space point, with
    /// integer values at pixel corners. `None` for points not in front of the camera.
    pub fn project_camera_point(&self, p: &Vec3) -> Option<(f64, f64)> {
        if !(p.z < 0.0) {
            return None;
        }
        let pitch = self.sensor_mm / self.cols as f64;
        let u = self.focal_mm * p.x / -p.z;
        let v = self.focal_mm * p.y / -p.z;
        let col = (u + 0.5 * self.sensor_mm) / pitch;
        let row = (0.5 * self.sensor_height_mm() - v) / pitch;
        Some((row, col))
    }

    /// Same camera with a different resolution.
    pub fn with_resolution(&self, resolution: (usize, usize)) -> Result<Self> {
        Camera::new(
            self.position,
            self.look_at,
            self.up,
            self.focal_mm,
            self.sensor_mm,
            resolution,
        )
    }

    pub fn to_desc(&self) -> CameraDesc {
        CameraDesc {
            position: self.position,
            look_at: self.look_at,
            up: self.up,
            focal_mm: self.focal_mm,
            sensor_mm: self.sensor_mm,
            resolution: [self.rows, self.cols],
        }
    }
}

impl TryFrom<CameraDesc> for Camera {
    type Error = Error;

    fn try_from(d: CameraDesc) -> Result<Self> {
        Camera::new(
            d.position,
            d.look_at,
            d.up,
            d.focal_mm,
            d.sensor_mm,
            (d.resolution[0], d.resolution[1]),
        )
    }
}

impl From<Camera> for CameraDesc {
    fn from(c: Camera) -> Self {
        c.to_desc()
    }
}
