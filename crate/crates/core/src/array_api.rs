//! Flat-array entry points for foreign callers.
//!
//! Buffers are row-major `f64`: depth and gradients are `rows * cols`, images
//! and normals `rows * cols * 3`, point sets `n * 3`. Camera, material and
//! lights are passed as the same JSON documents used in scene files.

use crate::error::{Error, Result};
use crate::geometry::{Camera, Vec3};
use crate::grad;
use crate::grid::Grid;
use crate::metrics::{self, PointSet};
use crate::shading::{self, LightingRig, Material};
use crate::surfel::{backproject, estimate_normals, DepthMap};

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn parse_camera(json: &str) -> Result<Camera> {
    Ok(serde_json::from_str(json)?)
}

pub fn parse_material(json: &str) -> Result<Material> {
    Ok(serde_json::from_str(json)?)
}

pub fn parse_lights(json: &str) -> Result<LightingRig> {
    Ok(serde_json::from_str(json)?)
}

fn check_len(name: &str, buf: &[f64], expected: usize) -> Result<()> {
    if buf.len() != expected {
        return Err(Error::InvalidParam(format!(
            "{name} has {} elements, expected {expected}",
            buf.len()
        )));
    }
    Ok(())
}

fn depth_for(camera: &Camera, depth: &[f64]) -> Result<DepthMap> {
    let (rows, cols) = camera.resolution();
    check_len("depth", depth, rows * cols)?;
    DepthMap::from_vec(rows, cols, depth.to_vec())
}

fn flatten(grid: &Grid<Vec3>) -> Vec<f64> {
    grid.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
}

fn unflatten(rows: usize, cols: usize, buf: &[f64]) -> Result<Grid<Vec3>> {
    check_len("image", buf, rows * cols * 3)?;
    Grid::from_vec(
        rows,
        cols,
        buf.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
    )
}

/// Forward render; the depth buffer must match the camera resolution.
pub fn render(depth: &[f64], camera_json: &str, material_json: &str, lights_json: &str) -> Result<Vec<f64>> {
    let camera = parse_camera(camera_json)?;
    let depth = depth_for(&camera, depth)?;
    let image = shading::render(
        &depth,
        &camera,
        &parse_material(material_json)?,
        &parse_lights(lights_json)?,
    )?;
    Ok(flatten(&image))
}

pub fn render_backward(
    depth: &[f64],
    upstream: &[f64],
    camera_json: &str,
    material_json: &str,
    lights_json: &str,
) -> Result<Vec<f64>> {
    let camera = parse_camera(camera_json)?;
    let depth = depth_for(&camera, depth)?;
    let (rows, cols) = camera.resolution();
    let upstream = unflatten(rows, cols, upstream)?;
    let g = grad::render_backward(
        &depth,
        &camera,
        &parse_material(material_json)?,
        &parse_lights(lights_json)?,
        &upstream,
    )?;
    Ok(g.into_vec())
}

fn point_set(name: &str, buf: &[f64]) -> Result<PointSet> {
    if !buf.len().is_multiple_of(3) {
        return Err(Error::InvalidParam(format!(
            "{name} length {} is not a multiple of 3",
            buf.len()
        )));
    }
    PointSet::new(buf.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

pub fn chamfer(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(metrics::chamfer(&point_set("a", a)?, &point_set("b", b)?))
}

pub fn estimate_normals_flat(depth: &[f64], camera_json: &str) -> Result<Vec<f64>> {
    let camera = parse_camera(camera_json)?;
    let depth = depth_for(&camera, depth)?;
    Ok(flatten(&estimate_normals(&backproject(&depth, &camera)?)?.normals))
}
