//! The view-dependent 2.5D surfel representation: a z-depth per pixel, lifted
//! to camera-space positions along the pixel rays, plus normals estimated from
//! those positions.

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Camera, Vec3};
use crate::grid::{check_shape, Grid};
use crate::shading::Albedo;

/// Below this magnitude of `n_z` a normal cannot be oriented toward the camera.
pub const MIN_NORMAL_Z: f64 = 1e-12;

/// Camera-space z-depth per pixel (`P.z = -depth`). All values positive and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(Grid<f64>);

impl DepthMap {
    pub fn new(values: Grid<f64>) -> Result<Self> {
        for (row, col, &value) in values.indexed() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveDepth { row, col, value });
            }
        }
        Ok(Self(values))
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(Grid::from_vec(rows, cols, values)?)
    }

    pub fn constant(rows: usize, cols: usize, depth: f64) -> Result<Self> {
        Self::new(Grid::filled(rows, cols, depth))
    }

    #[inline]
    pub fn as_grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.0
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        *self.0.get(row, col)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Per-pixel unit normals plus the degenerate-neighborhood flags raised while
/// estimating them. Flagged pixels hold `(0, 0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub normals: Grid<Vec3>,
    pub degenerate: Grid<bool>,
}

impl NormalField {
    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

/// Positions, normals and albedo for every pixel of one view.
#[derive(Debug, Clone)]
pub struct SurfelField {
    pub positions: Grid<Vec3>,
    pub normals: Grid<Vec3>,
    pub degenerate: Grid<bool>,
    pub albedo: Albedo,
}

impl SurfelField {
    /// Assembles a field from raw parts. Normals must be unit length with positive z.
    pub fn from_parts(positions: Grid<Vec3>, normals: Grid<Vec3>, albedo: Albedo) -> Result<Self> {
        check_shape(positions.shape(), normals.shape())?;
        albedo.check_shape(positions.shape())?;
        for (row, col, n) in normals.indexed() {
            if (n.norm() - 1.0).abs() > 1e-9 || !(n.z > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "normal at ({row}, {col}) is not a unit vector facing the camera"
                )));
            }
        }
        let degenerate = Grid::filled(positions.rows(), positions.cols(), false);
        Ok(Self {
            positions,
            normals,
            degenerate,
            albedo,
        })
    }

    /// Back-projects the depth map and estimates normals with the cross-product stencil.
    pub fn from_depth(depth: &DepthMap, camera: &Camera, albedo: Albedo) -> Result<Self> {
        albedo.check_shape(depth.shape())?;
        let positions = backproject(depth, camera)?;
        let NormalField { normals, degenerate } = estimate_normals(&positions)?;
        Ok(Self {
            positions,
            normals,
            degenerate,
            albedo,
        })
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.positions.shape()
    }
}

/// Lifts each depth sample along its pixel ray: `P = depth * pixel_ray`, so `P.z = -depth`.
pub fn backproject(depth: &DepthMap, camera: &Camera) -> Result<Grid<Vec3>> {
    check_shape(camera.resolution(), depth.shape())?;
    let (rows, cols) = depth.shape();
    let data: Vec<Vec3> = depth
        .as_slice()
        .par_iter()
        .enumerate()
        .map(|(i, &d)| camera.pixel_ray(i / cols, i % cols) * d)
        .collect();
    Grid::from_vec(rows, cols, data)
}

/// Neighbor indices used by the tangent stencil at `(r, c)`:
/// `(col_left, col_right, row_up, row_down)`, clamped to one-sided at borders.
#[inline]
pub(crate) fn stencil(r: usize, c: usize, rows: usize, cols: usize) -> (usize, usize, usize, usize) {
    let cl = c.saturating_sub(1);
    let cr = if c + 1 < cols { c + 1 } else { c };
    let ru = r.saturating_sub(1);
    let rd = if r + 1 < rows { r + 1 } else { r };
    (cl, cr, ru, rd)
}

/// Horizontal and vertical tangents at a pixel. `ty` points up the image.
#[inline]
pub(crate) fn tangents(positions: &Grid<Vec3>, r: usize, c: usize) -> (Vec3, Vec3) {
    let (cl, cr, ru, rd) = stencil(r, c, positions.rows(), positions.cols());
    let tx = positions[(r, cr)] - positions[(r, cl)];
    let ty = positions[(ru, c)] - positions[(rd, c)];
    (tx, ty)
}

/// Orientation of an unnormalized normal: `Some(sign)` such that `sign * n`
/// has positive z, or `None` when the direction is degenerate.
#[inline]
pub(crate) fn orient(n: &Vec3) -> Option<(f64, f64)> {
    let len = n.norm();
    if !(len > 0.0 && len.is_finite()) {
        return None;
    }
    let nz = n.z / len;
    if nz.abs() < MIN_NORMAL_Z {
        return None;
    }
    Some((if nz < 0.0 { -1.0 } else { 1.0 }, len))
}

fn check_normal_input(positions: &Grid<Vec3>) -> Result<()> {
    if positions.rows() < 2 || positions.cols() < 2 {
        return Err(Error::InvalidParam(format!(
            "normal estimation needs at least a 2x2 grid, got {}x{}",
            positions.rows(),
            positions.cols()
        )));
    }
    Ok(())
}

/// Differentiable normal estimator: normalized cross product of central
/// difference tangents, flipped into the `n_z > 0` half-space.
pub fn estimate_normals(positions: &Grid<Vec3>) -> Result<NormalField> {
    check_normal_input(positions)?;
    let (rows, cols) = positions.shape();
    let per_pixel: Vec<(Vec3, bool)> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (tx, ty) = tangents(positions, i / cols, i % cols);
            let n = tx.cross(&ty);
            match orient(&n) {
                Some((sign, len)) => (n * (sign / len), false),
                None => (Vec3::z(), true),
            }
        })
        .collect();
    let (normals, flags): (Vec<_>, Vec<_>) = per_pixel.into_iter().unzip();
    Ok(NormalField {
        normals: Grid::from_vec(rows, cols, normals)?,
        degenerate: Grid::from_vec(rows, cols, flags)?,
    })
}

/// Least-squares normal over the full 8-neighborhood: the unit vector
/// minimizing the sum of squared dot products with all neighbor tangents.
///
/// Verification oracle only; nothing differentiates through it.
pub fn estimate_normals_lsq_oracle(positions: &Grid<Vec3>) -> Result<NormalField> {
    check_normal_input(positions)?;
    let (rows, cols) = positions.shape();
    let per_pixel: Vec<(Vec3, bool)> = (0..rows * cols)
        .into_par_iter()
        .map(|i| lsq_normal(positions, i / cols, i % cols))
        .collect();
    let (normals, flags): (Vec<_>, Vec<_>) = per_pixel.into_iter().unzip();
    Ok(NormalField {
        normals: Grid::from_vec(rows, cols, normals)?,
        degenerate: Grid::from_vec(rows, cols, flags)?,
    })
}

fn lsq_normal(positions: &Grid<Vec3>, r: usize, c: usize) -> (Vec3, bool) {
    let (rows, cols) = positions.shape();
    let center = positions[(r, c)];
    let mut scatter = Matrix3::zeros();
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let rr = r as i64 + dr;
            let cc = c as i64 + dc;
            if rr < 0 || cc < 0 || rr >= rows as i64 || cc >= cols as i64 {
                continue;
            }
            let t = positions[(rr as usize, cc as usize)] - center;
            scatter += t * t.transpose();
        }
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if !(hi > 0.0) || mid <= 1e-12 * hi || !lo.is_finite() {
        return (Vec3::z(), true);
    }
    let n = eig.eigenvectors.column(order[0]).into_owned();
    match orient(&n) {
        Some((sign, len)) => (n * (sign / len), false),
        None => (Vec3::z(), true),
    }
}

/// Depth of a field re-rendered from another camera, with a hit mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprojectedDepth {
    /// Z-depth in the destination camera; `0.0` where `mask` is false.
    pub depth: Grid<f64>,
    pub mask: Grid<bool>,
}

impl ReprojectedDepth {
    pub fn hit_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Moves every surfel into `dst`'s frame and z-buffers it into the pixel it
/// projects to. Strictly nearer depth wins; ties keep the earlier surfel in
/// row-major order.
pub fn reproject(field: &SurfelField, src: &Camera, dst: &Camera) -> ReprojectedDepth {
    let (rows, cols) = dst.resolution();
    let mut depth = Grid::filled(rows, cols, 0.0);
    let mut mask = Grid::filled(rows, cols, false);
    let projected: Vec<Option<(usize, usize, f64)>> = field
        .positions
        .as_slice()
        .par_iter()
        .map(|p| {
            let q = dst.world_to_camera(&src.camera_to_world(p));
            let (pr, pc) = dst.project_camera_point(&q)?;
            if !(pr >= 0.0 && pc >= 0.0) {
                return None;
            }
            let (r, c) = (pr.floor() as usize, pc.floor() as usize);
            (r < rows && c < cols).then_some((r, c, -q.z))
        })
        .collect();
    for (r, c, z) in projected.into_iter().flatten() {
        if !mask[(r, c)] || z < depth[(r, c)] {
            depth[(r, c)] = z;
            mask[(r, c)] = true;
        }
    }
    ReprojectedDepth { depth, mask }
}
