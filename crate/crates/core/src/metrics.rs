//! Reconstruction metrics: Chamfer and Hausdorff distances between point sets
//! and masked depth MSE.
//!
//! Nearest-neighbor queries go through a sparse uniform grid searched in
//! expanding Chebyshev rings, which returns exactly the brute-force minimum.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grid::{check_shape, Grid};
use crate::surfel::SurfelField;

/// Non-empty set of finite points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet(Vec<Vec3>);

impl PointSet {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        if !points.iter().all(|p| p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidParam("point set contains non-finite coordinates".into()));
        }
        Ok(Self(points))
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn translated(&self, t: &Vec3) -> PointSet {
        PointSet(self.0.iter().map(|p| p + t).collect())
    }
}

type CellKey = [i64; 3];

/// Sparse uniform grid over a fixed point set.
pub struct NearestNeighborIndex<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    lo: CellKey,
    hi: CellKey,
    cells: HashMap<CellKey, Vec<u32>>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

impl<'a> NearestNeighborIndex<'a> {
    pub fn new(set: &'a PointSet) -> Self {
        let points = set.points();
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let diag = (max - min).norm();

        // Median nearest-neighbor spacing over a ~1% strided sample.
        let stride = (points.len() / (points.len() / 100).max(1)).max(1);
        let mut spacing: Vec<f64> = (0..points.len())
            .step_by(stride)
            .filter_map(|i| {
                points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| (q - points[i]).norm())
                    .filter(|&d| d > 0.0)
                    .min_by(f64::total_cmp)
            })
            .collect();
        let mut cell = if spacing.is_empty() { 0.0 } else { median(&mut spacing) };
        if diag > 0.0 {
            let extent = (max - min).map(|e| e.max(diag * 1e-3));
            let volume_cell = (extent.x * extent.y * extent.z / points.len() as f64).cbrt();
            cell = cell.max(volume_cell).max(diag * 1e-3);
        }
        if !(cell > 0.0 && cell.is_finite()) {
            cell = 1.0;
        }

        let mut index = Self {
            points,
            origin: min,
            cell,
            lo: [i64::MAX; 3],
            hi: [i64::MIN; 3],
            cells: HashMap::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let key = index.key(p);
            for (k, &v) in key.iter().enumerate() {
                index.lo[k] = index.lo[k].min(v);
                index.hi[k] = index.hi[k].max(v);
            }
            index.cells.entry(key).or_default().push(i as u32);
        }
        index
    }

    #[inline]
    fn key(&self, p: &Vec3) -> CellKey {
        let rel = (p - self.origin) / self.cell;
        [rel.x.floor() as i64, rel.y.floor() as i64, rel.z.floor() as i64]
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn visit(&self, key: &CellKey, q: &Vec3, best: &mut f64) {
        if let Some(ids) = self.cells.get(key) {
            for &id in ids {
                let d = (self.points[id as usize] - q).norm_squared();
                if d < *best {
                    *best = d;
                }
            }
        }
    }

    /// Visits the occupied-box cells at Chebyshev distance exactly `ring` from `qc`.
    fn visit_ring(&self, qc: &CellKey, ring: i64, q: &Vec3, best: &mut f64) {
        let span = |k: usize| ((qc[k] - ring).max(self.lo[k]), (qc[k] + ring).min(self.hi[k]));
        let (x0, x1) = span(0);
        let (y0, y1) = span(1);
        let (z0, z1) = span(2);
        if x0 > x1 || y0 > y1 || z0 > z1 {
            return;
        }
        let faces = |k: usize| {
            let mut out = [None, None];
            if qc[k] - ring >= self.lo[k] && qc[k] - ring <= self.hi[k] {
                out[0] = Some(qc[k] - ring);
            }
            if ring > 0 && qc[k] + ring >= self.lo[k] && qc[k] + ring <= self.hi[k] {
                out[1] = Some(qc[k] + ring);
            }
            out
        };
        let y_faces = faces(1);
        let z_faces = faces(2);
        let has_z_face = z_faces.iter().any(Option::is_some);
        for x in x0..=x1 {
            let x_on = (x - qc[0]).abs() == ring;
            let mut row = |y: i64| {
                if x_on || (y - qc[1]).abs() == ring {
                    for z in z0..=z1 {
                        self.visit(&[x, y, z], q, best);
                    }
                } else {
                    for z in z_faces.iter().flatten() {
                        self.visit(&[x, y, *z], q, best);
                    }
                }
            };
            if x_on || has_z_face {
                for y in y0..=y1 {
                    row(y);
                }
            } else {
                for y in y_faces.iter().flatten() {
                    row(*y);
                }
            }
        }
    }

    /// Euclidean distance from `q` to its nearest indexed point.
    pub fn nearest_distance(&self, q: &Vec3) -> f64 {
        let qc = self.key(q);
        // Chebyshev distance from the query cell to the occupied box.
        let gap = (0..3)
            .map(|k| (self.lo[k] - qc[k]).max(qc[k] - self.hi[k]).max(0))
            .max()
            .unwrap_or(0);
        let reach = (0..3)
            .map(|k| (qc[k] - self.lo[k]).abs().max((self.hi[k] - qc[k]).abs()))
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for ring in gap..=reach {
            self.visit_ring(&qc, ring, q, &mut best);
            let cleared = ring as f64 * self.cell;
            if best <= cleared * cleared {
                break;
            }
        }
        best.sqrt()
    }
}

/// Distance from every point of `query` to its nearest neighbor in `target`, in query order.
pub fn nearest_distances(query: &PointSet, target: &PointSet) -> Vec<f64> {
    let index = NearestNeighborIndex::new(target);
    query.points().par_iter().map(|q| index.nearest_distance(q)).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Sum of the two directed mean nearest-neighbor distances.
pub fn chamfer(a: &PointSet, b: &PointSet) -> f64 {
    mean(&nearest_distances(a, b)) + mean(&nearest_distances(b, a))
}

/// `max_{x in a} min_{y in b} |x - y|`
pub fn directed_hausdorff(a: &PointSet, b: &PointSet) -> f64 {
    max(&nearest_distances(a, b))
}

pub fn hausdorff(a: &PointSet, b: &PointSet) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Mean squared difference over the pixels selected by `mask` (all pixels when `None`).
pub fn mse_depth(a: &Grid<f64>, b: &Grid<f64>, mask: Option<&Grid<bool>>) -> Result<f64> {
    check_shape(a.shape(), b.shape())?;
    if let Some(m) = mask {
        check_shape(a.shape(), m.shape())?;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (x, y)) in a.iter().zip(b.iter()).enumerate() {
        if mask.is_none_or(|m| m.as_slice()[i]) {
            sum += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// Surfel positions selected by `mask`, in row-major order.
pub fn surfels_to_pointset(field: &SurfelField, mask: Option<&Grid<bool>>) -> Result<PointSet> {
    if let Some(m) = mask {
        check_shape(field.shape(), m.shape())?;
    }
    let points: Vec<Vec3> = field
        .positions
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m.as_slice()[*i]))
        .map(|(_, p)| *p)
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyMask);
    }
    PointSet::new(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconMetrics {
    pub mse_depth: f64,
    pub chamfer: f64,
    pub hausdorff: f64,
}
