use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub type Cell = [i32; 3];

/// Integer matrix of a proper rotation of the cubic lattice.
pub type GridRotation = [[i32; 3]; 3];

/// Attempts made by [`sample_polycube`] before giving up.
pub const MAX_POLYCUBE_ATTEMPTS: usize = 10_000;

const STEPS: [Cell; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

/// The 24 rotations of the cube, identity first.
pub fn grid_rotations() -> &'static [GridRotation; 24] {
    static ROTATIONS: OnceLock<[GridRotation; 24]> = OnceLock::new();
    ROTATIONS.get_or_init(|| {
        let mut out = Vec::with_capacity(24);
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            for signs in 0..8 {
                let mut m = [[0; 3]; 3];
                for (row, &col) in p.iter().enumerate() {
                    m[row][col] = if signs >> row & 1 == 1 { -1 } else { 1 };
                }
                if det(&m) == 1 {
                    out.push(m);
                }
            }
        }
        out.try_into().expect("24 proper rotations")
    })
}

fn det(m: &GridRotation) -> i32 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn rotate_cell(m: &GridRotation, c: &Cell) -> Cell {
    let mut out = [0; 3];
    for (i, row) in m.iter().enumerate() {
        out[i] = row[0] * c[0] + row[1] * c[1] + row[2] * c[2];
    }
    out
}

pub fn grid_rotation_matrix(m: &GridRotation) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j] as f64)
}

pub fn grid_rotation_quaternion(m: &GridRotation) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(grid_rotation_matrix(m)))
}

/// Face-connected set of unit cubes, stored translated so its minimum corner
/// is the origin and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Cell>", into = "Vec<Cell>")]
pub struct Polycube {
    cells: Vec<Cell>,
}

impl TryFrom<Vec<Cell>> for Polycube {
    type Error = Error;

    fn try_from(cells: Vec<Cell>) -> Result<Self> {
        Polycube::new(cells)
    }
}

impl From<Polycube> for Vec<Cell> {
    fn from(p: Polycube) -> Self {
        p.cells
    }
}

fn normalize(cells: impl IntoIterator<Item = Cell>) -> Vec<Cell> {
    let set: BTreeSet<Cell> = cells.into_iter().collect();
    let mut min = [i32::MAX; 3];
    for c in &set {
        for i in 0..3 {
            min[i] = min[i].min(c[i]);
        }
    }
    let mut out: Vec<Cell> = set
        .into_iter()
        .map(|c| [c[0] - min[0], c[1] - min[1], c[2] - min[2]])
        .collect();
    out.sort_unstable();
    out
}

fn is_connected(cells: &[Cell]) -> bool {
    let set: BTreeSet<Cell> = cells.iter().copied().collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![cells[0]];
    seen.insert(cells[0]);
    while let Some(c) = stack.pop() {
        for s in STEPS {
            let n = [c[0] + s[0], c[1] + s[1], c[2] + s[2]];
            if set.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == set.len()
}

impl Polycube {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidParam("a polycube needs at least one cell".into()));
        }
        let n = cells.len();
        let cells = normalize(cells);
        if cells.len() != n {
            return Err(Error::InvalidParam("polycube cells must be distinct".into()));
        }
        if !is_connected(&cells) {
            return Err(Error::InvalidParam("polycube cells must be face-connected".into()));
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn rotated(&self, m: &GridRotation) -> Polycube {
        Polycube {
            cells: normalize(self.cells.iter().map(|c| rotate_cell(m, c))),
        }
    }

    /// Reflection through the `x = 0` plane.
    pub fn mirrored(&self) -> Polycube {
        Polycube {
            cells: normalize(self.cells.iter().map(|c| [-c[0], c[1], c[2]])),
        }
    }

    /// Representative shared by all rotations of this shape.
    pub fn canonical(&self) -> Polycube {
        grid_rotations()
            .iter()
            .map(|m| self.rotated(m))
            .min()
            .expect("non-empty rotation group")
    }

    pub fn same_shape(&self, other: &Polycube) -> bool {
        self.len() == other.len() && self.canonical() == other.canonical()
    }

    /// True when some non-identity rotation maps the shape onto itself.
    pub fn has_rotational_symmetry(&self) -> bool {
        grid_rotations()[1..].iter().any(|m| self.rotated(m) == *self)
    }

    /// True when the shape equals a rotation of its mirror image.
    pub fn is_achiral(&self) -> bool {
        self.same_shape(&self.mirrored())
    }

    /// Stable textual id of the shape up to rotation, e.g. `0,0,0;0,0,1`.
    pub fn shape_id(&self) -> String {
        self.canonical().cell_string()
    }

    pub fn cell_string(&self) -> String {
        self.cells
            .iter()
            .map(|c| format!("{},{},{}", c[0], c[1], c[2]))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_cells(s: &str) -> Result<Polycube> {
        let bad = || Error::Format(format!("bad polycube cell list {s:?}"));
        let cells = s
            .split(';')
            .map(|cell| {
                let v: Vec<i32> = cell
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                <[i32; 3]>::try_from(v).map_err(|_| bad())
            })
            .collect::<Result<Vec<_>>>()?;
        Polycube::new(cells)
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.cells.iter().fold(Vec3::zeros(), |acc, c| {
            acc + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)
        });
        sum / self.cells.len() as f64
    }

    /// Cell centers shifted so the centroid is the origin.
    pub fn centered_points(&self) -> Vec<Vec3> {
        let g = self.centroid();
        self.cells
            .iter()
            .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) - g)
            .collect()
    }
}

/// One self-avoiding walk of `k` cells that changes direction with probability 1/2 per step.
fn random_walk<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Option<Vec<Cell>> {
    let mut cells = vec![[0, 0, 0]];
    let mut dir = STEPS[rng.gen_range(0..6)];
    while cells.len() < k {
        if rng.gen_bool(0.5) {
            let turns: Vec<Cell> = STEPS
                .iter()
                .copied()
                .filter(|s| s[0] * dir[0] + s[1] * dir[1] + s[2] * dir[2] == 0)
                .collect();
            dir = turns[rng.gen_range(0..turns.len())];
        }
        let last = cells[cells.len() - 1];
        let next = [last[0] + dir[0], last[1] + dir[1], last[2] + dir[2]];
        if cells.contains(&next) {
            return None;
        }
        cells.push(next);
    }
    Some(cells)
}

/// Random chiral polycube of `k` cells with no rotational symmetry.
pub fn sample_polycube<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Result<Polycube> {
    if k < 4 {
        return Err(Error::InvalidParam(format!("polycubes need k >= 4, got {k}")));
    }
    for _ in 0..MAX_POLYCUBE_ATTEMPTS {
        let Some(cells) = random_walk(rng, k) else {
            continue;
        };
        let shape = Polycube::new(cells)?;
        if !shape.has_rotational_symmetry() && !shape.is_achiral() {
            return Ok(shape);
        }
    }
    Err(Error::SamplingFailure(format!(
        "no asymmetric chiral {k}-cube found in {MAX_POLYCUBE_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(cells: &[Cell]) -> Polycube {
        Polycube::new(cells.to_vec()).unwrap()
    }

    #[test]
    fn rotation_group_is_closed_and_distinct() {
        let rots = grid_rotations();
        assert_eq!(rots[0], [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        let set: BTreeSet<GridRotation> = rots.iter().copied().collect();
        assert_eq!(set.len(), 24);
        for a in rots {
            for b in rots {
                let mut ab = [[0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        ab[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
                    }
                }
                assert!(set.contains(&ab));
            }
            let q = grid_rotation_quaternion(a);
            assert!((q.to_rotation_matrix().matrix() - grid_rotation_matrix(a)).amax() < 1e-12);
        }
    }

    #[test]
    fn straight_tetromino_is_symmetric() {
        let bar = shape(&[[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]]);
        assert!(bar.has_rotational_symmetry());
        assert!(bar.is_achiral());
    }

    #[test]
    fn chiral_tetracube() {
        // one of the two mirror-image screw tetracubes
        let s = shape(&[[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]]);
        assert!(!s.is_achiral());
        assert!(!s.same_shape(&s.mirrored()));
        assert!(s.mirrored().mirrored() == s);
    }

    #[test]
    fn rejects_invalid_cell_sets() {
        assert!(Polycube::new(vec![[0, 0, 0], [2, 0, 0]]).is_err());
        assert!(Polycube::new(vec![[0, 0, 0], [0, 0, 0]]).is_err());
        assert!(Polycube::new(vec![]).is_err());
    }

    #[test]
    fn id_round_trips() {
        let s = shape(&[[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1], [2, 1, 1]]);
        let id = s.shape_id();
        let back = Polycube::parse_cells(&id).unwrap();
        assert!(back.same_shape(&s));
        for m in grid_rotations() {
            assert_eq!(s.rotated(m).shape_id(), id);
        }
    }

    #[test]
    fn sampled_shapes_have_24_distinct_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [5, 6, 8, 10] {
            for _ in 0..10 {
                let s = sample_polycube(&mut rng, k).unwrap();
                assert_eq!(s.len(), k);
                let rots: BTreeSet<Polycube> = grid_rotations().iter().map(|m| s.rotated(m)).collect();
                assert_eq!(rots.len(), 24);
                assert!(!rots.contains(&s.mirrored()));
            }
        }
    }

    #[test]
    fn every_tetracube_is_rejected() {
        // the two chiral tetracubes each have a half-turn symmetry
        let err = sample_polycube(&mut ChaCha8Rng::seed_from_u64(1), 4).unwrap_err();
        assert!(matches!(err, Error::SamplingFailure(_)));
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_polycube(&mut ChaCha8Rng::seed_from_u64(11), 8).unwrap();
        let b = sample_polycube(&mut ChaCha8Rng::seed_from_u64(11), 8).unwrap();
        assert_eq!(a, b);
        assert!(sample_polycube(&mut ChaCha8Rng::seed_from_u64(11), 3).is_err());
    }
}
