use super::voxmap::{MAX_SLOTS, TAG_EMPTY, TAG_INTERIOR, TAG_PROXIMITY, TAG_SURFACE};
use super::{VolumetricError, VoxMap};
use crate::geometry::{mesh_bounds, RigidPose, TriangleMesh, Vec3};

/// Default upper bound on grid cells (2^27).
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 27;

/// A triangle lying in an axis-aligned grid plane is shifted this fraction
/// of a voxel against its outward normal before the overlap test, so it
/// belongs to the cells on its inner side.
pub(crate) const INWARD_NUDGE: f64 = 1e-6;

/// Vertex coordinates within this fraction of a voxel of a grid plane are
/// placed exactly on it, so meshes authored on the grid classify the same
/// way regardless of floating-point rounding.
pub(crate) const GRID_SNAP: f64 = 1e-9;

/// Surface voxelizer with a narrow proximity band and flood-filled interior.
#[derive(Debug, Clone, Copy)]
pub struct Voxelizer {
    pub voxel_size: f64,
    pub band_width: f64,
    pub cell_budget: u64,
}

impl Voxelizer {
    pub fn new(voxel_size: f64, band_width: f64) -> Self {
        Self {
            voxel_size,
            band_width,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }

    pub fn with_cell_budget(mut self, cell_budget: u64) -> Self {
        self.cell_budget = cell_budget;
        self
    }

    pub fn voxelize(&self, mesh: &TriangleMesh) -> Result<VoxMap, VolumetricError> {
        let s = self.voxel_size;
        if !(s.is_finite() && s > 0.0) {
            return Err(VolumetricError::InvalidVoxelSize(s));
        }
        if !(self.band_width.is_finite() && self.band_width >= 0.0) {
            return Err(VolumetricError::InvalidBandWidth(self.band_width));
        }
        let bounds = mesh_bounds(mesh)?;
        let pad = self.band_width + s;
        let origin = bounds.min - Vec3::repeat(pad);
        let extent = bounds.extent() + Vec3::repeat(2.0 * pad);
        let mut dims = [0usize; 3];
        let mut required: u128 = 1;
        for axis in 0..3 {
            let n = (extent[axis] / s - 1e-9).ceil().max(1.0);
            if !n.is_finite() || n > u64::MAX as f64 {
                return Err(VolumetricError::CellBudgetExceeded {
                    required: u128::MAX,
                    budget: self.cell_budget,
                });
            }
            dims[axis] = n as usize;
            required = required.saturating_mul(n as u128);
        }
        if required > self.cell_budget as u128 {
            return Err(VolumetricError::CellBudgetExceeded {
                required,
                budget: self.cell_budget,
            });
        }

        let grid = Grid { origin, s, dims };
        let total = grid.len();

        // Pass 1: surface cells and their accumulated area-weighted normals.
        let mut slot_of = vec![u32::MAX; total];
        let mut sums: Vec<Vec3> = Vec::new();
        let mut fallback: Vec<Vec3> = Vec::new();
        for tri in mesh.iter_triangles() {
            let area_normal = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
            let unit = area_normal.try_normalize(0.0);
            let shifted = grid.settle_on_plane(grid.to_grid_units(tri), unit);
            let Some((lo, hi)) = grid.index_range(&shifted) else {
                continue;
            };
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let center = Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5);
                        if !triangle_overlaps_open_cube(&shifted, &center, 0.5) {
                            continue;
                        }
                        let index = grid.index([i, j, k]);
                        if slot_of[index] == u32::MAX {
                            slot_of[index] = sums.len() as u32;
                            sums.push(Vec3::zeros());
                            fallback.push(unit.unwrap_or_else(Vec3::z));
                        }
                        sums[slot_of[index] as usize] += area_normal;
                    }
                }
            }
        }
        if sums.len() >= MAX_SLOTS {
            return Err(VolumetricError::CellBudgetExceeded {
                required: sums.len() as u128,
                budget: MAX_SLOTS as u64,
            });
        }

        // Pass 2: flood fill from the grid boundary through non-surface cells.
        let outside = flood_outside(&grid, &slot_of);

        // Pass 3: proximity band as squared voxel offsets to the nearest
        // surface voxel center.
        let band_sq = self.band_offsets();
        let mut nearest: Vec<u32> = if band_sq.is_empty() {
            Vec::new()
        } else {
            vec![u32::MAX; total]
        };
        if !band_sq.is_empty() {
            for index in 0..total {
                if slot_of[index] == u32::MAX {
                    continue;
                }
                let [i, j, k] = grid.coords(index);
                for &(di, dj, dk, n2) in &band_sq {
                    let (Some(ni), Some(nj), Some(nk)) =
                        (offset(i, di, dims[0]), offset(j, dj, dims[1]), offset(k, dk, dims[2]))
                    else {
                        continue;
                    };
                    let target = grid.index([ni, nj, nk]);
                    if outside[target] && nearest[target] > n2 {
                        nearest[target] = n2;
                    }
                }
            }
        }

        // Pack cells; surface slots are renumbered in cell order.
        let mut cells = Vec::with_capacity(total);
        let mut normals = Vec::with_capacity(sums.len());
        let mut distances = Vec::new();
        for index in 0..total {
            let slot = slot_of[index];
            let cell = if slot != u32::MAX {
                let sum = sums[slot as usize];
                let n = sum.try_normalize(0.0).unwrap_or(fallback[slot as usize]);
                normals.push(n);
                TAG_SURFACE | (normals.len() - 1) as u32
            } else if !outside[index] {
                TAG_INTERIOR
            } else if !nearest.is_empty() && nearest[index] != u32::MAX {
                let d = (s * (nearest[index] as f64).sqrt()).min(self.band_width);
                distances.push(d);
                TAG_PROXIMITY | (distances.len() - 1) as u32
            } else {
                TAG_EMPTY
            };
            cells.push(cell);
        }
        Ok(VoxMap::from_raw(
            origin,
            s,
            dims,
            self.band_width,
            cells,
            normals,
            distances,
        ))
    }

    /// Offsets `(di, dj, dk, di²+dj²+dk²)` within the band, excluding zero.
    fn band_offsets(&self) -> Vec<(i64, i64, i64, u32)> {
        let s = self.voxel_size;
        if self.band_width < s * (1.0 - 1e-12) {
            return Vec::new();
        }
        let r = (self.band_width / s + 1e-9).floor() as i64;
        let limit = self.band_width * (1.0 + 1e-12);
        let mut out = Vec::new();
        for dk in -r..=r {
            for dj in -r..=r {
                for di in -r..=r {
                    let n2 = (di * di + dj * dj + dk * dk) as u32;
                    if n2 > 0 && s * (n2 as f64).sqrt() <= limit {
                        out.push((di, dj, dk, n2));
                    }
                }
            }
        }
        out
    }
}

/// Voxelizes a mesh with the default cell budget.
pub fn voxelize_surface(mesh: &TriangleMesh, voxel_size: f64, band_width: f64) -> Result<VoxMap, VolumetricError> {
    Voxelizer::new(voxel_size, band_width).voxelize(mesh)
}

/// Merges posed parts into one static voxmap.
///
/// Parts are put into a canonical order (by their posed vertex bits) before
/// merging so that the result does not depend on the order of `parts`.
pub fn cook_voxmaps(parts: &[(&TriangleMesh, RigidPose)], voxelizer: &Voxelizer) -> Result<VoxMap, VolumetricError> {
    if parts.is_empty() {
        return Err(VolumetricError::NoParts);
    }
    let mut posed: Vec<TriangleMesh> = parts.iter().map(|(mesh, pose)| mesh.transformed(pose)).collect();
    posed.sort_by_cached_key(canonical_key);
    voxelizer.voxelize(&TriangleMesh::merged(posed.iter()))
}

fn canonical_key(mesh: &TriangleMesh) -> (Vec<[u64; 3]>, Vec<[u32; 3]>) {
    (
        mesh.vertices()
            .iter()
            .map(|v| [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()])
            .collect(),
        mesh.triangles().to_vec(),
    )
}

fn offset(i: usize, d: i64, n: usize) -> Option<usize> {
    let v = i as i64 + d;
    (v >= 0 && v < n as i64).then_some(v as usize)
}

struct Grid {
    origin: Vec3,
    s: f64,
    dims: [usize; 3],
}

impl Grid {
    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    fn coords(&self, index: usize) -> [usize; 3] {
        [
            index % self.dims[0],
            (index / self.dims[0]) % self.dims[1],
            index / (self.dims[0] * self.dims[1]),
        ]
    }

    /// Triangle in grid units, where cell `i` spans `[i, i + 1]`, with
    /// coordinates near a grid plane snapped onto it.
    fn to_grid_units(&self, tri: [Vec3; 3]) -> [Vec3; 3] {
        tri.map(|v| {
            ((v - self.origin) / self.s).map(|u| {
                let r = u.round();
                if (u - r).abs() < GRID_SNAP {
                    r
                } else {
                    u
                }
            })
        })
    }

    /// Shifts a triangle (in grid units) that lies exactly in a grid plane
    /// to the inner side of that plane; other triangles are returned
    /// unchanged.
    fn settle_on_plane(&self, tri: [Vec3; 3], unit_normal: Option<Vec3>) -> [Vec3; 3] {
        let Some(n) = unit_normal else {
            return tri;
        };
        for axis in 0..3 {
            if n[axis].abs() < 1.0 - 1e-12 {
                continue;
            }
            let t = tri[0][axis];
            if (t - t.round()).abs() < INWARD_NUDGE {
                let mut shift = Vec3::zeros();
                shift[axis] = -n[axis].signum() * INWARD_NUDGE;
                return tri.map(|v| v + shift);
            }
        }
        tri
    }

    /// Inclusive cell range covering the triangle's (grid-unit) bounding
    /// box, clamped to the grid. `None` if the box misses the grid entirely.
    fn index_range(&self, tri: &[Vec3; 3]) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for axis in 0..3 {
            let min = tri.iter().map(|v| v[axis]).fold(f64::INFINITY, f64::min);
            let max = tri.iter().map(|v| v[axis]).fold(f64::NEG_INFINITY, f64::max);
            let a = min.floor() - 1.0;
            let b = max.floor() + 1.0;
            let n = self.dims[axis] as f64;
            if b < 0.0 || a >= n {
                return None;
            }
            lo[axis] = a.max(0.0) as usize;
            hi[axis] = b.min(n - 1.0) as usize;
        }
        Some((lo, hi))
    }
}

fn flood_outside(grid: &Grid, slot_of: &[u32]) -> Vec<bool> {
    let [nx, ny, nz] = grid.dims;
    let mut outside = vec![false; slot_of.len()];
    let mut stack: Vec<usize> = Vec::new();
    let seed = |index: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
        if slot_of[index] == u32::MAX && !outside[index] {
            outside[index] = true;
            stack.push(index);
        }
    };
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                    seed(grid.index([i, j, k]), &mut outside, &mut stack);
                }
            }
        }
    }
    while let Some(index) = stack.pop() {
        let [i, j, k] = grid.coords(index);
        if i > 0 {
            seed(index - 1, &mut outside, &mut stack);
        }
        if i + 1 < nx {
            seed(index + 1, &mut outside, &mut stack);
        }
        if j > 0 {
            seed(index - nx, &mut outside, &mut stack);
        }
        if j + 1 < ny {
            seed(index + nx, &mut outside, &mut stack);
        }
        if k > 0 {
            seed(index - nx * ny, &mut outside, &mut stack);
        }
        if k + 1 < nz {
            seed(index + nx * ny, &mut outside, &mut stack);
        }
    }
    outside
}

/// Separating-axis test between a closed triangle and the open cube of
/// half-size `h` centered at `center`. Touching counts as separated.
pub(crate) fn triangle_overlaps_open_cube(tri: &[Vec3; 3], center: &Vec3, h: f64) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let separated = |axis: &Vec3| -> bool {
        let p0 = axis.dot(&v[0]);
        let p1 = axis.dot(&v[1]);
        let p2 = axis.dot(&v[2]);
        let min = p0.min(p1).min(p2);
        let max = p0.max(p1).max(p2);
        let r = h * (axis.x.abs() + axis.y.abs() + axis.z.abs());
        max <= -r || min >= r
    };

    for axis in 0..3 {
        let mut a = Vec3::zeros();
        a[axis] = 1.0;
        if separated(&a) {
            return false;
        }
    }
    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let normal = edges[0].cross(&edges[1]);
    let scale = edges.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let tiny = 1e-14 * scale * scale;
    if normal.norm() > tiny && separated(&normal) {
        return false;
    }
    for e in &edges {
        for axis in 0..3 {
            let mut b = Vec3::zeros();
            b[axis] = 1.0;
            let c = e.cross(&b);
            if c.norm() > 1e-14 * scale && separated(&c) {
                return false;
            }
        }
    }
    true
}
