use std::fmt::Write as _;

use super::VolumetricError;
use crate::geometry::{Aabb, Vec3};

/// State of one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoxelState {
    Empty,
    /// Narrow-band cell; payload is the center distance to the nearest
    /// surface voxel center, in meters.
    Proximity(f64),
    /// Cell crossed by the surface; payload is the outward unit normal.
    Surface(Vec3),
    Interior,
}

impl VoxelState {
    pub fn kind(&self) -> VoxelKind {
        match self {
            VoxelState::Empty => VoxelKind::Empty,
            VoxelState::Proximity(_) => VoxelKind::Proximity,
            VoxelState::Surface(_) => VoxelKind::Surface,
            VoxelState::Interior => VoxelKind::Interior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoxelKind {
    Empty,
    Proximity,
    Surface,
    Interior,
}

impl VoxelKind {
    pub fn symbol(self) -> char {
        match self {
            VoxelKind::Empty => '.',
            VoxelKind::Proximity => 'p',
            VoxelKind::Surface => 's',
            VoxelKind::Interior => 'i',
        }
    }
}

// Cells are packed into a u32: two tag bits and a 30-bit payload slot that
// indexes `normals` (surface) or `distances` (proximity).
const TAG_SHIFT: u32 = 30;
const SLOT_MASK: u32 = (1 << TAG_SHIFT) - 1;
pub(super) const TAG_EMPTY: u32 = 0;
pub(super) const TAG_PROXIMITY: u32 = 1 << TAG_SHIFT;
pub(super) const TAG_SURFACE: u32 = 2 << TAG_SHIFT;
pub(super) const TAG_INTERIOR: u32 = 3 << TAG_SHIFT;
pub(super) const MAX_SLOTS: usize = SLOT_MASK as usize + 1;

/// Dense voxel grid over the static scene.
///
/// Cell `(i, j, k)` covers the half-open box `[origin + (i,j,k)·s,
/// origin + (i+1,j+1,k+1)·s)` and is stored at `i + dims.x·(j + dims.y·k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxMap {
    origin: Vec3,
    voxel_size: f64,
    dims: [usize; 3],
    band_width: f64,
    cells: Vec<u32>,
    normals: Vec<Vec3>,
    distances: Vec<f64>,
}

impl VoxMap {
    pub(super) fn from_raw(
        origin: Vec3,
        voxel_size: f64,
        dims: [usize; 3],
        band_width: f64,
        cells: Vec<u32>,
        normals: Vec<Vec3>,
        distances: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(cells.len(), dims.iter().product::<usize>());
        Self {
            origin,
            voxel_size,
            dims,
            band_width,
            cells,
            normals,
            distances,
        }
    }

    /// Builds a voxmap from explicit per-cell states (x-fastest order),
    /// checking every invariant.
    pub fn from_states(
        origin: Vec3,
        voxel_size: f64,
        dims: [usize; 3],
        band_width: f64,
        states: &[VoxelState],
    ) -> Result<Self, VolumetricError> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(VolumetricError::InvalidVoxelSize(voxel_size));
        }
        if !(band_width.is_finite() && band_width >= 0.0) {
            return Err(VolumetricError::InvalidBandWidth(band_width));
        }
        if dims.contains(&0) || states.len() != dims.iter().product::<usize>() {
            return Err(VolumetricError::InvalidVoxMap(format!(
                "{} states for dims {:?}",
                states.len(),
                dims
            )));
        }
        let mut cells = Vec::with_capacity(states.len());
        let mut normals = Vec::new();
        let mut distances = Vec::new();
        for (index, state) in states.iter().enumerate() {
            let cell = match *state {
                VoxelState::Empty => TAG_EMPTY,
                VoxelState::Interior => TAG_INTERIOR,
                VoxelState::Surface(n) => {
                    if (n.norm() - 1.0).abs() > 1e-9 {
                        return Err(VolumetricError::InvalidVoxMap(format!(
                            "surface cell {index} has non-unit normal"
                        )));
                    }
                    normals.push(n);
                    TAG_SURFACE | (normals.len() - 1) as u32
                }
                VoxelState::Proximity(d) => {
                    if !(d >= 0.0 && d <= band_width) {
                        return Err(VolumetricError::InvalidVoxMap(format!(
                            "proximity cell {index} distance {d} outside [0, {band_width}]"
                        )));
                    }
                    distances.push(d);
                    TAG_PROXIMITY | (distances.len() - 1) as u32
                }
            };
            cells.push(cell);
        }
        if normals.len() >= MAX_SLOTS || distances.len() >= MAX_SLOTS {
            return Err(VolumetricError::InvalidVoxMap("too many payload cells".into()));
        }
        Ok(Self::from_raw(
            origin, voxel_size, dims, band_width, cells, normals, distances,
        ))
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn band_width(&self) -> f64 {
        self.band_width
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn surface_count(&self) -> usize {
        self.normals.len()
    }

    pub fn bounds(&self) -> Aabb {
        let extent = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.voxel_size;
        Aabb::new(self.origin, self.origin + extent)
    }

    #[inline]
    pub fn linear_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        let k = index / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn cell_center(&self, ijk: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(ijk[0] as f64 + 0.5, ijk[1] as f64 + 0.5, ijk[2] as f64 + 0.5) * self.voxel_size
    }

    /// Cell containing `p`, or `None` outside the grid.
    #[inline]
    pub fn cell_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut ijk = [0usize; 3];
        for axis in 0..3 {
            let f = ((p[axis] - self.origin[axis]) / self.voxel_size).floor();
            // NaN fails both comparisons and lands here too.
            if !(f >= 0.0 && f < self.dims[axis] as f64) {
                return None;
            }
            ijk[axis] = f as usize;
        }
        Some(ijk)
    }

    #[inline]
    pub fn state(&self, index: usize) -> VoxelState {
        let cell = self.cells[index];
        let slot = (cell & SLOT_MASK) as usize;
        match cell & !SLOT_MASK {
            TAG_EMPTY => VoxelState::Empty,
            TAG_PROXIMITY => VoxelState::Proximity(self.distances[slot]),
            TAG_SURFACE => VoxelState::Surface(self.normals[slot]),
            _ => VoxelState::Interior,
        }
    }

    #[inline]
    pub fn kind(&self, index: usize) -> VoxelKind {
        match self.cells[index] & !SLOT_MASK {
            TAG_EMPTY => VoxelKind::Empty,
            TAG_PROXIMITY => VoxelKind::Proximity,
            TAG_SURFACE => VoxelKind::Surface,
            _ => VoxelKind::Interior,
        }
    }

    pub fn state_at(&self, ijk: [usize; 3]) -> VoxelState {
        self.state(self.linear_index(ijk))
    }

    /// Index lookup of the cell containing a world point; `Empty` outside.
    #[inline]
    pub fn lookup(&self, p: &Vec3) -> VoxelState {
        match self.cell_of(p) {
            Some(ijk) => self.state(self.linear_index(ijk)),
            None => VoxelState::Empty,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = VoxelState> + '_ {
        (0..self.cells.len()).map(move |i| self.state(i))
    }

    /// Linear indices of all surface cells, ascending.
    pub fn surface_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(move |&i| self.kind(i) == VoxelKind::Surface)
    }

    pub fn count(&self, kind: VoxelKind) -> usize {
        (0..self.cells.len()).filter(|&i| self.kind(i) == kind).count()
    }

    /// Text dump: a header line, then one character per cell with one
    /// line per row of x and a blank line between z-slices.
    pub fn to_dump(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let mut out = String::with_capacity(self.cells.len() + ny * nz + nz + 64);
        let o = self.origin;
        let _ = writeln!(out, "voxmap {nx} {ny} {nz} {} {} {} {}", self.voxel_size, o.x, o.y, o.z);
        for k in 0..nz {
            if k > 0 {
                out.push('\n');
            }
            for j in 0..ny {
                for i in 0..nx {
                    out.push(self.kind(self.linear_index([i, j, k])).symbol());
                }
                out.push('\n');
            }
        }
        out
    }
}
