//! Volumetric haptic representations: the voxmap for static parts and the
//! pointshell for the manipulated part.

mod pointshell;
mod voxelize;
mod voxmap;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use pointshell::{build_pointshell, PointShell, PointShellBuilder, DEFAULT_POINT_BUDGET};
pub use voxelize::{cook_voxmaps, voxelize_surface, Voxelizer, DEFAULT_CELL_BUDGET};
pub use voxmap::{VoxMap, VoxelKind, VoxelState};

#[derive(Debug, Error)]
pub enum VolumetricError {
    #[error("voxel size must be positive and finite, got {0}")]
    InvalidVoxelSize(f64),
    #[error("band width must be non-negative and finite, got {0}")]
    InvalidBandWidth(f64),
    #[error("pointshell spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("grid of {required} cells exceeds the budget of {budget}")]
    CellBudgetExceeded { required: u128, budget: u64 },
    #[error("pointshell exceeds the budget of {budget} points")]
    PointBudgetExceeded { budget: usize },
    #[error("no parts to cook")]
    NoParts,
    #[error("invalid voxmap: {0}")]
    InvalidVoxMap(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
