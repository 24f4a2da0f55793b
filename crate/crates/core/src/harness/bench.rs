//! Render-loop throughput benchmark.
//!
//! A plate is voxelized at a voxel size found by bisection so that its
//! surface voxel count lands on the requested workload, and a box tool whose
//! pointshell has at least the requested number of points is pressed onto
//! it and slid back and forth while every render step is timed.

use std::time::{Duration, Instant};

use super::trace::step_rates;
use super::HarnessError;
use crate::geometry::{RigidPose, TriangleMesh, Vec3};
use crate::volumetric::{PointShell, PointShellBuilder, VoxMap, Voxelizer};
use crate::vps::{RenderConfig, Renderer, ToolState};

/// Surface voxel workload of the reference assembly scene.
pub const REFERENCE_VOXELS: usize = 185_030;
pub const REFERENCE_POINTS: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub target_voxels: usize,
    /// Minimum pointshell size.
    pub points: usize,
    /// Wall time of the timed loop.
    pub seconds: f64,
    /// Relative tolerance on the calibrated voxel count.
    pub tolerance: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            target_voxels: REFERENCE_VOXELS,
            points: REFERENCE_POINTS,
            seconds: 2.0,
            tolerance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub voxel_size: f64,
    pub surface_voxels: usize,
    pub spacing: f64,
    pub shell_points: usize,
    pub steps: usize,
    pub median_rate_hz: f64,
    pub min_rate_hz: f64,
    pub min_contacts: usize,
    pub mean_contacts: f64,
    pub deep_penetration_steps: usize,
    pub calibration_time: Duration,
    pub run_time: Duration,
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "voxel size:        {:.6} m", self.voxel_size)?;
        writeln!(f, "surface voxels:    {}", self.surface_voxels)?;
        writeln!(
            f,
            "pointshell:        {} points at {:.6} m spacing",
            self.shell_points, self.spacing
        )?;
        writeln!(f, "render steps:      {}", self.steps)?;
        writeln!(f, "median step rate:  {:.0} Hz", self.median_rate_hz)?;
        writeln!(f, "min step rate:     {:.0} Hz", self.min_rate_hz)?;
        writeln!(
            f,
            "contacts per step: min {}, mean {:.1}",
            self.min_contacts, self.mean_contacts
        )?;
        writeln!(f, "deep penetration:  {} steps", self.deep_penetration_steps)?;
        writeln!(f, "calibration time:  {:.2} s", self.calibration_time.as_secs_f64())?;
        write!(f, "timed loop:        {:.2} s", self.run_time.as_secs_f64())
    }
}

/// 0.4 × 0.4 × 0.04 m plate with its top face at z = 0.
pub fn bench_plate() -> TriangleMesh {
    TriangleMesh::cuboid(Vec3::new(-0.2, -0.2, -0.04), Vec3::new(0.2, 0.2, 0.0))
}

/// 0.1 × 0.1 × 0.02 m box centered at its origin.
pub fn bench_tool() -> TriangleMesh {
    TriangleMesh::cuboid(Vec3::new(-0.05, -0.05, -0.01), Vec3::new(0.05, 0.05, 0.01))
}

fn surface_area(mesh: &TriangleMesh) -> f64 {
    mesh.iter_triangles()
        .map(|[a, b, c]| 0.5 * (b - a).cross(&(c - a)).norm())
        .sum()
}

/// Voxel size whose surface voxel count is within `tolerance` of `target`
/// (or the closest found after the search budget), with its voxmap.
pub fn calibrate_voxel_size(mesh: &TriangleMesh, target: usize, tolerance: f64) -> Result<(f64, VoxMap), HarnessError> {
    if target == 0 {
        return Err(HarnessError::InvalidScenario(
            "target voxel count must be positive".into(),
        ));
    }
    let voxelize = |s: f64| Voxelizer::new(s, 0.0).voxelize(mesh);
    let miss = |count: usize| (count as f64 - target as f64).abs() / target as f64;

    // Count falls roughly as area / s²; bracket the target by geometric steps.
    let mut s = (surface_area(mesh) / target as f64).sqrt();
    let mut map = voxelize(s)?;
    let mut best = (s, map.surface_count());
    let (mut fine, mut coarse) = if map.surface_count() >= target {
        (s, f64::NAN)
    } else {
        (f64::NAN, s)
    };
    for _ in 0..40 {
        if !fine.is_nan() && !coarse.is_nan() {
            break;
        }
        s = if fine.is_nan() { s / 1.25 } else { s * 1.25 };
        map = voxelize(s)?;
        if miss(map.surface_count()) < miss(best.1) {
            best = (s, map.surface_count());
        }
        if map.surface_count() >= target {
            fine = s;
        } else {
            coarse = s;
        }
    }
    for _ in 0..60 {
        if miss(best.1) <= tolerance || fine.is_nan() || coarse.is_nan() {
            break;
        }
        s = (fine * coarse).sqrt();
        map = voxelize(s)?;
        let count = map.surface_count();
        if miss(count) < miss(best.1) {
            best = (s, count);
        }
        if count >= target {
            fine = s;
        } else {
            coarse = s;
        }
    }
    if map.voxel_size() != best.0 {
        map = voxelize(best.0)?;
    }
    Ok((best.0, map))
}

/// Largest spacing whose pointshell has at least `points` points.
pub fn calibrate_spacing(mesh: &TriangleMesh, points: usize) -> Result<(f64, PointShell), HarnessError> {
    let build = |s: f64| PointShellBuilder::new(s).with_point_budget(usize::MAX).build(mesh);
    let mut lo = (surface_area(mesh) / points.max(1) as f64).sqrt();
    while build(lo)?.len() < points {
        lo /= 1.5;
    }
    let mut hi = lo * 1.5;
    while build(hi)?.len() >= points {
        lo = hi;
        hi *= 1.5;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if build(mid)?.len() >= points {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, build(lo)?))
}

/// Penalty gain per point, kept low so the stiffness of the ~2000 points in
/// contact stays within the stable range of the coupled tool.
const BENCH_K_PENALTY: f64 = 50.0;

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, HarnessError> {
    if !(cfg.seconds.is_finite() && cfg.seconds > 0.0) {
        return Err(HarnessError::InvalidScenario(
            "benchmark duration must be positive".into(),
        ));
    }
    let calib_start = Instant::now();
    let (voxel_size, map) = calibrate_voxel_size(&bench_plate(), cfg.target_voxels, cfg.tolerance)?;
    let (spacing, shell) = calibrate_spacing(&bench_tool(), cfg.points)?;
    let calibration_time = calib_start.elapsed();
    log::info!(
        "bench: {} surface voxels at {voxel_size} m, {} points at {spacing} m",
        map.surface_count(),
        shell.len()
    );

    let render = RenderConfig {
        k_penalty: BENCH_K_PENALTY,
        ..RenderConfig::default()
    };
    let dt = render.coupling.dt;
    let mut renderer = Renderer::new(render);
    // Tool bottom at z = -0.01 in its own frame; the device sits 1 mm below
    // contact once lowered.
    let hover = 0.01 + 0.005;
    let press = 0.01 - 0.001;
    let pose_at = |k: usize| {
        let t = k as f64 * dt;
        let lower = 400;
        let z = if k < lower {
            hover + (press - hover) * k as f64 / lower as f64
        } else {
            press
        };
        let x = 0.002 * (2.0 * std::f64::consts::PI * 2.0 * t).sin();
        RigidPose::from_translation(Vec3::new(x, 0.0, z))
    };
    let mut state = ToolState::at_rest(pose_at(0));
    let mut k = 0;
    // Lower onto the plate and settle before timing.
    while k < 1600 {
        let (next, _, _) = renderer.step(&state, &shell, &map, &pose_at(k));
        state = next;
        k += 1;
    }

    let mut times = Vec::new();
    let mut contacts = Vec::new();
    let mut deep = 0;
    let budget = Duration::from_secs_f64(cfg.seconds);
    let run_start = Instant::now();
    while run_start.elapsed() < budget {
        let (next, _, stats) = renderer.step(&state, &shell, &map, &pose_at(k));
        state = next;
        k += 1;
        times.push(stats.step_time_ns);
        contacts.push(stats.contact_count);
        deep += usize::from(stats.deep_penetration);
    }
    let run_time = run_start.elapsed();
    let (median_rate_hz, min_rate_hz) = step_rates(&times).unwrap_or((0.0, 0.0));
    Ok(BenchReport {
        voxel_size,
        surface_voxels: map.surface_count(),
        spacing,
        shell_points: shell.len(),
        steps: times.len(),
        median_rate_hz,
        min_rate_hz,
        min_contacts: contacts.iter().copied().min().unwrap_or(0),
        mean_contacts: contacts.iter().sum::<usize>() as f64 / contacts.len().max(1) as f64,
        deep_penetration_steps: deep,
        calibration_time,
        run_time,
    })
}
