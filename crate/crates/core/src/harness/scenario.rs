//! Scenario files and scripted trajectories.
//!
//! ```text
//! # comment
//! PART     name path unit_scale
//! CONFIG   key value
//! STEP     name active_part tx ty tz qw qx qy qz
//! WAYPOINT t tx ty tz qw qx qy qz        (belongs to the preceding STEP)
//! ```
//!
//! Mesh paths are relative to the scenario file. Poses are in meters with
//! `w, x, y, z` quaternions (normalized on load); times are seconds.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion};

use super::HarnessError;
use crate::device::{DeviceLimits, HandleGeometry, DEFAULT_HANDLE_LENGTH};
use crate::geometry::{load_mesh, RigidPose, TriangleMesh, Vec3};
use crate::volumetric::{cook_voxmaps, VolumetricError, VoxMap, VoxelState, Voxelizer};
use crate::vps::{CouplingConfig, RenderConfig, DEFAULT_K_PENALTY};

/// Waypoints with linear position and spherical-linear orientation
/// interpolation. Sampling outside the time range clamps to the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<(f64, RigidPose)>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<(f64, RigidPose)>) -> Result<Self, HarnessError> {
        if waypoints.len() < 2 {
            return Err(HarnessError::InvalidTrajectory(
                "at least two waypoints are required".into(),
            ));
        }
        if waypoints.iter().any(|(t, _)| !t.is_finite()) {
            return Err(HarnessError::InvalidTrajectory("waypoint times must be finite".into()));
        }
        if waypoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(HarnessError::InvalidTrajectory(
                "waypoint times must be strictly increasing".into(),
            ));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[(f64, RigidPose)] {
        &self.waypoints
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].0
    }

    pub fn sample(&self, t: f64) -> RigidPose {
        let w = &self.waypoints;
        if t <= w[0].0 {
            return w[0].1;
        }
        if t >= self.end_time() {
            return w[w.len() - 1].1;
        }
        // First waypoint strictly after t; t lies in [w[i-1].0, w[i].0).
        let i = w.partition_point(|(ti, _)| *ti <= t);
        let (t0, a) = &w[i - 1];
        let (t1, b) = &w[i];
        let u = (t - t0) / (t1 - t0);
        let position = a.position().lerp(&b.position(), u);
        let qa = a.quaternion();
        let qb = b.quaternion();
        let q = qa.try_slerp(&qb, u, 1e-12).unwrap_or(qa);
        RigidPose::from_quaternion(position, q)
    }

    /// Sample times `t0, t0 + dt, ...` ending exactly at the last waypoint.
    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        let t0 = self.start_time();
        let t1 = self.end_time();
        let n = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
        let mut times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
        times.push(t1);
        times
    }
}

#[derive(Debug, Clone)]
pub struct Part {
    pub name: String,
    pub path: PathBuf,
    pub unit_scale: f64,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub name: String,
    /// Index into [`Scenario::parts`].
    pub active_part: usize,
    pub target: RigidPose,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    /// Where the render side listens for device poses.
    pub render_addr: SocketAddr,
    /// Where the device side listens for wrenches.
    pub device_addr: SocketAddr,
    /// In-process channel depth.
    pub capacity: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        let any = SocketAddr::from(([127, 0, 0, 1], 0));
        Self {
            render_addr: any,
            device_addr: any,
            capacity: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub voxel_size: f64,
    pub band_width: f64,
    /// Pointshell spacing.
    pub spacing: f64,
    pub render: RenderConfig,
    pub rate_hz: f64,
    pub pos_tol: f64,
    pub ang_tol: f64,
    pub handle: HandleGeometry,
    pub limits: DeviceLimits,
    pub net: NetConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        build_config(&HashMap::new(), NetConfig::default()).expect("defaults are valid")
    }
}

impl ScenarioConfig {
    pub fn voxelizer(&self) -> Voxelizer {
        Voxelizer::new(self.voxel_size, self.band_width)
    }
}

pub const DEFAULT_VOXEL_SIZE: f64 = 0.005;
pub const DEFAULT_RATE_HZ: f64 = 1600.0;
pub const DEFAULT_ANG_TOL: f64 = 0.05;

const NUMERIC_KEYS: &[&str] = &[
    "voxel_size",
    "band_width",
    "spacing",
    "k_penalty",
    "k_lin",
    "d_lin",
    "k_ang",
    "d_ang",
    "max_force",
    "max_torque",
    "mass",
    "inertia",
    "rate_hz",
    "pos_tol",
    "ang_tol",
    "handle_length",
    "limits.continuous_force",
    "limits.peak_force",
    "limits.worst_cont_torque",
    "limits.worst_peak_torque",
    "limits.typ_cont_torque",
    "limits.typ_peak_torque",
    "limits.stiffness_min",
    "limits.stiffness_max",
    "limits.resolution",
    "limits.angular_resolution",
    "limits.angular_workspace",
    "net.capacity",
];

/// Resolves numeric overrides on top of the defaults. Coupling damping
/// defaults to critical for the chosen stiffness and mass; force and torque
/// caps default to the device peaks.
fn build_config(values: &HashMap<&str, f64>, net: NetConfig) -> Result<ScenarioConfig, String> {
    let get = |k: &str, default: f64| values.get(k).copied().unwrap_or(default);

    let d = DeviceLimits::default();
    let limits = DeviceLimits {
        workspace: d.workspace,
        continuous_force: get("limits.continuous_force", d.continuous_force),
        peak_force: get("limits.peak_force", d.peak_force),
        worst_cont_torque: get("limits.worst_cont_torque", d.worst_cont_torque),
        worst_peak_torque: get("limits.worst_peak_torque", d.worst_peak_torque),
        typ_cont_torque: get("limits.typ_cont_torque", d.typ_cont_torque),
        typ_peak_torque: get("limits.typ_peak_torque", d.typ_peak_torque),
        stiffness_min: get("limits.stiffness_min", d.stiffness_min),
        stiffness_max: get("limits.stiffness_max", d.stiffness_max),
        resolution: get("limits.resolution", d.resolution),
        angular_resolution: get("limits.angular_resolution", d.angular_resolution),
        angular_workspace: get("limits.angular_workspace", d.angular_workspace),
    };
    limits.validate().map_err(|e| e.to_string())?;

    let base = CouplingConfig::default();
    let rate_hz = get("rate_hz", DEFAULT_RATE_HZ);
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(format!("rate_hz must be positive, got {rate_hz}"));
    }
    let mass = get("mass", base.mass);
    let inertia = get("inertia", base.inertia);
    let k_lin = get("k_lin", limits.stiffness_min);
    let k_ang = get("k_ang", base.k_ang);
    let coupling = CouplingConfig {
        k_lin,
        d_lin: get("d_lin", 2.0 * (k_lin * mass).sqrt()),
        k_ang,
        d_ang: get("d_ang", 2.0 * (k_ang * inertia).sqrt()),
        max_force: get("max_force", limits.peak_force),
        max_torque: get("max_torque", limits.typ_peak_torque),
        dt: 1.0 / rate_hz,
        mass,
        inertia,
    };
    coupling.validate()?;
    let k_penalty = get("k_penalty", DEFAULT_K_PENALTY);
    if !(k_penalty.is_finite() && k_penalty >= 0.0) {
        return Err(format!("k_penalty must be non-negative, got {k_penalty}"));
    }

    let voxel_size = get("voxel_size", DEFAULT_VOXEL_SIZE);
    let band_width = get("band_width", 0.0);
    let spacing = get("spacing", voxel_size);
    let pos_tol = get("pos_tol", 2.0 * voxel_size);
    let ang_tol = get("ang_tol", DEFAULT_ANG_TOL);
    for (name, v) in [("voxel_size", voxel_size), ("spacing", spacing)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("{name} must be positive, got {v}"));
        }
    }
    for (name, v) in [("band_width", band_width), ("pos_tol", pos_tol), ("ang_tol", ang_tol)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(format!("{name} must be non-negative, got {v}"));
        }
    }
    let handle = HandleGeometry::new(get("handle_length", DEFAULT_HANDLE_LENGTH)).map_err(|e| e.to_string())?;
    let capacity = get("net.capacity", net.capacity as f64);
    if !(capacity >= 1.0 && capacity.fract() == 0.0 && capacity <= 1e6) {
        return Err(format!("net.capacity must be a positive integer, got {capacity}"));
    }

    Ok(ScenarioConfig {
        voxel_size,
        band_width,
        spacing,
        render: RenderConfig { coupling, k_penalty },
        rate_hz,
        pos_tol,
        ang_tol,
        handle,
        limits,
        net: NetConfig {
            capacity: capacity as usize,
            ..net
        },
    })
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub parts: Vec<Part>,
    pub steps: Vec<Step>,
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name)
    }

    /// Parts never selected by any step; they stay at the identity pose.
    pub fn base_parts(&self) -> Vec<usize> {
        (0..self.parts.len())
            .filter(|&i| self.steps.iter().all(|s| s.active_part != i))
            .collect()
    }

    /// Static parts seen by step `k`: base parts plus the targets of the
    /// steps before it.
    pub fn static_parts(&self, k: usize) -> Vec<(&TriangleMesh, RigidPose)> {
        let mut parts: Vec<_> = self
            .base_parts()
            .into_iter()
            .map(|i| (&self.parts[i].mesh, RigidPose::identity()))
            .collect();
        parts.extend(
            self.steps[..k]
                .iter()
                .map(|s| (&self.parts[s.active_part].mesh, s.target)),
        );
        parts
    }

    /// Voxmap of everything already mounted before step `k`. With nothing
    /// mounted the map is a single empty cell.
    pub fn step_voxmap(&self, k: usize) -> Result<VoxMap, VolumetricError> {
        let parts = self.static_parts(k);
        if parts.is_empty() {
            let c = &self.config;
            return VoxMap::from_states(
                Vec3::zeros(),
                c.voxel_size,
                [1, 1, 1],
                c.band_width,
                &[VoxelState::Empty],
            );
        }
        cook_voxmaps(&parts, &self.config.voxelizer())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base)
}

struct PendingStep {
    line: usize,
    name: String,
    active_part: usize,
    target: RigidPose,
    waypoints: Vec<(f64, RigidPose)>,
}

fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64, HarnessError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(HarnessError::Parse {
            line,
            message: format!("{what}: expected a finite number, got {field:?}"),
        }),
    }
}

fn parse_pose(line: usize, fields: &[&str]) -> Result<RigidPose, HarnessError> {
    let v: Vec<f64> = fields
        .iter()
        .zip(["tx", "ty", "tz", "qw", "qx", "qy", "qz"])
        .map(|(f, what)| parse_f64(line, f, what))
        .collect::<Result<_, _>>()?;
    let q = Quaternion::new(v[3], v[4], v[5], v[6]);
    if q.norm() < 1e-9 {
        return Err(HarnessError::Parse {
            line,
            message: "orientation quaternion is zero".into(),
        });
    }
    Ok(RigidPose::from_quaternion(
        Vec3::new(v[0], v[1], v[2]),
        UnitQuaternion::from_quaternion(q),
    ))
}

fn expect_fields(line: usize, directive: &str, fields: &[&str], n: usize) -> Result<(), HarnessError> {
    if fields.len() != n {
        return Err(HarnessError::Parse {
            line,
            message: format!("{directive} takes {n} fields, got {}", fields.len()),
        });
    }
    Ok(())
}

fn finish_step(p: PendingStep) -> Result<Step, HarnessError> {
    let trajectory = Trajectory::new(p.waypoints).map_err(|e| HarnessError::Parse {
        line: p.line,
        message: format!("step {}: {e}", p.name),
    })?;
    Ok(Step {
        name: p.name,
        active_part: p.active_part,
        target: p.target,
        trajectory,
    })
}

/// Parses scenario text; mesh paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, HarnessError> {
    let mut parts: Vec<Part> = Vec::new();
    let mut steps = Vec::new();
    let mut pending: Option<PendingStep> = None;
    let mut values: HashMap<&str, f64> = HashMap::new();
    let mut net = NetConfig::default();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut fields = content.split_whitespace();
        let Some(directive) = fields.next() else {
            continue;
        };
        let fields: Vec<&str> = fields.collect();
        match directive {
            "PART" => {
                expect_fields(line, directive, &fields, 3)?;
                let name = fields[0];
                if parts.iter().any(|p| p.name == name) {
                    return Err(HarnessError::Parse {
                        line,
                        message: format!("duplicate part {name:?}"),
                    });
                }
                let unit_scale = parse_f64(line, fields[2], "unit scale")?;
                let path = base_dir.join(fields[1]);
                let mesh = load_mesh(&path, unit_scale).map_err(|source| HarnessError::Mesh { line, source })?;
                parts.push(Part {
                    name: name.to_owned(),
                    path,
                    unit_scale,
                    mesh,
                });
            }
            "CONFIG" => {
                expect_fields(line, directive, &fields, 2)?;
                let (key, value) = (fields[0], fields[1]);
                let addr = |v: &str| {
                    v.parse::<SocketAddr>().map_err(|_| HarnessError::Parse {
                        line,
                        message: format!("{key}: expected a socket address, got {v:?}"),
                    })
                };
                match key {
                    "net.render_addr" => net.render_addr = addr(value)?,
                    "net.device_addr" => net.device_addr = addr(value)?,
                    _ => {
                        let Some(&known) = NUMERIC_KEYS.iter().find(|k| **k == key) else {
                            return Err(HarnessError::Parse {
                                line,
                                message: format!("unknown config key {key:?}"),
                            });
                        };
                        values.insert(known, parse_f64(line, value, key)?);
                    }
                }
            }
            "STEP" => {
                expect_fields(line, directive, &fields, 9)?;
                if let Some(p) = pending.take() {
                    steps.push(finish_step(p)?);
                }
                let part = fields[1];
                let active_part =
                    parts
                        .iter()
                        .position(|p| p.name == part)
                        .ok_or_else(|| HarnessError::MissingPart {
                            line,
                            name: part.to_owned(),
                        })?;
                pending = Some(PendingStep {
                    line,
                    name: fields[0].to_owned(),
                    active_part,
                    target: parse_pose(line, &fields[2..])?,
                    waypoints: Vec::new(),
                });
            }
            "WAYPOINT" => {
                expect_fields(line, directive, &fields, 8)?;
                let Some(step) = pending.as_mut() else {
                    return Err(HarnessError::Parse {
                        line,
                        message: "WAYPOINT before any STEP".into(),
                    });
                };
                let t = parse_f64(line, fields[0], "time")?;
                if t < 0.0 {
                    return Err(HarnessError::Parse {
                        line,
                        message: format!("waypoint time must be non-negative, got {t}"),
                    });
                }
                if let Some((prev, _)) = step.waypoints.last() {
                    if t <= *prev {
                        return Err(HarnessError::NonMonotoneTime {
                            line,
                            t,
                            previous: *prev,
                        });
                    }
                }
                step.waypoints.push((t, parse_pose(line, &fields[1..])?));
            }
            other => {
                return Err(HarnessError::UnknownDirective {
                    line,
                    directive: other.to_owned(),
                })
            }
        }
    }
    if let Some(p) = pending.take() {
        steps.push(finish_step(p)?);
    }
    if steps.is_empty() {
        return Err(HarnessError::InvalidScenario("scenario has no steps".into()));
    }
    let config = build_config(&values, net).map_err(HarnessError::InvalidScenario)?;
    Ok(Scenario { parts, steps, config })
}
