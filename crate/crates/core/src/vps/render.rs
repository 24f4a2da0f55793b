use std::time::Instant;

use nalgebra::UnitQuaternion;

use crate::geometry::{RigidPose, Vec3};
use crate::volumetric::{PointShell, VoxMap};

use super::contact::{detect_contacts_into, total_wrench, Contact};
use super::coupling::{coupling_step, CouplingConfig, ToolState, Wrench};

/// Penalty stiffness per contact point, N/m.
pub const DEFAULT_K_PENALTY: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub coupling: CouplingConfig,
    pub k_penalty: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            coupling: CouplingConfig::default(),
            k_penalty: DEFAULT_K_PENALTY,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub contact_count: usize,
    pub deep_penetration: bool,
    pub step_time_ns: u64,
    pub lookup_count: usize,
}

/// Render loop state owner. Keeps the contact buffer between steps so the
/// hot path does not allocate once warmed up.
#[derive(Debug, Clone)]
pub struct Renderer {
    pub config: RenderConfig,
    contacts: Vec<Contact>,
}

impl Renderer {
    pub fn new(config: RenderConfig) -> Self {
        Self {
            config,
            contacts: Vec::new(),
        }
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    /// Detects contacts at the tool pose carried along with the new device
    /// sample, sums their penalty wrench and steps the coupling.
    ///
    /// When a point lands in an interior voxel the proxy is put back at its
    /// last valid pose with no relative motion, and only the coupling wrench
    /// toward the device is displayed.
    pub fn step(
        &mut self,
        state: &ToolState,
        shell: &PointShell,
        voxmap: &VoxMap,
        device_pose: &RigidPose,
    ) -> (ToolState, Wrench, StepStats) {
        let start = Instant::now();
        let cfg = &self.config.coupling;
        let tracked = track_device(state, device_pose, cfg.dt);

        let (deep, lookups) = detect_contacts_into(&mut self.contacts, shell, &tracked.pose, voxmap);
        let (next, wrench) = if deep {
            let frozen = ToolState {
                pose: tracked.last_valid_pose,
                velocity: tracked.device_velocity,
                angular_velocity: tracked.device_angular_velocity,
                ..tracked
            };
            self.contacts.clear();
            let hold = Wrench::zero_at(frozen.pose.position());
            let (_, wrench) = coupling_step(&frozen, cfg, &hold);
            (
                ToolState {
                    last_wrench: wrench,
                    ..frozen
                },
                wrench,
            )
        } else {
            let valid = ToolState {
                last_valid_pose: tracked.pose,
                ..tracked
            };
            let contact = total_wrench(&self.contacts, &valid.pose.position(), self.config.k_penalty);
            coupling_step(&valid, cfg, &contact)
        };
        let stats = StepStats {
            contact_count: self.contacts.len(),
            deep_penetration: deep,
            step_time_ns: start.elapsed().as_nanos() as u64,
            lookup_count: lookups,
        };
        (next, wrench, stats)
    }
}

/// One render step with a throwaway contact buffer.
pub fn render_step(
    state: &ToolState,
    shell: &PointShell,
    voxmap: &VoxMap,
    cfg: &RenderConfig,
    device_pose: &RigidPose,
) -> (ToolState, Wrench, StepStats) {
    Renderer::new(*cfg).step(state, shell, voxmap, device_pose)
}

/// Moves the device sample forward, estimating its velocity by finite
/// differences, and carries the tool along with its displacement unchanged.
fn track_device(state: &ToolState, device_pose: &RigidPose, dt: f64) -> ToolState {
    let old = &state.device_pose;
    if device_pose == old {
        return ToolState {
            device_velocity: Vec3::zeros(),
            device_angular_velocity: Vec3::zeros(),
            velocity: state.velocity - state.device_velocity,
            angular_velocity: state.angular_velocity - state.device_angular_velocity,
            ..*state
        };
    }
    let q_old = old.quaternion();
    let q_new = device_pose.quaternion();
    let device_velocity = (device_pose.position() - old.position()) / dt;
    let device_angular_velocity = (q_new * q_old.inverse()).scaled_axis() / dt;

    let (e, _) = state.displacement();
    let rot_err: UnitQuaternion<f64> = state.pose.quaternion() * q_old.inverse();
    let pose = if e == Vec3::zeros() && rot_err.angle() == 0.0 {
        *device_pose
    } else {
        RigidPose::from_quaternion(device_pose.position() + e, rot_err * q_new)
    };
    ToolState {
        pose,
        velocity: device_velocity + (state.velocity - state.device_velocity),
        angular_velocity: device_angular_velocity + (state.angular_velocity - state.device_angular_velocity),
        device_pose: *device_pose,
        device_velocity,
        device_angular_velocity,
        ..*state
    }
}
