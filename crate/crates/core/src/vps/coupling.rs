use nalgebra::UnitQuaternion;

use crate::geometry::{RigidPose, Vec3};

/// Force and torque about `reference_point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
    pub reference_point: Vec3,
}

impl Default for Wrench {
    fn default() -> Self {
        Self::zero_at(Vec3::zeros())
    }
}

impl Wrench {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self {
            force,
            torque,
            reference_point: Vec3::zeros(),
        }
    }

    pub fn zero_at(reference_point: Vec3) -> Self {
        Self {
            force: Vec3::zeros(),
            torque: Vec3::zeros(),
            reference_point,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vec3::zeros() && self.torque == Vec3::zeros()
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|c| c.is_finite())
    }

    /// Scales force and torque independently down to the given magnitudes,
    /// keeping their directions.
    pub fn clamped(&self, max_force: f64, max_torque: f64) -> Wrench {
        Wrench {
            force: clamp_norm(self.force, max_force),
            torque: clamp_norm(self.torque, max_torque),
            reference_point: self.reference_point,
        }
    }
}

pub(crate) fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Spring-damper coupling between device and tool, plus the virtual tool's
/// inertia and the display caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingConfig {
    /// N/m
    pub k_lin: f64,
    /// N·s/m
    pub d_lin: f64,
    /// N·m/rad
    pub k_ang: f64,
    /// N·m·s/rad
    pub d_ang: f64,
    pub max_force: f64,
    pub max_torque: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Virtual tool mass, kg.
    pub mass: f64,
    /// Virtual tool isotropic rotational inertia, kg·m².
    pub inertia: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        let mass = 0.2;
        let inertia = 1e-4;
        let k_lin = 14_000.0;
        let k_ang = 10.0;
        Self {
            k_lin,
            d_lin: 2.0 * (k_lin * mass).sqrt(),
            k_ang,
            d_ang: 2.0 * (k_ang * inertia).sqrt(),
            max_force: 30.0,
            max_torque: 10.0,
            dt: 1.0 / 1600.0,
            mass,
            inertia,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<(), String> {
        let nonneg = [
            ("k_lin", self.k_lin),
            ("d_lin", self.d_lin),
            ("k_ang", self.k_ang),
            ("d_ang", self.d_ang),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        let positive = [
            ("max_force", self.max_force),
            ("max_torque", self.max_torque),
            ("dt", self.dt),
            ("mass", self.mass),
            ("inertia", self.inertia),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Simulated tool proxy and the last tracked device sample.
///
/// Velocities are world-frame; angular velocities are rotation vectors per
/// second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolState {
    pub pose: RigidPose,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    pub device_pose: RigidPose,
    pub device_velocity: Vec3,
    pub device_angular_velocity: Vec3,
    /// Last pose that passed contact detection without deep penetration.
    pub last_valid_pose: RigidPose,
    pub last_wrench: Wrench,
}

impl ToolState {
    /// Tool and device coincident and at rest.
    pub fn at_rest(pose: RigidPose) -> Self {
        Self {
            pose,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            device_pose: pose,
            device_velocity: Vec3::zeros(),
            device_angular_velocity: Vec3::zeros(),
            last_valid_pose: pose,
            last_wrench: Wrench::zero_at(pose.position()),
        }
    }

    /// Tool displacement from the device: position offset and the rotation
    /// vector of `R_tool · R_deviceᵀ`.
    pub fn displacement(&self) -> (Vec3, Vec3) {
        let (linear, angular, _) = self.errors();
        (linear, angular)
    }

    fn errors(&self) -> (Vec3, Vec3, UnitQuaternion<f64>) {
        let linear = self.pose.position() - self.device_pose.position();
        let rot = self.pose.quaternion() * self.device_pose.quaternion().inverse();
        (linear, rot.scaled_axis(), rot)
    }
}

// Below these the proxy is snapped exactly onto the device when no contact
// force acts, so free motion displays an exactly zero wrench.
const REST_POSITION: f64 = 1e-10;
const REST_SPEED: f64 = 1e-8;
const REST_ANGLE: f64 = 1e-10;
const REST_RATE: f64 = 1e-8;

/// Coupling wrench acting on the tool, pulling it toward the device.
fn spring_wrench(cfg: &CouplingConfig, e: &Vec3, e_dot: &Vec3, phi: &Vec3, phi_dot: &Vec3, at: Vec3) -> Wrench {
    Wrench {
        force: -(e * cfg.k_lin) - e_dot * cfg.d_lin,
        torque: -(phi * cfg.k_ang) - phi_dot * cfg.d_ang,
        reference_point: at,
    }
}

/// Advances the tool proxy by one step and returns the device wrench.
///
/// The proxy is integrated in the device's moving frame: its displacement
/// from the device is a damped oscillator driven by the contact wrench
/// (semi-implicit Euler), and the tool pose is the device pose offset by that
/// displacement. The returned device wrench is the coupling spring-damper
/// wrench `k·(x_dev − x_tool) + d·(v_dev − v_tool)` (and its rotational
/// counterpart) evaluated after the step, capped at `max_force` and
/// `max_torque` with directions preserved.
pub fn coupling_step(state: &ToolState, cfg: &CouplingConfig, contact_wrench: &Wrench) -> (ToolState, Wrench) {
    let (e, phi, rot_err) = state.errors();
    let e_dot = state.velocity - state.device_velocity;
    let phi_dot = state.angular_velocity - state.device_angular_velocity;
    let spring = spring_wrench(cfg, &e, &e_dot, &phi, &phi_dot, state.pose.position());

    let dt = cfg.dt;
    let mut e_dot_next = e_dot + (contact_wrench.force + spring.force) * (dt / cfg.mass);
    let mut e_next = e + e_dot_next * dt;
    let mut phi_dot_next = phi_dot + (contact_wrench.torque + spring.torque) * (dt / cfg.inertia);
    let mut rot_next = UnitQuaternion::from_scaled_axis(phi_dot_next * dt) * rot_err;

    if contact_wrench.is_zero()
        && e_next.norm() < REST_POSITION
        && e_dot_next.norm() < REST_SPEED
        && rot_next.angle() < REST_ANGLE
        && phi_dot_next.norm() < REST_RATE
    {
        e_next = Vec3::zeros();
        e_dot_next = Vec3::zeros();
        phi_dot_next = Vec3::zeros();
        rot_next = UnitQuaternion::identity();
    }

    let device = &state.device_pose;
    let pose = if rot_next == UnitQuaternion::identity() && e_next == Vec3::zeros() {
        *device
    } else {
        RigidPose::from_quaternion(device.position() + e_next, rot_next * device.quaternion())
    };
    let next = ToolState {
        pose,
        velocity: state.device_velocity + e_dot_next,
        angular_velocity: state.device_angular_velocity + phi_dot_next,
        ..*state
    };
    let phi_next = rot_next.scaled_axis();
    let after = spring_wrench(cfg, &e_next, &e_dot_next, &phi_next, &phi_dot_next, device.position());
    let device_wrench = after.clamped(cfg.max_force, cfg.max_torque);
    let next = ToolState {
        last_wrench: device_wrench,
        ..next
    };
    (next, device_wrench)
}
