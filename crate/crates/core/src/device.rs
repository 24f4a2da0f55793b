//! Model of the two-arm 6-DOF handle device.
//!
//! Two 3-DOF arms hold the ends of a handle through passive gimbals. The
//! handle center is the midpoint of the gimbal centers and its Y axis points
//! from the left gimbal to the right one; the roll about Y is read by an
//! encoder (`q3`) and driven by a motor inside the handle. Forces at the
//! handle are split into a shared half per arm plus an opposite couple that
//! realizes the torque normal to the handle.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geometry::{Aabb, RigidPose, Vec3};
use crate::vps::{CouplingConfig, Wrench};

/// Minimum gimbal separation before the handle axis is undefined, m.
pub const DEFAULT_COINCIDENCE_EPS: f64 = 1e-6;
/// Gimbal-lock guard on `|y₃|`.
pub const DEFAULT_GIMBAL_LOCK_EPS: f64 = 1e-6;
pub const DEFAULT_HANDLE_LENGTH: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("gimbal centers coincide (separation {separation:e} m)")]
    CoincidentGimbals { separation: f64 },
    #[error("gimbal lock: handle axis component {y3} along the barrel z axis")]
    GimbalLock { y3: f64 },
    #[error("handle length must be positive, got {0}")]
    InvalidHandleLength(f64),
    #[error("invalid device limits: {0}")]
    InvalidLimits(String),
    #[error("handle orientation is not a proper rotation: {0}")]
    InvalidPose(String),
}

/// Gimbal center and barrel orientation of one arm, in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub gimbal_center: Vec3,
    pub barrel_rotation: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GimbalAngles {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandleGeometry {
    /// Distance between the two gimbal centers, m.
    pub length: f64,
}

impl Default for HandleGeometry {
    fn default() -> Self {
        Self {
            length: DEFAULT_HANDLE_LENGTH,
        }
    }
}

impl HandleGeometry {
    pub fn new(length: f64) -> Result<Self, DeviceError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(DeviceError::InvalidHandleLength(length));
        }
        Ok(Self { length })
    }
}

/// Performance envelope of the device. Torques in N·m, forces in N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceLimits {
    pub workspace: Aabb,
    pub continuous_force: f64,
    pub peak_force: f64,
    pub worst_cont_torque: f64,
    pub worst_peak_torque: f64,
    pub typ_cont_torque: f64,
    pub typ_peak_torque: f64,
    /// Display stiffness range, N/m.
    pub stiffness_min: f64,
    pub stiffness_max: f64,
    /// Worst-case position resolution, m.
    pub resolution: f64,
    /// Worst-case angular resolution, rad.
    pub angular_resolution: f64,
    /// Angular workspace as quoted by the manufacturer; informational only.
    pub angular_workspace: f64,
}

impl Default for DeviceLimits {
    fn default() -> Self {
        Self {
            workspace: Aabb::new(Vec3::new(-0.2, -0.2, -0.3), Vec3::new(0.2, 0.2, 0.3)),
            continuous_force: 12.5,
            peak_force: 30.0,
            worst_cont_torque: 1.0,
            worst_peak_torque: 2.5,
            typ_cont_torque: 1.8,
            typ_peak_torque: 10.0,
            stiffness_min: 14_000.0,
            stiffness_max: 18_000.0,
            resolution: 1e-4,
            angular_resolution: 0.005,
            angular_workspace: 12.0,
        }
    }
}

impl DeviceLimits {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = [
            self.continuous_force,
            self.peak_force,
            self.worst_cont_torque,
            self.worst_peak_torque,
            self.typ_cont_torque,
            self.typ_peak_torque,
            self.stiffness_min,
            self.stiffness_max,
            self.resolution,
            self.angular_resolution,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(DeviceError::InvalidLimits("all limits must be positive".into()));
        }
        if self.continuous_force > self.peak_force
            || self.worst_cont_torque > self.worst_peak_torque
            || self.typ_cont_torque > self.typ_peak_torque
            || self.stiffness_min > self.stiffness_max
        {
            return Err(DeviceError::InvalidLimits(
                "continuous limits must not exceed peak limits".into(),
            ));
        }
        Ok(())
    }

    /// Coupling defaults bounded by this envelope: the softest rendered
    /// stiffness and the peak force/torque caps.
    pub fn coupling(&self) -> CouplingConfig {
        let base = CouplingConfig::default();
        CouplingConfig {
            k_lin: self.stiffness_min,
            d_lin: 2.0 * (self.stiffness_min * base.mass).sqrt(),
            max_force: self.peak_force,
            max_torque: self.typ_peak_torque,
            ..base
        }
    }
}

/// Forces each arm applies at its gimbal and the handle motor torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmForces {
    pub f_right: Vec3,
    pub f_left: Vec3,
    /// Torque about the handle Y axis, N·m.
    pub handle_motor_torque: f64,
}

pub fn handle_position(right: &ArmState, left: &ArmState) -> Vec3 {
    (right.gimbal_center + left.gimbal_center) / 2.0
}

pub fn handle_y_axis(right: &ArmState, left: &ArmState) -> Result<Vec3, DeviceError> {
    handle_y_axis_eps(right, left, DEFAULT_COINCIDENCE_EPS)
}

pub fn handle_y_axis_eps(right: &ArmState, left: &ArmState, eps: f64) -> Result<Vec3, DeviceError> {
    let d = right.gimbal_center - left.gimbal_center;
    let separation = d.norm();
    if !(separation > eps) {
        return Err(DeviceError::CoincidentGimbals { separation });
    }
    Ok(d / separation)
}

/// Orientation of the handle frame in the barrel frame for the given
/// gimbal angles. The middle column is the handle Y axis.
pub fn gimbal_rotation(q: &GimbalAngles) -> Matrix3<f64> {
    let (s1, c1) = q.q1.sin_cos();
    let (s2, c2) = q.q2.sin_cos();
    let (s3, c3) = q.q3.sin_cos();
    Matrix3::new(
        c1 * s2 * c3 - s1 * s3,
        -c1 * c2,
        c1 * s2 * s3 + s1 * c3,
        s1 * s2 * c3 + c1 * s3,
        -s1 * c2,
        s1 * s2 * s3 - c1 * c3,
        c2 * c3,
        s2,
        c2 * s3,
    )
}

/// Inverts the middle column of [`gimbal_rotation`] on the `cos q2 > 0`
/// branch: `q2 = asin(y₃)`, `q1 = atan2(−y₂, −y₁)`.
pub fn gimbal_angles_from_y(y_in_barrel: &Vec3, q3: f64) -> Result<GimbalAngles, DeviceError> {
    gimbal_angles_from_y_eps(y_in_barrel, q3, DEFAULT_GIMBAL_LOCK_EPS)
}

pub fn gimbal_angles_from_y_eps(y: &Vec3, q3: f64, eps_lock: f64) -> Result<GimbalAngles, DeviceError> {
    if !(y.z.abs() < 1.0 - eps_lock) {
        return Err(DeviceError::GimbalLock { y3: y.z });
    }
    Ok(GimbalAngles {
        q1: (-y.y).atan2(-y.x),
        q2: y.z.asin(),
        q3,
    })
}

/// Handle pose from the two arm states and the handle roll encoder. The
/// left arm's barrel frame is the reference for the gimbal angles.
pub fn forward_handle_pose(right: &ArmState, left: &ArmState, q3: f64) -> Result<RigidPose, DeviceError> {
    let position = handle_position(right, left);
    let y_world = handle_y_axis(right, left)?;
    let barrel = &left.barrel_rotation;
    let y_barrel = barrel.transpose() * y_world;
    let angles = gimbal_angles_from_y(&y_barrel, q3)?;
    let rotation = barrel * gimbal_rotation(&angles);
    RigidPose::new(position, rotation).map_err(|e| DeviceError::InvalidPose(e.to_string()))
}

/// Parallel and normal components of a torque with respect to the handle.
pub fn decompose_torque(c: &Vec3, y: &Vec3) -> (Vec3, Vec3) {
    let parallel = y * c.dot(y);
    (parallel, c - parallel)
}

/// Static distribution of a handle wrench (world frame, about the handle
/// center) to the two arms and the handle motor.
///
/// The couple is `f_c = (c_n × y) / L`, added to the right arm and
/// subtracted from the left one, so that with the right gimbal at `+L/2·y`
/// the arms reproduce exactly the normal torque `c_n`.
pub fn arm_forces(f_ee: &Vec3, c_ee: &Vec3, y: &Vec3, geom: &HandleGeometry) -> ArmForces {
    let (_, normal) = decompose_torque(c_ee, y);
    let couple = normal.cross(y) / geom.length;
    let shared = f_ee / 2.0;
    ArmForces {
        f_right: shared + couple,
        f_left: shared - couple,
        handle_motor_torque: c_ee.dot(y),
    }
}

/// Caps the handle wrench at the peak force and typical peak torque and
/// rescales the arm forces to match the capped wrench.
pub fn saturate(forces: &ArmForces, wrench: &Wrench, limits: &DeviceLimits) -> (ArmForces, Wrench) {
    let capped = wrench.clamped(limits.peak_force, limits.typ_peak_torque);
    let force_scale = scale_of(&wrench.force, &capped.force);
    let torque_scale = scale_of(&wrench.torque, &capped.torque);
    // The shared half is linear in the force, the couple and the motor
    // torque are linear in the torque.
    let shared = (forces.f_right + forces.f_left) / 2.0;
    let couple = (forces.f_right - forces.f_left) / 2.0;
    let scaled = if force_scale == 1.0 && torque_scale == 1.0 {
        *forces
    } else {
        ArmForces {
            f_right: shared * force_scale + couple * torque_scale,
            f_left: shared * force_scale - couple * torque_scale,
            handle_motor_torque: forces.handle_motor_torque * torque_scale,
        }
    };
    (scaled, capped)
}

fn scale_of(original: &Vec3, capped: &Vec3) -> f64 {
    if original == capped {
        1.0
    } else {
        capped.norm() / original.norm()
    }
}

/// Scripted stand-in for the physical device: places the gimbals of both
/// arms so that [`forward_handle_pose`] reproduces a commanded handle pose.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimulatedDevice {
    pub geometry: HandleGeometry,
    pub limits: DeviceLimits,
}

impl SimulatedDevice {
    /// Arm states and roll encoder reading for a handle pose. The gimbals sit
    /// at `±L/2` along the handle Y axis; the left barrel is oriented so the
    /// gimbal angles are all zero.
    pub fn arm_states(&self, handle: &RigidPose) -> (ArmState, ArmState, f64) {
        let half = self.geometry.length / 2.0;
        let y = handle.rotation().column(1).into_owned();
        let barrel = handle.rotation()
            * gimbal_rotation(&GimbalAngles {
                q1: 0.0,
                q2: 0.0,
                q3: 0.0,
            })
            .transpose();
        let right = ArmState {
            gimbal_center: handle.position() + y * half,
            barrel_rotation: barrel,
        };
        let left = ArmState {
            gimbal_center: handle.position() - y * half,
            barrel_rotation: barrel,
        };
        (right, left, 0.0)
    }

    /// Round trip through the arm kinematics: what the device reports when
    /// the handle is held at `handle`.
    pub fn measure(&self, handle: &RigidPose) -> Result<RigidPose, DeviceError> {
        let (right, left, q3) = self.arm_states(handle);
        forward_handle_pose(&right, &left, q3)
    }

    /// Arm commands for a wrench at the handle, after saturation.
    pub fn command(&self, handle: &RigidPose, wrench: &Wrench) -> (ArmForces, Wrench) {
        let y = handle.rotation().column(1).into_owned();
        let forces = arm_forces(&wrench.force, &wrench.torque, &y, &self.geometry);
        saturate(&forces, wrench, &self.limits)
    }
}
