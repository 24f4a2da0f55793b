mod common;

use common::*;
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vhap_core::device::{
    arm_forces, decompose_torque, forward_handle_pose, gimbal_angles_from_y, gimbal_rotation, handle_y_axis, saturate,
    ArmState, DeviceError, DeviceLimits, GimbalAngles, HandleGeometry, SimulatedDevice,
};
use vhap_core::geometry::{RigidPose, Vec3};
use vhap_core::vps::Wrench;

fn vector(max: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-max..max).prop_map(vec3)
}

fn unit() -> impl Strategy<Value = Vec3> {
    any::<u64>().prop_map(|s| random_unit(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn proper_rotation_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity())
        .amax()
        .max((r.determinant() - 1.0).abs())
}

fn moved(arm: &ArmState, g: &RigidPose) -> ArmState {
    ArmState {
        gimbal_center: g.apply(&arm.gimbal_center),
        barrel_rotation: g.rotation() * arm.barrel_rotation,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn arm_forces_reconstruct_the_wrench(f in vector(50.0), c in vector(10.0), y in unit(), length in 0.05f64..0.5) {
        let geom = HandleGeometry::new(length).unwrap();
        let out = arm_forces(&f, &c, &y, &geom);
        let sum = out.f_right + out.f_left;
        prop_assert!((sum - f).norm() <= 1e-12 * f.norm().max(1e-300) + 1e-300);
        let half = length / 2.0;
        let torque = (y * half).cross(&out.f_right) + (-y * half).cross(&out.f_left) + y * out.handle_motor_torque;
        prop_assert!((torque - c).norm() <= 1e-9 * c.norm().max(1e-12));
    }

    #[test]
    fn torque_decomposition(c in vector(10.0), y in unit()) {
        let (p, n) = decompose_torque(&c, &y);
        prop_assert!((p + n - c).norm() < 1e-12);
        prop_assert!(n.dot(&y).abs() < 1e-12);
        prop_assert!(p.cross(&y).norm() < 1e-12);
    }

    #[test]
    fn gimbal_round_trip(q1 in -3.1f64..3.1, q2 in -1.4f64..1.4, q3 in -3.1f64..3.1) {
        let r = gimbal_rotation(&GimbalAngles { q1, q2, q3 });
        prop_assert!(proper_rotation_error(&r) < 1e-12);
        let y = r.column(1).into_owned();
        let back = gimbal_angles_from_y(&y, q3).unwrap();
        prop_assert!((back.q1 - q1).abs() < 1e-12, "{} {}", back.q1, q1);
        prop_assert!((back.q2 - q2).abs() < 1e-12);
    }

    #[test]
    fn forward_pose_is_equivariant(seed in any::<u64>(), q3 in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let handle = random_pose(&mut rng, 0.2);
        let device = SimulatedDevice::default();
        let (right, left, _) = device.arm_states(&handle);
        let g = random_pose(&mut rng, 1.0);
        let before = forward_handle_pose(&right, &left, q3).unwrap();
        let after = forward_handle_pose(&moved(&right, &g), &moved(&left, &g), q3).unwrap();
        let expected = g.compose(&before);
        prop_assert!((after.position() - expected.position()).norm() < 1e-9);
        prop_assert!((after.rotation() - expected.rotation()).amax() < 1e-9);
        let y = handle_y_axis(&right, &left).unwrap();
        prop_assert!((before.rotation().column(1) - y).norm() < 1e-9);
    }

    #[test]
    fn simulated_device_reports_the_held_pose(seed in any::<u64>()) {
        let handle = random_pose(&mut ChaCha8Rng::seed_from_u64(seed), 0.2);
        let measured = SimulatedDevice::default().measure(&handle).unwrap();
        prop_assert!((measured.position() - handle.position()).norm() < 1e-12);
        prop_assert!((measured.rotation() - handle.rotation()).amax() < 1e-9);
    }

    #[test]
    fn saturation_caps_and_preserves_direction(f in vector(60.0), c in vector(20.0), y in unit()) {
        let limits = DeviceLimits::default();
        let geom = HandleGeometry::default();
        let wrench = Wrench::new(f, c);
        let forces = arm_forces(&f, &c, &y, &geom);
        let (capped_forces, capped) = saturate(&forces, &wrench, &limits);
        prop_assert!(capped.force.norm() <= limits.peak_force * (1.0 + 1e-12));
        prop_assert!(capped.torque.norm() <= limits.typ_peak_torque * (1.0 + 1e-12));
        if f.norm() <= limits.peak_force {
            prop_assert_eq!(capped.force, f);
        } else {
            prop_assert!((capped.force - f * (limits.peak_force / f.norm())).norm() < 1e-12);
        }
        if c.norm() <= limits.typ_peak_torque {
            prop_assert_eq!(capped.torque, c);
        } else {
            prop_assert!((capped.torque - c * (limits.typ_peak_torque / c.norm())).norm() < 1e-12);
        }
        let recomputed = arm_forces(&capped.force, &capped.torque, &y, &geom);
        prop_assert!((capped_forces.f_right - recomputed.f_right).norm() < 1e-9);
        prop_assert!((capped_forces.f_left - recomputed.f_left).norm() < 1e-9);
        prop_assert!((capped_forces.handle_motor_torque - recomputed.handle_motor_torque).abs() < 1e-9);
    }
}

#[test]
fn arm_force_examples() {
    let geom = HandleGeometry::new(0.2).unwrap();
    let y = Vec3::y();
    let out = arm_forces(&Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), &y, &geom);
    assert_eq!(out.f_right, Vec3::new(1.0, 0.0, 0.0));
    assert_eq!(out.f_left, Vec3::new(1.0, 0.0, 0.0));
    assert_eq!(out.handle_motor_torque, 0.0);

    let out = arm_forces(&Vec3::zeros(), &Vec3::new(0.0, 0.5, 0.0), &y, &geom);
    assert_eq!(out.f_right, Vec3::zeros());
    assert_eq!(out.handle_motor_torque, 0.5);

    let out = arm_forces(&Vec3::zeros(), &Vec3::new(0.0, 0.0, 0.4), &y, &geom);
    assert!((out.f_right - Vec3::new(-2.0, 0.0, 0.0)).norm() < 1e-12);
    assert!((out.f_left - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
    let torque = (y * 0.1).cross(&out.f_right) + (y * -0.1).cross(&out.f_left);
    assert!((torque - Vec3::new(0.0, 0.0, 0.4)).norm() < 1e-12);
}

#[test]
fn table_limits() {
    let limits = DeviceLimits::default();
    let geom = HandleGeometry::default();
    let wrench = Wrench::new(Vec3::new(40.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 12.0));
    let forces = arm_forces(&wrench.force, &wrench.torque, &Vec3::y(), &geom);
    let (_, capped) = saturate(&forces, &wrench, &limits);
    assert!((capped.force - Vec3::new(30.0, 0.0, 0.0)).norm() < 1e-12);
    assert!((capped.torque - Vec3::new(0.0, 0.0, 10.0)).norm() < 1e-12);
}

#[test]
fn forward_pose_example_and_errors() {
    let arm = |p: Vec3| ArmState {
        gimbal_center: p,
        barrel_rotation: Matrix3::identity(),
    };
    let pose = forward_handle_pose(&arm(Vec3::new(0.1, 0.0, 0.0)), &arm(Vec3::new(-0.1, 0.0, 0.0)), 0.0).unwrap();
    assert!(pose.position().norm() < 1e-15);
    assert!((pose.rotation().column(1) - Vec3::x()).norm() < 1e-12);

    let same = arm(Vec3::new(0.1, 0.0, 0.0));
    assert!(matches!(
        forward_handle_pose(&same, &same, 0.0),
        Err(DeviceError::CoincidentGimbals { .. })
    ));
    assert!(matches!(
        gimbal_angles_from_y(&Vec3::z(), 0.0),
        Err(DeviceError::GimbalLock { .. })
    ));
    assert!(HandleGeometry::new(0.0).is_err());
}

#[test]
fn random_statics_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let f = random_unit(&mut rng) * rng.gen_range(0.0..50.0);
        let c = random_unit(&mut rng) * rng.gen_range(0.0..10.0);
        let y = random_unit(&mut rng);
        let geom = HandleGeometry::new(rng.gen_range(0.05..0.5)).unwrap();
        let out = arm_forces(&f, &c, &y, &geom);
        assert!((out.f_right + out.f_left - f).norm() <= 1e-12 * f.norm());
    }
}
