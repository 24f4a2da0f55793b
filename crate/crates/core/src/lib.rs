//! Virtual assembly verification with 6-DOF voxmap-pointshell haptics.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: meshes, bounding boxes and rigid poses.
//! * [`volumetric`]: surface voxelization (voxmaps) and point sampling
//!   (pointshells), plus cooking of assembled parts into one voxmap.
//! * [`vps`]: contact detection by voxel lookup, penalty forces and the
//!   virtual coupling that produces device wrenches.
//! * [`device`]: kinematics and statics of the two-arm handle device.
//! * [`protocol`]: binary datagrams, UDP and in-process transports.
//! * [`harness`]: assembly scenarios, scripted runs, traces and benchmarks.

pub mod device;
pub mod geometry;
pub mod harness;
pub mod protocol;
pub mod volumetric;
pub mod vps;
