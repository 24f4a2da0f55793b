use crate::geometry::{RigidPose, Vec3};
use crate::volumetric::{PointShell, VoxMap, VoxelState};

use super::Wrench;

/// A pointshell point resting in a surface voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point_index: usize,
    pub world_point: Vec3,
    /// Outward surface normal of the contacted voxel.
    pub normal: Vec3,
    /// Distance below the tangent plane through the voxel center, in
    /// `[0, voxel_size]`.
    pub depth: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    pub contacts: Vec<Contact>,
    /// Some point landed in an interior voxel.
    pub deep_penetration: bool,
    pub lookups: usize,
}

pub fn voxel_lookup(voxmap: &VoxMap, world_point: &Vec3) -> VoxelState {
    voxmap.lookup(world_point)
}

pub fn detect_contacts(shell: &PointShell, tool_pose: &RigidPose, voxmap: &VoxMap) -> ContactSet {
    let mut contacts = Vec::new();
    let (deep_penetration, lookups) = detect_contacts_into(&mut contacts, shell, tool_pose, voxmap);
    ContactSet {
        contacts,
        deep_penetration,
        lookups,
    }
}

/// Allocation-free variant: clears `out` and refills it. Returns the
/// deep-penetration flag and the number of voxel lookups.
pub fn detect_contacts_into(
    out: &mut Vec<Contact>,
    shell: &PointShell,
    tool_pose: &RigidPose,
    voxmap: &VoxMap,
) -> (bool, usize) {
    out.clear();
    let s = voxmap.voxel_size();
    let mut deep = false;
    for (point_index, local) in shell.points().iter().enumerate() {
        let world_point = tool_pose.apply(local);
        let Some(ijk) = voxmap.cell_of(&world_point) else {
            continue;
        };
        match voxmap.state_at(ijk) {
            VoxelState::Surface(normal) => {
                let center = voxmap.cell_center(ijk);
                let depth = (-normal.dot(&(world_point - center))).clamp(0.0, s);
                out.push(Contact {
                    point_index,
                    world_point,
                    normal,
                    depth,
                });
            }
            VoxelState::Interior => deep = true,
            VoxelState::Empty | VoxelState::Proximity(_) => {}
        }
    }
    (deep, shell.len())
}

/// Penalty wrench of one contact, with torque taken about `reference`.
pub fn contact_force(contact: &Contact, reference: &Vec3, k_penalty: f64) -> Wrench {
    let force = contact.normal * (k_penalty * contact.depth);
    Wrench {
        force,
        torque: (contact.world_point - reference).cross(&force),
        reference_point: *reference,
    }
}

pub fn total_wrench(contacts: &[Contact], reference: &Vec3, k_penalty: f64) -> Wrench {
    let mut total = Wrench::zero_at(*reference);
    for c in contacts {
        let w = contact_force(c, reference, k_penalty);
        total.force += w.force;
        total.torque += w.torque;
    }
    total
}
