//! Voxmap-pointshell haptic rendering.
//!
//! One render step looks every pointshell point up in the voxmap, turns the
//! points that sit in surface voxels into penalty forces, sums them into a
//! wrench on the tool, and advances the tool proxy against the virtual
//! coupling that links it to the tracked device pose. The coupling wrench is
//! what the device displays.

mod contact;
mod coupling;
mod render;

pub use contact::{
    contact_force, detect_contacts, detect_contacts_into, total_wrench, voxel_lookup, Contact, ContactSet,
};
pub use coupling::{coupling_step, CouplingConfig, ToolState, Wrench};
pub use render::{render_step, RenderConfig, Renderer, StepStats, DEFAULT_K_PENALTY};
