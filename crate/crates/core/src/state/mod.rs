//! Joint law of the channel state and its estimate.

mod geometry;
mod io;
mod joint;

pub use geometry::{lens_displaced_area, per_vehicle_joint, Geometry, PerVehicleJoint, VehicleProfile};
pub use io::{load_joint, read_joint, write_joint};
pub use joint::{
    bit, product_joint, product_joint_with_limit, state_string, validate, validate_probs, Diagnostic, EventVector,
    JointStateTable, StateIndex, DEFAULT_K_MAX,
};

/// Symmetric toy-model joint for `velocities.len()` vehicles.
pub fn toy_model_joint(geom: &Geometry, velocities: &[f64]) -> crate::Result<JointStateTable> {
    let per = velocities
        .iter()
        .map(|&v| per_vehicle_joint(geom, &VehicleProfile::new(v)?))
        .collect::<crate::Result<Vec<_>>>()?;
    product_joint(&per)
}
