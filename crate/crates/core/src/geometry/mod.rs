//! Meshes, STL ingestion and the pose/modality vocabulary.
//!
//! Mesh coordinates are millimetres. The mesh +Z axis is the sensor's outward
//! axis: the sensor looks along +Z and the contact face of an object sits at
//! the smallest Z.

mod mesh;
mod pose;
pub mod primitives;
mod stl;

pub use mesh::{Aabb, TriangleMesh};
pub use pose::{
    validate_pose, ClampFlags, ContactPose, PoseComponent, SensorModality, ValidationMode,
    X_RANGE, YAW_RANGE, Y_RANGE, Z_RANGE,
};
pub use stl::{parse_stl, write_ascii_stl, write_binary_stl, StlFormat};
