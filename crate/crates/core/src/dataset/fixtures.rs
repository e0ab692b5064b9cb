//! Procedural fixture objects: five seen shapes and three novel ones.

use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::primitives::{cone, cross, cuboid, pacman, ridge, ring, triangle_prism, uv_sphere};
use crate::geometry::{ContactPose, TriangleMesh, X_RANGE, YAW_RANGE, Y_RANGE, Z_RANGE};
use crate::rng::{keyed_stream, Stream};

pub const SEEN_OBJECTS: [&str; 5] = ["edge", "cuboid", "sphere", "pacman", "hollow_cylinder"];
pub const NOVEL_OBJECTS: [&str; 3] = ["triangle", "cross", "cone"];

pub fn all_objects() -> impl Iterator<Item = &'static str> {
    SEEN_OBJECTS.into_iter().chain(NOVEL_OBJECTS)
}

pub fn is_novel(object_id: &str) -> bool {
    NOVEL_OBJECTS.contains(&object_id)
}

/// Mesh for a named fixture, in mm with the contact face at z = 0.
pub fn fixture_mesh(object_id: &str) -> Option<TriangleMesh> {
    Some(match object_id {
        "edge" => ridge(30.0, 16.0, 3.0),
        "cuboid" => cuboid(22.0, 14.0, 3.0),
        "sphere" => uv_sphere(24.0, 128, 64),
        "pacman" => pacman(12.0, 3.0, 96),
        "hollow_cylinder" => ring(12.0, 7.5, 3.0, 96),
        "triangle" => triangle_prism(24.0, 3.0),
        "cross" => cross(24.0, 8.0, 3.0),
        "cone" => cone(16.0, 3.0, 96),
        _ => return None,
    })
}

fn object_key(object_id: &str) -> u64 {
    object_id
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// `n` poses drawn uniformly over the full workspace, seeded per object.
pub fn sample_poses(seed: u64, object_id: &str, n: usize) -> Vec<ContactPose> {
    let mut rng = keyed_stream(seed, Stream::Fixture, object_key(object_id));
    let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
    (0..n)
        .map(|_| {
            let (x, y, z, yaw) = (draw(X_RANGE), draw(Y_RANGE), draw(Z_RANGE), draw(YAW_RANGE));
            ContactPose::new(x, y, z, yaw)
        })
        .collect()
}
