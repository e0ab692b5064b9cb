use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }
}

/// Triangle soup in millimetres.
///
/// Invariants: every index is in range, every triangle has non-zero area and
/// a unit normal, and the mesh has at least one triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<[f64; 3]>,
    degenerate_dropped: usize,
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    math::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
}

// Twice the area below which a triangle is treated as degenerate (mm^2).
const DEGENERATE_AREA2: f64 = 1e-12;

fn unit_normal(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Option<[f64; 3]> {
    let n = cross(sub(b, a), sub(c, a));
    let len = norm(n);
    if !(len > DEGENERATE_AREA2) {
        return None;
    }
    Some([n[0] / len, n[1] / len, n[2] / len])
}

impl TriangleMesh {
    /// Builds a mesh from indexed triangles, dropping degenerate ones.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(facet) = vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFiniteVertex { facet });
        }
        let count = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for tri in triangles {
            if tri.iter().any(|&i| i as usize >= count) {
                return Err(Error::MalformedStl {
                    line: 0,
                    reason: alloc::format!("triangle index out of range: {tri:?}"),
                });
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            match unit_normal(a, b, c) {
                Some(n) => {
                    kept.push(tri);
                    normals.push(n);
                }
                None => dropped += 1,
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(Self {
            vertices,
            triangles: kept,
            normals,
            degenerate_dropped: dropped,
        })
    }

    /// Builds a mesh from an unindexed list of triangles.
    pub fn from_soup(facets: &[[[f64; 3]; 3]]) -> Result<Self> {
        let mut vertices = Vec::with_capacity(facets.len() * 3);
        let mut triangles = Vec::with_capacity(facets.len());
        for (i, f) in facets.iter().enumerate() {
            if !f.iter().flatten().all(|c| c.is_finite()) {
                return Err(Error::NonFiniteVertex { facet: i });
            }
            let base = vertices.len() as u32;
            vertices.extend_from_slice(f);
            triangles.push([base, base + 1, base + 2]);
        }
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }

    /// Number of zero-area triangles removed at construction.
    pub fn degenerate_dropped(&self) -> usize {
        self.degenerate_dropped
    }

    pub fn triangle(&self, i: usize) -> [[f64; 3]; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    /// Iterator over triangle corner positions.
    pub fn facets(&self) -> impl Iterator<Item = [[f64; 3]; 3]> + '_ {
        (0..self.triangles.len()).map(|i| self.triangle(i))
    }

    /// Bounding box of the referenced vertices.
    pub fn bounds(&self) -> Aabb {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for tri in &self.triangles {
            for &i in tri {
                let v = self.vertices[i as usize];
                for k in 0..3 {
                    min[k] = min[k].min(v[k]);
                    max[k] = max[k].max(v[k]);
                }
            }
        }
        Aabb { min, max }
    }

    /// Copy of the mesh translated by `delta` millimetres.
    pub fn translated(&self, delta: [f64; 3]) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|v| [v[0] + delta[0], v[1] + delta[1], v[2] + delta[2]])
            .collect();
        Self {
            vertices,
            triangles: self.triangles.clone(),
            normals: self.normals.clone(),
            degenerate_dropped: self.degenerate_dropped,
        }
    }

    /// Normals recomputed from the vertex positions.
    pub fn recompute_normals(&self) -> Vec<[f64; 3]> {
        self.facets()
            .map(|[a, b, c]| unit_normal(a, b, c).unwrap_or([0.0; 3]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_triangles_are_dropped_and_counted() {
        let mesh = TriangleMesh::from_soup(&[
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]],
        ])
        .unwrap();
        assert_eq!(mesh.triangles().len(), 1);
        assert_eq!(mesh.degenerate_dropped(), 1);
        assert_eq!(mesh.normals()[0], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn all_degenerate_is_empty_mesh() {
        let err = TriangleMesh::from_soup(&[[[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]]]).unwrap_err();
        assert_eq!(err, Error::EmptyMesh);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(TriangleMesh::new(alloc::vec![[0.0; 3]; 3], alloc::vec![[0, 1, 3]]).is_err());
    }
}
