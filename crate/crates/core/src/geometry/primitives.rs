//! Procedural meshes used as CAD stand-ins.
//!
//! Every builder places the contact face (or contact point) at `z = 0` with
//! the body extending towards `+z`, centred on the z axis.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::mesh::TriangleMesh;
use crate::math::{cos, sin};

struct Builder {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
}

impl Builder {
    fn new() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    fn vertex(&mut self, v: [f64; 3]) -> u32 {
        self.vertices.push(v);
        (self.vertices.len() - 1) as u32
    }

    fn tri(&mut self, a: u32, b: u32, c: u32) {
        self.triangles.push([a, b, c]);
    }

    fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.tri(a, b, c);
        self.tri(a, c, d);
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.triangles).expect("primitive mesh is valid")
    }
}

/// Axis-aligned box `sx × sy × sz` with its bottom face at `z = 0`.
pub fn cuboid(sx: f64, sy: f64, sz: f64) -> TriangleMesh {
    let (hx, hy) = (sx / 2.0, sy / 2.0);
    let mut b = Builder::new();
    let mut v = [0u32; 8];
    for (i, slot) in v.iter_mut().enumerate() {
        let x = if i & 1 == 0 { -hx } else { hx };
        let y = if i & 2 == 0 { -hy } else { hy };
        let z = if i & 4 == 0 { 0.0 } else { sz };
        *slot = b.vertex([x, y, z]);
    }
    // outward-facing quads
    b.quad(v[0], v[2], v[3], v[1]); // -z
    b.quad(v[4], v[5], v[7], v[6]); // +z
    b.quad(v[0], v[1], v[5], v[4]); // -y
    b.quad(v[2], v[6], v[7], v[3]); // +y
    b.quad(v[0], v[4], v[6], v[2]); // -x
    b.quad(v[1], v[3], v[7], v[5]); // +x
    b.finish()
}

/// UV sphere of `radius` tangent to `z = 0` at the origin.
pub fn uv_sphere(radius: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut b = Builder::new();
    let south = b.vertex([0.0, 0.0, 0.0]);
    let mut rows = Vec::with_capacity(rings.saturating_sub(1));
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        let (st, ct) = (sin(theta), cos(theta));
        let row: Vec<u32> = (0..segments)
            .map(|s| {
                let phi = 2.0 * PI * s as f64 / segments as f64;
                b.vertex([radius * st * cos(phi), radius * st * sin(phi), radius * (1.0 - ct)])
            })
            .collect();
        rows.push(row);
    }
    let north = b.vertex([0.0, 0.0, 2.0 * radius]);
    for s in 0..segments {
        let n = (s + 1) % segments;
        b.tri(south, rows[0][n], rows[0][s]);
        for r in 0..rows.len() - 1 {
            b.quad(rows[r][s], rows[r][n], rows[r + 1][n], rows[r + 1][s]);
        }
        let last = rows.len() - 1;
        b.tri(north, rows[last][s], rows[last][n]);
    }
    b.finish()
}

/// Prism extruding a polygon from `z = 0` to `height`.
///
/// `outline` is counter-clockwise and must be star-shaped with respect to
/// `apex`, which may lie on the boundary (as for a pac-man mouth).
pub fn extrude_star(outline: &[[f64; 2]], apex: [f64; 2], height: f64) -> TriangleMesh {
    let n = outline.len();
    let mut b = Builder::new();
    let bottom: Vec<u32> = outline.iter().map(|p| b.vertex([p[0], p[1], 0.0])).collect();
    let top: Vec<u32> = outline
        .iter()
        .map(|p| b.vertex([p[0], p[1], height]))
        .collect();
    let cb = b.vertex([apex[0], apex[1], 0.0]);
    let ct = b.vertex([apex[0], apex[1], height]);
    for i in 0..n {
        let j = (i + 1) % n;
        if outline[i] != apex && outline[j] != apex {
            b.tri(cb, bottom[j], bottom[i]);
            b.tri(ct, top[i], top[j]);
        }
        b.quad(bottom[i], bottom[j], top[j], top[i]);
    }
    b.finish()
}

/// Disc sector of `radius` with a 90° mouth opening along +x.
pub fn pacman(radius: f64, height: f64, arc_segments: usize) -> TriangleMesh {
    let start = PI / 4.0;
    let sweep = 1.5 * PI;
    let mut outline = Vec::with_capacity(arc_segments + 2);
    outline.push([0.0, 0.0]);
    for k in 0..=arc_segments {
        let a = start + sweep * k as f64 / arc_segments as f64;
        outline.push([radius * cos(a), radius * sin(a)]);
    }
    extrude_star(&outline, [0.0, 0.0], height)
}

/// Solid cylinder.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    extrude_star(&circle(radius, segments), [0.0, 0.0], height)
}

fn circle(radius: f64, segments: usize) -> Vec<[f64; 2]> {
    (0..segments)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / segments as f64;
            [radius * cos(a), radius * sin(a)]
        })
        .collect()
}

/// Hollow cylinder (annulus extrusion).
pub fn ring(outer: f64, inner: f64, height: f64, segments: usize) -> TriangleMesh {
    let mut b = Builder::new();
    let ring_of = |b: &mut Builder, r: f64, z: f64| -> Vec<u32> {
        circle(r, segments)
            .into_iter()
            .map(|p| b.vertex([p[0], p[1], z]))
            .collect()
    };
    let ob = ring_of(&mut b, outer, 0.0);
    let ot = ring_of(&mut b, outer, height);
    let ib = ring_of(&mut b, inner, 0.0);
    let it = ring_of(&mut b, inner, height);
    for i in 0..segments {
        let j = (i + 1) % segments;
        b.quad(ob[i], ib[i], ib[j], ob[j]); // bottom face
        b.quad(ot[i], ot[j], it[j], it[i]); // top face
        b.quad(ob[i], ob[j], ot[j], ot[i]); // outer wall
        b.quad(ib[j], ib[i], it[i], it[j]); // inner wall
    }
    b.finish()
}

/// Triangular ridge of `length` along x: the edge line lies at `z = 0` and
/// the flanks rise to `height` at `y = ±width / 2`.
pub fn ridge(length: f64, width: f64, height: f64) -> TriangleMesh {
    let (hl, hw) = (length / 2.0, width / 2.0);
    let mut b = Builder::new();
    let e0 = b.vertex([-hl, 0.0, 0.0]);
    let e1 = b.vertex([hl, 0.0, 0.0]);
    let l0 = b.vertex([-hl, -hw, height]);
    let l1 = b.vertex([hl, -hw, height]);
    let r0 = b.vertex([-hl, hw, height]);
    let r1 = b.vertex([hl, hw, height]);
    b.quad(e0, e1, l1, l0);
    b.quad(e0, r0, r1, e1);
    b.quad(l0, l1, r1, r0);
    b.tri(e0, l0, r0);
    b.tri(e1, r1, l1);
    b.finish()
}

/// Cone with its apex touching `z = 0`.
pub fn cone(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let mut b = Builder::new();
    let apex = b.vertex([0.0, 0.0, 0.0]);
    let cap = b.vertex([0.0, 0.0, height]);
    let rim: Vec<u32> = circle(radius, segments)
        .into_iter()
        .map(|p| b.vertex([p[0], p[1], height]))
        .collect();
    for i in 0..segments {
        let j = (i + 1) % segments;
        b.tri(apex, rim[j], rim[i]);
        b.tri(cap, rim[i], rim[j]);
    }
    b.finish()
}

/// Equilateral triangle prism with side `side`.
pub fn triangle_prism(side: f64, height: f64) -> TriangleMesh {
    let r = side / libm::sqrt(3.0);
    let outline: Vec<[f64; 2]> = (0..3)
        .map(|k| {
            let a = PI / 2.0 + 2.0 * PI * k as f64 / 3.0;
            [r * cos(a), r * sin(a)]
        })
        .collect();
    extrude_star(&outline, [0.0, 0.0], height)
}

/// Plus-shaped prism with arms of `span` total length and `width`.
pub fn cross(span: f64, width: f64, height: f64) -> TriangleMesh {
    let (a, w) = (span / 2.0, width / 2.0);
    let outline = [
        [w, -w],
        [a, -w],
        [a, w],
        [w, w],
        [w, a],
        [-w, a],
        [-w, w],
        [-a, w],
        [-a, -w],
        [-w, -w],
        [-w, -a],
        [w, -a],
    ];
    extrude_star(&outline, [0.0, 0.0], height)
}
