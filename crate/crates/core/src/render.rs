//! Orthographic z-buffer rasterizer, object masks and mask centroids.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::image::Image;

pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_MM_PER_PIXEL: f64 = 0.12;
/// Camera slab in mm. The contact face (z = 0) maps to 2/3, leaving
/// headroom for intensity modulation of deeper contacts.
pub const DEFAULT_NEAR_MM: f64 = -1.0;
pub const DEFAULT_FAR_MM: f64 = 2.0;
pub const DEFAULT_MASK_THRESHOLD: f32 = 0.01;

/// Orthographic camera looking along +z.
///
/// Pixel `(u, v)` samples the ray through
/// `((u - cx) * mm_per_pixel, (v - cy) * mm_per_pixel)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoCamera {
    pub width: usize,
    pub height: usize,
    pub mm_per_pixel: f64,
    pub near: f64,
    pub far: f64,
    pub principal_point: [f64; 2],
}

impl OrthoCamera {
    pub fn new(width: usize, height: usize, mm_per_pixel: f64, near: f64, far: f64) -> Self {
        Self {
            width,
            height,
            mm_per_pixel,
            near,
            far,
            principal_point: [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("resolution must be non-zero"));
        }
        if !(self.mm_per_pixel.is_finite() && self.mm_per_pixel > 0.0) {
            return Err(Error::InvalidCamera("mm_per_pixel must be positive"));
        }
        if !(self.near.is_finite() && self.far.is_finite() && self.far > self.near) {
            return Err(Error::InvalidCamera("far must exceed near"));
        }
        Ok(())
    }
}

impl Default for OrthoCamera {
    fn default() -> Self {
        Self::new(
            DEFAULT_RESOLUTION,
            DEFAULT_RESOLUTION,
            DEFAULT_MM_PER_PIXEL,
            DEFAULT_NEAR_MM,
            DEFAULT_FAR_MM,
        )
    }
}

/// Normalized depth raster: 0 is background, 1 the deepest indentation.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub image: Image,
    pub mm_per_pixel: f64,
    pub depth_range_mm: f64,
}

impl DepthMap {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.image.get(u, v, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub depth: DepthMap,
    /// No triangle covered any pixel inside the near/far slab.
    pub outside_frustum: bool,
}

/// Rasterize `mesh` and keep, per pixel, the nearest surface (minimum z).
///
/// Triangles are scanned over their bounding box with edge functions and a
/// top-left fill rule; equal depths resolve to the lowest triangle index.
pub fn render_depth(mesh: &TriangleMesh, camera: &OrthoCamera) -> Result<Rendered> {
    camera.validate()?;
    let (w, h) = (camera.width, camera.height);
    let inv_s = 1.0 / camera.mm_per_pixel;
    let [cx, cy] = camera.principal_point;
    let mut zbuf = vec![f64::INFINITY; w * h];

    for [a, b, c] in mesh.facets() {
        let project = |p: [f64; 3]| [p[0] * inv_s + cx, p[1] * inv_s + cy, p[2]];
        let (mut p0, mut p1, p2) = (project(a), project(b), project(c));
        let mut area = edge(p0, p1, p2);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            core::mem::swap(&mut p0, &mut p1);
            area = -area;
        }
        let lo_u = libm::ceil(p0[0].min(p1[0]).min(p2[0])).max(0.0);
        let hi_u = libm::floor(p0[0].max(p1[0]).max(p2[0])).min(w as f64 - 1.0);
        let lo_v = libm::ceil(p0[1].min(p1[1]).min(p2[1])).max(0.0);
        let hi_v = libm::floor(p0[1].max(p1[1]).max(p2[1])).min(h as f64 - 1.0);
        if lo_u > hi_u || lo_v > hi_v {
            continue;
        }
        let own = [owned(p1, p2), owned(p2, p0), owned(p0, p1)];
        let inv_area = 1.0 / area;
        for v in lo_v as usize..=hi_v as usize {
            for u in lo_u as usize..=hi_u as usize {
                let p = [u as f64, v as f64, 0.0];
                let e = [edge(p1, p2, p), edge(p2, p0, p), edge(p0, p1, p)];
                let inside = (0..3).all(|k| e[k] > 0.0 || (e[k] == 0.0 && own[k]));
                if !inside {
                    continue;
                }
                let z = (e[0] * p0[2] + e[1] * p1[2] + e[2] * p2[2]) * inv_area;
                let slot = &mut zbuf[v * w + u];
                if z < *slot {
                    *slot = z;
                }
            }
        }
    }

    let span = camera.far - camera.near;
    let mut hit = false;
    let data = zbuf
        .iter()
        .map(|&z| {
            if z > camera.far {
                return 0.0;
            }
            hit = true;
            (((camera.far - z) / span).clamp(0.0, 1.0)) as f32
        })
        .collect();
    Ok(Rendered {
        depth: DepthMap {
            image: Image::from_vec(w, h, 1, data)?,
            mm_per_pixel: camera.mm_per_pixel,
            depth_range_mm: span,
        },
        outside_frustum: !hit,
    })
}

/// Twice the signed area of `(a, b, p)` in the image plane.
#[inline]
fn edge(a: [f64; 3], b: [f64; 3], p: [f64; 3]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Top-left ownership of the directed edge `a → b`; exactly one of the two
/// directions of any edge is owned.
#[inline]
fn owned(a: [f64; 3], b: [f64; 3]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

/// Binary occupancy raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ObjectMask {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                bits.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Intersection over union with `other`; 1 when both are empty.
    pub fn iou(&self, other: &ObjectMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    fn morph(&self, keep_if_all: bool) -> Self {
        let (w, h) = (self.width as isize, self.height as isize);
        Self::from_fn(self.width, self.height, |u, v| {
            let mut all = true;
            let mut any = false;
            for dv in -1..=1isize {
                for du in -1..=1isize {
                    let (nu, nv) = (u as isize + du, v as isize + dv);
                    if nu < 0 || nv < 0 || nu >= w || nv >= h {
                        continue;
                    }
                    let b = self.bits[(nv * w + nu) as usize];
                    all &= b;
                    any |= b;
                }
            }
            if keep_if_all {
                all
            } else {
                any
            }
        })
    }

    /// 3×3 erosion; out-of-frame neighbours are ignored.
    pub fn erode(&self) -> Self {
        self.morph(true)
    }

    /// 3×3 dilation; out-of-frame neighbours are ignored.
    pub fn dilate(&self) -> Self {
        self.morph(false)
    }
}

/// Threshold `depth` and apply one 3×3 morphological opening.
pub fn extract_mask(depth: &Image, threshold: f32) -> ObjectMask {
    ObjectMask::from_fn(depth.width(), depth.height(), |u, v| {
        depth.get(u, v, 0) > threshold
    })
    .erode()
    .dilate()
}

/// Mean `(u, v)` of occupied pixels.
pub fn mask_centroid(mask: &ObjectMask) -> Result<(f64, f64)> {
    let (mut su, mut sv, mut n) = (0.0f64, 0.0f64, 0usize);
    for v in 0..mask.height {
        let row = &mask.bits[v * mask.width..(v + 1) * mask.width];
        for (u, &b) in row.iter().enumerate() {
            if b {
                su += u as f64;
                sv += v as f64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((su / n as f64, sv / n as f64))
}
