//! Procedural stand-ins for the three sensor modalities.
//!
//! ViTac is depth-lit skin shading without markers, TacTip is a hexagonal
//! marker lattice on a flat background, and ViTacTip composites the same
//! lattice over the ViTac shading. Marker dots move radially away from the
//! contact centroid in proportion to the local depth.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::SensorModality;
use crate::image::Image;
use crate::math::{floor, sqrt};

/// Appearance parameters; lengths are fractions of the image width so the
/// same style renders consistently at any resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthStyleParams {
    pub vitac_base: [f32; 3],
    pub vitac_tint: [f32; 3],
    pub shading_gain: f32,
    pub light_dir: [f32; 2],
    /// Ceiling of the ViTac layer; keeps ViTacTip compositing unclipped.
    pub vitac_max: f32,
    pub tactip_background: [f32; 3],
    /// Peak marker colour (≤ 1 − vitac_max per channel).
    pub marker_colour: [f32; 3],
    pub lattice_pitch: f32,
    pub dot_radius: f32,
    pub displacement_gain: f32,
    /// Relative dot radius increase per unit depth (pins bulge under load).
    pub dot_growth: f32,
}

impl Default for SynthStyleParams {
    fn default() -> Self {
        Self {
            vitac_base: [0.30, 0.22, 0.18],
            vitac_tint: [0.22, 0.12, 0.16],
            shading_gain: 0.35,
            light_dir: [0.6, -0.8],
            vitac_max: 0.6,
            tactip_background: [0.06, 0.06, 0.08],
            marker_colour: [0.40, 0.40, 0.36],
            lattice_pitch: 0.125,
            dot_radius: 0.032,
            displacement_gain: 0.08,
            dot_growth: 0.5,
        }
    }
}

fn depth_at(c: &Image, x: f64, y: f64) -> f64 {
    let (x0, y0) = (floor(x), floor(y));
    let (fx, fy) = (x - x0, y - y0);
    let t = |u: f64, v: f64| {
        if u < 0.0 || v < 0.0 || u >= c.width() as f64 || v >= c.height() as f64 {
            0.0
        } else {
            c.get(u as usize, v as usize, 0) as f64
        }
    };
    t(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + t(x0 + 1.0, y0) * fx * (1.0 - fy)
        + t(x0, y0 + 1.0) * (1.0 - fx) * fy
        + t(x0 + 1.0, y0 + 1.0) * fx * fy
}

/// Hexagonal lattice centres (pixel units) covering a `w × h` frame with one
/// pitch of margin; odd rows are offset by half a pitch.
pub fn hex_lattice(w: usize, h: usize, pitch: f64) -> Vec<[f64; 2]> {
    let row = pitch * sqrt(3.0) / 2.0;
    let mut pts = Vec::new();
    let rows = (h as f64 / row) as i64 + 2;
    let cols = (w as f64 / pitch) as i64 + 2;
    let (ox, oy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    for r in -rows / 2 - 1..=rows / 2 + 1 {
        let shift = if r.rem_euclid(2) == 1 { pitch / 2.0 } else { 0.0 };
        for c in -cols / 2 - 1..=cols / 2 + 1 {
            let p = [ox + c as f64 * pitch + shift, oy + r as f64 * row];
            if p[0] > -pitch && p[0] < w as f64 + pitch && p[1] > -pitch && p[1] < h as f64 + pitch {
                pts.push(p);
            }
        }
    }
    pts
}

fn depth_centroid(c: &Image) -> Option<[f64; 2]> {
    let (mut su, mut sv, mut s) = (0.0, 0.0, 0.0);
    for v in 0..c.height() {
        for u in 0..c.width() {
            let d = c.get(u, v, 0) as f64;
            su += d * u as f64;
            sv += d * v as f64;
            s += d;
        }
    }
    (s > 0.0).then(|| [su / s, sv / s])
}

/// Displaced marker layer (RGB, zero between dots).
pub fn lattice_layer(c: &Image, style: &SynthStyleParams) -> Image {
    let (w, h) = (c.width(), c.height());
    let scale = w as f64;
    let pitch = style.lattice_pitch as f64 * scale;
    let radius = style.dot_radius as f64 * scale;
    let gain = style.displacement_gain as f64 * scale;
    let centroid = depth_centroid(c);
    let mut coverage = Image::zeros(w, h, 1);
    for g in hex_lattice(w, h, pitch) {
        let depth = depth_at(c, g[0], g[1]);
        let mut p = g;
        if let Some([cu, cv]) = centroid {
            let (dx, dy) = (g[0] - cu, g[1] - cv);
            let n = sqrt(dx * dx + dy * dy);
            if n > 1e-9 {
                let shift = gain * depth / n;
                p = [g[0] + dx * shift, g[1] + dy * shift];
            }
        }
        let radius = radius * (1.0 + style.dot_growth as f64 * depth);
        let reach = radius + 1.0;
        let lo_u = floor(p[0] - reach).max(0.0) as usize;
        let lo_v = floor(p[1] - reach).max(0.0) as usize;
        let hi_u = (floor(p[0] + reach) as i64).min(w as i64 - 1);
        let hi_v = (floor(p[1] + reach) as i64).min(h as i64 - 1);
        if hi_u < 0 || hi_v < 0 {
            continue;
        }
        for v in lo_v..=hi_v as usize {
            for u in lo_u..=hi_u as usize {
                let (du, dv) = (u as f64 - p[0], v as f64 - p[1]);
                let a = (radius + 0.5 - sqrt(du * du + dv * dv)).clamp(0.0, 1.0) as f32;
                if a > coverage.get(u, v, 0) {
                    coverage.set(u, v, 0, a);
                }
            }
        }
    }
    let mut out = Image::zeros(w, h, 3);
    for v in 0..h {
        for u in 0..w {
            let a = coverage.get(u, v, 0);
            for ch in 0..3 {
                out.set(u, v, ch, a * style.marker_colour[ch]);
            }
        }
    }
    out
}

/// Depth-tinted, gradient-lit skin without markers.
pub fn vitac_layer(c: &Image, style: &SynthStyleParams) -> Image {
    let (w, h) = (c.width(), c.height());
    let at = |u: i64, v: i64| -> f32 {
        let u = u.clamp(0, w as i64 - 1) as usize;
        let v = v.clamp(0, h as i64 - 1) as usize;
        c.get(u, v, 0)
    };
    // gradients are expressed per 1/64 of the width
    let slope = w as f32 / 64.0;
    let mut out = Image::zeros(w, h, 3);
    for v in 0..h {
        for u in 0..w {
            let (ui, vi) = (u as i64, v as i64);
            let gx = (at(ui + 1, vi) - at(ui - 1, vi)) * 0.5 * slope;
            let gy = (at(ui, vi + 1) - at(ui, vi - 1)) * 0.5 * slope;
            let shade = style.shading_gain * (style.light_dir[0] * gx + style.light_dir[1] * gy);
            let d = c.get(u, v, 0);
            for ch in 0..3 {
                let x = style.vitac_base[ch] + style.vitac_tint[ch] * d + shade;
                out.set(u, v, ch, x.clamp(0.0, style.vitac_max));
            }
        }
    }
    out
}

/// RGB target for modality `m` from a single-channel control image.
pub fn synth_targets(c: &Image, m: SensorModality, style: &SynthStyleParams) -> Image {
    match m {
        SensorModality::ViTac => vitac_layer(c, style),
        SensorModality::TacTip => {
            let mut out = lattice_layer(c, style);
            for px in out.data_mut().chunks_exact_mut(3) {
                for ch in 0..3 {
                    px[ch] += style.tactip_background[ch];
                }
            }
            out
        }
        SensorModality::ViTacTip => {
            let mut out = vitac_layer(c, style);
            let markers = lattice_layer(c, style);
            for (o, l) in out.data_mut().iter_mut().zip(markers.data()) {
                *o += l;
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::uv_sphere;
    use crate::render::{render_depth, OrthoCamera};

    fn sphere_control(res: usize) -> Image {
        let cam = OrthoCamera::new(res, res, 0.12 * 512.0 / res as f64, -1.0, 2.0);
        render_depth(&uv_sphere(24.0, 64, 32), &cam).unwrap().depth.image
    }

    fn mean_l1(a: &Image, b: &Image) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.data().len() as f64
    }

    #[test]
    fn zero_control_gives_backgrounds() {
        let style = SynthStyleParams::default();
        let zero = Image::zeros(64, 64, 1);
        let vitac = synth_targets(&zero, SensorModality::ViTac, &style);
        for px in vitac.data().chunks_exact(3) {
            assert_eq!(px, &style.vitac_base);
        }
        let tactip = synth_targets(&zero, SensorModality::TacTip, &style);
        let undisplaced = lattice_layer(&zero, &style);
        for (t, l) in tactip.data().chunks_exact(3).zip(undisplaced.data().chunks_exact(3)) {
            for ch in 0..3 {
                assert_eq!(t[ch], l[ch] + style.tactip_background[ch]);
            }
        }
        // the lattice has visible dots at the frame centre row
        assert!(undisplaced.data().iter().any(|&x| x > 0.3));
    }

    #[test]
    fn vitactip_residual_is_the_lattice() {
        let style = SynthStyleParams::default();
        let c = sphere_control(64);
        let vitac = synth_targets(&c, SensorModality::ViTac, &style);
        let both = synth_targets(&c, SensorModality::ViTacTip, &style);
        let layer = lattice_layer(&c, &style);
        for ((b, v), l) in both.data().iter().zip(vitac.data()).zip(layer.data()) {
            assert!((b - v - l).abs() < 1e-6);
            assert!(*b <= 1.0);
        }
    }

    #[test]
    fn contact_displaces_markers() {
        let style = SynthStyleParams::default();
        let c = sphere_control(64);
        let zero = Image::zeros(64, 64, 1);
        let moved = lattice_layer(&c, &style);
        let rest = lattice_layer(&zero, &style);
        assert!(mean_l1(&moved, &rest) > 0.002);
        let peak = moved.data().iter().zip(rest.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(peak > 0.2);
    }

    #[test]
    fn modalities_pairwise_distinct() {
        let style = SynthStyleParams::default();
        let c = sphere_control(64);
        let t = SensorModality::ALL.map(|m| synth_targets(&c, m, &style));
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(mean_l1(&t[i], &t[j]) > 0.01);
            }
        }
        for img in &t {
            assert!(img.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn lattice_is_hexagonal() {
        let pts = hex_lattice(64, 64, 8.0);
        let centre = [31.5, 31.5];
        let mut near: Vec<f64> = pts
            .iter()
            .map(|p| sqrt((p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2)))
            .filter(|&d| d > 1e-9)
            .collect();
        near.sort_by(f64::total_cmp);
        for d in &near[..6] {
            assert!((d - 8.0).abs() < 1e-9);
        }
        assert!(near[6] > 8.0 + 1e-6);
    }
}
