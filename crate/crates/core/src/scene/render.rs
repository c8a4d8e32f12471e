//! Orthographic top-down rendering.
//!
//! Cables are tubes around the centerline (capsules per segment); connector
//! segments are boxes of half-width `connector_extent` with a top
//! `connector_extent / 2` above the centerline. Each pixel takes the highest
//! surface over its centre, or the floor.

use rand::Rng as _;

use super::geometry::{cross, dot, norm, point_segment, sub, P2};
use super::{Scene, SegmentKind};
use crate::depth::{DepthImage, INVALID};
use crate::rng;
use crate::{Error, Result};

pub const MIN_RESOLUTION: usize = 64;

#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub depth: DepthImage,
    /// Harness id owning each pixel, `None` for floor.
    pub owner: Vec<Option<u32>>,
}

impl RenderOutput {
    pub fn owner_at(&self, u: usize, v: usize) -> Option<u32> {
        self.owner[v * self.depth.width + u]
    }
}

pub fn render_depth(scene: &Scene, resolution: (usize, usize), mm_per_pixel: f64) -> Result<DepthImage> {
    Ok(render_with_owner(scene, resolution, mm_per_pixel, None)?.depth)
}

/// Renders heights and pixel ownership. `dropout` is an optional
/// `(probability, seed)` pair zeroing pixels uniformly at random.
pub fn render_with_owner(
    scene: &Scene,
    resolution: (usize, usize),
    mm_per_pixel: f64,
    dropout: Option<(f64, u64)>,
) -> Result<RenderOutput> {
    let (w, h) = resolution;
    if w < MIN_RESOLUTION || h < MIN_RESOLUTION {
        return Err(Error::Parameter(format!(
            "resolution {w}x{h} below {MIN_RESOLUTION}x{MIN_RESOLUTION}"
        )));
    }
    if !(mm_per_pixel > 0.0) {
        return Err(Error::Parameter(format!("mm_per_pixel must be > 0, got {mm_per_pixel}")));
    }
    let s = mm_per_pixel / 1000.0;
    let floor = scene.bin_bounds.floor;
    let mut height = vec![floor; w * h];
    let mut owner: Vec<Option<u32>> = vec![None; w * h];

    for hr in &scene.harnesses {
        let r = hr.cable_radius;
        for seg in 0..hr.segment_count() {
            let a3 = hr.centerline[seg];
            let b3 = hr.centerline[seg + 1];
            let (a, b) = ([a3[0], a3[1]], [b3[0], b3[1]]);
            let kind = hr.segment_kinds[seg];
            let reach = match kind {
                SegmentKind::Cable => r,
                // box corners reach sqrt(2) * extent from the axis ends
                SegmentKind::Connector => hr.connector_extent * std::f64::consts::SQRT_2,
            };
            let u0 = (((a[0].min(b[0]) - reach) / s).floor() as i64).max(0);
            let u1 = (((a[0].max(b[0]) + reach) / s).ceil() as i64).min(w as i64 - 1);
            let v0 = (((a[1].min(b[1]) - reach) / s).floor() as i64).max(0);
            let v1 = (((a[1].max(b[1]) + reach) / s).ceil() as i64).min(h as i64 - 1);
            for v in v0..=v1 {
                for u in u0..=u1 {
                    let p = [(u as f64 + 0.5) * s, (v as f64 + 0.5) * s];
                    let Some(top) = surface(p, a, b, a3[2], b3[2], kind, r, hr.connector_extent) else {
                        continue;
                    };
                    let idx = v as usize * w + u as usize;
                    if top > height[idx] {
                        height[idx] = top;
                        owner[idx] = Some(hr.id);
                    }
                }
            }
        }
    }

    let mut data: Vec<u16> = height.iter().map(|&z| to_mm(z)).collect();
    if let Some((p, seed)) = dropout {
        if p > 0.0 {
            let mut r = rng::rng(seed);
            for px in data.iter_mut() {
                if r.gen::<f64>() < p {
                    *px = INVALID;
                }
            }
        }
    }
    Ok(RenderOutput {
        depth: DepthImage {
            width: w,
            height: h,
            mm_per_pixel,
            data,
        },
        owner,
    })
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn surface(p: P2, a: P2, b: P2, za: f64, zb: f64, kind: SegmentKind, r: f64, extent: f64) -> Option<f64> {
    match kind {
        SegmentKind::Cable => {
            let (d, t) = point_segment(p, a, b);
            (d < r).then(|| za + (zb - za) * t + (r * r - d * d).sqrt())
        }
        SegmentKind::Connector => {
            let ab = sub(b, a);
            let len = norm(ab);
            let dir = [ab[0] / len, ab[1] / len];
            let ap = sub(p, a);
            let along = dot(ap, dir);
            let across = cross(dir, ap).abs();
            if along < 0.0 || along > len || across > extent {
                return None;
            }
            let t = along / len;
            Some(za + (zb - za) * t + 0.5 * extent)
        }
    }
}

fn to_mm(z: f64) -> u16 {
    (z * 1000.0).round().clamp(1.0, 65535.0) as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, BinBounds, Harness, SceneSpec, SCHEMA_VERSION};

    fn scene_of(harnesses: Vec<Harness>) -> Scene {
        Scene {
            schema_version: SCHEMA_VERSION,
            harnesses,
            bin_bounds: BinBounds::default(),
            crossing_graph: vec![],
            self_crossings: vec![],
            seed: 0,
        }
    }

    fn straight(id: u32, a: [f64; 3], b: [f64; 3]) -> Harness {
        Harness {
            id,
            centerline: vec![a, b],
            segment_kinds: vec![SegmentKind::Cable],
            cable_radius: 0.004,
            connector_extent: 0.015,
        }
    }

    #[test]
    fn empty_scene_is_floor() {
        let img = render_depth(&scene_of(vec![]), (64, 64), 3.0).unwrap();
        assert!(img.data.iter().all(|&h| h == 20));
    }

    #[test]
    fn straight_cable_centerline_reads_top_of_tube() {
        // centerline on the centre of pixel row 30 at 1 mm/px
        let y = 0.0305;
        let z = 0.05;
        let s = scene_of(vec![straight(0, [0.005, y, z], [0.06, y, z])]);
        let img = render_depth(&s, (64, 64), 1.0).unwrap();
        for u in 10..50 {
            assert_eq!(img.get(u, 30), 54, "u={u}");
        }
        // 3 px off the axis: sqrt(16 - 9) mm above the centre
        assert_eq!(img.get(20, 33), (50.0 + 7f64.sqrt()).round() as u16);
        assert_eq!(img.get(20, 35), 20);
    }

    #[test]
    fn crossing_pixel_shows_upper_surface() {
        let lower = straight(0, [0.005, 0.0325, 0.024], [0.06, 0.0325, 0.024]);
        let upper = straight(1, [0.0325, 0.005, 0.036], [0.0325, 0.06, 0.036]);
        let s = scene_of(vec![lower.clone(), upper.clone()]);
        let out = render_with_owner(&s, (64, 64), 1.0, None).unwrap();
        // brute force: max over both tubes at the crossing pixel centre
        let p = [0.0325, 0.0325];
        let tube = |h: &Harness| {
            let a = [h.centerline[0][0], h.centerline[0][1]];
            let b = [h.centerline[1][0], h.centerline[1][1]];
            let (d, _) = point_segment(p, a, b);
            h.centerline[0][2] + (0.004f64 * 0.004 - d * d).sqrt()
        };
        let expect = tube(&lower).max(tube(&upper));
        assert_eq!(out.depth.get(32, 32), (expect * 1000.0).round() as u16);
        assert_eq!(out.owner_at(32, 32), Some(1));
    }

    #[test]
    fn too_small_resolution_is_rejected() {
        assert!(render_depth(&scene_of(vec![]), (32, 64), 1.0).is_err());
    }

    #[test]
    fn every_crossing_pixel_belongs_to_its_upper_harness_or_higher() {
        let spec = SceneSpec::with_objects(12);
        for seed in 0..5 {
            let scene = generate_scene(&spec, seed).unwrap();
            let out = render_with_owner(&scene, (128, 128), 3.0, None).unwrap();
            for c in &scene.crossing_graph {
                let (u, v) = out.depth.world_to_pixel(c.crossing_point[0], c.crossing_point[1]).unwrap();
                let owner = out.owner_at(u, v);
                assert_ne!(owner, Some(c.below()), "seed {seed}: lower harness owns crossing");
                assert!(owner.is_some());
            }
        }
    }

    #[test]
    fn dropout_only_zeroes_pixels() {
        let scene = generate_scene(&SceneSpec::with_objects(3), 2).unwrap();
        let clean = render_with_owner(&scene, (64, 64), 6.0, None).unwrap().depth;
        let noisy = render_with_owner(&scene, (64, 64), 6.0, Some((0.1, 9))).unwrap().depth;
        let zeroed = noisy.data.iter().filter(|&&h| h == INVALID).count();
        assert!(zeroed > 0);
        for (a, b) in clean.data.iter().zip(&noisy.data) {
            assert!(*b == *a || *b == INVALID);
        }
    }
}
