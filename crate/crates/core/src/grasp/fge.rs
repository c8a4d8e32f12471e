//! Fast graspability evaluation.
//!
//! For every pixel and orientation the gripper template is placed with its
//! centre on the pixel. The fingers descend to an adaptive height: a fixed
//! insertion depth below the highest point at the centre or under the
//! pads (never closer than a small clearance to the bin floor). Anything above that height
//! under a pad is grasped material, anything under the open fingers is a
//! collision. The contact map is the height-weighted area under the pads,
//! so material on top of the pile scores above material underneath it.
//! Colliding placements are zeroed, the rest smoothed with a 17-tap
//! binomial kernel (an integer Gaussian with sigma = 2 px), and colliding
//! placements zeroed again so no returned grasp collides. All arithmetic is integer,
//! so scores are exact.

use serde::{Deserialize, Serialize};

use super::template::{GripperTemplate, RotatedTemplate};
use super::{Grasp, GraspSet};
use crate::depth::{DepthImage, INVALID};
use crate::{par, Error, Result};

/// Binomial coefficients C(16, k): variance 16 / 4 = 4 px^2.
pub const SMOOTHING_KERNEL: [u64; 17] = [
    1, 16, 120, 560, 1820, 4368, 8008, 11440, 12870, 11440, 8008, 4368, 1820, 560, 120, 16, 1,
];
pub const SMOOTHING_RADIUS: i64 = 8;
/// Scores are smoothed integer sums scaled by `1 / 2^32` (the kernel mass).
pub const SCORE_SCALE: f64 = 1.0 / 4_294_967_296.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FgeParams {
    /// How far the fingers go below the highest point under the pads.
    pub insertion_depth_mm: u16,
    /// Closest the fingertips may come to the bin floor.
    pub floor_clearance_mm: u16,
}

impl Default for FgeParams {
    fn default() -> Self {
        Self {
            insertion_depth_mm: 15,
            floor_clearance_mm: 2,
        }
    }
}

/// Graspability at one orientation. `raw` holds the smoothed, masked
/// integer scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub width: usize,
    pub height: usize,
    pub phi: f64,
    pub raw: Vec<u64>,
}

impl ScoreMap {
    pub fn score(&self, u: usize, v: usize) -> f64 {
        self.raw[v * self.width + u] as f64 * SCORE_SCALE
    }
}

fn check_resolution(depth: &DepthImage, template: &GripperTemplate) -> Result<()> {
    if (depth.mm_per_pixel - template.template_resolution).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "template drawn at {} mm/px, image is {} mm/px",
            template.template_resolution, depth.mm_per_pixel
        )));
    }
    Ok(())
}

/// Graspability map for an arbitrary closing-axis angle.
pub fn graspability_map(
    depth: &DepthImage,
    template: &GripperTemplate,
    phi: f64,
    params: &FgeParams,
) -> Result<ScoreMap> {
    check_resolution(depth, template)?;
    Ok(score_map(depth, &template.rotated(phi), params))
}

/// Height-weighted contact and collision-free flag per pixel, before
/// smoothing. Placements that reach outside the image get `(0, false)`.
pub fn contact_and_collision(
    depth: &DepthImage,
    rt: &RotatedTemplate,
    params: &FgeParams,
) -> (Vec<u64>, Vec<bool>) {
    let (w, h) = (depth.width as i64, depth.height as i64);
    let mut contact = vec![0u64; depth.data.len()];
    let mut free = vec![false; depth.data.len()];
    let Some(floor) = depth.min_valid() else {
        return (contact, free);
    };
    let floor = floor as i64;
    let (du0, du1, dv0, dv1) = rt.extents();
    let stride = w;
    let contact_off: Vec<i64> = rt.contact.iter().map(|&(du, dv)| dv as i64 * stride + du as i64).collect();
    let collision_off: Vec<i64> = rt.collision.iter().map(|&(du, dv)| dv as i64 * stride + du as i64).collect();
    let data = &depth.data;
    for v in -(dv0 as i64)..h - dv1 as i64 {
        for u in -(du0 as i64)..w - du1 as i64 {
            let c = v * stride + u;
            let mut local = data[c as usize];
            for &o in &contact_off {
                local = local.max(data[(c + o) as usize]);
            }
            if local == INVALID {
                free[c as usize] = true;
                continue;
            }
            let thr = (local as i64 - params.insertion_depth_mm as i64).max(floor + params.floor_clearance_mm as i64);
            let mut sum = 0u64;
            for &o in &contact_off {
                let z = data[(c + o) as usize] as i64;
                if z > thr {
                    sum += (z - floor) as u64;
                }
            }
            contact[c as usize] = sum;
            free[c as usize] = !collision_off.iter().any(|&o| data[(c + o) as usize] as i64 > thr);
        }
    }
    (contact, free)
}

/// Separable binomial smoothing with zero padding.
pub fn smooth(values: &[u64], width: usize, height: usize) -> Vec<u64> {
    let r = SMOOTHING_RADIUS;
    let (w, h) = (width as i64, height as i64);
    let mut tmp = vec![0u64; values.len()];
    for v in 0..h {
        let row = &values[(v * w) as usize..((v + 1) * w) as usize];
        for u in 0..w {
            let mut acc = 0u64;
            for k in (-r).max(-u)..=r.min(w - 1 - u) {
                acc += SMOOTHING_KERNEL[(k + r) as usize] * row[(u + k) as usize];
            }
            tmp[(v * w + u) as usize] = acc;
        }
    }
    let mut out = vec![0u64; values.len()];
    for v in 0..h {
        for u in 0..w {
            let mut acc = 0u64;
            for k in (-r).max(-v)..=r.min(h - 1 - v) {
                acc += SMOOTHING_KERNEL[(k + r) as usize] * tmp[((v + k) * w + u) as usize];
            }
            out[(v * w + u) as usize] = acc;
        }
    }
    out
}

fn score_map(depth: &DepthImage, rt: &RotatedTemplate, params: &FgeParams) -> ScoreMap {
    let (mut contact, free) = contact_and_collision(depth, rt, params);
    for (c, ok) in contact.iter_mut().zip(&free) {
        if !ok {
            *c = 0;
        }
    }
    let mut raw = smooth(&contact, depth.width, depth.height);
    for (s, ok) in raw.iter_mut().zip(&free) {
        if !ok {
            *s = 0;
        }
    }
    ScoreMap {
        width: depth.width,
        height: depth.height,
        phi: rt.phi,
        raw,
    }
}

/// Score maps for `n` orientations evenly spaced over `[0, pi)`.
pub fn orientation_maps(
    depth: &DepthImage,
    template: &GripperTemplate,
    n_orientations: usize,
    params: &FgeParams,
) -> Result<Vec<ScoreMap>> {
    check_resolution(depth, template)?;
    if n_orientations == 0 {
        return Err(Error::Parameter("n_orientations must be >= 1".into()));
    }
    Ok(par::map_range(n_orientations, |i| {
        score_map(depth, &template.rotated_index(i, n_orientations), params)
    }))
}

/// Candidates in descending score order: ties go to the lower orientation
/// index, then row, then column. Greedy suppression drops any candidate
/// within `nms_radius` pixels of one already kept, across orientations.
pub fn select(maps: &[ScoreMap], nms_radius: f64, top_k: usize) -> Vec<Grasp> {
    let mut cands: Vec<(u64, usize, usize, usize)> = Vec::new();
    for (i, m) in maps.iter().enumerate() {
        for (idx, &s) in m.raw.iter().enumerate() {
            if s > 0 {
                cands.push((s, i, idx / m.width, idx % m.width));
            }
        }
    }
    cands.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let r2 = nms_radius * nms_radius;
    let mut kept: Vec<Grasp> = Vec::new();
    for (s, i, v, u) in cands {
        if kept.len() >= top_k {
            break;
        }
        let close = kept.iter().any(|g| {
            let (du, dv) = (g.u as f64 - u as f64, g.v as f64 - v as f64);
            du * du + dv * dv <= r2
        });
        if !close {
            kept.push(Grasp::new(u, v, maps[i].phi, s as f64 * SCORE_SCALE));
        }
    }
    kept
}

/// Top-`top_k` grasps over `n_orientations` orientations.
pub fn detect_grasps(
    depth: &DepthImage,
    template: &GripperTemplate,
    n_orientations: usize,
    top_k: usize,
    params: &FgeParams,
) -> Result<GraspSet> {
    let maps = orientation_maps(depth, template, n_orientations, params)?;
    Ok(GraspSet {
        grasps: select(&maps, template.nms_radius_px(), top_k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::template::JawGeometry;

    fn template() -> GripperTemplate {
        GripperTemplate::parallel_jaw(&JawGeometry::default(), 3.0).unwrap()
    }

    #[test]
    fn kernel_has_unit_mass_and_variance_four() {
        let mass: u64 = SMOOTHING_KERNEL.iter().sum();
        assert_eq!(mass * mass, 1 << 32);
        let var: f64 = SMOOTHING_KERNEL
            .iter()
            .enumerate()
            .map(|(k, &c)| c as f64 * (k as f64 - 8.0).powi(2))
            .sum::<f64>()
            / mass as f64;
        assert!((var - 4.0).abs() < 1e-12);
    }

    #[test]
    fn flat_floor_scores_zero() {
        let img = DepthImage::filled(64, 64, 3.0, 20);
        let set = detect_grasps(&img, &template(), 8, 10, &FgeParams::default()).unwrap();
        assert!(set.grasps.is_empty());
    }

    #[test]
    fn border_placements_score_zero() {
        let mut img = DepthImage::filled(64, 64, 3.0, 20);
        for v in 0..64 {
            img.set(0, v, 40);
            img.set(1, v, 40);
        }
        let maps = orientation_maps(&img, &template(), 4, &FgeParams::default()).unwrap();
        // every orientation reaches at least two pixels to the left
        for m in &maps {
            for v in 0..64 {
                for u in 0..2 {
                    assert_eq!(m.raw[v * 64 + u], 0);
                }
            }
        }
    }

    #[test]
    fn mismatched_resolution_is_rejected() {
        let img = DepthImage::filled(64, 64, 2.0, 20);
        assert!(detect_grasps(&img, &template(), 8, 10, &FgeParams::default()).is_err());
        assert!(detect_grasps(&DepthImage::filled(64, 64, 3.0, 20), &template(), 0, 10, &FgeParams::default()).is_err());
    }

    #[test]
    fn grasps_are_sorted_and_separated() {
        let mut img = DepthImage::filled(64, 64, 3.0, 20);
        for u in 8..56 {
            for v in [20, 21, 40, 41] {
                img.set(u, v, 30);
            }
        }
        let t = template();
        let set = detect_grasps(&img, &t, 8, 20, &FgeParams::default()).unwrap();
        assert!(!set.grasps.is_empty());
        for w in set.grasps.windows(2) {
            assert!(w[0].fge_score >= w[1].fge_score);
        }
        for (i, a) in set.grasps.iter().enumerate() {
            for b in &set.grasps[i + 1..] {
                let d2 = (a.u as f64 - b.u as f64).powi(2) + (a.v as f64 - b.v as f64).powi(2);
                assert!(d2 > t.nms_radius_px().powi(2));
            }
        }
    }
}
