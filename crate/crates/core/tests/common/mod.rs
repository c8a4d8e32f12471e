//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use wirepick::depth::DepthImage;
use wirepick::grasp::{FgeParams, GripperTemplate};
use wirepick::scene::{generate_scene, render_with_owner, BinBounds, SceneSpec};

/// Binomial row, built from Pascal's triangle rather than copied.
pub fn binomial_row(n: usize) -> Vec<u64> {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for k in 1..row.len() {
            next[k] = row[k - 1] + row[k];
        }
        row = next;
    }
    row
}

/// Exhaustive template placement: rotates the stencil by the full angle at
/// every orientation, evaluates every pixel directly, smooths with a 2D
/// (non-separable) kernel and runs greedy suppression over all candidates.
/// Returns `(u, v, phi, raw_score)` in rank order.
pub fn fge_bruteforce(
    depth: &DepthImage,
    template: &GripperTemplate,
    n_orient: usize,
    top_k: usize,
    params: &FgeParams,
) -> Vec<(usize, usize, f64, u64)> {
    let kernel = binomial_row(16);
    let (w, h) = (depth.width as i64, depth.height as i64);
    let floor = depth.data.iter().copied().filter(|&z| z != 0).min();
    let mut cands: Vec<(u64, usize, i64, i64)> = Vec::new();
    for i in 0..n_orient {
        let phi = i as f64 * PI / n_orient as f64;
        let (sn, cs) = phi.sin_cos();
        // ties away from zero, after snapping float noise at 1e-9
        let snap = |t: f64| ((t * 1e9).round() / 1e9).round() as i64;
        let cm = &template.contact_mask;
        let km = &template.collision_mask;
        let (cx, cy) = ((cm.width / 2) as i64, (cm.height / 2) as i64);
        // pads: each cell moved forward by the full rotation
        let mut contact_st = Vec::new();
        for y in 0..cm.height as i64 {
            for x in 0..cm.width as i64 {
                if cm.cells[(y as usize) * cm.width + x as usize] {
                    let (fx, fy) = ((x - cx) as f64, (y - cy) as f64);
                    let t = (snap(fx * cs - fy * sn), snap(fx * sn + fy * cs));
                    if !contact_st.contains(&t) {
                        contact_st.push(t);
                    }
                }
            }
        }
        // fingers: every target cell looks up its source
        let mut collide_st = Vec::new();
        let reach = 12i64;
        for dv in -reach..=reach {
            for du in -reach..=reach {
                let x = snap(du as f64 * cs + dv as f64 * sn) + cx;
                let y = snap(-(du as f64) * sn + dv as f64 * cs) + cy;
                if x < 0 || y < 0 || x >= km.width as i64 || y >= km.height as i64 {
                    continue;
                }
                if km.cells[(y as usize) * km.width + x as usize] && !contact_st.contains(&(du, dv)) {
                    collide_st.push((du, dv));
                }
            }
        }
        let mut contact = vec![vec![0u64; w as usize]; h as usize];
        let mut free = vec![vec![false; w as usize]; h as usize];
        if let Some(floor) = floor {
            let floor = floor as i64;
            for v in 0..h {
                for u in 0..w {
                    let inside = contact_st
                        .iter()
                        .chain(&collide_st)
                        .all(|&(du, dv)| (0..w).contains(&(u + du)) && (0..h).contains(&(v + dv)));
                    if !inside {
                        continue;
                    }
                    let at = |du: i64, dv: i64| depth.get((u + du) as usize, (v + dv) as usize) as i64;
                    let local = contact_st.iter().map(|&(du, dv)| at(du, dv)).max().unwrap().max(at(0, 0));
                    if local == 0 {
                        free[v as usize][u as usize] = true;
                        continue;
                    }
                    let thr = (local - params.insertion_depth_mm as i64).max(floor + params.floor_clearance_mm as i64);
                    contact[v as usize][u as usize] = contact_st
                        .iter()
                        .map(|&(du, dv)| at(du, dv))
                        .filter(|&z| z > thr)
                        .map(|z| (z - floor) as u64)
                        .sum();
                    free[v as usize][u as usize] = collide_st.iter().all(|&(du, dv)| at(du, dv) <= thr);
                }
            }
        }
        for v in 0..h {
            for u in 0..w {
                if !free[v as usize][u as usize] {
                    continue;
                }
                let mut s = 0u64;
                for b in -8i64..=8 {
                    for a in -8i64..=8 {
                        let (uu, vv) = (u + a, v + b);
                        if (0..w).contains(&uu) && (0..h).contains(&vv) && free[vv as usize][uu as usize] {
                            s += kernel[(a + 8) as usize] * kernel[(b + 8) as usize] * contact[vv as usize][uu as usize];
                        }
                    }
                }
                if s > 0 {
                    cands.push((s, i, v, u));
                }
            }
        }
    }
    cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let r = template.finger_gap * 1000.0 / template.template_resolution / 2.0;
    let mut kept: Vec<(usize, usize, f64, u64)> = Vec::new();
    for (s, i, v, u) in cands {
        if kept.len() == top_k {
            break;
        }
        if kept
            .iter()
            .all(|k| ((k.0 as f64 - u as f64).powi(2) + (k.1 as f64 - v as f64).powi(2)) > r * r)
        {
            kept.push((u as usize, v as usize, i as f64 * PI / n_orient as f64, s));
        }
    }
    kept
}

/// A small synthetic depth image: a rendered scene in a 192 mm bin, with
/// some pixels dropped out when `seed` is odd.
pub fn small_scene_image(seed: u64) -> DepthImage {
    let mut spec = SceneSpec::with_objects(1 + (seed % 4) as usize);
    spec.harness_length = 0.3;
    spec.bin_bounds = BinBounds { min: [0.012, 0.012], max: [0.18, 0.18], floor: 0.02 };
    let scene = generate_scene(&spec, seed).unwrap();
    let dropout = (seed % 2 == 1).then_some((0.02, seed));
    render_with_owner(&scene, (64, 64), 3.0, dropout).unwrap().depth
}
