//! Crossing detection, stacking order and heights.
//!
//! Harnesses are dropped in order and every one rests at `floor + radius`
//! except where it lies on top at a crossing: there it is raised by a
//! trapezoidal bump (the whole crossing segment plus a ramp) to clear what
//! is underneath by [`DropModel::lift`]. Earlier harnesses never move when
//! a later one lands, so every settled crossing stays settled. A draw whose
//! self-crossings cannot be stacked is rejected and the caller draws new
//! shapes.

use std::collections::BTreeMap;

use rand::Rng as _;

use super::geometry::{arc_lengths, lerp2, segment_intersection, P2};
use super::{Crossing, DropModel, Harness, Scene, SceneSpec, SelfCrossing, Shape, SCHEMA_VERSION};
use crate::rng::Rng;

const MAX_PASSES: usize = 64;
/// Tallest stack a self-crossing may build, in lifts.
const MAX_LAYERS: usize = 8;

/// Stacking decisions carried over when a scene is re-assembled.
#[derive(Debug, Clone, Default)]
pub struct Designations {
    /// (low id, its segment, high id, its segment) -> id on top
    inter: BTreeMap<(u32, usize, u32, usize), u32>,
    /// (id, low segment, high segment) -> upper segment
    intra: BTreeMap<(u32, usize, usize), usize>,
}

impl Designations {
    pub fn from_scene(scene: &Scene) -> Self {
        let mut d = Designations::default();
        for c in &scene.crossing_graph {
            d.inter.insert(inter_key(c.harness_a, c.segment_a, c.harness_b, c.segment_b), c.above);
        }
        for c in &scene.self_crossings {
            d.intra.insert((c.harness, c.segment_lo, c.segment_hi), c.upper);
        }
        d
    }

    /// Forget every decision that involves one of `ids`.
    pub fn without(mut self, ids: &[u32]) -> Self {
        self.inter.retain(|k, _| !ids.contains(&k.0) && !ids.contains(&k.2));
        self.intra.retain(|k, _| !ids.contains(&k.0));
        self
    }
}

fn inter_key(a: u32, sa: usize, b: u32, sb: usize) -> (u32, usize, u32, usize) {
    if a < b {
        (a, sa, b, sb)
    } else {
        (b, sb, a, sa)
    }
}

#[derive(Debug, Clone, Copy)]
struct Site {
    h: usize,
    seg: usize,
    t: f64,
}

#[derive(Debug, Clone)]
struct Cx {
    upper: Site,
    lower: Site,
    point: P2,
    /// Index pair in drop order for inter crossings, `None` for self.
    pair: Option<(usize, usize)>,
}

pub(super) fn assemble(
    spec: &SceneSpec,
    shapes: Vec<Shape>,
    keep: &Designations,
    rng: &mut Rng,
    seed: u64,
) -> Option<Scene> {
    let d = &spec.drop_model;
    let arcs: Vec<Vec<f64>> = shapes.iter().map(|s| arc_lengths(&s.pts)).collect();
    let boxes: Vec<[f64; 4]> = shapes.iter().map(|s| bbox(&s.pts)).collect();
    let mut cxs: Vec<Cx> = Vec::new();

    for i in 0..shapes.len() {
        for j in i + 1..shapes.len() {
            if !overlap(&boxes[i], &boxes[j]) {
                continue;
            }
            let (a, b) = (&shapes[i], &shapes[j]);
            for sa in 0..a.pts.len() - 1 {
                for sb in 0..b.pts.len() - 1 {
                    let Some((t, u)) =
                        segment_intersection(a.pts[sa], a.pts[sa + 1], b.pts[sb], b.pts[sb + 1])
                    else {
                        continue;
                    };
                    let key = inter_key(a.id, sa, b.id, sb);
                    let above = match keep.inter.get(&key) {
                        Some(&id) => id,
                        None if rng.gen::<f64>() < d.p_later_above => b.id,
                        None => a.id,
                    };
                    let site_a = Site { h: i, seg: sa, t };
                    let site_b = Site { h: j, seg: sb, t: u };
                    let (upper, lower) = if above == b.id { (site_b, site_a) } else { (site_a, site_b) };
                    cxs.push(Cx {
                        upper,
                        lower,
                        point: lerp2(a.pts[sa], a.pts[sa + 1], t),
                        pair: Some((i, j)),
                    });
                }
            }
        }
    }

    for (i, sh) in shapes.iter().enumerate() {
        let m = sh.pts.len() - 1;
        for lo in 0..m {
            for hi in lo + 2..m {
                let Some((t, u)) =
                    segment_intersection(sh.pts[lo], sh.pts[lo + 1], sh.pts[hi], sh.pts[hi + 1])
                else {
                    continue;
                };
                let upper_seg = match keep.intra.get(&(sh.id, lo, hi)) {
                    Some(&s) => s,
                    None if rng.gen::<f64>() < d.p_later_above => hi,
                    None => lo,
                };
                let site_lo = Site { h: i, seg: lo, t };
                let site_hi = Site { h: i, seg: hi, t: u };
                let (upper, lower) = if upper_seg == hi { (site_hi, site_lo) } else { (site_lo, site_hi) };
                cxs.push(Cx {
                    upper,
                    lower,
                    point: lerp2(sh.pts[lo], sh.pts[lo + 1], t),
                    pair: None,
                });
            }
        }
    }

    let base = spec.bin_bounds.floor + d.cable_radius;
    let mut z: Vec<Vec<f64>> = shapes.iter().map(|s| s.z.clone().unwrap_or_else(|| vec![base; s.pts.len()])).collect();
    let fixed: Vec<bool> = shapes.iter().map(|s| s.z.is_some()).collect();
    if !relax(&mut cxs, &mut z, &fixed, &arcs, base, d) {
        return None;
    }

    let harnesses: Vec<Harness> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| Harness {
            id: s.id,
            centerline: s
                .pts
                .iter()
                .zip(&z[i])
                .map(|(p, &zz)| [p[0], p[1], zz])
                .collect(),
            segment_kinds: s.kinds.clone(),
            cable_radius: d.cable_radius,
            connector_extent: d.connector_extent,
        })
        .collect();

    let mut crossing_graph = Vec::new();
    let mut self_crossings = Vec::new();
    for c in &cxs {
        match c.pair {
            Some((i, j)) => {
                let (sa, sb) = if c.upper.h == i { (c.upper.seg, c.lower.seg) } else { (c.lower.seg, c.upper.seg) };
                crossing_graph.push(Crossing {
                    harness_a: shapes[i].id,
                    harness_b: shapes[j].id,
                    crossing_point: c.point,
                    above: shapes[c.upper.h].id,
                    segment_a: sa,
                    segment_b: sb,
                });
            }
            None => {
                let (lo, hi) = if c.upper.seg < c.lower.seg { (c.upper.seg, c.lower.seg) } else { (c.lower.seg, c.upper.seg) };
                self_crossings.push(SelfCrossing {
                    harness: shapes[c.upper.h].id,
                    segment_lo: lo,
                    segment_hi: hi,
                    crossing_point: c.point,
                    upper: c.upper.seg,
                });
            }
        }
    }

    Some(Scene {
        schema_version: SCHEMA_VERSION,
        harnesses,
        bin_bounds: spec.bin_bounds,
        crossing_graph,
        self_crossings,
        seed,
    })
}

fn z_at(z: &[Vec<f64>], s: Site) -> f64 {
    z[s.h][s.seg] + (z[s.h][s.seg + 1] - z[s.h][s.seg]) * s.t
}

fn satisfied(z: &[Vec<f64>], c: &Cx, lift: f64) -> bool {
    z_at(z, c.upper) >= z_at(z, c.lower) + lift - 1e-12
}

/// Drops the harnesses one at a time onto the ones already settled. Only
/// the harness being dropped moves: it is raised by a bump wherever it lies
/// on top (over an earlier harness, or with a later stretch of itself over
/// an earlier one). A designation that puts it underneath holds only if the
/// other side already clears it by `lift`; otherwise it lands on top there
/// instead. Conversions only go one way, so the loop ends; false if raises
/// among its own self-crossings do not settle. `fixed` harnesses have
/// already settled and are not dropped again.
fn relax(cxs: &mut [Cx], z: &mut [Vec<f64>], fixed: &[bool], arcs: &[Vec<f64>], base: f64, d: &DropModel) -> bool {
    let n = z.len();
    for i in (0..n).filter(|&i| !fixed[i]) {
        let own: Vec<usize> = (0..cxs.len())
            .filter(|&ci| match cxs[ci].pair {
                Some((_, j)) => j == i,
                None => cxs[ci].upper.h == i,
            })
            .collect();
        let mut settled = false;
        for _ in 0..MAX_PASSES {
            let mut changed = false;
            for &ci in &own {
                if satisfied(z, &cxs[ci], d.lift) {
                    continue;
                }
                changed = true;
                let c = &mut cxs[ci];
                let raise = match c.pair {
                    Some(_) => c.upper.h == i,
                    None => c.upper.seg > c.lower.seg,
                };
                if !raise {
                    std::mem::swap(&mut c.upper, &mut c.lower);
                }
                let (up, low) = (c.upper, c.lower);
                let need = z_at(z, low) - base + d.lift;
                if need > MAX_LAYERS as f64 * d.lift {
                    return false;
                }
                // a bump must not reach back into the segment it clears
                let room = if c.pair.is_none() { arcs[i][up.seg] - arcs[i][low.seg + 1] } else { f64::INFINITY };
                let flat = d.bump_flat.min(room);
                let ramp = d.bump_ramp.min(room - flat);
                let (lo, hi) = (arcs[i][up.seg], arcs[i][up.seg + 1]);
                for (zk, &s) in z[i].iter_mut().zip(&arcs[i]) {
                    let w = bump((lo - s).max(s - hi).max(0.0), flat, ramp);
                    if w > 0.0 {
                        *zk = zk.max(base + need * w);
                    }
                }
            }
            if !changed {
                settled = true;
                break;
            }
        }
        if !settled {
            return false;
        }
    }
    true
}

fn bump(dist: f64, flat: f64, ramp: f64) -> f64 {
    if dist <= flat {
        1.0
    } else if ramp > 0.0 && dist < flat + ramp {
        (flat + ramp - dist) / ramp
    } else {
        0.0
    }
}

fn bbox(pts: &[P2]) -> [f64; 4] {
    pts.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
    )
}

fn overlap(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
}

/// Height of the body top of harness `h` at `(segment, t)`.
pub(super) fn top_at(h: &Harness, seg: usize, t: f64) -> f64 {
    let z0 = h.centerline[seg][2];
    let z1 = h.centerline[seg + 1][2];
    z0 + (z1 - z0) * t + h.top_offset(seg)
}

/// Recomputes every centerline intersection and compares it with the
/// recorded graphs, then checks the stacking order at each one.
pub(super) fn check_crossings(scene: &Scene) -> Result<(), String> {
    let hs = &scene.harnesses;
    let mut found = 0usize;
    for i in 0..hs.len() {
        for j in i + 1..hs.len() {
            let (a, b) = (&hs[i], &hs[j]);
            let (pa, pb) = (a.plan(), b.plan());
            for sa in 0..pa.len() - 1 {
                for sb in 0..pb.len() - 1 {
                    let Some((t, u)) = segment_intersection(pa[sa], pa[sa + 1], pb[sb], pb[sb + 1]) else {
                        continue;
                    };
                    found += 1;
                    let rec = scene.crossing_graph.iter().find(|c| {
                        c.harness_a == a.id && c.harness_b == b.id && c.segment_a == sa && c.segment_b == sb
                    });
                    let Some(rec) = rec else {
                        return Err(format!("unrecorded crossing {}:{sa} x {}:{sb}", a.id, b.id));
                    };
                    let p = lerp2(pa[sa], pa[sa + 1], t);
                    if (p[0] - rec.crossing_point[0]).abs() > 1e-9 || (p[1] - rec.crossing_point[1]).abs() > 1e-9 {
                        return Err(format!("crossing point drift {}x{}", a.id, b.id));
                    }
                    let (ta, tb) = (top_at(a, sa, t), top_at(b, sb, u));
                    let ok = if rec.above == a.id { ta > tb } else { tb > ta };
                    if !ok {
                        return Err(format!(
                            "crossing {}x{} says {} on top but tops are {ta:.4} / {tb:.4}",
                            a.id, b.id, rec.above
                        ));
                    }
                }
            }
        }
    }
    if found != scene.crossing_graph.len() {
        return Err(format!("{} recorded crossings, {found} in geometry", scene.crossing_graph.len()));
    }
    for c in &scene.self_crossings {
        let h = hs.iter().find(|h| h.id == c.harness).ok_or("self crossing on missing harness")?;
        let p = h.plan();
        let (t, u) = segment_intersection(p[c.segment_lo], p[c.segment_lo + 1], p[c.segment_hi], p[c.segment_hi + 1])
            .ok_or_else(|| format!("stale self crossing on {}", h.id))?;
        let (tl, th) = (top_at(h, c.segment_lo, t), top_at(h, c.segment_hi, u));
        let ok = if c.upper == c.segment_hi { th > tl } else { tl > th };
        if !ok {
            return Err(format!("self crossing order broken on {}", h.id));
        }
    }
    Ok(())
}
