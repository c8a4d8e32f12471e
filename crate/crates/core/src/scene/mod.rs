//! Procedural clutter of wire harnesses.
//!
//! A harness is a polyline of cable with rigid connector boxes at both ends
//! (and sometimes one mid-branch). Harnesses are dropped one after another
//! into the bin; wherever two centerlines cross in plan view the later one
//! lands on top with probability [`DropModel::p_later_above`], otherwise it
//! threads underneath. The resulting crossing graph is the ground truth the
//! complexity oracle reads, and the same graph drives the heights that the
//! renderer draws, so what the camera sees and what the oracle scores agree.

mod geometry;
mod layering;
mod oracle;
mod render;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::{Error, Result};

pub use geometry::{arc_lengths, point_segment, segment_intersection, P2};
pub use layering::Designations;
pub use oracle::{ComplexityOracle, GraspContext};
pub use render::{render_depth, render_with_owner, RenderOutput, MIN_RESOLUTION};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Cable,
    Connector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harness {
    pub id: u32,
    pub centerline: Vec<[f64; 3]>,
    pub segment_kinds: Vec<SegmentKind>,
    pub cable_radius: f64,
    pub connector_extent: f64,
}

impl Harness {
    pub fn plan(&self) -> Vec<P2> {
        self.centerline.iter().map(|p| [p[0], p[1]]).collect()
    }

    /// Length of the plan-view polyline. Draping over other harnesses
    /// changes heights but not the footprint, so this is the conserved
    /// harness length.
    pub fn length(&self) -> f64 {
        *arc_lengths(&self.plan()).last().unwrap_or(&0.0)
    }

    pub fn segment_count(&self) -> usize {
        self.centerline.len().saturating_sub(1)
    }

    /// Half-height of the body above the centerline for a segment.
    pub fn top_offset(&self, segment: usize) -> f64 {
        match self.segment_kinds[segment] {
            SegmentKind::Cable => self.cable_radius,
            SegmentKind::Connector => 0.5 * self.connector_extent,
        }
    }

    pub fn centroid(&self) -> P2 {
        let n = self.centerline.len() as f64;
        let (sx, sy) = self
            .centerline
            .iter()
            .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinBounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
    /// Floor height in metres above the depth reference plane.
    pub floor: f64,
}

impl BinBounds {
    pub fn contains(&self, p: P2) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    fn inset(&self, margin: f64) -> BinBounds {
        BinBounds {
            min: [self.min[0] + margin, self.min[1] + margin],
            max: [self.max[0] - margin, self.max[1] - margin],
            floor: self.floor,
        }
    }

    fn center(&self) -> P2 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }
}

impl Default for BinBounds {
    fn default() -> Self {
        Self {
            min: [0.02, 0.02],
            max: [0.364, 0.364],
            floor: 0.02,
        }
    }
}

/// One inter-harness crossing. `harness_a` was dropped before `harness_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crossing {
    pub harness_a: u32,
    pub harness_b: u32,
    pub crossing_point: [f64; 2],
    pub above: u32,
    pub segment_a: usize,
    pub segment_b: usize,
}

impl Crossing {
    pub fn below(&self) -> u32 {
        if self.above == self.harness_a {
            self.harness_b
        } else {
            self.harness_a
        }
    }

    pub fn involves(&self, id: u32) -> bool {
        self.harness_a == id || self.harness_b == id
    }

    pub fn segment_of(&self, id: u32) -> usize {
        if id == self.harness_a {
            self.segment_a
        } else {
            self.segment_b
        }
    }
}

/// A harness crossing itself. `upper` is the segment lying on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfCrossing {
    pub harness: u32,
    pub segment_lo: usize,
    pub segment_hi: usize,
    pub crossing_point: [f64; 2],
    pub upper: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropModel {
    /// Range of the per-harness maximum heading change per control step (rad).
    pub curvature_range: [f64; 2],
    /// Probability that a later harness lands above an earlier one at a
    /// crossing (and a later segment above an earlier one of the same
    /// harness).
    pub p_later_above: f64,
    /// Inclusive range of control segments; each is subdivided twice.
    pub control_segments: [usize; 2],
    pub p_mid_connector: f64,
    pub cable_radius: f64,
    pub connector_extent: f64,
    /// Vertical clearance added per stacking level at a crossing.
    pub lift: f64,
    /// How far past the crossing segment's end vertices a bump stays fully
    /// raised, along the cable.
    pub bump_flat: f64,
    pub bump_ramp: f64,
    /// How far a re-dropped harness may move from where it was.
    pub redrop_radius: f64,
}

impl Default for DropModel {
    fn default() -> Self {
        Self {
            curvature_range: [0.4, 1.1],
            p_later_above: 0.8,
            control_segments: [10, 14],
            p_mid_connector: 0.5,
            cable_radius: 0.004,
            connector_extent: 0.015,
            lift: 0.012,
            bump_flat: 0.0,
            bump_ramp: 0.015,
            redrop_radius: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub n_objects: usize,
    pub harness_length: f64,
    pub bin_bounds: BinBounds,
    pub drop_model: DropModel,
}

impl SceneSpec {
    pub fn with_objects(n_objects: usize) -> Self {
        Self {
            n_objects,
            ..Self::default()
        }
    }

    fn max_step(&self) -> f64 {
        self.harness_length / self.drop_model.control_segments[0] as f64
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.bin_bounds;
        let d = &self.drop_model;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.harness_length > 0.0 && self.harness_length.is_finite()) {
            return bad(format!("harness_length must be > 0, got {}", self.harness_length));
        }
        if !(b.floor >= 0.001) {
            return bad(format!("bin floor must be at least 1 mm, got {}", b.floor));
        }
        let inner = b.inset(d.connector_extent);
        let need = 2.0 * self.max_step();
        for k in 0..2 {
            if !(inner.max[k] - inner.min[k] >= need) {
                return bad(format!(
                    "bin too small: inner extent {:.3} m on axis {k}, need {:.3} m",
                    inner.max[k] - inner.min[k],
                    need
                ));
            }
        }
        if d.control_segments[0] < 2 || d.control_segments[0] > d.control_segments[1] {
            return bad(format!("bad control_segments {:?}", d.control_segments));
        }
        if !(0.0..=1.0).contains(&d.p_later_above) || !(0.0..=1.0).contains(&d.p_mid_connector) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(d.curvature_range[0] >= 0.0 && d.curvature_range[0] <= d.curvature_range[1]) {
            return bad(format!("bad curvature_range {:?}", d.curvature_range));
        }
        if !(d.cable_radius > 0.0 && d.connector_extent > 0.0 && d.lift > 0.0) {
            return bad("cable_radius, connector_extent and lift must be > 0".into());
        }
        if !(d.bump_flat >= 0.0 && d.bump_ramp >= 0.0) {
            return bad("bump_flat and bump_ramp must be >= 0".into());
        }
        Ok(())
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_objects: 10,
            harness_length: 0.74,
            bin_bounds: BinBounds::default(),
            drop_model: DropModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub schema_version: u32,
    /// Harnesses in drop order.
    pub harnesses: Vec<Harness>,
    pub bin_bounds: BinBounds,
    pub crossing_graph: Vec<Crossing>,
    #[serde(default)]
    pub self_crossings: Vec<SelfCrossing>,
    pub seed: u64,
}

/// Plan-view shape of a harness before heights are assigned.
#[derive(Debug, Clone)]
pub(crate) struct Shape {
    pub id: u32,
    pub pts: Vec<P2>,
    pub kinds: Vec<SegmentKind>,
    /// Settled centerline heights of a harness that stays put.
    pub z: Option<Vec<f64>>,
}

const MAX_ATTEMPTS: usize = 32;

pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let shapes: Vec<Shape> = (0..spec.n_objects)
            .map(|i| {
                let mut r = rng::rng(rng::derive_indexed(seed, &format!("harness{attempt}"), i as u64));
                random_shape(spec, i as u32, None, &mut r)
            })
            .collect();
        let mut layer_rng = rng::rng(rng::derive_indexed(seed, "layering", attempt as u64));
        if let Some(scene) = layering::assemble(spec, shapes, &Designations::default(), &mut layer_rng, seed) {
            return Ok(scene);
        }
    }
    Err(Error::Precondition(format!(
        "no consistent stacking found for {} harnesses after {MAX_ATTEMPTS} draws",
        spec.n_objects
    )))
}

fn random_shape(spec: &SceneSpec, id: u32, near: Option<P2>, r: &mut Rng) -> Shape {
    let d = &spec.drop_model;
    let inner = spec.bin_bounds.inset(d.connector_extent);
    let n_ctrl = r.gen_range(d.control_segments[0]..=d.control_segments[1]);
    let step = spec.harness_length / n_ctrl as f64;
    let kappa = r.gen_range(d.curvature_range[0]..=d.curvature_range[1]);
    let start = match near {
        Some(c) => [
            (c[0] + r.gen_range(-1.0..=1.0) * d.redrop_radius).clamp(inner.min[0], inner.max[0]),
            (c[1] + r.gen_range(-1.0..=1.0) * d.redrop_radius).clamp(inner.min[1], inner.max[1]),
        ],
        None => [
            r.gen_range(inner.min[0]..=inner.max[0]),
            r.gen_range(inner.min[1]..=inner.max[1]),
        ],
    };
    let mut heading: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let mut pts = vec![start];
    let mut p = start;
    for _ in 0..n_ctrl {
        heading += r.gen_range(-kappa..=kappa);
        heading = steer_inside(&inner, p, heading, step);
        p = [p[0] + step * heading.cos(), p[1] + step * heading.sin()];
        pts.push(p);
    }
    for _ in 0..2 {
        pts = subdivide(&pts);
    }
    let n_seg = pts.len() - 1;
    let mut kinds = vec![SegmentKind::Cable; n_seg];
    kinds[0] = SegmentKind::Connector;
    kinds[n_seg - 1] = SegmentKind::Connector;
    if r.gen::<f64>() < d.p_mid_connector {
        let k = r.gen_range(n_seg / 4..=3 * n_seg / 4);
        kinds[k] = SegmentKind::Connector;
    }
    Shape { id, pts, kinds, z: None }
}

/// Closest heading to `heading` whose step stays inside `inner`.
fn steer_inside(inner: &BinBounds, p: P2, heading: f64, step: f64) -> f64 {
    let ok = |h: f64| inner.contains([p[0] + step * h.cos(), p[1] + step * h.sin()]);
    if ok(heading) {
        return heading;
    }
    let delta = std::f64::consts::PI / 24.0;
    for k in 1..=24 {
        for sign in [1.0, -1.0] {
            let h = heading + sign * k as f64 * delta;
            if ok(h) {
                return h;
            }
        }
    }
    // unreachable for validated specs: the far wall is at least one step away
    let c = inner.center();
    (c[1] - p[1]).atan2(c[0] - p[0])
}

/// Insert the midpoint of every segment. Keeps the polyline length exactly.
fn subdivide(pts: &[P2]) -> Vec<P2> {
    let mut out = Vec::with_capacity(pts.len() * 2 - 1);
    for w in pts.windows(2) {
        out.push(w[0]);
        out.push(geometry::lerp2(w[0], w[1], 0.5));
    }
    out.push(*pts.last().unwrap());
    out
}

impl Scene {
    pub fn harness(&self, id: u32) -> Option<&Harness> {
        self.harnesses.iter().find(|h| h.id == id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.harnesses.iter().map(|h| h.id).collect()
    }

    /// Crossings where another harness lies on top of `id`.
    pub fn above_crossings(&self, id: u32) -> impl Iterator<Item = &Crossing> {
        self.crossing_graph
            .iter()
            .filter(move |c| c.involves(id) && c.above != id)
    }

    /// Harnesses sharing at least one crossing with `id`.
    pub fn neighbors(&self, id: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .crossing_graph
            .iter()
            .filter(|c| c.involves(id))
            .map(|c| if c.harness_a == id { c.harness_b } else { c.harness_a })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn shapes(&self) -> Vec<Shape> {
        self.harnesses
            .iter()
            .map(|h| Shape {
                id: h.id,
                pts: h.plan(),
                kinds: h.segment_kinds.clone(),
                z: Some(h.centerline.iter().map(|p| p[2]).collect()),
            })
            .collect()
    }

    /// Take a harness out of the bin. The others stay where they lie, so
    /// their crossings keep their order.
    pub fn remove(&self, id: u32, spec: &SceneSpec, r: &mut Rng) -> Scene {
        let shapes = self.shapes().into_iter().filter(|s| s.id != id).collect();
        let keep = Designations::from_scene(self);
        // a subset of a consistent stacking is consistent
        layering::assemble(spec, shapes, &keep, r, self.seed).expect("removal keeps a consistent stacking")
    }

    /// Pick up `ids` and drop them again nearby, on top of the drop order.
    /// Untouched harnesses stay where they lie; new crossings
    /// are drawn from the drop model. If no consistent stacking exists for
    /// a draw, the moved harnesses are dropped again; as a last resort the
    /// scene is left as it was.
    pub fn redrop(&self, ids: &[u32], spec: &SceneSpec, r: &mut Rng) -> Scene {
        let keep = Designations::from_scene(self).without(ids);
        for _ in 0..MAX_ATTEMPTS {
            let mut stay = Vec::new();
            let mut moved = Vec::new();
            for s in self.shapes() {
                if ids.contains(&s.id) {
                    let c = self.harness(s.id).map(Harness::centroid);
                    moved.push(random_shape(spec, s.id, c, r));
                } else {
                    stay.push(s);
                }
            }
            stay.extend(moved);
            if let Some(scene) = layering::assemble(spec, stay, &keep, r, self.seed) {
                return scene;
            }
        }
        self.clone()
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self, spec: &SceneSpec) -> std::result::Result<(), String> {
        let b = &self.bin_bounds;
        for h in &self.harnesses {
            if h.centerline.len() < 2 {
                return Err(format!("harness {} has < 2 points", h.id));
            }
            if h.segment_kinds.len() != h.segment_count() {
                return Err(format!("harness {} kinds/segments mismatch", h.id));
            }
            for w in h.centerline.windows(2) {
                if w[0] == w[1] {
                    return Err(format!("harness {} repeats a vertex", h.id));
                }
            }
            for p in &h.centerline {
                if !b.contains([p[0], p[1]]) {
                    return Err(format!("harness {} leaves the bin at {:?}", h.id, p));
                }
            }
            if (h.length() - spec.harness_length).abs() > 1e-6 {
                return Err(format!("harness {} length {} != {}", h.id, h.length(), spec.harness_length));
            }
            let n = h.segment_count();
            if h.segment_kinds[0] != SegmentKind::Connector
                || h.segment_kinds[n - 1] != SegmentKind::Connector
            {
                return Err(format!("harness {} lacks end connectors", h.id));
            }
            let mids = h.segment_kinds[1..n - 1]
                .iter()
                .filter(|k| **k == SegmentKind::Connector)
                .count();
            if mids > 1 {
                return Err(format!("harness {} has {mids} mid connectors", h.id));
            }
        }
        layering::check_crossings(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_spec_gives_empty_scene() {
        let s = generate_scene(&SceneSpec::with_objects(0), 3).unwrap();
        assert!(s.harnesses.is_empty());
        assert!(s.crossing_graph.is_empty());
    }

    #[test]
    fn single_harness_has_no_inter_object_crossings() {
        let spec = SceneSpec::with_objects(1);
        let s = generate_scene(&spec, 7).unwrap();
        assert_eq!(s.harnesses.len(), 1);
        assert!(s.crossing_graph.is_empty());
        s.check_invariants(&spec).unwrap();
    }

    #[test]
    fn generation_is_bit_identical() {
        let spec = SceneSpec::with_objects(15);
        let a = generate_scene(&spec, 42).unwrap();
        let b = generate_scene(&spec, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn generated_scenes_satisfy_invariants() {
        for n in [2, 5, 10, 20] {
            let spec = SceneSpec::with_objects(n);
            for seed in 0..10 {
                let s = generate_scene(&spec, seed).unwrap();
                assert_eq!(s.harnesses.len(), n);
                if let Err(e) = s.check_invariants(&spec) {
                    panic!("n={n} seed={seed}: {e}");
                }
                for h in &s.harnesses {
                    assert!((20..=60).contains(&h.centerline.len()));
                }
            }
        }
    }

    #[test]
    fn degenerate_specs_are_config_errors() {
        let mut spec = SceneSpec::with_objects(3);
        spec.harness_length = 0.0;
        assert!(matches!(generate_scene(&spec, 0), Err(Error::Config(_))));

        let mut spec = SceneSpec::with_objects(3);
        spec.bin_bounds.max = [0.05, 0.05];
        assert!(matches!(generate_scene(&spec, 0), Err(Error::Config(_))));

        let mut spec = SceneSpec::with_objects(3);
        spec.bin_bounds.floor = 0.0;
        assert!(matches!(generate_scene(&spec, 0), Err(Error::Config(_))));
    }

    #[test]
    fn negative_count_in_json_is_rejected() {
        let mut v = serde_json::to_value(SceneSpec::default()).unwrap();
        v["n_objects"] = serde_json::json!(-1);
        assert!(serde_json::from_value::<SceneSpec>(v).is_err());
    }

    #[test]
    fn scene_json_round_trips() {
        let spec = SceneSpec::with_objects(6);
        let s = generate_scene(&spec, 11).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        for key in ["\"harnesses\"", "\"centerline\"", "\"segment_kinds\"", "\"crossing_graph\"", "\"bin_bounds\"", "\"seed\""] {
            assert!(text.contains(key), "missing {key}");
        }
        let back: Scene = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn removal_and_redrop_preserve_invariants() {
        let spec = SceneSpec::with_objects(8);
        let s = generate_scene(&spec, 5).unwrap();
        let mut r = rng::rng(1);
        let target = s.harnesses[2].id;
        let removed = s.remove(target, &spec, &mut r);
        assert_eq!(removed.harnesses.len(), 7);
        assert!(removed.harness(target).is_none());
        removed.check_invariants(&spec).unwrap();

        let mut ids = s.neighbors(target);
        ids.push(target);
        let moved = s.redrop(&ids, &spec, &mut r);
        assert_eq!(moved.harnesses.len(), 8);
        moved.check_invariants(&spec).unwrap();
        // re-dropped harnesses go to the top of the drop order
        let tail: Vec<u32> = moved.harnesses[8 - ids.len()..].iter().map(|h| h.id).collect();
        for id in &ids {
            assert!(tail.contains(id));
        }
    }
}
