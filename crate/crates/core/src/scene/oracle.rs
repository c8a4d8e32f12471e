//! Ground-truth disentangling complexity.
//!
//! This is the simulator's stand-in for "how hard is this target to pull
//! free": a monotone score over the crossing graph, not a physical model.
//!
//! ```text
//! base     = 0                          if no harness lies on the target
//!          = crossing_weight * above - 1 otherwise
//! required = clamp(base + connector_weight * [an above-crossing touches a connector]
//!                       + near_end_weight  * [grasp within near_end_fraction * L of an end],
//!                  0, 6)
//! ```
//!
//! With the default weights (2, 1, 1, 0.1) the score is zero exactly when
//! nothing lies on the target and the grasp is away from both ends.

use serde::{Deserialize, Serialize};

use super::geometry::{arc_lengths, point_segment, sub, norm, P2};
use super::{Scene, SegmentKind};
use crate::{Error, Result};

pub const MAX_COMPLEXITY: u8 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityOracle {
    pub crossing_weight: u32,
    pub connector_weight: u32,
    pub near_end_weight: u32,
    pub near_end_fraction: f64,
}

impl Default for ComplexityOracle {
    fn default() -> Self {
        Self {
            crossing_weight: 2,
            connector_weight: 1,
            near_end_weight: 1,
            near_end_fraction: 0.1,
        }
    }
}

/// The facts about a grasp the oracle scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraspContext {
    pub above_crossings: u32,
    pub connector_involved: bool,
    pub near_end: bool,
}

impl ComplexityOracle {
    pub fn score(&self, ctx: GraspContext) -> u8 {
        let base = if ctx.above_crossings == 0 {
            0
        } else {
            self.crossing_weight as i64 * ctx.above_crossings as i64 - 1
        };
        let total = base
            + self.connector_weight as i64 * ctx.connector_involved as i64
            + self.near_end_weight as i64 * ctx.near_end as i64;
        total.clamp(0, MAX_COMPLEXITY as i64) as u8
    }

    /// Inspect the scene around a grasp at world point `at` on `target`.
    pub fn context(&self, scene: &Scene, target: u32, at: P2) -> Result<GraspContext> {
        let h = scene
            .harness(target)
            .ok_or_else(|| Error::InvalidGrasp(format!("no harness with id {target}")))?;
        let plan = h.plan();
        let arcs = arc_lengths(&plan);
        let total = *arcs.last().unwrap();
        let mut best = (f64::INFINITY, 0.0, 0usize);
        for seg in 0..plan.len() - 1 {
            let (d, t) = point_segment(at, plan[seg], plan[seg + 1]);
            if d < best.0 {
                best = (d, arcs[seg] + t * norm(sub(plan[seg + 1], plan[seg])), seg);
            }
        }
        let (dist, s, seg) = best;
        let reach = match h.segment_kinds[seg] {
            SegmentKind::Cable => h.cable_radius,
            SegmentKind::Connector => h.connector_extent * std::f64::consts::SQRT_2,
        };
        if dist > reach {
            return Err(Error::InvalidGrasp(format!(
                "grasp {:.1} mm from harness {target}, outside its body",
                dist * 1000.0
            )));
        }
        let mut above = 0u32;
        let mut connector = false;
        for c in scene.above_crossings(target) {
            above += 1;
            let other = c.above;
            let oh = scene.harness(other).expect("crossing refers to scene harness");
            connector |= h.segment_kinds[c.segment_of(target)] == SegmentKind::Connector
                || oh.segment_kinds[c.segment_of(other)] == SegmentKind::Connector;
        }
        let edge = self.near_end_fraction * total;
        Ok(GraspContext {
            above_crossings: above,
            connector_involved: connector,
            near_end: s < edge || s > total - edge,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.crossing_weight == 0 || self.near_end_weight == 0 {
            return Err(Error::Config("crossing and near-end weights must be > 0".into()));
        }
        if !(0.0..0.5).contains(&self.near_end_fraction) {
            return Err(Error::Config("near_end_fraction must be in [0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn required_complexity(&self, scene: &Scene, target: u32, at: P2) -> Result<u8> {
        Ok(self.score(self.context(scene, target, at)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{BinBounds, Crossing, Harness, SCHEMA_VERSION};

    fn line(id: u32, a: P2, b: P2, n: usize) -> Harness {
        let centerline = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, 0.024]
            })
            .collect();
        let mut kinds = vec![SegmentKind::Cable; n - 1];
        kinds[0] = SegmentKind::Connector;
        kinds[n - 2] = SegmentKind::Connector;
        Harness {
            id,
            centerline,
            segment_kinds: kinds,
            cable_radius: 0.004,
            connector_extent: 0.015,
        }
    }

    fn scene(harnesses: Vec<Harness>, crossing_graph: Vec<Crossing>) -> Scene {
        Scene {
            schema_version: SCHEMA_VERSION,
            harnesses,
            bin_bounds: BinBounds::default(),
            crossing_graph,
            self_crossings: vec![],
            seed: 0,
        }
    }

    fn cross(a: u32, b: u32, above: u32, sa: usize, sb: usize) -> Crossing {
        Crossing {
            harness_a: a,
            harness_b: b,
            crossing_point: [0.2, 0.2],
            above,
            segment_a: sa,
            segment_b: sb,
        }
    }

    #[test]
    fn isolated_mid_grasp_needs_nothing() {
        let s = scene(vec![line(0, [0.05, 0.2], [0.35, 0.2], 11)], vec![]);
        let o = ComplexityOracle::default();
        assert_eq!(o.required_complexity(&s, 0, [0.2, 0.2]).unwrap(), 0);
    }

    #[test]
    fn one_cable_crossing_on_top() {
        // target 0 horizontal, 1 vertical lying over its middle (segment 5 of both)
        let s = scene(
            vec![line(0, [0.05, 0.2], [0.35, 0.2], 11), line(1, [0.2, 0.05], [0.2, 0.35], 11)],
            vec![cross(0, 1, 1, 5, 5)],
        );
        let o = ComplexityOracle::default();
        let mid = o.required_complexity(&s, 0, [0.15, 0.2]).unwrap();
        // hand enumeration: above = 1, cable only, not near an end -> 2*1 - 1 = 1
        assert_eq!(mid, 1);
        assert!((1..=6).contains(&mid));
        // 0.01 m from the end of a 0.3 m harness is inside the 10 % band
        let end = o.required_complexity(&s, 0, [0.06, 0.2]).unwrap();
        assert_eq!(end, 2);
        assert!(end >= mid);
        // the harness on top has nothing above it
        assert_eq!(o.required_complexity(&s, 1, [0.2, 0.15]).unwrap(), 0);
    }

    #[test]
    fn connector_at_crossing_adds_one() {
        let s = scene(
            vec![line(0, [0.05, 0.2], [0.35, 0.2], 11), line(1, [0.2, 0.05], [0.2, 0.35], 11)],
            vec![cross(0, 1, 1, 5, 0)],
        );
        let o = ComplexityOracle::default();
        assert_eq!(o.required_complexity(&s, 0, [0.15, 0.2]).unwrap(), 2);
    }

    #[test]
    fn grasp_off_target_is_rejected() {
        let s = scene(vec![line(0, [0.05, 0.2], [0.35, 0.2], 11)], vec![]);
        let err = ComplexityOracle::default()
            .required_complexity(&s, 0, [0.2, 0.25])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidGrasp(_)));
        assert!(ComplexityOracle::default().required_complexity(&s, 9, [0.2, 0.2]).is_err());
    }

    #[test]
    fn score_is_monotone_and_zero_only_when_free() {
        let o = ComplexityOracle::default();
        for above in 0..6u32 {
            for conn in [false, true] {
                for end in [false, true] {
                    if conn && above == 0 {
                        continue;
                    }
                    let ctx = GraspContext { above_crossings: above, connector_involved: conn, near_end: end };
                    let v = o.score(ctx);
                    assert!(v <= 6);
                    assert_eq!(v == 0, above == 0 && !end);
                    let more = GraspContext { above_crossings: above + 1, ..ctx };
                    assert!(o.score(more) >= v);
                }
            }
        }
    }
}
