//! Model-free grasp detection and the pixel-to-robot mapping.

pub mod fge;
pub mod template;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::depth::{DepthImage, INVALID};
use crate::{Error, Result};

pub use fge::{detect_grasps, graspability_map, FgeParams, ScoreMap};
pub use template::{normalize_angle, GripperTemplate, JawGeometry, Mask, RotatedTemplate};

/// A parallel-jaw grasp in pixel coordinates; `phi` is the closing-axis
/// angle in `[0, pi)` measured from +u towards +v.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub u: usize,
    pub v: usize,
    pub phi: f64,
    #[serde(rename = "score")]
    pub fge_score: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<RobotGrasp>,
}

impl Grasp {
    pub fn new(u: usize, v: usize, phi: f64, fge_score: f64) -> Self {
        Self { u, v, phi, fge_score, robot: None }
    }
}

/// Grasp pose in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGrasp {
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    pub gphi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspSet {
    pub grasps: Vec<Grasp>,
}

impl GraspSet {
    pub fn is_empty(&self) -> bool {
        self.grasps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.grasps.len()
    }

    pub fn best(&self) -> Option<&Grasp> {
        self.grasps.first()
    }
}

/// Planar similarity from pixel centres to the robot frame, plus the
/// height mapping. A pixel `(u, v)` maps to
/// `translation + R(rotation) * scale * (u + 0.5, v + 0.5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Metres per pixel.
    pub scale: f64,
    pub rotation: f64,
    pub translation: [f64; 2],
    /// Robot z of a depth reading of zero.
    pub height_offset: f64,
    /// How far below the surface reading the fingertips close.
    pub finger_descent: f64,
}

impl Calibration {
    /// Camera frame aligned with the bin frame, shifted by `translation`.
    pub fn aligned(mm_per_pixel: f64, translation: [f64; 2]) -> Self {
        Self {
            scale: mm_per_pixel / 1000.0,
            rotation: 0.0,
            translation,
            height_offset: 0.0,
            finger_descent: 0.015,
        }
    }

    pub fn pixel_to_xy(&self, u: f64, v: f64) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        let (x, y) = ((u + 0.5) * self.scale, (v + 0.5) * self.scale);
        [self.translation[0] + c * x - s * y, self.translation[1] + s * x + c * y]
    }

    pub fn xy_to_pixel(&self, x: f64, y: f64) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (x - self.translation[0], y - self.translation[1]);
        [(c * dx + s * dy) / self.scale - 0.5, (-s * dx + c * dy) / self.scale - 0.5]
    }

    pub fn pixel_to_robot(&self, g: &Grasp, depth: &DepthImage) -> Result<Grasp> {
        if g.u >= depth.width || g.v >= depth.height {
            return Err(Error::Parameter(format!("grasp ({}, {}) outside the image", g.u, g.v)));
        }
        let h = depth.get(g.u, g.v);
        if h == INVALID {
            return Err(Error::InvalidDepth { u: g.u, v: g.v });
        }
        let [gx, gy] = self.pixel_to_xy(g.u as f64, g.v as f64);
        let gz = self.height_offset + h as f64 / 1000.0 - self.finger_descent;
        let gphi = (g.phi + self.rotation).rem_euclid(PI);
        Ok(Grasp {
            robot: Some(RobotGrasp { gx, gy, gz, gphi }),
            ..g.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_by_quarter_turn_shifts_phi() {
        let mut cal = Calibration::aligned(3.0, [0.1, -0.2]);
        cal.rotation = PI / 2.0;
        let img = DepthImage::filled(64, 64, 3.0, 40);
        let g = Grasp::new(10, 20, 0.3, 1.0);
        let r = cal.pixel_to_robot(&g, &img).unwrap().robot.unwrap();
        assert!((r.gphi - (0.3 + PI / 2.0)).abs() < 1e-12);
        let g = Grasp::new(10, 20, 2.0, 1.0);
        let r = cal.pixel_to_robot(&g, &img).unwrap().robot.unwrap();
        assert!((r.gphi - (2.0 + PI / 2.0 - PI)).abs() < 1e-12);
    }

    #[test]
    fn pixel_and_robot_frames_round_trip() {
        let cal = Calibration {
            scale: 0.003,
            rotation: 0.4,
            translation: [0.3, -0.1],
            height_offset: 0.01,
            finger_descent: 0.015,
        };
        let [x, y] = cal.pixel_to_xy(17.0, 45.0);
        let [u, v] = cal.xy_to_pixel(x, y);
        assert!((u - 17.0).abs() < 1e-9 && (v - 45.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_depth_at_grasp_is_an_error() {
        let mut img = DepthImage::filled(64, 64, 3.0, 40);
        img.set(5, 5, INVALID);
        let cal = Calibration::aligned(3.0, [0.0, 0.0]);
        assert!(matches!(
            cal.pixel_to_robot(&Grasp::new(5, 5, 0.0, 1.0), &img),
            Err(Error::InvalidDepth { u: 5, v: 5 })
        ));
        let r = cal.pixel_to_robot(&Grasp::new(6, 5, 0.0, 1.0), &img).unwrap().robot.unwrap();
        assert!((r.gz - 0.025).abs() < 1e-12);
    }

    #[test]
    fn grasp_json_is_flat() {
        let g = Grasp::new(3, 4, 0.5, 0.25);
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"u":3,"v":4,"phi":0.5,"score":0.25}"#);
        let cal = Calibration::aligned(3.0, [0.0, 0.0]);
        let r = cal.pixel_to_robot(&g, &DepthImage::filled(8, 8, 3.0, 30)).unwrap();
        let back: Grasp = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
