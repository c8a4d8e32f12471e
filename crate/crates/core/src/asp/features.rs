//! Hand-made input encoding for the success predictor.
//!
//! ```text
//! global  32x32  block means of (h - floor) / (max - floor), invalid = 0
//! local   32x32  crop around (u, v): 0.5 + (h - h_g) / (2 * LOCAL_RANGE_MM),
//!                clamped to [0, 1]; outside the image or invalid = 0
//! grasp   2      (u / W, v / H)
//! action  7      one-hot
//! ```

use serde::{Deserialize, Serialize};

use crate::depth::{DepthImage, INVALID};
use crate::motion::ActionId;
use crate::{Error, Result};

pub const FEATURE_VERSION: &str = "patch32-v1";
pub const PATCH: usize = 32;
/// Height span (mm) either side of the grasp that the local patch resolves.
pub const LOCAL_RANGE_MM: f64 = 40.0;
pub const N_ACTIONS: usize = 7;
/// Everything except the action indicator.
pub const IMAGE_DIM: usize = 2 * PATCH * PATCH + 2;
pub const FEATURE_DIM: usize = IMAGE_DIM + N_ACTIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub global_patch: Vec<f64>,
    pub local_patch: Vec<f64>,
    pub grasp_norm: [f64; 2],
    pub action_onehot: [f64; N_ACTIONS],
}

impl FeatureVector {
    /// The image part in model input order.
    pub fn image_part(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(IMAGE_DIM);
        x.extend_from_slice(&self.global_patch);
        x.extend_from_slice(&self.local_patch);
        x.extend_from_slice(&self.grasp_norm);
        x
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.image_part();
        x.extend_from_slice(&self.action_onehot);
        x
    }
}

/// Downsampled, normalised copy of the whole image. Depends only on the
/// image, so callers scoring many grasps compute it once.
pub fn global_patch(o: &DepthImage) -> Vec<f64> {
    let floor = o.min_valid().unwrap_or(0) as f64;
    let top = o.max_valid().unwrap_or(0) as f64;
    let span = top - floor;
    let mut out = vec![0.0; PATCH * PATCH];
    for by in 0..PATCH {
        let (v0, v1) = (by * o.height / PATCH, ((by + 1) * o.height / PATCH).max(by * o.height / PATCH + 1));
        for bx in 0..PATCH {
            let (u0, u1) = (bx * o.width / PATCH, ((bx + 1) * o.width / PATCH).max(bx * o.width / PATCH + 1));
            let mut sum = 0.0;
            let mut n = 0usize;
            for v in v0..v1.min(o.height) {
                for u in u0..u1.min(o.width) {
                    let h = o.get(u, v);
                    if h != INVALID && span > 0.0 {
                        sum += (h as f64 - floor) / span;
                    }
                    n += 1;
                }
            }
            out[by * PATCH + bx] = if n > 0 { sum / n as f64 } else { 0.0 };
        }
    }
    out
}

pub fn local_patch(o: &DepthImage, u: usize, v: usize) -> Vec<f64> {
    let center = match o.get(u, v) {
        INVALID => o.max_valid().unwrap_or(0),
        h => h,
    } as f64;
    let half = (PATCH / 2) as i64;
    let mut out = vec![0.0; PATCH * PATCH];
    for dy in 0..PATCH as i64 {
        for dx in 0..PATCH as i64 {
            let h = o.get_i(u as i64 + dx - half, v as i64 + dy - half).unwrap_or(INVALID);
            if h != INVALID {
                out[(dy * PATCH as i64 + dx) as usize] =
                    (0.5 + (h as f64 - center) / (2.0 * LOCAL_RANGE_MM)).clamp(0.0, 1.0);
            }
        }
    }
    out
}

pub fn one_hot(a: ActionId) -> [f64; N_ACTIONS] {
    let mut x = [0.0; N_ACTIONS];
    x[a.complexity() as usize] = 1.0;
    x
}

/// Image part of the input for one grasp, reusing a precomputed global
/// patch.
pub fn image_features(o: &DepthImage, global: &[f64], u: usize, v: usize) -> Result<Vec<f64>> {
    if !o.contains(u, v) {
        return Err(Error::Precondition(format!(
            "grasp ({u}, {v}) outside {}x{} image",
            o.width, o.height
        )));
    }
    let mut x = Vec::with_capacity(IMAGE_DIM);
    x.extend_from_slice(global);
    x.extend(local_patch(o, u, v));
    x.push(u as f64 / o.width as f64);
    x.push(v as f64 / o.height as f64);
    Ok(x)
}

pub fn featurize(o: &DepthImage, u: usize, v: usize, a: ActionId) -> Result<FeatureVector> {
    if !o.contains(u, v) {
        return Err(Error::Precondition(format!(
            "grasp ({u}, {v}) outside {}x{} image",
            o.width, o.height
        )));
    }
    Ok(FeatureVector {
        global_patch: global_patch(o),
        local_patch: local_patch(o, u, v),
        grasp_norm: [u as f64 / o.width as f64, v as f64 / o.height as f64],
        action_onehot: one_hot(a),
    })
}
