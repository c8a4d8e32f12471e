//! Fitting the outcome model's per-action offsets so each action's
//! success rate over a reference population of attempts hits a target.
//!
//! The population is the top FGE grasp on freshly dropped bins of mixed
//! sizes. With the slope fixed, the mean success of an action is strictly
//! increasing in its offset, so each offset is found by bisection on the
//! exact mean over the population.

use serde::{Deserialize, Serialize};

use super::{grasp_target, observe, SimConfig};
use crate::motion::{action_table, ActionId};
use crate::rng::{self, derive_indexed};
use crate::scene::generate_scene;
use crate::{par, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Bin sizes cycled through.
    pub object_counts: Vec<usize>,
    pub scenes: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { object_counts: vec![6, 10, 12, 18], scenes: 1000, seed: 7 }
    }
}

/// Required complexity at the top grasp of each bin; `None` when the bin
/// offers no grasp on a harness.
pub fn calibration_contexts(cfg: &SimConfig, counts: &[usize], scenes: usize, seed: u64) -> Result<Vec<Option<u8>>> {
    let template = cfg.template()?;
    let out = par::map_range(scenes, |i| -> Result<Option<u8>> {
        let s = derive_indexed(seed, "calibration", i as u64);
        let scene = generate_scene(&cfg.spec_with(counts[i % counts.len()]), s)?;
        let obs = observe(&scene, cfg, &template, s)?;
        Ok(obs
            .grasps
            .best()
            .and_then(|g| grasp_target(&scene, &obs.render, g, &cfg.oracle))
            .map(|(_, req)| req))
    });
    out.into_iter().collect()
}

fn mean_success(contexts: &[Option<u8>], a: ActionId, slope: f64, offset: f64) -> f64 {
    let sum: f64 = contexts
        .iter()
        .map(|c| match c {
            Some(req) => {
                crate::asp::mlp::sigmoid(offset + slope * (a.complexity() as f64 - *req as f64))
            }
            None => 0.0,
        })
        .sum();
    sum / contexts.len().max(1) as f64
}

/// Offsets matching `targets` (per action) over `contexts`, to 1e-12.
pub fn fit_offsets(contexts: &[Option<u8>], targets: &[f64; 7], slope: f64) -> [f64; 7] {
    let mut out = [0.0; 7];
    for a in ActionId::ALL {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_success(contexts, a, slope, mid) < targets[a as usize] {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        out[a as usize] = 0.5 * (lo + hi);
    }
    out
}

/// Reference single-object success rates for the seven actions.
pub fn table_success_rates() -> [f64; 7] {
    action_table().map(|a| a.success_rate())
}

/// Monte Carlo success frequency per action: `attempts` fresh bins, each
/// action tried once at the top grasp of each.
pub fn calibration_rates(cfg: &SimConfig, counts: &[usize], attempts: usize, seed: u64) -> Result<[f64; 7]> {
    let contexts = calibration_contexts(cfg, counts, attempts, seed)?;
    let mut wins = [0usize; 7];
    for (i, c) in contexts.iter().enumerate() {
        let mut r = rng::rng(derive_indexed(seed, "outcome", i as u64));
        for a in ActionId::ALL {
            let ok = match c {
                Some(req) => cfg.outcome.draw(a, a.complexity() as i32 - *req as i32, &mut r),
                None => false,
            };
            wins[a as usize] += ok as usize;
        }
    }
    Ok(wins.map(|w| w as f64 / attempts.max(1) as f64))
}
