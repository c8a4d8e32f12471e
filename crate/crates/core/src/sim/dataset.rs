//! Simulated data collection: every action tried at sampled grasps on
//! freshly dropped bins, labelled by the outcome model.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{grasp_target, observe, SimConfig};
use crate::asp::{Dataset, Sample};
use crate::depth::DepthImage;
use crate::motion::ActionId;
use crate::rng::{self, derive_indexed, derive_seed};
use crate::scene::generate_scene;
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_samples: usize,
    /// Bin sizes cycled through.
    pub object_counts: Vec<usize>,
    /// Grasps drawn (without replacement) from each bin's candidates.
    pub grasps_per_scene: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { n_samples: 722, object_counts: vec![6, 10, 12, 18], grasps_per_scene: 1 }
    }
}

type Unit = (DepthImage, Vec<(usize, usize, u8, [bool; 7])>);

fn unit(cfg: &SimConfig, ds: &DatasetConfig, seed: u64, i: usize) -> Result<Option<Unit>> {
    let template = cfg.template()?;
    let s = derive_indexed(seed, "scene", i as u64);
    let scene = generate_scene(&cfg.spec_with(ds.object_counts[i % ds.object_counts.len()]), s)?;
    let obs = observe(&scene, cfg, &template, s)?;
    let mut on: Vec<(usize, usize, u8)> = obs
        .grasps
        .grasps
        .iter()
        .filter_map(|g| grasp_target(&scene, &obs.render, g, &cfg.oracle).map(|(_, req)| (g.u, g.v, req)))
        .collect();
    if on.is_empty() {
        return Ok(None);
    }
    let mut r = rng::rng(derive_seed(s, "grasps"));
    on.shuffle(&mut r);
    on.truncate(ds.grasps_per_scene);
    let picks = on
        .into_iter()
        .map(|(u, v, req)| {
            let labels = ActionId::ALL.map(|a| cfg.outcome.draw(a, a.complexity() as i32 - req as i32, &mut r));
            (u, v, req, labels)
        })
        .collect();
    Ok(Some((obs.render.depth, picks)))
}

/// `ds.n_samples` samples, cycling through all seven actions per grasp
/// (the last grasp may be cut short).
pub fn generate_dataset(ds: &DatasetConfig, cfg: &SimConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    if ds.object_counts.is_empty() || ds.grasps_per_scene == 0 {
        return Err(Error::Config("dataset needs object_counts and grasps_per_scene > 0".into()));
    }
    let mut out = Dataset::default();
    let mut next = 0usize;
    let mut empty_run = 0usize;
    while out.len() < ds.n_samples {
        let per_unit = 7 * ds.grasps_per_scene;
        let batch = (ds.n_samples - out.len()).div_ceil(per_unit).max(1);
        let units = par::map_range(batch, |k| unit(cfg, ds, seed, next + k));
        next += batch;
        for u in units {
            let Some((depth, picks)) = u? else {
                empty_run += 1;
                if empty_run > 1000 {
                    return Err(Error::Data("no bin offered a grasp on a harness".into()));
                }
                continue;
            };
            empty_run = 0;
            let image = out.push_image(depth);
            for (gu, gv, req, labels) in picks {
                for a in ActionId::ALL {
                    if out.len() == ds.n_samples {
                        break;
                    }
                    out.push(Sample { image, u: gu, v: gv, action: a, success: labels[a as usize], required: Some(req) })?;
                }
            }
            if out.len() == ds.n_samples {
                break;
            }
        }
    }
    Ok(out)
}
