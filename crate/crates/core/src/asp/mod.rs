//! Action success prediction: `p = f(o, g, a)` for a depth image, a grasp
//! pixel and one of the seven actions.

mod data;
mod features;
pub mod mlp;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use data::{Dataset, Sample};
pub use features::{
    featurize, global_patch, image_features, local_patch, one_hot, FeatureVector, FEATURE_DIM, FEATURE_VERSION,
    IMAGE_DIM, LOCAL_RANGE_MM, N_ACTIONS, PATCH,
};
pub use mlp::{EpochStats, Example, Mlp, TrainConfig};

use crate::depth::DepthImage;
use crate::grasp::Grasp;
use crate::motion::ActionId;
use crate::pipeline::io;
use crate::{par, Error, Result};

pub const MODEL_FORMAT: &str = "wirepick-asp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AspModel {
    pub format: String,
    pub feature_version: String,
    /// Training rounds this model has been through.
    pub version: u32,
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    pub net: Mlp,
}

impl AspModel {
    pub fn new(hidden: &[usize], seed: u64) -> Self {
        let net = Mlp::new(IMAGE_DIM, N_ACTIONS, hidden, seed);
        Self {
            format: MODEL_FORMAT.into(),
            feature_version: FEATURE_VERSION.into(),
            version: 0,
            seed,
            layer_sizes: net.layer_sizes(),
            net,
        }
    }

    pub fn check_compatible(&self) -> Result<()> {
        if self.format != MODEL_FORMAT || self.feature_version != FEATURE_VERSION {
            return Err(Error::ModelCompat(format!(
                "model is {} / {}, expected {MODEL_FORMAT} / {FEATURE_VERSION}",
                self.format, self.feature_version
            )));
        }
        if self.net.dense_inputs != IMAGE_DIM
            || self.net.hot_inputs != N_ACTIONS
            || self.layer_sizes != self.net.layer_sizes()
            || self.layer_sizes.first() != Some(&FEATURE_DIM)
            || self.layer_sizes.last() != Some(&1)
        {
            return Err(Error::ModelCompat(format!("unexpected layer sizes {:?}", self.layer_sizes)));
        }
        for l in &self.net.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::ModelCompat("weight array sizes disagree with layer sizes".into()));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = io::read_json(path)?;
        m.check_compatible()?;
        Ok(m)
    }

    pub fn predict_features(&self, image_part: &[f64], a: ActionId) -> Result<f64> {
        if image_part.len() != IMAGE_DIM {
            return Err(Error::ModelCompat(format!(
                "expected {IMAGE_DIM} image features, got {}",
                image_part.len()
            )));
        }
        Ok(mlp::sigmoid(self.net.logit(image_part, a.complexity() as usize)))
    }

    /// Scores for every action in `actions` from one image part.
    pub fn predict_actions(&self, image_part: &[f64], actions: &[ActionId]) -> Vec<f64> {
        let first = self.net.first_dense(image_part);
        actions
            .iter()
            .map(|a| mlp::sigmoid(self.net.logit_from(&first, a.complexity() as usize)))
            .collect()
    }
}

pub fn predict(model: &AspModel, o: &DepthImage, u: usize, v: usize, a: ActionId) -> Result<f64> {
    let f = featurize(o, u, v, a)?;
    model.predict_features(&f.image_part(), a)
}

/// `P[i][j]` = success probability of grasp `i` with action `j`.
pub fn predict_batch(model: &AspModel, o: &DepthImage, grasps: &[Grasp], actions: &[ActionId]) -> Result<Vec<Vec<f64>>> {
    if grasps.is_empty() {
        return Err(Error::EmptyInput("no grasps to score".into()));
    }
    let global = global_patch(o);
    let parts = grasps
        .iter()
        .map(|g| image_features(o, &global, g.u, g.v))
        .collect::<Result<Vec<_>>>()?;
    Ok(par::map(&parts, |x| model.predict_actions(x, actions)))
}

/// Encodes samples as training examples; images are featurised once each.
pub fn encode(data: &Dataset) -> Result<Vec<Example>> {
    let globals = par::map(&data.images, global_patch);
    let out = par::map(&data.samples, |s| {
        let o = &data.images[s.image];
        image_features(o, &globals[s.image], s.u, s.v).map(|dense| Example {
            dense,
            hot: s.action.complexity() as usize,
            label: if s.success { 1.0 } else { 0.0 },
        })
    });
    out.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: AspModel,
    pub history: Vec<EpochStats>,
}

/// Trains a fresh model. Both labels must be present unless
/// `allow_single_class` is set.
pub fn train(examples: &[Example], cfg: &TrainConfig, allow_single_class: bool) -> Result<Trained> {
    cfg.validate()?;
    check_labels(examples, allow_single_class)?;
    let mut model = AspModel::new(&cfg.hidden, cfg.seed);
    let history = mlp::fit(&mut model.net, examples, cfg, cfg.learning_rate)?;
    model.version = 1;
    Ok(Trained { model, history })
}

/// Continues training `model` at `lr_scale` times the configured rate.
pub fn fine_tune(model: &AspModel, examples: &[Example], cfg: &TrainConfig, lr_scale: f64) -> Result<Trained> {
    cfg.validate()?;
    model.check_compatible()?;
    check_labels(examples, true)?;
    let mut next = model.clone();
    let history = mlp::fit(&mut next.net, examples, cfg, cfg.learning_rate * lr_scale)?;
    next.version += 1;
    Ok(Trained { model: next, history })
}

fn check_labels(examples: &[Example], allow_single_class: bool) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("no training samples".into()));
    }
    let pos = examples.iter().filter(|e| e.label >= 0.5).count();
    if !allow_single_class && (pos == 0 || pos == examples.len()) {
        return Err(Error::Data("training data has a single label".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroed_output_layer_predicts_one_half() {
        let mut m = AspModel::new(&[8, 4], 3);
        let last = m.net.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        let o = DepthImage::filled(64, 64, 3.0, 25);
        assert_eq!(predict(&m, &o, 10, 10, ActionId::Fs).unwrap(), 0.5);
    }

    #[test]
    fn model_json_round_trips_exactly() {
        let m = AspModel::new(&[8, 4], 11);
        let text = serde_json::to_string(&m).unwrap();
        let back: AspModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        back.check_compatible().unwrap();
    }

    #[test]
    fn incompatible_models_are_rejected() {
        let mut m = AspModel::new(&[8, 4], 11);
        m.feature_version = "other".into();
        assert!(matches!(m.check_compatible(), Err(Error::ModelCompat(_))));
        let m = AspModel::new(&[8, 4], 11);
        assert!(m.predict_features(&[0.0; 5], ActionId::Dl).is_err());
    }
}
