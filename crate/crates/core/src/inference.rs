//! Choosing the action-grasp pair: the least complex action predicted to
//! succeed, on the best-scoring grasp among those that allow it. When no
//! pair clears the threshold the most thorough action is used on the top
//! grasp.

use serde::{Deserialize, Serialize};

use crate::asp::{predict_batch, AspModel};
use crate::depth::DepthImage;
use crate::grasp::GraspSet;
use crate::motion::ActionId;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub p_thld: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { p_thld: 0.5 }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_thld > 0.0 && self.p_thld < 1.0) {
            return Err(Error::Config(format!("p_thld must lie in (0, 1), got {}", self.p_thld)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub grasp: usize,
    pub action: ActionId,
    pub score: f64,
    pub complexity: u8,
    pub fge_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub action: ActionId,
    pub grasp: usize,
    /// Predicted success of the chosen pair.
    pub score: f64,
    /// True when nothing cleared the threshold.
    pub fallback: bool,
    /// Feasible pairs by complexity, then FGE score.
    pub ranked: Vec<RankedPair>,
    /// The same pairs by descending prediction.
    pub by_score: Vec<RankedPair>,
}

fn top_fge(fge: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in fge.iter().enumerate() {
        if s > fge[best] {
            best = i;
        }
    }
    best
}

/// The selection rule on a precomputed score matrix `p[grasp][action]`.
pub fn select_pair(p: &[Vec<f64>], fge: &[f64], actions: &[ActionId], cfg: &InferenceConfig) -> Result<Selection> {
    if p.is_empty() {
        return Err(Error::NoGrasp);
    }
    if fge.len() != p.len() || p.iter().any(|row| row.len() != actions.len()) {
        return Err(Error::Precondition("score matrix does not match grasps and actions".into()));
    }
    let pair = |i: usize, j: usize| RankedPair {
        grasp: i,
        action: actions[j],
        score: p[i][j],
        complexity: actions[j].complexity(),
        fge_score: fge[i],
    };
    let mut ranked: Vec<RankedPair> = Vec::new();
    for i in 0..p.len() {
        for j in 0..actions.len() {
            if p[i][j] >= cfg.p_thld {
                ranked.push(pair(i, j));
            }
        }
    }
    // stable sorts keep (grasp, action) index order among equals
    ranked.sort_by(|a, b| a.complexity.cmp(&b.complexity).then(b.fge_score.total_cmp(&a.fge_score)));
    let mut by_score = ranked.clone();
    by_score.sort_by(|a, b| b.score.total_cmp(&a.score));
    match ranked.first() {
        Some(best) => Ok(Selection {
            action: best.action,
            grasp: best.grasp,
            score: best.score,
            fallback: false,
            ranked,
            by_score,
        }),
        None => {
            let g = top_fge(fge);
            let j = actions.iter().position(|&a| a == ActionId::Tfs);
            Ok(Selection {
                action: ActionId::Tfs,
                grasp: g,
                score: j.map(|j| p[g][j]).unwrap_or(f64::NAN),
                fallback: true,
                ranked,
                by_score,
            })
        }
    }
}

pub fn action_grasp_inference(
    o: &DepthImage,
    grasps: &GraspSet,
    actions: &[ActionId],
    model: &AspModel,
    cfg: &InferenceConfig,
) -> Result<Selection> {
    if grasps.is_empty() {
        return Err(Error::NoGrasp);
    }
    let p = predict_batch(model, o, &grasps.grasps, actions)?;
    let fge: Vec<f64> = grasps.grasps.iter().map(|g| g.fge_score).collect();
    select_pair(&p, &fge, actions, cfg)
}

/// The rule restricted to one grasp, from its per-action scores.
pub fn select_action(scores: &[f64], actions: &[ActionId], cfg: &InferenceConfig) -> ActionId {
    actions
        .iter()
        .zip(scores)
        .filter(|(_, &p)| p >= cfg.p_thld)
        .min_by_key(|(a, _)| a.complexity())
        .map(|(&a, _)| a)
        .unwrap_or(ActionId::Tfs)
}

pub fn single_grasp_inference(
    o: &DepthImage,
    u: usize,
    v: usize,
    model: &AspModel,
    cfg: &InferenceConfig,
) -> Result<ActionId> {
    let global = crate::asp::global_patch(o);
    let x = crate::asp::image_features(o, &global, u, v)?;
    Ok(select_action(&model.predict_actions(&x, &ActionId::ALL), &ActionId::ALL, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    const M: [ActionId; 7] = ActionId::ALL;

    #[test]
    fn single_grasp_examples() {
        let cfg = InferenceConfig::default();
        assert_eq!(select_action(&[0.9, 0.8, 0.2, 0.1, 0.1, 0.2, 0.3], &M, &cfg), ActionId::Dl);
        assert_eq!(select_action(&[0.2; 7], &M, &cfg), ActionId::Tfs);
        assert_eq!(select_action(&[0.4, 0.4, 0.6, 0.9, 0.9, 0.9, 0.9], &M, &cfg), ActionId::Hs);
    }

    #[test]
    fn only_two_feasible_pairs() {
        let mut p = vec![vec![0.1; 7]; 3];
        p[2][3] = 0.7;
        p[0][4] = 0.9;
        let s = select_pair(&p, &[0.9, 0.5, 0.3], &M, &InferenceConfig::default()).unwrap();
        assert_eq!((s.action, s.grasp), (ActionId::F, 2));
        assert_eq!(s.ranked.len(), 2);
        assert_eq!(s.by_score[0].action, ActionId::Fs);
    }

    #[test]
    fn fallback_uses_top_grasp() {
        let p = vec![vec![0.1; 7]; 3];
        let s = select_pair(&p, &[0.2, 0.8, 0.8], &M, &InferenceConfig::default()).unwrap();
        assert!(s.fallback);
        assert_eq!((s.action, s.grasp), (ActionId::Tfs, 1));
        assert!(select_pair(&[], &[], &M, &InferenceConfig::default()).is_err());
    }
}
