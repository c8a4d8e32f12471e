//! Active learning: grow the training set from a pool of weakly labelled
//! attempts by moving over only the samples whose label agrees with what
//! the current model would have done, then fine-tune and repeat.
//!
//! A label agrees ("is logical") when a success was recorded for an action
//! at least as complex as the predicted one, or a failure for an action
//! strictly less complex than the predicted one.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::asp::{fine_tune, train, AspModel, Example, Sample, TrainConfig};
use crate::inference::{select_action, InferenceConfig};
use crate::motion::ActionId;
use crate::rng::{self, derive_indexed, derive_seed};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Logical {
    SuccessLogical,
    FailureLogical,
    Illogical,
}

impl Logical {
    pub fn is_logical(self) -> bool {
        self != Logical::Illogical
    }
}

/// `predicted` is the model's choice, `labelled` the action that was run.
pub fn classify_logical(success: bool, predicted: ActionId, labelled: ActionId) -> Logical {
    match (success, predicted.complexity() <= labelled.complexity()) {
        (true, true) => Logical::SuccessLogical,
        (false, false) => Logical::FailureLogical,
        _ => Logical::Illogical,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveLearnConfig {
    /// Share of the pool (at the start of an iteration) to transfer.
    pub transfer_ratio: f64,
    pub max_iterations: usize,
    /// Full passes over the pool per iteration before giving up on the
    /// transfer budget.
    pub max_pool_scans: usize,
    /// Fine-tuning learning rate relative to the initial one.
    pub fine_tune_lr_scale: f64,
    /// Share of the initial set held back for the stopping rule.
    pub validation_fraction: f64,
    /// Stop after the held-back loss rises this many iterations in a row.
    pub early_stop_rises: usize,
    pub seed: u64,
}

impl Default for ActiveLearnConfig {
    fn default() -> Self {
        Self {
            transfer_ratio: 0.4,
            max_iterations: 4,
            max_pool_scans: 3,
            fine_tune_lr_scale: 0.1,
            validation_fraction: 0.1,
            early_stop_rises: 2,
            seed: 0,
        }
    }
}

impl ActiveLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.transfer_ratio > 0.0 && self.transfer_ratio <= 1.0) {
            return Err(Error::Config(format!("transfer_ratio must lie in (0, 1], got {}", self.transfer_ratio)));
        }
        if self.max_pool_scans == 0 || self.early_stop_rises == 0 {
            return Err(Error::Config("max_pool_scans and early_stop_rises must be > 0".into()));
        }
        if !(self.fine_tune_lr_scale > 0.0) || !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::Config("fine_tune_lr_scale must be > 0 and validation_fraction in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// One row per model: row 0 is the initial model, row `i` the model after
/// the `i`-th transfer and fine-tune.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub n_train: usize,
    pub n_pool: usize,
    pub transferred: usize,
    pub classified: usize,
    pub ratio_success_logical: f64,
    pub ratio_failure_logical: f64,
    pub val_loss: Option<f64>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PoolEmpty,
    /// A full scan found no logical sample to transfer.
    NoLogicalSamples,
    MaxIterations,
    EarlyStop,
    Diverged { epoch: usize },
}

#[derive(Debug, Clone)]
pub struct ActiveOutcome {
    pub model: AspModel,
    pub stats: Vec<IterationStats>,
    pub stop: StopReason,
    /// Pool indices transferred, in order, per iteration.
    pub transfers: Vec<Vec<usize>>,
}

pub fn predicted_action(model: &AspModel, e: &Example, cfg: &InferenceConfig) -> ActionId {
    select_action(&model.predict_actions(&e.dense, &ActionId::ALL), &ActionId::ALL, cfg)
}

pub fn classify(model: &AspModel, e: &Example, cfg: &InferenceConfig) -> Logical {
    classify_logical(e.label >= 0.5, predicted_action(model, e, cfg), ActionId::ALL[e.hot])
}

/// Shares of success-labelled samples that are success-logical and of
/// failure-labelled samples that are failure-logical. An empty class
/// counts as 1.
pub fn logical_ratios(model: &AspModel, data: &[Example], cfg: &InferenceConfig) -> (f64, f64) {
    let c = par::map(data, |e| classify(model, e, cfg));
    let share = |want_success: bool, kind: Logical| {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| (data[i].label >= 0.5) == want_success).collect();
        if idx.is_empty() {
            return 1.0;
        }
        idx.iter().filter(|&&i| c[i] == kind).count() as f64 / idx.len() as f64
    };
    (share(true, Logical::SuccessLogical), share(false, Logical::FailureLogical))
}

fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    let n_val = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
    let val = order[..n_val].to_vec();
    let mut fit = order[n_val..].to_vec();
    fit.sort_unstable();
    (fit, val)
}

/// Runs the loop. `holdout` is a frozen set for the logical ratios; when
/// empty the ratios are taken over the pool as it stood before the
/// iteration. With `checkpoints` set each model is saved there.
#[allow(clippy::too_many_arguments)]
pub fn active_learn(
    pool: &[Example],
    init: &[Example],
    holdout: &[Example],
    cfg: &ActiveLearnConfig,
    train_cfg: &TrainConfig,
    inference: &InferenceConfig,
    checkpoints: Option<&Path>,
) -> Result<ActiveOutcome> {
    cfg.validate()?;
    inference.validate()?;
    if init.is_empty() {
        return Err(Error::EmptyInput("initial training set is empty".into()));
    }
    let (fit_idx, val_idx) = validation_split(init.len(), cfg.validation_fraction, derive_seed(cfg.seed, "validation"));
    let val: Vec<&Example> = val_idx.iter().map(|&i| &init[i]).collect();
    let mut train_set: Vec<Example> = fit_idx.iter().map(|&i| init[i].clone()).collect();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();

    let val_loss = |m: &AspModel| (!val.is_empty()).then(|| m.net.loss(&val));
    let ratios = |m: &AspModel, remaining: &[usize]| {
        if holdout.is_empty() {
            let cur: Vec<Example> = remaining.iter().map(|&i| pool[i].clone()).collect();
            logical_ratios(m, &cur, inference)
        } else {
            logical_ratios(m, holdout, inference)
        }
    };
    let save = |m: &AspModel, it: usize| -> Result<Option<PathBuf>> {
        match checkpoints {
            Some(dir) => {
                let p = dir.join(format!("model_iter{it:02}.json"));
                m.save(&p)?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    };

    let mut model = train(&train_set, train_cfg, false)?.model;
    let (rs, rf) = ratios(&model, &remaining);
    let mut stats = vec![IterationStats {
        iteration: 0,
        n_train: train_set.len(),
        n_pool: remaining.len(),
        transferred: 0,
        classified: 0,
        ratio_success_logical: rs,
        ratio_failure_logical: rf,
        val_loss: val_loss(&model),
        checkpoint: save(&model, 0)?,
    }];
    let mut best = (stats[0].val_loss.unwrap_or(f64::INFINITY), model.clone());
    let mut rises = 0usize;
    let mut transfers = Vec::new();
    let mut stop = StopReason::MaxIterations;

    for it in 1..=cfg.max_iterations {
        if remaining.is_empty() {
            stop = StopReason::PoolEmpty;
            break;
        }
        let n = remaining.len();
        let budget = (cfg.transfer_ratio * n as f64).ceil() as usize;
        let mut moved: Vec<usize> = Vec::new();
        let mut classified = 0usize;
        for scan in 0..cfg.max_pool_scans {
            if moved.len() >= budget || remaining.is_empty() {
                break;
            }
            let mut order = remaining.clone();
            order.shuffle(&mut rng::rng(derive_indexed(cfg.seed, "scan", (it * cfg.max_pool_scans + scan) as u64)));
            let labels = par::map(&order, |&i| classify(&model, &pool[i], inference).is_logical());
            let mut taken = Vec::new();
            for (&i, &ok) in order.iter().zip(&labels) {
                classified += 1;
                if ok {
                    taken.push(i);
                    if moved.len() + taken.len() == budget {
                        break;
                    }
                }
            }
            if taken.is_empty() {
                break;
            }
            remaining.retain(|i| !taken.contains(i));
            moved.extend(taken);
        }
        if moved.is_empty() {
            stop = StopReason::NoLogicalSamples;
            break;
        }
        train_set.extend(moved.iter().map(|&i| pool[i].clone()));
        let pool_before: Vec<usize> = remaining.iter().chain(&moved).copied().collect();
        let tune_cfg = TrainConfig { seed: derive_indexed(train_cfg.seed, "fine-tune", it as u64), ..train_cfg.clone() };
        model = match fine_tune(&model, &train_set, &tune_cfg, cfg.fine_tune_lr_scale) {
            Ok(t) => t.model,
            Err(Error::Divergence { epoch }) => {
                stop = StopReason::Diverged { epoch };
                transfers.push(moved);
                break;
            }
            Err(e) => return Err(e),
        };
        let (rs, rf) = ratios(&model, &pool_before);
        let vl = val_loss(&model);
        stats.push(IterationStats {
            iteration: it,
            n_train: train_set.len(),
            n_pool: remaining.len(),
            transferred: moved.len(),
            classified,
            ratio_success_logical: rs,
            ratio_failure_logical: rf,
            val_loss: vl,
            checkpoint: save(&model, it)?,
        });
        transfers.push(moved);
        if let Some(v) = vl {
            let prev = stats[stats.len() - 2].val_loss.unwrap_or(f64::INFINITY);
            rises = if v > prev { rises + 1 } else { 0 };
            if v < best.0 {
                best = (v, model.clone());
            }
            if rises >= cfg.early_stop_rises {
                stop = StopReason::EarlyStop;
                model = best.1.clone();
                break;
            }
        }
        if remaining.is_empty() {
            stop = StopReason::PoolEmpty;
            break;
        }
    }
    Ok(ActiveOutcome { model, stats, stop, transfers })
}

/// Splits simulated samples into an initial set of near-optimal attempts
/// (action complexity within `band` of the required one), roughly equal
/// per action, and the pool. Returns sorted `(init, pool)` indices.
pub fn initial_split(samples: &[Sample], band: u8, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut per_action: Vec<Vec<usize>> = vec![Vec::new(); ActionId::ALL.len()];
    for (i, s) in samples.iter().enumerate() {
        let req = s.required.ok_or_else(|| {
            Error::Data(format!("sample {i} has no required complexity; the initial split needs simulated data"))
        })?;
        if s.action.complexity().abs_diff(req) <= band {
            per_action[s.action as usize].push(i);
        }
    }
    let total: usize = per_action.iter().map(Vec::len).sum();
    let cap = total.div_ceil(ActionId::ALL.len());
    let mut init = Vec::new();
    for (a, idx) in per_action.iter_mut().enumerate() {
        idx.shuffle(&mut rng::rng(derive_indexed(seed, "init", a as u64)));
        init.extend(idx.iter().take(cap));
    }
    if init.is_empty() {
        return Err(Error::EmptyInput("no near-optimal samples for the initial set".into()));
    }
    init.sort_unstable();
    let mut is_init = vec![false; samples.len()];
    init.iter().for_each(|&i| is_init[i] = true);
    let pool = (0..samples.len()).filter(|&i| !is_init[i]).collect();
    Ok((init, pool))
}
