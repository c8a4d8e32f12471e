//! The end-to-end experiment: simulated data collection, training with
//! active learning, closed-loop evaluation and the report.
//!
//! Each stage gets the seed `derive_seed(config.seed, stage_name)` and
//! writes its files under the output directory. The manifest records the
//! config hash and a SHA-256 per file; re-running skips every stage whose
//! files are intact, up to the first one that is not.

pub mod config;
pub mod io;
pub mod manifest;
pub mod report;

use std::path::{Path, PathBuf};

use crate::active::{active_learn, initial_split, ActiveOutcome, IterationStats, StopReason};
use crate::asp::{encode, AspModel, Dataset, TrainConfig};
use crate::rng::derive_seed;
use crate::sim::{generate_dataset, run_task, DatasetConfig, EpisodeLog, Policy, PolicyKind};
use crate::{Error, Result};

pub use config::{EvaluationConfig, PipelineConfig, CONFIG_VERSION};
pub use manifest::{FileRecord, RunManifest, StageRecord};
pub use report::{read_metrics, write_metrics, MetricsRow};

pub const STAGES: [&str; 4] = ["dataset", "active", "simulate", "report"];

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const HOLDOUT_FILE: &str = "holdout.jsonl";
pub const MODEL_IM_FILE: &str = "models/model_im.json";
pub const MODEL_FM_FILE: &str = "models/model_fm.json";
pub const ACTIVE_STATS_FILE: &str = "active_stats.csv";
pub const METRICS_FILE: &str = "metrics.csv";

pub fn stage_seed(cfg: &PipelineConfig, stage: &str) -> u64 {
    derive_seed(cfg.seed, stage)
}

pub fn write_active_stats(path: &Path, stats: &[IterationStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "iteration",
        "n_train",
        "n_pool",
        "ratio_success_logical",
        "ratio_failure_logical",
        "checkpoint_path",
        "transferred",
        "classified",
        "val_loss",
    ];
    let data = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(header).map_err(data)?;
    for s in stats {
        let ckpt = s.checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        w.write_record([
            s.iteration.to_string(),
            s.n_train.to_string(),
            s.n_pool.to_string(),
            s.ratio_success_logical.to_string(),
            s.ratio_failure_logical.to_string(),
            ckpt,
            s.transferred.to_string(),
            s.classified.to_string(),
            s.val_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(data)?;
    }
    io::write_atomic(path, &w.into_inner().map_err(|e| Error::Data(e.to_string()))?)
}

pub fn write_episodes(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let mut text = String::new();
    for l in logs {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    io::write_atomic(path, text.as_bytes())
}

fn dataset_files(ds: &Dataset, jsonl: &Path) -> Vec<PathBuf> {
    let mut v = vec![jsonl.to_path_buf()];
    v.extend(ds.image_paths(jsonl));
    v
}

fn stage_dataset(cfg: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let seed = stage_seed(cfg, "dataset");
    let ds = generate_dataset(&cfg.dataset, &cfg.sim, seed)?;
    let path = out.join(DATASET_FILE);
    ds.save(&path)?;
    let mut files = dataset_files(&ds, &path);
    if cfg.holdout_samples > 0 {
        let hcfg = DatasetConfig { n_samples: cfg.holdout_samples, ..cfg.dataset.clone() };
        let hold = generate_dataset(&hcfg, &cfg.sim, stage_seed(cfg, "holdout"))?;
        let hpath = out.join(HOLDOUT_FILE);
        hold.save(&hpath)?;
        files.extend(dataset_files(&hold, &hpath));
    }
    Ok(files)
}

/// Trains the initial model, runs active learning and saves both models.
pub fn train_active(cfg: &PipelineConfig, data: &Dataset, holdout: Option<&Dataset>, out: &Path) -> Result<ActiveOutcome> {
    let (init_idx, pool_idx) = initial_split(&data.samples, cfg.init_band, stage_seed(cfg, "split"))?;
    let examples = encode(data)?;
    let init: Vec<_> = init_idx.iter().map(|&i| examples[i].clone()).collect();
    let pool: Vec<_> = pool_idx.iter().map(|&i| examples[i].clone()).collect();
    let hold = match holdout {
        Some(h) => encode(h)?,
        None => Vec::new(),
    };
    let train_cfg = TrainConfig { seed: stage_seed(cfg, "train"), ..cfg.train.clone() };
    let active_cfg = crate::active::ActiveLearnConfig { seed: stage_seed(cfg, "active"), ..cfg.active.clone() };
    let ckpt = out.join("checkpoints");
    let res = active_learn(&pool, &init, &hold, &active_cfg, &train_cfg, &cfg.sim.inference, Some(&ckpt))?;
    let rel_stats: Vec<IterationStats> = res
        .stats
        .iter()
        .map(|s| IterationStats {
            checkpoint: s.checkpoint.as_ref().map(|p| p.strip_prefix(out).unwrap_or(p).to_path_buf()),
            ..s.clone()
        })
        .collect();
    write_active_stats(&out.join(ACTIVE_STATS_FILE), &rel_stats)?;
    let im = AspModel::load(&ckpt.join("model_iter00.json"))?;
    im.save(&out.join(MODEL_IM_FILE))?;
    res.model.save(&out.join(MODEL_FM_FILE))?;
    Ok(res)
}

fn stage_active(cfg: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let data = Dataset::load(&out.join(DATASET_FILE))?;
    let holdout = if cfg.holdout_samples > 0 { Some(Dataset::load(&out.join(HOLDOUT_FILE))?) } else { None };
    let res = train_active(cfg, &data, holdout.as_ref(), out)?;
    if let StopReason::Diverged { epoch } = res.stop {
        return Err(Error::Divergence { epoch });
    }
    let mut files: Vec<PathBuf> = res.stats.iter().filter_map(|s| s.checkpoint.clone()).collect();
    files.extend([out.join(ACTIVE_STATS_FILE), out.join(MODEL_IM_FILE), out.join(MODEL_FM_FILE)]);
    Ok(files)
}

fn stage_simulate(cfg: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let im = AspModel::load(&out.join(MODEL_IM_FILE))?;
    let fm = AspModel::load(&out.join(MODEL_FM_FILE))?;
    let seed = stage_seed(cfg, "simulate");
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for (task_text, task) in cfg.evaluation.tasks.iter().zip(cfg.evaluation.parsed_tasks()?) {
        for &kind in &cfg.evaluation.policies {
            let model = match kind {
                PolicyKind::OursIm => Some(&im),
                PolicyKind::OursFm | PolicyKind::OursFmR => Some(&fm),
                _ => None,
            };
            let policy = Policy::new(kind, model)?;
            let (m, logs) = run_task(&policy, task, cfg.evaluation.episodes, seed, &cfg.sim)?;
            let p = out.join("episodes").join(format!("{}__{}.jsonl", task_text.replace(':', "_"), kind.key()));
            write_episodes(&p, &logs)?;
            files.push(p);
            rows.push(MetricsRow::from(&m));
        }
    }
    let p = out.join(METRICS_FILE);
    write_metrics(&p, &rows)?;
    files.push(p);
    Ok(files)
}

fn stage_report(_cfg: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    report::report(&[out.join(METRICS_FILE)], &out.join("report"))
}

/// Runs (or resumes) the pipeline; `log` receives one line per stage.
pub fn run_pipeline(cfg: &PipelineConfig, log: &mut dyn FnMut(&str)) -> Result<RunManifest> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let hash = cfg.hash();
    let previous = RunManifest::load(out).filter(|m| m.config_hash == hash);
    let mut manifest = RunManifest {
        config_hash: hash,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        feature_version: crate::asp::FEATURE_VERSION.to_string(),
        model_format: crate::asp::MODEL_FORMAT.to_string(),
        stages: Vec::new(),
    };
    let mut fresh = true;
    for name in STAGES {
        if fresh {
            if let Some(prev) = previous.as_ref().filter(|m| m.stage_intact(out, name)) {
                log(&format!("{name}: up to date"));
                manifest.stages.push(prev.stage(name).expect("intact stage exists").clone());
                continue;
            }
            fresh = false;
        }
        let started = manifest::now();
        let files = match name {
            "dataset" => stage_dataset(cfg, out),
            "active" => stage_active(cfg, out),
            "simulate" => stage_simulate(cfg, out),
            _ => stage_report(cfg, out),
        }?;
        let outputs = files.iter().map(|p| manifest::file_record(out, p)).collect::<Result<Vec<_>>>()?;
        log(&format!("{name}: wrote {} files", outputs.len()));
        manifest.stages.push(StageRecord {
            name: name.to_string(),
            seed: stage_seed(cfg, name),
            outputs,
            started,
            finished: manifest::now(),
        });
        manifest.save(out)?;
    }
    manifest.save(out)?;
    Ok(manifest)
}
