use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wirepick::active::{active_learn, ActiveLearnConfig};
use wirepick::asp::{encode, train, AspModel, Dataset, TrainConfig};
use wirepick::depth::DepthImage;
use wirepick::grasp::{detect_grasps, Calibration, GraspSet};
use wirepick::inference::action_grasp_inference;
use wirepick::motion::{plan_action, ActionId, MotionConfig};
use wirepick::pipeline::{self, io, report, MetricsRow, PipelineConfig};
use wirepick::scene::{generate_scene, render_depth, Scene};
use wirepick::sim::{generate_dataset, run_task, DatasetConfig, Policy, PolicyKind, Task};
use wirepick::{Error, Result};

#[derive(Parser)]
#[command(name = "wirepick", version, about = "Simulated bin picking of entangled wire harnesses")]
struct Cli {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default experiment config.
    DefaultConfig {
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate random bins as scene JSON files.
    GenScenes {
        #[arg(long)]
        objects: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scene to a 16-bit PGM depth image.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect grasp candidates on a depth image.
    DetectGrasps {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan the trajectory of an action at a detected grasp.
    Plan {
        #[arg(long)]
        action: ActionId,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        grasps: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate data collection and write a JSONL dataset.
    GenDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a success predictor from scratch.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Grow the training set from a pool by active learning.
    ActiveLearn {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        holdout: Option<PathBuf>,
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick an action-grasp pair for a depth image.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        /// Candidates to score; detected on the image when omitted.
        #[arg(long)]
        grasps: Option<PathBuf>,
    },
    /// Run a policy on a picking task in the simulated bin.
    Simulate {
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long)]
        task: Task,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarise metrics CSVs into a table and SVG charts.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run (or resume) the whole experiment.
    Pipeline {
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let sim = &cfg.sim;
    match cli.command {
        Command::DefaultConfig { out } => io::write_json(&out, &PipelineConfig::default())?,
        Command::GenScenes { objects, count, seed, out } => {
            let spec = sim.spec_with(objects);
            for i in 0..count {
                let scene = generate_scene(&spec, wirepick::rng::derive_indexed(seed, "scene", i as u64))?;
                io::write_json(&out.join(format!("scene_{i:04}.json")), &scene)?;
            }
            eprintln!("wrote {count} scenes to {}", out.display());
        }
        Command::Render { scene, out } => {
            let s: Scene = io::read_json(&scene)?;
            let c = &sim.camera;
            render_depth(&s, (c.width, c.height), c.mm_per_pixel)?.save_pgm(&out)?;
        }
        Command::DetectGrasps { depth, out } => {
            let o = DepthImage::load_pgm(&depth)?;
            let set = detect_grasps(&o, &sim.template()?, sim.n_orientations, sim.top_k, &sim.fge)?;
            eprintln!("{} grasp candidates", set.len());
            io::write_json(&out, &set)?;
        }
        Command::Plan { action, depth, grasps, index, out } => {
            let o = DepthImage::load_pgm(&depth)?;
            let set: GraspSet = io::read_json(&grasps)?;
            let g = set
                .grasps
                .get(index)
                .ok_or_else(|| Error::Parameter(format!("grasp index {index} out of {}", set.len())))?;
            let g = Calibration::aligned(o.mm_per_pixel, [0.0, 0.0]).pixel_to_robot(g, &o)?;
            let motion = MotionConfig::default();
            motion.validate()?;
            io::write_json(&out, &plan_action(&action.spec(), &g, &motion)?)?;
        }
        Command::GenDataset { out, samples, seed } => {
            let ds_cfg = DatasetConfig { n_samples: samples.unwrap_or(cfg.dataset.n_samples), ..cfg.dataset.clone() };
            let ds = generate_dataset(&ds_cfg, sim, seed.unwrap_or_else(|| pipeline::stage_seed(&cfg, "dataset")))?;
            ds.save(&out)?;
            eprintln!("{} samples, per action {:?}", ds.len(), ds.action_counts());
        }
        Command::Train { data, out, seed } => {
            let ds = Dataset::load(&data)?;
            let tc = TrainConfig { seed: seed.unwrap_or(cfg.train.seed), ..cfg.train.clone() };
            let t = train(&encode(&ds)?, &tc, false)?;
            if let Some(last) = t.history.last() {
                eprintln!("{} epochs, train loss {:.4}, accuracy {:.3}", last.epoch, last.train_loss, last.train_accuracy);
            }
            t.model.save(&out)?;
        }
        Command::ActiveLearn { pool, init, holdout, ratio, out } => {
            let pool = encode(&Dataset::load(&pool)?)?;
            let init = encode(&Dataset::load(&init)?)?;
            let hold = match holdout {
                Some(p) => encode(&Dataset::load(&p)?)?,
                None => Vec::new(),
            };
            let ac = ActiveLearnConfig { transfer_ratio: ratio.unwrap_or(cfg.active.transfer_ratio), ..cfg.active.clone() };
            let res = active_learn(&pool, &init, &hold, &ac, &cfg.train, &sim.inference, Some(&out.join("checkpoints")))?;
            pipeline::write_active_stats(&out.join(pipeline::ACTIVE_STATS_FILE), &res.stats)?;
            res.model.save(&out.join("model.json"))?;
            eprintln!("{} iterations, stopped: {:?}", res.stats.len() - 1, res.stop);
            if let wirepick::active::StopReason::Diverged { epoch } = res.stop {
                return Err(Error::Divergence { epoch });
            }
        }
        Command::Infer { model, depth, grasps } => {
            let m = AspModel::load(&model)?;
            let o = DepthImage::load_pgm(&depth)?;
            let set = match grasps {
                Some(p) => io::read_json(&p)?,
                None => detect_grasps(&o, &sim.template()?, sim.n_orientations, sim.top_k, &sim.fge)?,
            };
            let s = action_grasp_inference(&o, &set, &ActionId::ALL, &m, &sim.inference)?;
            let g = &set.grasps[s.grasp];
            let summary = serde_json::json!({
                "action": s.action,
                "grasp": { "index": s.grasp, "u": g.u, "v": g.v, "phi": g.phi },
                "score": s.score,
                "fallback": s.fallback,
                "feasible_pairs": s.ranked.len(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Simulate { policy, task, episodes, seed, model, out } => {
            let m = model.as_deref().map(AspModel::load).transpose()?;
            let p = Policy::new(policy, m.as_ref())?;
            let (metrics, logs) = run_task(&p, task, episodes, seed, sim)?;
            pipeline::write_episodes(&out.join("episodes.jsonl"), &logs)?;
            pipeline::write_metrics(&out.join("metrics.csv"), &[MetricsRow::from(&metrics)])?;
            eprintln!(
                "{} {}: success {:.1}%, PPH {:.1}, avg A {:.2}",
                metrics.policy,
                metrics.task,
                100.0 * metrics.success_rate,
                metrics.pph,
                metrics.avg_complexity
            );
        }
        Command::Report { metrics, out } => {
            for p in report::report(&metrics, &out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Pipeline { out } => {
            let cfg = PipelineConfig { output_dir: out.unwrap_or(cfg.output_dir.clone()), ..cfg.clone() };
            let m = pipeline::run_pipeline(&cfg, &mut |line| eprintln!("{line}"))?;
            eprintln!("{} files, config {}", m.files().count(), &m.config_hash[..12]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
