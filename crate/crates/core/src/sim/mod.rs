//! Closed-loop picking in the simulated bin.
//!
//! An attempt renders the bin, detects grasps, lets a policy pick a grasp
//! and an action, and draws the outcome from [`OutcomeModel`] given how far
//! the action's complexity exceeds what the target needs. A success takes
//! the target out of the bin; a failure drops it and its neighbours again.

mod calibrate;
mod dataset;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::asp::{predict_batch, AspModel};
use crate::depth::DepthImage;
use crate::grasp::{detect_grasps, FgeParams, Grasp, GraspSet, GripperTemplate, JawGeometry};
use crate::inference::{select_pair, InferenceConfig};
use crate::motion::ActionId;
use crate::rng::{self, derive_indexed, derive_seed, Rng};
use crate::scene::{generate_scene, render_with_owner, ComplexityOracle, RenderOutput, Scene, SceneSpec};
use crate::{par, Error, Result};

pub use calibrate::{calibration_contexts, calibration_rates, fit_offsets, table_success_rates, CalibrationConfig};
pub use dataset::{generate_dataset, DatasetConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub mm_per_pixel: f64,
    /// Share of pixels returned invalid.
    pub dropout: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self { width: 128, height: 128, mm_per_pixel: 3.0, dropout: 0.0 }
    }
}

/// Success probability `sigmoid(offset[a] + slope * (A(a) - required))`,
/// or the step `A(a) >= required` with noise off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeModel {
    pub slope: f64,
    pub offsets: [f64; 7],
    pub noise: bool,
    /// Chance the force check flags a pick that dragged other harnesses.
    pub recovery_tp: f64,
    /// Chance it flags a clean single pick.
    pub recovery_fp: f64,
    /// Seconds per attempt besides the action itself.
    pub t_overhead: f64,
    /// Extra seconds for putting a flagged pick back.
    pub put_back_penalty: f64,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        Self {
            // fitted with `fit_offsets` over `CalibrationConfig::default()`
            slope: 1.5,
            offsets: [1.7584, 4.5007, 5.4414, 4.566, 3.1918, 2.2298, 1.0411],
            noise: true,
            recovery_tp: 0.9,
            recovery_fp: 0.05,
            t_overhead: 16.8,
            put_back_penalty: 6.0,
        }
    }
}

impl OutcomeModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.slope >= 0.0) || self.offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("outcome slope must be >= 0 and offsets finite".into()));
        }
        if !prob(self.recovery_tp) || !prob(self.recovery_fp) {
            return Err(Error::Config("recovery rates must lie in [0, 1]".into()));
        }
        if !(self.t_overhead > 0.0 && self.put_back_penalty >= 0.0) {
            return Err(Error::Config("t_overhead must be > 0 and put_back_penalty >= 0".into()));
        }
        Ok(())
    }

    pub fn p_success(&self, a: ActionId, delta: i32) -> f64 {
        if !self.noise {
            return if delta >= 0 { 1.0 } else { 0.0 };
        }
        crate::asp::mlp::sigmoid(self.offsets[a as usize] + self.slope * delta as f64)
    }

    pub fn draw(&self, a: ActionId, delta: i32, r: &mut Rng) -> bool {
        // always consume one number so streams line up with noise on or off
        let x: f64 = r.gen();
        x < self.p_success(a, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scene: SceneSpec,
    pub camera: Camera,
    pub jaw: JawGeometry,
    pub fge: FgeParams,
    pub n_orientations: usize,
    pub top_k: usize,
    pub oracle: ComplexityOracle,
    pub outcome: OutcomeModel,
    pub inference: InferenceConfig,
    /// Consecutive tasks stop after this many attempts per object.
    pub attempts_per_object: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            camera: Camera::default(),
            jaw: JawGeometry::default(),
            fge: FgeParams::default(),
            n_orientations: 8,
            top_k: 10,
            oracle: ComplexityOracle::default(),
            outcome: OutcomeModel::default(),
            inference: InferenceConfig::default(),
            attempts_per_object: 3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.outcome.validate()?;
        self.oracle.validate()?;
        self.inference.validate()?;
        self.template()?;
        if self.n_orientations == 0 || self.top_k == 0 || self.attempts_per_object == 0 {
            return Err(Error::Config("n_orientations, top_k and attempts_per_object must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.camera.dropout) {
            return Err(Error::Config(format!("camera dropout must lie in [0, 1), got {}", self.camera.dropout)));
        }
        Ok(())
    }

    pub fn template(&self) -> Result<GripperTemplate> {
        GripperTemplate::parallel_jaw(&self.jaw, self.camera.mm_per_pixel)
    }

    pub fn spec_with(&self, n_objects: usize) -> SceneSpec {
        SceneSpec { n_objects, ..self.scene.clone() }
    }
}

/// What the robot sees: the rendered image (with pixel owners kept for the
/// simulator) and the grasp candidates.
#[derive(Debug, Clone)]
pub struct Observation {
    pub render: RenderOutput,
    pub grasps: GraspSet,
}

impl Observation {
    pub fn depth(&self) -> &DepthImage {
        &self.render.depth
    }
}

pub fn observe(scene: &Scene, cfg: &SimConfig, template: &GripperTemplate, seed: u64) -> Result<Observation> {
    let c = &cfg.camera;
    let dropout = (c.dropout > 0.0).then_some((c.dropout, derive_seed(seed, "dropout")));
    let render = render_with_owner(scene, (c.width, c.height), c.mm_per_pixel, dropout)?;
    let grasps = detect_grasps(&render.depth, template, cfg.n_orientations, cfg.top_k, &cfg.fge)?;
    Ok(Observation { render, grasps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// One harness picked and placed.
    Success,
    /// The target came up with others attached.
    MultiObject,
    /// Nothing or a dropped part.
    Miss,
    /// Flagged by the force check and put back.
    Recovered,
}

/// Target harness and required complexity at a grasp, if it is on one.
pub fn grasp_target(scene: &Scene, render: &RenderOutput, g: &Grasp, oracle: &ComplexityOracle) -> Option<(u32, u8)> {
    let id = render.owner_at(g.u, g.v)?;
    let at = render.depth.pixel_center(g.u as f64, g.v as f64);
    oracle.required_complexity(scene, id, at).ok().map(|req| (id, req))
}

#[derive(Debug, Clone)]
pub struct AttemptResult {
    pub outcome: Outcome,
    pub target: Option<u32>,
    pub required: Option<u8>,
    pub next: Scene,
    pub elapsed: f64,
}

/// Executes action `a` at grasp `g`. Off any harness the attempt misses and
/// the bin is unchanged.
pub fn execute_attempt(
    scene: &Scene,
    render: &RenderOutput,
    g: &Grasp,
    a: ActionId,
    cfg: &SimConfig,
    r: &mut Rng,
) -> AttemptResult {
    let om = &cfg.outcome;
    let elapsed = om.t_overhead + a.spec().exec_time;
    let Some((target, required)) = grasp_target(scene, render, g, &cfg.oracle) else {
        return AttemptResult { outcome: Outcome::Miss, target: None, required: None, next: scene.clone(), elapsed };
    };
    let spec = cfg.spec_with(scene.harnesses.len());
    let delta = a.complexity() as i32 - required as i32;
    let (outcome, next) = if om.draw(a, delta, r) {
        (Outcome::Success, scene.remove(target, &spec, r))
    } else {
        let outcome = if delta < 0 { Outcome::MultiObject } else { Outcome::Miss };
        (outcome, perturb(scene, target, &spec, r))
    };
    AttemptResult { outcome, target: Some(target), required: Some(required), next, elapsed }
}

fn perturb(scene: &Scene, target: u32, spec: &SceneSpec, r: &mut Rng) -> Scene {
    let mut ids = scene.neighbors(target);
    ids.push(target);
    scene.redrop(&ids, spec, r)
}

/// The force check after an attempt: `true` means put the target back.
pub fn recovery_check(outcome: Outcome, om: &OutcomeModel, r: &mut Rng) -> bool {
    let x: f64 = r.gen();
    match outcome {
        Outcome::MultiObject => x < om.recovery_tp,
        Outcome::Success => x < om.recovery_fp,
        Outcome::Miss | Outcome::Recovered => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "dl")]
    Dl,
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "tfs")]
    Tfs,
    #[serde(rename = "ours-im")]
    OursIm,
    #[serde(rename = "ours-fm")]
    OursFm,
    #[serde(rename = "ours-fm-r")]
    OursFmR,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Dl,
        PolicyKind::Rand,
        PolicyKind::Tfs,
        PolicyKind::OursIm,
        PolicyKind::OursFm,
        PolicyKind::OursFmR,
    ];

    pub fn key(self) -> &'static str {
        match self {
            PolicyKind::Dl => "dl",
            PolicyKind::Rand => "rand",
            PolicyKind::Tfs => "tfs",
            PolicyKind::OursIm => "ours-im",
            PolicyKind::OursFm => "ours-fm",
            PolicyKind::OursFmR => "ours-fm-r",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Dl => "DL",
            PolicyKind::Rand => "RAND",
            PolicyKind::Tfs => "TFS",
            PolicyKind::OursIm => "Ours-IM",
            PolicyKind::OursFm => "Ours-FM",
            PolicyKind::OursFmR => "Ours-FM-R",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, PolicyKind::OursIm | PolicyKind::OursFm | PolicyKind::OursFmR)
    }

    pub fn recovers(self) -> bool {
        self == PolicyKind::OursFmR
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|p| p.key() == k || p.label().to_ascii_lowercase() == k)
            .ok_or_else(|| Error::Parameter(format!("unknown policy {s:?}")))
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Policy<'a> {
    pub kind: PolicyKind,
    pub model: Option<&'a AspModel>,
}

/// A policy's choice: grasp index, action and the predicted scores for the
/// chosen grasp (learned policies only).
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub grasp: usize,
    pub action: ActionId,
    pub predicted: Option<Vec<f64>>,
}

impl<'a> Policy<'a> {
    pub fn new(kind: PolicyKind, model: Option<&'a AspModel>) -> Result<Self> {
        if kind.needs_model() && model.is_none() {
            return Err(Error::Parameter(format!("policy {kind} needs a model")));
        }
        Ok(Self { kind, model })
    }

    pub fn decide(&self, o: &DepthImage, grasps: &GraspSet, cfg: &SimConfig, r: &mut Rng) -> Result<Decision> {
        if grasps.is_empty() {
            return Err(Error::NoGrasp);
        }
        let fixed = |action| Decision { grasp: 0, action, predicted: None };
        Ok(match self.kind {
            PolicyKind::Dl => fixed(ActionId::Dl),
            PolicyKind::Tfs => fixed(ActionId::Tfs),
            PolicyKind::Rand => fixed(ActionId::ALL[r.gen_range(0..ActionId::ALL.len())]),
            _ => {
                let model = self.model.expect("checked in Policy::new");
                let p = predict_batch(model, o, &grasps.grasps, &ActionId::ALL)?;
                let fge: Vec<f64> = grasps.grasps.iter().map(|g| g.fge_score).collect();
                let s = select_pair(&p, &fge, &ActionId::ALL, &cfg.inference)?;
                Decision { grasp: s.grasp, action: s.action, predicted: Some(p[s.grasp].clone()) }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    /// Empty a bin of `n` harnesses.
    Consecutive(usize),
    /// One attempt per freshly filled bin of `lo..=hi` harnesses.
    Randomized(usize, usize),
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("bad task {s:?}, expected consecutive:N or randomized:LO-HI"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "consecutive" => Ok(Task::Consecutive(arg.parse().map_err(|_| bad())?)),
            "randomized" => {
                let (lo, hi) = arg.split_once('-').ok_or_else(bad)?;
                let (lo, hi): (usize, usize) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
                if lo > hi {
                    return Err(bad());
                }
                Ok(Task::Randomized(lo, hi))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Consecutive(n) => write!(f, "consecutive:{n}"),
            Task::Randomized(lo, hi) => write!(f, "randomized:{lo}-{hi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub scene_seed: u64,
    pub n_objects: usize,
    pub grasp: Option<Grasp>,
    pub action: Option<ActionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Vec<f64>>,
    pub required: Option<u8>,
    pub outcome: Outcome,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub policy: PolicyKind,
    pub task: String,
    pub seed: u64,
    pub attempts: Vec<AttemptRecord>,
}

fn attempt(
    scene: &Scene,
    policy: &Policy,
    cfg: &SimConfig,
    template: &GripperTemplate,
    seed: u64,
) -> Result<(AttemptRecord, Scene)> {
    let mut r = rng::rng(derive_seed(seed, "act"));
    let obs = observe(scene, cfg, template, seed)?;
    let n_objects = scene.harnesses.len();
    if obs.grasps.is_empty() {
        let spec = cfg.spec_with(n_objects);
        let ids = scene.ids();
        let next = scene.redrop(&ids, &spec, &mut r);
        let record = AttemptRecord {
            scene_seed: scene.seed,
            n_objects,
            grasp: None,
            action: None,
            predicted: None,
            required: None,
            outcome: Outcome::Miss,
            elapsed: cfg.outcome.t_overhead,
        };
        return Ok((record, next));
    }
    let d = policy.decide(obs.depth(), &obs.grasps, cfg, &mut r)?;
    let g = &obs.grasps.grasps[d.grasp];
    let res = execute_attempt(scene, &obs.render, g, d.action, cfg, &mut r);
    let (mut outcome, mut next, mut elapsed) = (res.outcome, res.next, res.elapsed);
    if policy.kind.recovers() && recovery_check(outcome, &cfg.outcome, &mut r) {
        elapsed += cfg.outcome.put_back_penalty;
        if outcome == Outcome::Success {
            let target = res.target.expect("a success has a target");
            next = scene.redrop(&[target], &cfg.spec_with(n_objects), &mut r);
        }
        outcome = Outcome::Recovered;
    }
    let record = AttemptRecord {
        scene_seed: scene.seed,
        n_objects,
        grasp: Some(g.clone()),
        action: Some(d.action),
        predicted: d.predicted,
        required: res.required,
        outcome,
        elapsed,
    };
    Ok((record, next))
}

/// One episode. Scene and attempt streams derive from `seed` alone, so
/// different policies see the same initial bins.
pub fn run_episode(policy: &Policy, task: Task, episode: usize, seed: u64, cfg: &SimConfig) -> Result<EpisodeLog> {
    let template = cfg.template()?;
    let ep_seed = derive_indexed(seed, "episode", episode as u64);
    let mut attempts = Vec::new();
    match task {
        Task::Consecutive(n) => {
            let mut scene = generate_scene(&cfg.spec_with(n), derive_seed(ep_seed, "scene"))?;
            let cap = cfg.attempts_per_object * n;
            while !scene.harnesses.is_empty() && attempts.len() < cap {
                let s = derive_indexed(ep_seed, "attempt", attempts.len() as u64);
                let (rec, next) = attempt(&scene, policy, cfg, &template, s)?;
                attempts.push(rec);
                scene = next;
            }
        }
        Task::Randomized(lo, hi) => {
            let mut r = rng::rng(derive_seed(ep_seed, "size"));
            let n = r.gen_range(lo..=hi);
            let scene = generate_scene(&cfg.spec_with(n), derive_seed(ep_seed, "scene"))?;
            let (rec, _) = attempt(&scene, policy, cfg, &template, derive_indexed(ep_seed, "attempt", 0))?;
            attempts.push(rec);
        }
    }
    Ok(EpisodeLog { episode, policy: policy.kind, task: task.to_string(), seed, attempts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub policy: PolicyKind,
    pub task: String,
    pub episodes: usize,
    /// Attempts that placed something (put-backs excluded).
    pub placing_attempts: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub pph: f64,
    pub avg_complexity: f64,
    pub elapsed: f64,
}

pub fn metrics(policy: PolicyKind, task: &str, logs: &[EpisodeLog]) -> Metrics {
    let all: Vec<&AttemptRecord> = logs.iter().flat_map(|l| &l.attempts).collect();
    let placing = all.iter().filter(|a| a.outcome != Outcome::Recovered).count();
    let successes = all.iter().filter(|a| a.outcome == Outcome::Success).count();
    let elapsed: f64 = all.iter().map(|a| a.elapsed).sum();
    let acts: Vec<u8> = all.iter().filter_map(|a| a.action.map(|x| x.complexity())).collect();
    Metrics {
        policy,
        task: task.to_string(),
        episodes: logs.len(),
        placing_attempts: placing,
        successes,
        success_rate: if placing > 0 { successes as f64 / placing as f64 } else { 0.0 },
        pph: if elapsed > 0.0 { 3600.0 * successes as f64 / elapsed } else { 0.0 },
        avg_complexity: if acts.is_empty() { 0.0 } else { acts.iter().map(|&a| a as f64).sum::<f64>() / acts.len() as f64 },
        elapsed,
    }
}

/// Runs `n_episodes` episodes (in parallel) and aggregates them.
pub fn run_task(
    policy: &Policy,
    task: Task,
    n_episodes: usize,
    seed: u64,
    cfg: &SimConfig,
) -> Result<(Metrics, Vec<EpisodeLog>)> {
    cfg.validate()?;
    let logs = par::map_range(n_episodes, |i| run_episode(policy, task, i, seed, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok((metrics(policy.kind, &task.to_string(), &logs), logs))
}
