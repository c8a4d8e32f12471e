use std::path::Path;

use wirepick::pipeline::config::PipelineConfig;
use wirepick::pipeline::report::{read_metrics, report, write_metrics, MetricsRow};
use wirepick::pipeline::{run_pipeline, RunManifest, METRICS_FILE, MODEL_FM_FILE};
use wirepick::sim::PolicyKind;
use wirepick::Error;

fn tiny(dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig { output_dir: dir.to_path_buf(), holdout_samples: 70, ..PipelineConfig::default() };
    cfg.dataset.n_samples = 140;
    cfg.train.max_epochs = 4;
    cfg.active.max_iterations = 1;
    cfg.evaluation.tasks = vec!["consecutive:3".into()];
    cfg.evaluation.policies = vec![PolicyKind::Dl, PolicyKind::OursFm];
    cfg.evaluation.episodes = 2;
    cfg
}

fn run(cfg: &PipelineConfig) -> (RunManifest, Vec<String>) {
    let mut lines = Vec::new();
    let m = run_pipeline(cfg, &mut |l| lines.push(l.to_string())).unwrap();
    (m, lines)
}

#[test]
fn resumes_and_reruns_only_what_changed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let (first, lines) = run(&cfg);
    assert!(lines.iter().all(|l| l.contains(": wrote ")), "{lines:?}");
    let metrics = std::fs::read(dir.path().join(METRICS_FILE)).unwrap();

    let (again, lines) = run(&cfg);
    assert_eq!(lines, ["dataset: up to date", "active: up to date", "simulate: up to date", "report: up to date"]);
    assert_eq!(again, first);

    // a damaged simulate output reruns that stage and everything after it
    std::fs::write(dir.path().join(METRICS_FILE), "policy\n").unwrap();
    let (_, lines) = run(&cfg);
    assert_eq!(&lines[..2], ["dataset: up to date", "active: up to date"]);
    assert!(lines[2].starts_with("simulate: wrote") && lines[3].starts_with("report: wrote"));
    assert_eq!(std::fs::read(dir.path().join(METRICS_FILE)).unwrap(), metrics);

    // a different config starts over
    let mut other = cfg.clone();
    other.evaluation.episodes = 3;
    let (_, lines) = run(&other);
    assert!(lines.iter().all(|l| l.contains(": wrote ")), "{lines:?}");
    assert!(dir.path().join(MODEL_FM_FILE).exists());
}

#[test]
fn config_files_are_checked() {
    let good = serde_json::to_value(PipelineConfig::default()).unwrap();
    assert!(PipelineConfig::from_json(&good.to_string()).is_ok());

    let mut v = good.clone();
    v["version"] = 0.into();
    assert!(matches!(PipelineConfig::from_json(&v.to_string()), Err(Error::Config(_))));

    let mut v = good.clone();
    v["surprise"] = 1.into();
    assert!(matches!(PipelineConfig::from_json(&v.to_string()), Err(Error::Config(_))));

    let mut v = good.clone();
    v["evaluation"]["tasks"] = serde_json::json!(["consecutive:x"]);
    assert!(matches!(PipelineConfig::from_json(&v.to_string()), Err(Error::Config(_))));

    let mut v = good;
    v["sim"]["outcome"]["recovery_tp"] = 1.5.into();
    assert!(matches!(PipelineConfig::from_json(&v.to_string()), Err(Error::Config(_))));

    assert!(matches!(PipelineConfig::from_json("{"), Err(Error::Config(_))));
}

#[test]
fn relative_output_dirs_follow_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    std::fs::write(&path, serde_json::to_string(&PipelineConfig::default()).unwrap()).unwrap();
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.output_dir, dir.path().join("run"));
    assert_eq!(cfg.hash(), PipelineConfig::default().hash());
}

fn row(policy: &str, task: &str, pph: f64) -> MetricsRow {
    MetricsRow {
        policy: policy.into(),
        task: task.into(),
        episodes: 5,
        success_rate: 0.5,
        pph,
        avg_a: 2.0,
        placing_attempts: None,
        successes: None,
        elapsed_s: None,
    }
}

#[test]
fn report_merges_files_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_metrics(&a, &[row("TFS", "randomized:18-20", 1.0), row("DL", "randomized:18-20", 2.0)]).unwrap();
    write_metrics(&b, &[row("Ours-FM", "consecutive:5", 3.0), row("TFS", "randomized:18-20", 4.0)]).unwrap();
    let out = report(&[a, b], &dir.path().join("r")).unwrap();
    let names: Vec<String> = out.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["summary.csv", "randomized_18-20.svg", "consecutive_5.svg"]);
    let summary = read_metrics(&out[0]).unwrap();
    let got: Vec<(&str, f64)> = summary.iter().map(|r| (r.policy.as_str(), r.pph)).collect();
    assert_eq!(got, [("DL", 2.0), ("TFS", 4.0), ("Ours-FM", 3.0)]);
}
