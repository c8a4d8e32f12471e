use rand::Rng as _;

use wirepick::asp::mlp::fit;
use wirepick::asp::{encode, fine_tune, predict, train, AspModel, Dataset, Example, Mlp, TrainConfig, IMAGE_DIM};
use wirepick::motion::ActionId;
use wirepick::rng::rng;
use wirepick::sim::{generate_dataset, DatasetConfig, SimConfig};
use wirepick::Error;

fn toy(n: usize, dim: usize, seed: u64) -> Vec<Example> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let dense: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
            let hot = r.gen_range(0..7);
            // separable: sign of a fixed direction, shifted by the action
            let s = dense[0] + 0.5 * dense[1] + 0.1 * hot as f64 - 0.3;
            Example { dense, hot, label: (s > 0.0) as u8 as f64 }
        })
        .collect()
}

fn small_cfg() -> TrainConfig {
    TrainConfig { hidden: vec![16, 8], learning_rate: 1e-2, max_epochs: 200, patience: 200, validation_fraction: 0.0, ..TrainConfig::default() }
}

#[test]
fn backprop_matches_finite_differences() {
    let data = toy(6, 12, 1);
    let refs: Vec<&Example> = data.iter().collect();
    let mut net = Mlp::new(12, 7, &[9, 5], 2);
    let (_, grad) = net.loss_and_gradient(&refs);
    let eps = 1e-6;
    for i in 0..net.param_count() {
        let x = net.param(i);
        net.set_param(i, x + eps);
        let up = net.loss(&refs);
        net.set_param(i, x - eps);
        let down = net.loss(&refs);
        net.set_param(i, x);
        let numeric = (up - down) / (2.0 * eps);
        let rel = (grad[i] - numeric).abs() / (grad[i].abs() + numeric.abs()).max(1e-6);
        assert!(rel < 1e-4, "param {i}: analytic {} numeric {numeric}", grad[i]);
    }
}

#[test]
fn overfits_a_single_sample() {
    let one = toy(1, 12, 3);
    let mut net = Mlp::new(12, 7, &[8], 4);
    let before = net.loss(&[&one[0]]);
    fit(&mut net, &one, &small_cfg(), 0.05).unwrap();
    let after = net.loss(&[&one[0]]);
    assert!(after < 0.01 && after < before, "{before} -> {after}");
}

#[test]
fn learns_a_separable_toy_set() {
    let data = toy(400, 12, 5);
    let mut net = Mlp::new(12, 7, &[16, 8], 6);
    fit(&mut net, &data, &small_cfg(), 1e-2).unwrap();
    let test = toy(200, 12, 7);
    let correct = test.iter().filter(|e| (net.predict(&e.dense, e.hot) >= 0.5) == (e.label >= 0.5)).count();
    assert!(correct >= 180, "{correct}/200");
}

fn small_dataset() -> Dataset {
    generate_dataset(&DatasetConfig { n_samples: 70, ..DatasetConfig::default() }, &SimConfig::default(), 8).unwrap()
}

#[test]
fn training_is_deterministic_and_round_trips() {
    let ex = encode(&small_dataset()).unwrap();
    let cfg = TrainConfig { max_epochs: 5, seed: 3, ..TrainConfig::default() };
    let a = train(&ex, &cfg, false).unwrap();
    let b = train(&ex, &cfg, false).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    a.model.save(&p).unwrap();
    let back = AspModel::load(&p).unwrap();
    assert_eq!(back, a.model);
    // saving the loaded model reproduces the file byte for byte
    let again = dir.path().join("again.json");
    back.save(&again).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&again).unwrap());

    let tuned = fine_tune(&back, &ex, &cfg, 0.1).unwrap();
    assert_eq!(tuned.model.version, back.version + 1);
}

#[test]
fn predictions_are_probabilities_for_every_action() {
    let ds = small_dataset();
    let ex = encode(&ds).unwrap();
    assert!(ex.iter().all(|e| e.dense.len() == IMAGE_DIM));
    let m = train(&ex, &TrainConfig { max_epochs: 3, ..TrainConfig::default() }, false).unwrap().model;
    let s = &ds.samples[0];
    for a in ActionId::ALL {
        let p = predict(&m, &ds.images[s.image], s.u, s.v, a).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    assert!(predict(&m, &ds.images[s.image], 10_000, 0, ActionId::Dl).is_err());
}

#[test]
fn single_class_and_empty_sets_are_refused() {
    let mut ex = toy(10, IMAGE_DIM, 9);
    assert!(matches!(train(&[], &TrainConfig::default(), false), Err(Error::EmptyInput(_))));
    ex.iter_mut().for_each(|e| e.label = 1.0);
    assert!(train(&ex, &TrainConfig::default(), false).is_err());
    let cfg = TrainConfig { max_epochs: 2, ..TrainConfig::default() };
    assert!(train(&ex, &cfg, true).is_ok());
}
