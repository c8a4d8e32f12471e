//! Data-parallel hot paths under the rayon backend and on one thread.
//!
//! `cargo bench` runs each workload on the global rayon pool and inside a
//! one-thread pool; `cargo bench --no-default-features` runs the plain
//! sequential build under the id `sequential`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wirepick::asp::{encode, Example, Mlp, IMAGE_DIM, N_ACTIONS};
use wirepick::grasp::detect_grasps;
use wirepick::scene::{generate_scene, render_depth};
use wirepick::sim::{generate_dataset, DatasetConfig, SimConfig};

fn backends() -> Vec<(&'static str, Box<dyn Fn(&mut (dyn FnMut() + Send))>)> {
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
        vec![
            ("rayon", Box::new(|f: &mut (dyn FnMut() + Send)| f())),
            ("rayon-1-thread", Box::new(move |f: &mut (dyn FnMut() + Send)| one.install(f))),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential", Box::new(|f: &mut (dyn FnMut() + Send)| f()))]
    }
}

fn fge(c: &mut Criterion) {
    let sim = SimConfig::default();
    let scene = generate_scene(&sim.spec_with(12), 1).unwrap();
    let depth = render_depth(&scene, (128, 128), 3.0).unwrap();
    let template = sim.template().unwrap();
    let mut g = c.benchmark_group("detect_grasps_128px_8_orientations");
    for (name, run) in backends() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                black_box(detect_grasps(&depth, &template, 8, 10, &sim.fge).unwrap());
            }))
        });
    }
    g.finish();
}

fn gradient(c: &mut Criterion) {
    let net = Mlp::new(IMAGE_DIM, N_ACTIONS, &[256, 64], 1);
    let mut r = wirepick::rng::rng(2);
    let batch: Vec<Example> = (0..64)
        .map(|i| Example {
            dense: (0..IMAGE_DIM).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect(),
            hot: i % N_ACTIONS,
            label: (i % 2) as f64,
        })
        .collect();
    let refs: Vec<&Example> = batch.iter().collect();
    let mut g = c.benchmark_group("loss_and_gradient_batch_64");
    for (name, run) in backends() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                black_box(net.loss_and_gradient(&refs));
            }))
        });
    }
    g.finish();
}

fn featurize(c: &mut Criterion) {
    let sim = SimConfig::default();
    let ds = generate_dataset(&DatasetConfig { n_samples: 140, ..DatasetConfig::default() }, &sim, 3).unwrap();
    let mut g = c.benchmark_group("encode_140_samples");
    for (name, run) in backends() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&mut || {
                black_box(encode(&ds).unwrap());
            }))
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = fge, gradient, featurize
}
criterion_main!(benches);
