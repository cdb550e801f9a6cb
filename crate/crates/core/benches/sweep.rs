use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nslab::exec::Exec;
use nslab::study::{run_lipschitz_study_with, LipschitzStudyConfig};

const CONFIG: &str = r#"{
  "problem": {
    "domain": {"X": 1.0, "T": 0.5},
    "grid": {"nx": 128, "nt": 256},
    "gas": {"nu": 1.0, "k": 1.0, "cV": 1.0, "lambda": 1.0},
    "bc": {"m": 3, "p0": 1.0, "pX": 1.0},
    "data": {"eta0": "1", "u0": "0.1*sin(pi*x)", "theta0": "1"},
    "N": 10
  },
  "family": {"eta0": "0.5*sin(2*pi*x)", "u0": "sin(pi*x)", "theta0": "0.5*cos(pi*x)"},
  "levels": 5
}"#;

fn sweep(c: &mut Criterion) {
    let cfg = LipschitzStudyConfig::from_json(CONFIG).unwrap();
    let mut group = c.benchmark_group("lipschitz_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_lipschitz_study_with(black_box(&cfg), Exec::Sequential).unwrap()));
    group.bench_function("default", |b| b.iter(|| run_lipschitz_study_with(black_box(&cfg), Exec::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
