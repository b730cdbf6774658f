//! Sequential vs data-parallel batch work: fixture synthesis, evaluation and
//! one training epoch (per-sample gradients). Both modes produce identical
//! numbers; only the schedule differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use m3_core::datasets::{synth_samples, Composition, FixtureKey, SynthSpec};
use m3_core::exec::Exec;
use m3_core::harness::{predict, train, Sample, Selection, TrainConfig};
use m3_core::predictor::{FeatureSource, PredictorParams};
use m3_core::protocol::Aspect;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn spec(count: usize) -> SynthSpec {
    SynthSpec { count, len: 32, width: 64, seed: 3, ..SynthSpec::default() }
}

fn samples(count: usize) -> Vec<Sample> {
    let key = FixtureKey::new(Aspect::Quality, Composition::WithDesc, FeatureSource::Logits);
    synth_samples(&spec(count), Exec::Parallel)
        .unwrap()
        .into_iter()
        .map(|s| Sample { seq: s.fixtures[&key].clone(), id: s.id, y: s.score })
        .collect()
}

fn bench_synth(c: &mut Criterion) {
    let mut g = c.benchmark_group("synth_samples");
    g.throughput(Throughput::Elements(512));
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| synth_samples(&spec(512), exec).unwrap()));
    }
    g.finish();
}

fn bench_predict(c: &mut Criterion) {
    let data = samples(256);
    let cfg = TrainConfig::synthetic(64);
    let params = PredictorParams::<f32>::init(&cfg.predictor, 1).unwrap();
    let mut g = c.benchmark_group("predict");
    g.throughput(Throughput::Elements(data.len() as u64));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &data, |b, d| {
            b.iter(|| predict(&params, d, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_epoch(c: &mut Criterion) {
    let data = samples(128);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 32,
        selection: Selection::LastEpoch,
        ..TrainConfig::synthetic(64)
    };
    let mut g = c.benchmark_group("train_epoch");
    g.sample_size(10);
    g.throughput(Throughput::Elements(data.len() as u64));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &data, |b, d| {
            b.iter(|| train(&cfg, d, &[], None, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_synth, bench_predict, bench_epoch);
criterion_main!(benches);
