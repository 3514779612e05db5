use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use exo_core::bridge::{build_frames_with, decode_batch, encode_batch};
use exo_core::estimation::{quantize_states, synthetic_oracle, OracleConfig, ScenarioScript};
use exo_core::exec::Exec;
use exo_core::motion::{resample_with, FacingMode, FrameClock, InteractionAwareMotion};
use exo_core::sim::{replay_with, HumanoidModel, TargetSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn walk(seconds: f64) -> InteractionAwareMotion {
    let clock = FrameClock::new(24.0, (seconds * 24.0) as usize + 1).unwrap();
    let out = synthetic_oracle(
        &OracleConfig::new(ScenarioScript::walk_line()),
        clock,
        FacingMode::Front,
        &HumanoidModel::default(),
    )
    .unwrap();
    let states = quantize_states(&out.hands, 0.7, 0.3).unwrap();
    InteractionAwareMotion {
        body: out.body,
        hands: out.hands,
        states,
        source_fps: 24.0,
    }
}

fn bench_resample(c: &mut Criterion) {
    let m = walk(60.0);
    let mut g = c.benchmark_group("resample_24_to_50");
    g.throughput(Throughput::Elements(m.frame_count() as u64));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| resample_with(&m, 50.0, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_codec(c: &mut Criterion) {
    let m = walk(60.0);
    let frames = build_frames_with(&m, 50.0, &HumanoidModel::default().hand, Exec::Sequential).unwrap();
    let bytes = encode_batch(&frames, Exec::Sequential);
    let mut g = c.benchmark_group("codec");
    g.throughput(Throughput::Elements(frames.len() as u64));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("encode", name), &exec, |b, &exec| {
            b.iter(|| encode_batch(&frames, exec))
        });
        g.bench_with_input(BenchmarkId::new("decode", name), &exec, |b, &exec| {
            b.iter(|| decode_batch(&bytes, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_replay(c: &mut Criterion) {
    let m = walk(60.0);
    let model = HumanoidModel::default();
    let frames = build_frames_with(&m, 50.0, &model.hand, Exec::Sequential).unwrap();
    let spec = TargetSpec::default();
    let mut g = c.benchmark_group("replay");
    g.sample_size(20);
    g.throughput(Throughput::Elements(frames.len() as u64));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| replay_with(frames.iter().copied().map(Ok), &model, &spec, exec))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_resample, bench_codec, bench_replay);
criterion_main!(benches);
