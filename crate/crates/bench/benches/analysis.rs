use criterion::{criterion_group, criterion_main, Criterion};
use nirsim_core::analysis::{polyfit, t_test_two_tailed};
use nirsim_core::chain::{parse_session_str, write_session, AfeConfig};
use nirsim_core::harness::{analyze_frames, synth_session, AnalyzeConfig, SynthConfig};
use std::hint::black_box;

fn statistics(c: &mut Criterion) {
    let a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
    let b: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.53).cos() + 0.1).collect();
    c.bench_function("t_test_1000x1000", |bench| {
        bench.iter(|| t_test_two_tailed(black_box(&a), black_box(&b)).unwrap())
    });

    let xs: Vec<f64> = (0..500).map(|i| -3.0 + 6.0 * i as f64 / 499.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| x.powi(5) - 2.0 * x + (x * 40.0).sin() * 0.1)
        .collect();
    c.bench_function("polyfit_quintic_500", |bench| {
        bench.iter(|| polyfit(black_box(&xs), black_box(&ys), 5).unwrap())
    });
}

fn session(c: &mut Criterion) {
    let cfg = SynthConfig::default();
    let frames = synth_session(&cfg).unwrap();
    let mut buf = Vec::new();
    write_session(&mut buf, &frames).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let afe = AfeConfig::default();
    c.bench_function("parse_session", |b| {
        b.iter(|| parse_session_str(black_box(&text), "bench", &afe).unwrap())
    });
    let analysis = AnalyzeConfig {
        windows: cfg.windows(),
        ..AnalyzeConfig::default()
    };
    c.bench_function("analyze_session", |b| {
        b.iter(|| analyze_frames(black_box(&frames), "bench", &analysis).unwrap())
    });
}

criterion_group!(benches, statistics, session);
criterion_main!(benches);
