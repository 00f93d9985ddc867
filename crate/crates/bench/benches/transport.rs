use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use nirsim_core::harness::ABDOMEN_MU_S_SCALE;
use nirsim_core::tissue::{build_abdomen_scene, build_phantom_scene, AbdomenConfig, PhantomConfig};
use nirsim_core::transport::{
    hg_cos_theta, photon_rng, simulate_with_workers, ProbeLayout, TransportConfig,
};
use nirsim_core::MediaLibrary;
use std::hint::black_box;

const PHOTONS: u64 = 20_000;

fn abdomen(c: &mut Criterion) {
    let lib = MediaLibrary::builtin().with_mu_s_scale(ABDOMEN_MU_S_SCALE);
    let scene = build_abdomen_scene(&AbdomenConfig::default(), &lib).unwrap();
    let probe = ProbeLayout::single_pair(4.0, 970.0);
    let mut group = c.benchmark_group("abdomen");
    group
        .sample_size(10)
        .throughput(Throughput::Elements(PHOTONS));
    for workers in [1, 4] {
        group.bench_with_input(BenchmarkId::new("workers", workers), &workers, |b, &w| {
            let cfg = TransportConfig::new(PHOTONS, 1);
            b.iter(|| simulate_with_workers(&scene, &probe, &cfg, Some(w)).unwrap())
        });
    }
    group.finish();
}

fn phantom(c: &mut Criterion) {
    let lib = MediaLibrary::builtin();
    let scene = build_phantom_scene(300.0, &PhantomConfig::default(), &lib).unwrap();
    let probe = ProbeLayout::single_pair(4.0, 970.0);
    let cfg = TransportConfig::new(PHOTONS, 1);
    let mut group = c.benchmark_group("phantom");
    group
        .sample_size(10)
        .throughput(Throughput::Elements(PHOTONS));
    group.bench_function("300ml", |b| {
        b.iter(|| simulate_with_workers(&scene, &probe, &cfg, Some(1)).unwrap())
    });
    group.finish();
}

fn phase_function(c: &mut Criterion) {
    let mut rng = photon_rng(3, 0);
    c.bench_function("hg_cos_theta", |b| {
        b.iter(|| hg_cos_theta(black_box(0.9), &mut rng))
    });
}

criterion_group!(benches, abdomen, phantom, phase_function);
criterion_main!(benches);
