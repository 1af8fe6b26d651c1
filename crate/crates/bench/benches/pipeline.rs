use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use uwas_core::array::GeometryPreset;
use uwas_core::doa::{coarray_music, model_covariance};
use uwas_core::harness::{ExperimentConfig, Simulation};
use uwas_core::plan::BandPlan;

fn config(samples_per_slot: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        slots: 1_000_000,
        ..ExperimentConfig::default()
    };
    cfg.plan.samples_per_slot = samples_per_slot;
    cfg
}

fn slot_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("slot");
    group.sample_size(20);
    for n in [1024, 4096] {
        let cfg = config(n);
        group.bench_function(format!("step_{n}"), |b| {
            b.iter_batched_ref(
                || Simulation::new(&cfg, 1, 10.0).unwrap(),
                |sim| sim.step().unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn coarray(c: &mut Criterion) {
    let plan = BandPlan::reference();
    let geometry = GeometryPreset::Sparse4.build(&plan);
    let carrier = plan.transmit_hz();
    let r = model_covariance(
        &geometry,
        &[
            (42.0, carrier, 1.0),
            (87.0, carrier, 1.0),
            (145.0, carrier, 1.0),
        ],
        0.1,
    );
    c.bench_function("coarray_music_4sparse", |b| {
        b.iter(|| coarray_music(&r, &geometry, carrier, 3).unwrap())
    });
}

criterion_group!(benches, slot_pipeline, coarray);
criterion_main!(benches);
