use criterion::{criterion_group, criterion_main, Criterion};

use biosketch::analysis::{
    eer, gs_curve, score_distributions, unlinkability, GsConfig, Scenario, UnlinkConfig,
};
use biosketch::feature::synth_population;
use biosketch::pipeline::SketchPolicy;
use biosketch::{BitChannelModel, RsCode, RsCodeParams};

const POLICY: SketchPolicy = SketchPolicy::SystematicFallback;

fn bench_scores_and_eer(c: &mut Criterion) {
    let channel = BitChannelModel::uniform(512, 0.05, 0.5).unwrap();
    let population = synth_population(16, channel, 3).unwrap();

    let mut group = c.benchmark_group("verification");
    group.sample_size(20);
    group.bench_function("score_distributions_16x100", |b| {
        b.iter(|| score_distributions(&population, 256, 100, Scenario::StolenKey, 5).unwrap())
    });

    let scores = score_distributions(&population, 256, 400, Scenario::StolenKey, 5).unwrap();
    group.bench_function("eer_800_scores", |b| b.iter(|| eer(&scores).unwrap()));
    group.finish();
}

fn bench_gs_curve(c: &mut Criterion) {
    let channel = BitChannelModel::ramp(512, 0.05, 0.5).unwrap();
    let population = synth_population(12, channel, 3).unwrap();
    let cfg = GsConfig {
        code_n: 32,
        code_k_list: vec![3, 5, 7],
        scenario: Scenario::StolenKey,
        genuine_probes_per_subject: 4,
        impostor_probes: 60,
        policy: POLICY,
        seed: 9,
    };

    let mut group = c.benchmark_group("gs");
    group.sample_size(10);
    group.bench_function("gs_curve_12_subjects_3_codes", |b| {
        b.iter(|| gs_curve(&population, &cfg).unwrap())
    });
    group.finish();
}

fn bench_unlinkability(c: &mut Criterion) {
    let channel = BitChannelModel::uniform(512, 0.05, 0.5).unwrap();
    let population = synth_population(12, channel, 3).unwrap();
    let code = RsCode::new(RsCodeParams::new(32, 7)).unwrap();
    let cfg = UnlinkConfig {
        g: 256,
        num_databases: 2,
        bins: 30,
        omega: 1.0,
        policy: POLICY,
        max_non_mated: 400,
        seed: 11,
    };

    let mut group = c.benchmark_group("unlink");
    group.sample_size(10);
    group.bench_function("unlinkability_12_subjects_2_dbs", |b| {
        b.iter(|| unlinkability(&population, &code, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_scores_and_eer,
    bench_gs_curve,
    bench_unlinkability
);
criterion_main!(benches);
