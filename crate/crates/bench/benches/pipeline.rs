use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use biosketch::feature::synth_population;
use biosketch::pipeline::{
    authenticate, enroll_with_retry, issue_key, select_bits, SketchPolicy,
};
use biosketch::{BitChannelModel, RsCode, RsCodeParams, TemplateStore};

const J: usize = 1024;
const POLICY: SketchPolicy = SketchPolicy::SystematicFallback;

fn bench_key_and_selection(c: &mut Criterion) {
    let channel = BitChannelModel::uniform(J, 0.05, 0.5).unwrap();
    let reliability = channel.reliability();
    let population = synth_population(1, channel, 41).unwrap();
    let feature = &population.references()[0];
    let g = RsCodeParams::new(96, 13).template_bits();

    c.bench_function("issue_key_768_of_1024", |b| {
        b.iter(|| issue_key(black_box(&reliability), g, 7).unwrap())
    });

    let key = issue_key(&reliability, g, 7).unwrap();
    c.bench_function("select_bits_768_of_1024", |b| {
        b.iter(|| select_bits(black_box(feature), &key).unwrap())
    });
}

fn bench_enroll(c: &mut Criterion) {
    let channel = BitChannelModel::uniform(J, 0.05, 0.5).unwrap();
    let reliability = channel.reliability();
    let population = synth_population(1, channel, 41).unwrap();
    let feature = &population.references()[0];
    let code = RsCode::new(RsCodeParams::new(96, 13)).unwrap();
    let g = code.params().template_bits();

    c.bench_function("enroll_96x13", |b| {
        b.iter_batched(
            || TemplateStore::new(code.params()),
            |mut store| {
                enroll_with_retry(
                    black_box(feature),
                    &reliability,
                    g,
                    &code,
                    &mut store,
                    "s0000",
                    7,
                    POLICY,
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_authenticate(c: &mut Criterion) {
    let channel = BitChannelModel::uniform(J, 0.05, 0.5).unwrap();
    let reliability = channel.reliability();
    let population = synth_population(1, channel, 41).unwrap();
    let feature = population.references()[0].clone();
    let code = RsCode::new(RsCodeParams::new(96, 13)).unwrap();
    let g = code.params().template_bits();

    let mut store = TemplateStore::new(code.params());
    let (key, _) =
        enroll_with_retry(&feature, &reliability, g, &code, &mut store, "s0000", 7, POLICY)
            .unwrap();
    let probe = population
        .sample_genuine("s0000", 1, 43)
        .unwrap()
        .pop()
        .unwrap();

    c.bench_function("authenticate_96x13", |b| {
        b.iter(|| authenticate(black_box(&probe), &key, &code, &store, "s0000", POLICY).unwrap())
    });
}

criterion_group!(
    benches,
    bench_key_and_selection,
    bench_enroll,
    bench_authenticate
);
criterion_main!(benches);
