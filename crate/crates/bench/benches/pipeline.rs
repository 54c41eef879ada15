use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use riskflow_bench::{city, city_params, dataset, ingest};
use riskflow_core::features::{assemble_dataset, AssembleOptions};
use riskflow_core::model::{ForestParams, GbtParams, GradientBoosting, RandomForest};
use riskflow_core::risk::build_risk_table;
use riskflow_core::synth::generate_city;
use riskflow_core::TimeInterval;

fn synth(c: &mut Criterion) {
    let p = city_params(12, 300);
    c.bench_function("synth/12x12", |b| b.iter(|| generate_city(black_box(&p)).unwrap()));
}

fn features(c: &mut Criterion) {
    let inputs = ingest(&city(12, 300));
    c.bench_function("risk_table/12x12", |b| {
        b.iter(|| build_risk_table(black_box(&inputs.cc), &inputs.od, &inputs.train).unwrap())
    });
    let rt = build_risk_table(&inputs.cc, &inputs.od, &inputs.train).unwrap();
    let mut group = c.benchmark_group("assemble/12x12");
    group.sample_size(10);
    let opts = AssembleOptions::new(inputs.train.clone());
    group.bench_function("leave_month_out", |b| {
        b.iter(|| {
            assemble_dataset(&inputs.cc, &inputs.od, &inputs.venues, &rt, &inputs.grid, black_box(&opts)).unwrap()
        })
    });
    group.finish();
}

fn models(c: &mut Criterion) {
    let ds = dataset(&ingest(&city(12, 300))).interval(TimeInterval::Night);
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    let fp = ForestParams { n_trees: 20, ..Default::default() };
    group.bench_function("forest_20_trees", |b| b.iter(|| RandomForest::fit(&ds.x, &ds.y, black_box(&fp)).unwrap()));
    let gp = GbtParams { rounds: 50, ..Default::default() };
    group.bench_function("boosted_50_rounds", |b| {
        b.iter(|| GradientBoosting::fit(&ds.x, &ds.y, black_box(&gp)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, synth, features, models);
criterion_main!(benches);
