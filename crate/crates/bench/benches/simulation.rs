use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qrelay_core::interference::{dip_profile, fit_gaussian_dip, visibility_map};
use qrelay_core::link::{sweep, LinkModel, LinkParams};
use qrelay_core::montecarlo::{expected_counts, simulate, Scenario};
use qrelay_core::statistics::HeraldModel;
use qrelay_core::units::Picoseconds;

fn monte_carlo(c: &mut Criterion) {
    let ch = Scenario::idealized(0.05, 0.02).channels().unwrap();
    c.bench_function("simulate 1e6 gated pulses", |b| {
        b.iter(|| simulate(&ch, black_box(0.5), 1_000_000, 1, 0))
    });
    let bench = Scenario::bench().channels().unwrap();
    c.bench_function("simulate 1e8 bench pulses", |b| {
        b.iter(|| simulate(&bench, black_box(0.5), 100_000_000, 1, 0))
    });
    c.bench_function("expected counts", |b| {
        b.iter(|| expected_counts(&bench, black_box(0.9)))
    });
}

fn analytic(c: &mut Criterion) {
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.005).collect();
    let herald = HeraldModel::vanishing_efficiency();
    c.bench_function("visibility map 20x20", |b| {
        b.iter(|| visibility_map(black_box(&grid), &grid, Some(&herald)).unwrap())
    });
    let positions: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.5).collect();
    let samples = dip_profile(0.5, Picoseconds(20.0), 100.0, &positions).unwrap().samples;
    c.bench_function("gaussian dip fit", |b| {
        b.iter(|| fit_gaussian_dip(black_box(&samples)).unwrap())
    });
}

fn link(c: &mut Criterion) {
    let params = LinkParams::default();
    let models = [
        LinkModel::direct(),
        LinkModel::standard_relay(),
        LinkModel::folded_relay_lossless(),
        LinkModel::folded_relay(),
    ];
    let distances: Vec<f64> = (0..=250).map(|i| i as f64 * 2.0).collect();
    c.bench_function("key-rate sweep", |b| {
        b.iter(|| sweep(black_box(&models), &params, &distances).unwrap())
    });
}

criterion_group!(benches, monte_carlo, analytic, link);
criterion_main!(benches);
