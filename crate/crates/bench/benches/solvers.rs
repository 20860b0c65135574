use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use carnot::algebra::heisenberg;
use carnot::deformation::{gk_member, FamilyIndex};
use carnot::filtration::n0_search;
use carnot::geodesics::{distance, exp_map, DistanceMethod, DistanceOptions};
use carnot_bench::{gk_covector, gk_target, heisenberg_covector, heisenberg_target};

fn exp_maps(c: &mut Criterion) {
    let h = heisenberg();
    let g = gk_member(FamilyIndex::Finite(2));
    let (hc, gc) = (heisenberg_covector(), gk_covector());
    c.bench_function("exp_map/heisenberg", |b| b.iter(|| exp_map(&h, black_box(&hc), 1.0).unwrap()));
    c.bench_function("exp_map/gk2", |b| b.iter(|| exp_map(&g, black_box(&gc), 1.0).unwrap()));
}

fn distances(c: &mut Criterion) {
    let h = heisenberg();
    let g = gk_member(FamilyIndex::Finite(2));
    let opts = DistanceOptions::default();
    let mut group = c.benchmark_group("distance");
    group.sample_size(10);
    for (name, sc, q) in [("heisenberg", &h, heisenberg_target()), ("gk2", &g, gk_target())] {
        let zero = sc.zero_point();
        group.bench_function(format!("shooting/{name}"), |b| {
            b.iter(|| distance(sc, &zero, black_box(&q), DistanceMethod::Shooting, &opts).unwrap())
        });
        group.bench_function(format!("control/{name}"), |b| {
            b.iter(|| distance(sc, &zero, black_box(&q), DistanceMethod::Control, &opts).unwrap())
        });
    }
    group.finish();
}

fn n0(c: &mut Criterion) {
    let mut group = c.benchmark_group("n0_search");
    group.sample_size(10);
    for (name, k) in [("gk2", FamilyIndex::Finite(2)), ("gk_inf", FamilyIndex::Infinite)] {
        let sc = gk_member(k);
        group.bench_function(name, |b| b.iter(|| n0_search(&sc, black_box(2000), 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, exp_maps, distances, n0);
criterion_main!(benches);
