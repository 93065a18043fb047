use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use matdist_core::builtin::{Graded, HomogPair, Implant};
use matdist_core::distributions::{fiber_report, grid_sweep};
use matdist_core::foliation::{trace_leaf, LeafVariant};
use matdist_core::grid::{BodyPoint, Grid};
use matdist_core::isomorph::find_isomorphism;
use matdist_core::law::{jet, jet_central_difference};
use matdist_core::mat3::Mat3;
use matdist_core::sampling::AnalysisConfig;

fn jets(c: &mut Criterion) {
    let law = Implant::default();
    let f = Mat3([[1.1, 0.2, 0.0], [0.1, 0.9, 0.3], [0.0, -0.2, 1.2]]);
    c.bench_function("jet_dual_implant", |b| {
        b.iter(|| jet(&law, 0.3, black_box(&[0.5, 0.0, 0.0]), &f))
    });
    c.bench_function("jet_fd_implant", |b| {
        b.iter(|| jet_central_difference(&law, 0.3, black_box(&[0.5, 0.0, 0.0]), &f))
    });
}

fn fibers(c: &mut Criterion) {
    let cfg = AnalysisConfig::default();
    c.bench_function("fiber_report_homog_pair", |b| {
        b.iter(|| fiber_report(&HomogPair, 0.5, black_box([0.1, 0.2, 0.3]), &cfg))
    });
    let grid = Grid::t_x1([0.0, 1.0], 3, [-1.0, 1.0], 3, 0.0, 0.0);
    c.bench_function("grid_sweep_graded_3x3", |b| {
        b.iter(|| grid_sweep(&Graded::default(), black_box(&grid), &cfg))
    });
}

fn searches(c: &mut Criterion) {
    let cfg = AnalysisConfig::default();
    let law = Implant::default();
    let (x, y) = (
        BodyPoint::new(0.0, [-0.5, 0.0, 0.0]),
        BodyPoint::new(0.0, [1.0, 0.0, 0.0]),
    );
    c.bench_function("find_isomorphism_implant", |b| {
        b.iter(|| find_isomorphism(&law, black_box(x), y, &cfg))
    });
    let seed = BodyPoint::new(0.0, [0.5, 0.0, 0.0]);
    c.bench_function("trace_leaf_graded_10_steps", |b| {
        b.iter(|| {
            trace_leaf(
                &Graded::default(),
                black_box(seed),
                LeafVariant::StateT,
                &[[0.0, 0.0, 1.0, 0.0]],
                10,
                1e-2,
                &cfg,
            )
        })
    });
}

criterion_group!(benches, jets, fibers, searches);
criterion_main!(benches);
