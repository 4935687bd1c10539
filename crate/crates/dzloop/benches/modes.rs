//! Compares the data-parallel and forced-sequential execution modes on the
//! two workloads that dominate real runs: a three-insertion tree-operator
//! sweep and the loop-equation solve.
//!
//! The operator context memoizes everything it touches, so the tree-action
//! benchmark rebuilds it per iteration; otherwise every sample after the
//! first would measure cache lookups.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use dzloop::diffpoly::DiffPoly;
use dzloop::frobenius::FrobeniusModel;
use dzloop::kdv::KdVTable;
use dzloop::operators::{tree_operator_action, OpCtx};
use dzloop::par::force_sequential;
use std::hint::black_box;

fn genus2_poly() -> DiffPoly {
    KdVTable::up_to(2).expect("genus-2 solve").get(2).realize().clone()
}

fn bench_tree_action(c: &mut Criterion) {
    let f2 = genus2_poly();
    let mut group = c.benchmark_group("tree-action-g2");
    group.sample_size(10);
    for (mode, sequential) in [("parallel", false), ("sequential", true)] {
        group.bench_function(mode, |b| {
            b.iter_batched(
                || {
                    force_sequential(sequential);
                    OpCtx::new(FrobeniusModel::point())
                },
                |ctx| black_box(tree_operator_action(&ctx, &[(1, 2), (1, 2), (1, 2)], &f2)),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
    force_sequential(false);
}

fn bench_loop_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("loop-solve-g3");
    group.sample_size(10);
    for (mode, sequential) in [("parallel", false), ("sequential", true)] {
        group.bench_function(mode, |b| {
            b.iter(|| {
                force_sequential(sequential);
                black_box(KdVTable::up_to(3).expect("genus-3 solve"))
            })
        });
    }
    group.finish();
    force_sequential(false);
}

criterion_group!(modes, bench_tree_action, bench_loop_solve);
criterion_main!(modes);
