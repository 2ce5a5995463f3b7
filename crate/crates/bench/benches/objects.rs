use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ril_bench::mdp;
use ril_core::mdp::enumerate_lassos;
use ril_core::objects::fingerprint;
use ril_core::{ObjectKind, ObjectParams, Resolution};
use std::hint::black_box;

fn fingerprints(c: &mut Criterion) {
    let params = ObjectParams::default();
    let m = mdp(2, 6, 4, 0.9);
    let mut g = c.benchmark_group("fingerprint");
    for kind in [
        ObjectKind::QStar,
        ObjectKind::MCEPolicy,
        ObjectKind::TrajDistBoltzmann,
        ObjectKind::ReturnFragments,
        ObjectKind::ReturnTrajectories,
        ObjectKind::NoiselessCmpTrajectories,
        ObjectKind::LotteryOrder,
    ] {
        g.bench_with_input(BenchmarkId::from_parameter(kind), &m, |b, m| {
            b.iter(|| fingerprint(black_box(m), kind, &params))
        });
    }
    g.finish();
}

fn lassos(c: &mut Criterion) {
    let r = Resolution::default();
    let mut g = c.benchmark_group("enumerate_lassos");
    for states in [3, 6] {
        let m = mdp(3, states, 4, 0.9);
        g.bench_with_input(BenchmarkId::from_parameter(states), &m, |b, m| {
            b.iter(|| enumerate_lassos(black_box(m), r.prefix_cap, r.cycle_cap, r.enumeration_cap))
        });
    }
    g.finish();
}

criterion_group!(benches, fingerprints, lassos);
criterion_main!(benches);
