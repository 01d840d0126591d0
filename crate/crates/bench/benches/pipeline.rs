use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use capkit_bench::{fixture, WORLDS};
use capkit_core::agents::AgentHandle;
use capkit_core::experiment::DEFAULT_TRACES;
use capkit_core::induction::induce;
use capkit_core::oracle::{check_realizability, StateGraph};
use capkit_core::query::resolve;

fn induction(c: &mut Criterion) {
    let mut g = c.benchmark_group("induce");
    for name in WORLDS {
        let f = fixture(name, DEFAULT_TRACES).expect("fixture");
        let transitions = f.harvest.transitions();
        g.bench_with_input(BenchmarkId::from_parameter(name), &transitions, |b, t| {
            b.iter(|| induce(&f.world.universe, black_box(t.clone())))
        });
    }
    g.finish();
}

fn queries(c: &mut Criterion) {
    let mut g = c.benchmark_group("resolve");
    g.sample_size(10);
    for name in WORLDS {
        let f = fixture(name, DEFAULT_TRACES).expect("fixture");
        let caps = induce(&f.world.universe, f.harvest.transitions()).caps;
        for (label, make) in [
            ("search", AgentHandle::search as fn() -> AgentHandle),
            ("policy", AgentHandle::policy),
        ] {
            g.bench_function(BenchmarkId::new(label, name), |b| {
                b.iter(|| {
                    resolve(&f.world, &f.harvest, &mut make(), black_box(caps.clone()))
                        .expect("resolve")
                })
            });
        }
    }
    g.finish();
}

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    let f = fixture("zelda4", DEFAULT_TRACES).expect("fixture");
    let model = resolve(
        &f.world,
        &f.harvest,
        &mut AgentHandle::search(),
        induce(&f.world.universe, f.harvest.transitions()).caps,
    )
    .expect("resolve")
    .model;
    g.bench_function("state-graph/zelda4", |b| {
        b.iter(|| StateGraph::build(black_box(&f.world), 500_000))
    });
    g.bench_function("realizability/zelda4", |b| {
        b.iter(|| check_realizability(&f.world, black_box(&model), 500_000))
    });
    g.finish();
}

criterion_group!(benches, induction, queries, oracles);
criterion_main!(benches);
