use cosmoplan_bench::{room_missions, warehouse};
use cosmoplan_core::automata::sync_product;
use cosmoplan_core::mission::{decompose, learn_assumption, verify_rule};
use criterion::{criterion_group, criterion_main, Criterion};

fn automata(c: &mut Criterion) {
    let (_, g, al) = warehouse();
    let locals = decompose(&g, &al).unwrap();
    c.bench_function("decompose/warehouse", |b| b.iter(|| decompose(&g, &al).unwrap()));
    c.bench_function("learn_assumption/warehouse", |b| {
        b.iter(|| learn_assumption(&locals[0], &g, &locals[1], None).unwrap())
    });
    c.bench_function("verify_rule/warehouse", |b| b.iter(|| verify_rule(&locals, &g).unwrap()));

    let room = room_missions();
    c.bench_function("sync_product/room4", |b| b.iter(|| sync_product(&room[..4]).unwrap()));
}

criterion_group!(benches, automata);
criterion_main!(benches);
