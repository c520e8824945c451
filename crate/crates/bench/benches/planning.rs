use criterion::{black_box, criterion_group, criterion_main, Criterion};
use goagentnet_bench::Fixture;
use goagentnet_core::orchestrator::{plan, plan_bruteforce};

fn planning(c: &mut Criterion) {
    for bw in ["5MHz", "10MHz", "100MHz"] {
        let fixture = Fixture::canonical(bw);
        c.bench_function(&format!("plan/canonical/{bw}"), |b| b.iter(|| plan(black_box(&fixture.ctx())).unwrap()));
        c.bench_function(&format!("plan_bruteforce/canonical/{bw}"), |b| {
            b.iter(|| plan_bruteforce(black_box(&fixture.ctx())).unwrap())
        });
    }
}

criterion_group!(benches, planning);
criterion_main!(benches);
