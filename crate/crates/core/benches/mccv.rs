use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cvdtr::sim::{gen_single_stage, single_stage_loss, single_stage_matching, ScenarioParams};
use cvdtr::{half_and_half, run_mccv_with, ContrastTask, Execution, HalfMode, SplitPlan, TreeParams};

fn task(n: usize) -> ContrastTask {
    let sim = gen_single_stage(n, &ScenarioParams::D, 7).expect("simulated data");
    ContrastTask::matching_on(sim.data, &single_stage_matching()).expect("matching covariates")
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn mccv(c: &mut Criterion) {
    let loss = single_stage_loss(TreeParams::honest_pruned());
    let plan = SplitPlan::new(0.2, 20, 1);
    let mut g = c.benchmark_group("mccv_j20");
    g.sample_size(10);
    for n in [200, 1000] {
        let t = task(n);
        for (name, exec) in modes() {
            g.bench_with_input(BenchmarkId::new(name, n), &t, |b, t| {
                b.iter(|| run_mccv_with(black_box(t), &plan, &loss, exec).expect("mccv"))
            });
        }
    }
    g.finish();
}

fn halving(c: &mut Criterion) {
    let loss = single_stage_loss(TreeParams::honest_pruned());
    let plan = SplitPlan::new(0.2, 10, 1);
    let t = task(400);
    let mut g = c.benchmark_group("half_and_half_b8_j10");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| half_and_half(black_box(&t), &plan, &loss, 8, HalfMode::SameQ, exec).expect("halving"))
        });
    }
    g.finish();
}

criterion_group!(benches, mccv, halving);
criterion_main!(benches);
