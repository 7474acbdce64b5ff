use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ioc_core::experiments::generate;
use ioc_core::sampling::{random_problems, InstanceSpec};
use ioc_core::{par, EstimatorOptions, LqProblem, OnlineEstimator, ParameterNormalization, SolverOptions, Trajectory};

fn final_rank((p, traj): &(LqProblem, Trajectory)) -> usize {
    let est = OnlineEstimator::new(
        p.model().unwrap(),
        p.constraints.clone(),
        ParameterNormalization::default(),
        EstimatorOptions::default(),
    )
    .unwrap();
    est.run_final(traj).unwrap().1.qbar_rank
}

fn many_trajectories(c: &mut Criterion) {
    let spec = InstanceSpec::default().constrained().with_horizons(100..=200);
    let mut group = c.benchmark_group("estimate_many");
    group.sample_size(20);
    for count in [16usize, 64] {
        let work: Vec<(LqProblem, Trajectory)> = random_problems(11, count, &spec)
            .unwrap()
            .into_iter()
            .map(|p| {
                let traj = generate(&p, &SolverOptions::default()).unwrap();
                (p, traj)
            })
            .collect();
        group.bench_with_input(BenchmarkId::new("parallel", count), &work, |b, w| {
            b.iter(|| par::map(w, final_rank))
        });
        group.bench_with_input(BenchmarkId::new("sequential", count), &work, |b, w| {
            b.iter(|| par::map_sequential(w, final_rank))
        });
    }
    group.finish();
}

fn generate_many(c: &mut Criterion) {
    let spec = InstanceSpec::default().constrained().with_horizons(50..=100);
    let problems = random_problems(12, 32, &spec).unwrap();
    let solve = |p: &LqProblem| generate(p, &SolverOptions::default()).unwrap().len();
    let mut group = c.benchmark_group("generate_many");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| par::map(&problems, solve)));
    group.bench_function("sequential", |b| b.iter(|| par::map_sequential(&problems, solve)));
    group.finish();
}

criterion_group!(benches, many_trajectories, generate_many);
criterion_main!(benches);
