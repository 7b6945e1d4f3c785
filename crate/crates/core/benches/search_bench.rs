use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use opsched_core::scenario::{generate, GenParams};
use opsched_core::search::{coordinate_descent, SearchConfig};
use opsched_core::sim::{simulate, ScenarioConfig};
use opsched_core::PointerMatrix;

fn bench_scenario(ops_per_model: usize) -> (Vec<opsched_core::ModelGraph>, opsched_core::CostModel)
{
    generate(&GenParams {
        seed: 42,
        models: 3,
        ops_per_model,
        ..GenParams::default()
    })
}

fn bench_simulate(c: &mut Criterion) {
    let (models, cost) = bench_scenario(64);
    let config = ScenarioConfig::default();
    let pointers = PointerMatrix::empty(models.len());
    c.bench_function("simulate/3x64", |b| {
        b.iter(|| simulate(&models, &pointers, &cost, &config).unwrap())
    });
}

/// One full search at a small round budget. Run `cargo bench` and
/// `cargo bench --no-default-features` to compare the rayon-backed and
/// sequential candidate evaluation; criterion's saved baselines line the
/// two up by benchmark name.
fn bench_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("coordinate_descent");
    for &ops in &[16usize, 48] {
        let (models, cost) = bench_scenario(ops);
        let config = ScenarioConfig {
            t_sw: 1,
            ..ScenarioConfig::default()
        };
        let search = SearchConfig {
            rounds: 2,
            max_pointers: 3,
            ..SearchConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(ops), &ops, |b, _| {
            b.iter(|| coordinate_descent(&models, &cost, &config, &search).unwrap())
        });
    }
    group.finish();
}

#[cfg(feature = "parallel")]
fn bench_thread_scaling(c: &mut Criterion) {
    let (models, cost) = bench_scenario(48);
    let config = ScenarioConfig {
        t_sw: 1,
        ..ScenarioConfig::default()
    };
    let search = SearchConfig {
        rounds: 2,
        max_pointers: 3,
        ..SearchConfig::default()
    };
    let mut group = c.benchmark_group("search_threads");
    for &threads in &[1usize, 0] {
        let label = if threads == 0 { "all".to_string() } else { threads.to_string() };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(label), &threads, |b, _| {
            b.iter(|| pool.install(|| coordinate_descent(&models, &cost, &config, &search).unwrap()))
        });
    }
    group.finish();
}

#[cfg(not(feature = "parallel"))]
fn bench_thread_scaling(_c: &mut Criterion) {}

criterion_group!(benches, bench_simulate, bench_search, bench_thread_scaling);
criterion_main!(benches);
