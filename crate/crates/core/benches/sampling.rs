use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use binsis::parallel::log_weights_sequential;
use binsis::{Heuristic, MarginPair, Sampler, SamplerConfig};

fn regular(m: usize, k: usize) -> MarginPair {
    MarginPair::new(vec![k; m], vec![k; m]).unwrap()
}

fn single_draw(c: &mut Criterion) {
    let mut group = c.benchmark_group("single_draw");
    for m in [50usize, 100, 200] {
        let sampler = Sampler::new(&regular(m, 4), None, SamplerConfig::default()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &sampler, |b, s| {
            let mut k = 0;
            b.iter(|| {
                k += 1;
                s.sample_indexed(1, k).unwrap().log_q
            })
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_256");
    group.sample_size(10);
    let finch = MarginPair::new(
        vec![14, 13, 14, 10, 12, 2, 10, 1, 10, 11, 6, 2, 17],
        vec![4, 4, 11, 10, 10, 8, 9, 10, 8, 9, 3, 10, 4, 7, 9, 3, 3],
    )
    .unwrap();
    let cases = [("finch", finch), ("regular_100x100", regular(100, 8))];
    for (name, mp) in cases {
        let sampler = Sampler::new(&mp, None, SamplerConfig::with_heuristic(Heuristic::Cgm)).unwrap();
        group.bench_with_input(BenchmarkId::new("sequential", name), &sampler, |b, s| {
            b.iter(|| log_weights_sequential(s, 7, 256).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", name), &sampler, |b, s| {
            b.iter(|| binsis::parallel::map_indices_parallel(256, |k| s.sample_indexed(7, k).map(|d| d.log_q)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, single_draw, batch);
criterion_main!(benches);
