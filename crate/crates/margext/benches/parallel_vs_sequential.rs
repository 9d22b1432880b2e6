//! Throughput comparison between the feature-gated parallel drivers and
//! their always-available sequential twins on identical seeded workloads.
//!
//! Both entry points return bitwise-identical results (the test suite pins
//! that); these benches quantify the scheduling difference on the two
//! batch-style surfaces: extremality classification over a batch of states,
//! and the randomized search for extremal non-maximally-entangled candidates.
//! Run with `cargo bench` (parallel driver enabled by default) — the
//! sequential baseline is measured in the same process for a like-for-like
//! comparison.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use margext::extremality::{batch_is_extremal_state, batch_is_extremal_state_sequential};
use margext::fixtures::{search_extremal_candidate, search_extremal_candidate_sequential};
use margext::sampling;
use margext::states::{BipartiteState, MarginalPair};
use margext::DEFAULT_TOL;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mixed batch of d = 3 states against maximally mixed marginals: half
/// maximally entangled projectors (extremal), half two-component Bell
/// mixtures (not extremal, witness construction included).
fn d3_batch(count: usize) -> Vec<BipartiteState> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    (0..count)
        .map(|k| {
            if k % 2 == 0 {
                sampling::random_max_entangled_projector(&mut rng, 3)
            } else {
                sampling::random_bell_mixture(&mut rng, 3, 2)
            }
        })
        .collect()
}

fn bench_batch_classification(c: &mut Criterion) {
    let marginals = MarginalPair::maximally_mixed(3);
    let mut group = c.benchmark_group("batch_is_extremal_state");
    for count in [8usize, 32] {
        let states = d3_batch(count);
        group.bench_function(format!("parallel/{count}"), |b| {
            b.iter_batched(
                || states.clone(),
                |s| batch_is_extremal_state(&s, &marginals, DEFAULT_TOL).unwrap(),
                BatchSize::SmallInput,
            )
        });
        group.bench_function(format!("sequential/{count}"), |b| {
            b.iter_batched(
                || states.clone(),
                |s| batch_is_extremal_state_sequential(&s, &marginals, DEFAULT_TOL).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_candidate_search(c: &mut Criterion) {
    // Seed chosen so the hit lands late enough that the search does real
    // work; both drivers must report the same lowest-index hit.
    let (d, ell, attempts, seed) = (3usize, 3usize, 200u64, 42u64);
    let expected = search_extremal_candidate_sequential(d, ell, attempts, seed)
        .unwrap()
        .expect("workload is known to contain a hit");
    let parallel_hit = search_extremal_candidate(d, ell, attempts, seed)
        .unwrap()
        .expect("workload is known to contain a hit");
    assert_eq!(expected.1.joint_rank, parallel_hit.1.joint_rank);

    let mut group = c.benchmark_group("search_extremal_candidate");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| search_extremal_candidate(d, ell, attempts, seed).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| search_extremal_candidate_sequential(d, ell, attempts, seed).unwrap())
    });
    group.finish();
}

fn bench_witness_pipeline(c: &mut Criterion) {
    // Witness construction dominates NotExtremal classifications; pin its
    // single-state cost so scheduler overhead can be separated from math.
    let marginals = MarginalPair::maximally_mixed(3);
    let mut rng = ChaCha8Rng::seed_from_u64(0xCAFE);
    let mixtures: Vec<BipartiteState> = (0..4)
        .map(|_| {
            let parts = 2 + rng.gen_range(0..2);
            sampling::random_bell_mixture(&mut rng, 3, parts)
        })
        .collect();
    let mut group = c.benchmark_group("witness_single_thread_unit");
    group.bench_function("sequential/4", |b| {
        b.iter_batched(
            || mixtures.clone(),
            |s| batch_is_extremal_state_sequential(&s, &marginals, DEFAULT_TOL).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_batch_classification,
    bench_candidate_search,
    bench_witness_pipeline
);
criterion_main!(benches);
