//! Benchmarks for the toolchain's hot paths: proof checking, normalization,
//! cut elimination, and bounded search.
//!
//! Inputs are generated deterministically (fixed seeds over the sample
//! signature), so numbers are comparable across runs and machines.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use flafol_core::gen::{generate_cut_instances, generate_random_proofs, sample_signature};
use flafol_core::kernel::check_proof;
use flafol_core::search::{bounded_prove, SearchConfig, SearchOutcome};
use flafol_core::surface::parse_sequent;
use flafol_core::transform::{eliminate_cut, normalize};

fn bench_check(c: &mut Criterion) {
    let sig = sample_signature();
    let cfg = SearchConfig::with_signature_constants(&sig, 6);
    let proofs = generate_random_proofs(&sig, &cfg, 11, 50);
    c.bench_function("check 50 generated proofs", |b| {
        b.iter(|| {
            for p in &proofs {
                assert!(check_proof(&sig, black_box(p)).is_valid());
            }
        })
    });
}

fn bench_normalize(c: &mut Criterion) {
    let sig = sample_signature();
    let cfg = SearchConfig::with_signature_constants(&sig, 6);
    let proofs = generate_random_proofs(&sig, &cfg, 12, 20);
    c.bench_function("normalize 20 generated proofs", |b| {
        b.iter(|| {
            for p in &proofs {
                black_box(normalize(&sig, black_box(p)).expect("in the supported fragment"));
            }
        })
    });
}

fn bench_cut(c: &mut Criterion) {
    let sig = sample_signature();
    let cfg = SearchConfig::with_signature_constants(&sig, 5);
    let cuts = generate_cut_instances(&sig, &cfg, 13, 10);
    c.bench_function("eliminate 10 cuts", |b| {
        b.iter(|| {
            for cut in &cuts {
                black_box(
                    eliminate_cut(&sig, &cut.left, &cut.right, cut.index)
                        .expect("generated cuts eliminate"),
                );
            }
        })
    });
}

fn bench_search(c: &mut Criterion) {
    let sig = sample_signature();
    let cfg = SearchConfig::with_signature_constants(&sig, 6);
    let seq = parse_sequent(
        &sig,
        "Owns(Alice) & Owns(Bob) @ <L1>, flows(L1, L2) @ <L2> |- Owns(Bob) @ <L1>",
    )
    .expect("benchmark sequent parses");
    c.bench_function("bounded search, depth 6", |b| {
        b.iter(|| {
            let out = bounded_prove(&sig, black_box(&seq), &cfg);
            assert!(matches!(out, SearchOutcome::Found(_)));
        })
    });
}

criterion_group!(benches, bench_check, bench_normalize, bench_cut, bench_search);
criterion_main!(benches);
