use std::hint::black_box;

use coalsim_core::chains::{haplotype_chain_binary, haplotype_chain_with, LambdaChainOptions};
use coalsim_core::coalescent::{simulate_coalescent_with, CoalescentRates};
use coalsim_core::forward::{forward_event_rate, run_population};
use coalsim_core::lookdown::{run_fixation_line, JumpRule, LineRates};
use coalsim_core::trajectory::RunOptions;
use coalsim_core::urn::{run_urn_to_limit, LambdaGrowth, LambdaUrnLaw};
use coalsim_core::{replicate_rng, LambdaMeasure};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn measures() -> Vec<(&'static str, LambdaMeasure)> {
    vec![("kingman", LambdaMeasure::kingman(1.0)), ("beta", LambdaMeasure::beta(0.5, 1.5).unwrap())]
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for (name, lambda) in measures() {
        for n in [50u64, 500] {
            let rates = forward_event_rate(&lambda, n).unwrap();
            let opts = RunOptions::default();
            let mut rng = replicate_rng(1, 0);
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| black_box(run_population(&rates, n, &opts, &mut rng)))
            });
        }
    }
    group.finish();
}

fn coalescent(c: &mut Criterion) {
    let mut group = c.benchmark_group("coalescent");
    for (name, lambda) in measures() {
        for n in [50u64, 500] {
            let rates = CoalescentRates::new(&lambda, n).unwrap();
            let opts = RunOptions::default();
            let mut rng = replicate_rng(2, 0);
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| black_box(simulate_coalescent_with(&rates, &opts, &mut rng)))
            });
        }
    }
    group.finish();
}

fn fixation_line(c: &mut Criterion) {
    let mut group = c.benchmark_group("fixation_line");
    for (name, lambda) in measures() {
        let rates = LineRates::new(&lambda, 200).unwrap();
        let mut rng = replicate_rng(3, 0);
        group.bench_function(name, |b| {
            b.iter(|| black_box(run_fixation_line(&rates, 10, JumpRule::HitCount, &mut rng)))
        });
    }
    group.finish();
}

fn urn(c: &mut Criterion) {
    let mut group = c.benchmark_group("urn_to_limit");
    group.sample_size(20);
    for (name, lambda) in measures() {
        let m_cut = 10_000;
        let law = LambdaGrowth::new(&lambda, m_cut).unwrap();
        let mut rng = replicate_rng(4, 0);
        group.bench_function(name, |b| b.iter(|| black_box(run_urn_to_limit(&law, &[1, 1, 1], m_cut, &mut rng))));
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let mut group = c.benchmark_group("haplotype_chain");
    group.sample_size(20);
    let mut rng = replicate_rng(5, 0);
    group.bench_function("binary_k6", |b| b.iter(|| black_box(haplotype_chain_binary(6, &mut rng))));
    let lambda = LambdaMeasure::beta(0.5, 1.5).unwrap();
    let opts = LambdaChainOptions { m_cut: 10_000, ..Default::default() };
    let law = LambdaGrowth::with_law(&lambda, opts.m_cut, LambdaUrnLaw::Lookdown).unwrap();
    group.bench_function("beta_k6", |b| b.iter(|| black_box(haplotype_chain_with(&law, 6, &opts, &mut rng))));
    group.finish();
}

criterion_group!(benches, forward, coalescent, fixation_line, urn, chains);
criterion_main!(benches);
