//! Cross-checks between independently written simulators.

use coalsim_core::chains::{haplotype_chain_lambda, haplotype_chain_with, LambdaChainOptions};
use coalsim_core::coalescent::{simulate_coalescent_with, CoalescentRates};
use coalsim_core::forward::{forward_event_rate, run_population, simulate_forward_with};
use coalsim_core::lookdown::{run_fixation_line, run_lookdown_types, JumpRule, LdStream, LineRates};
use coalsim_core::stats::{chi_square_two_sample, ks_one_sample, ks_two_sample, simplex_marginal_cdf};
use coalsim_core::trajectory::RunOptions;
use coalsim_core::urn::{particle_step, sample_d_k, sample_p_b, GrowthLaw, LambdaGrowth, LambdaUrnLaw};
use coalsim_core::{run_replicates, LambdaMeasure};
use rand::Rng;

fn beta_half() -> LambdaMeasure {
    LambdaMeasure::beta(0.5, 1.5).unwrap()
}

fn histogram(xs: &[u64], len: usize) -> Vec<u64> {
    let mut h = vec![0u64; len];
    for &x in xs {
        h[(x as usize).min(len - 1)] += 1;
    }
    h
}

#[test]
fn extinction_and_coalescence_times_agree() {
    for (i, lambda) in [LambdaMeasure::kingman(1.0), beta_half()].iter().enumerate() {
        let n = 20;
        let rates = CoalescentRates::new(lambda, n).unwrap();
        let fwd = forward_event_rate(lambda, n).unwrap();
        let opts = RunOptions::times_only();
        let back = run_replicates(100 + i as u64, 4000, |rng, _| simulate_coalescent_with(&rates, &opts, rng));
        let fore = run_replicates(200 + i as u64, 4000, |rng, _| run_population(&fwd, n, &opts, rng).0);
        for k in [2, 5, 12] {
            let a: Vec<f64> = back.iter().map(|r| r.level_time(k).unwrap()).collect();
            let b: Vec<f64> = fore.iter().map(|r| r.level_time(k).unwrap()).collect();
            let rep = ks_two_sample(&a, &b).unwrap();
            assert!(rep.passed(), "measure {i}, k={k}: {rep:?}");
        }
    }
}

#[test]
fn block_and_allele_counts_agree_at_fixed_time() {
    let lambda = beta_half();
    let n = 15;
    let t = 0.3;
    let rates = CoalescentRates::new(&lambda, n).unwrap();
    let fwd = forward_event_rate(&lambda, n).unwrap();
    let opts = RunOptions::times_only();
    let a: Vec<u64> = run_replicates(1, 5000, |rng, _| simulate_coalescent_with(&rates, &opts, rng).count_at(t));
    let b: Vec<u64> = run_replicates(2, 5000, |rng, _| run_population(&fwd, n, &opts, rng).0.count_at(t));
    let rep = chi_square_two_sample(&histogram(&a, n as usize + 1), &histogram(&b, n as usize + 1)).unwrap();
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn lookdown_types_match_forward_allele_counts() {
    let lambda = beta_half();
    let n = 12;
    let t = 0.4;
    let stream = LdStream::new(&lambda, n).unwrap();
    let fwd = forward_event_rate(&lambda, n).unwrap();
    let ld: Vec<u64> = run_replicates(3, 5000, |rng, _| run_lookdown_types(&stream, t, rng).distinct_at(t) as u64);
    let fw: Vec<u64> =
        run_replicates(4, 5000, |rng, _| run_population(&fwd, n, &RunOptions::times_only(), rng).0.count_at(t));
    let rep = chi_square_two_sample(&histogram(&ld, n as usize + 1), &histogram(&fw, n as usize + 1)).unwrap();
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn order_preserving_line_exits_at_coalescence_time() {
    let lambda = beta_half();
    let n = 20;
    let lines = LineRates::new(&lambda, n).unwrap();
    let rates = CoalescentRates::new(&lambda, n).unwrap();
    for k in [2u64, 6] {
        let exits: Vec<f64> = run_replicates(5 + k, 4000, |rng, _| {
            run_fixation_line(&lines, k, JumpRule::OrderPreserving, rng).exit_time
        });
        let times: Vec<f64> = run_replicates(50 + k, 4000, |rng, _| {
            simulate_coalescent_with(&rates, &RunOptions::times_only(), rng).level_time(k).unwrap()
        });
        let rep = ks_two_sample(&exits, &times).unwrap();
        assert!(rep.passed(), "k={k}: {rep:?}");
    }
}

#[test]
fn lookdown_growth_is_the_line_jump_one_level_up() {
    let lambda = beta_half();
    let law = LambdaGrowth::with_law(&lambda, 100, LambdaUrnLaw::Lookdown).unwrap();
    let lines = LineRates::new(&lambda, 1000).unwrap();
    for l in [1u64, 4, 9] {
        let urn: Vec<u64> = run_replicates(7 + l, 50_000, |rng, _| law.sample(l, rng));
        let line: Vec<u64> = run_replicates(70 + l, 50_000, |rng, _| {
            let path = run_fixation_line(&lines, l + 1, JumpRule::OrderPreserving, rng);
            path.steps[1].1 - (l + 1)
        });
        let rep = chi_square_two_sample(&histogram(&urn, 30), &histogram(&line, 30)).unwrap();
        assert!(rep.passed(), "l={l}: {rep:?}");
    }
    let kingman = LambdaGrowth::with_law(&LambdaMeasure::kingman(2.0), 100, LambdaUrnLaw::Lookdown).unwrap();
    let mut rng = coalsim_core::replicate_rng(9, 0);
    assert!((1..50).all(|l| kingman.sample(l, &mut rng) == 1));
}

/// Allele frequencies among the first `n` particles once the particle
/// system from one ball of each of `colors` colors holds at least `n`.
fn particle_frequencies<G: GrowthLaw, R: Rng>(law: &G, colors: usize, n: usize, rng: &mut R) -> f64 {
    let mut v = sample_p_b(&vec![1; colors], rng).unwrap();
    while v.colors.len() < n {
        v = particle_step(&v, law, rng).unwrap();
    }
    let mut counts = vec![0u64; colors];
    for &c in &v.colors[..n] {
        counts[c as usize] += 1;
    }
    *counts.iter().max().unwrap() as f64 / n as f64
}

#[test]
fn lookdown_particle_system_reproduces_finite_population_haplotypes() {
    let lambda = beta_half();
    let n = 100u64;
    let k = 4;
    let fw: Vec<f64> = run_replicates(11, 4000, |rng, _| {
        simulate_forward_with(&lambda, n, &RunOptions::only(vec![k]), rng).unwrap().snapshot(k).unwrap().max()
    });
    let law = LambdaGrowth::with_law(&lambda, 1000, LambdaUrnLaw::Lookdown).unwrap();
    let ps: Vec<f64> = run_replicates(12, 4000, |rng, _| particle_frequencies(&law, (k - 1) as usize, n as usize, rng));
    let rep = ks_two_sample(&fw, &ps).unwrap();
    assert!(rep.passed(), "{rep:?}");
    // growing by the merger size alone misses events that push the line up
    // without reshuffling the window, and the gap is large
    let merger = LambdaGrowth::with_law(&lambda, 1000, LambdaUrnLaw::MergerSize).unwrap();
    let ms: Vec<f64> =
        run_replicates(13, 4000, |rng, _| particle_frequencies(&merger, (k - 1) as usize, n as usize, rng));
    let rep = ks_two_sample(&fw, &ms).unwrap();
    assert!(rep.p_value < 1e-6, "{rep:?}");
}

#[test]
fn lambda_chain_marginal_is_the_urn_limit() {
    let lambda = beta_half();
    let law = LambdaGrowth::with_law(&lambda, 10_000, LambdaUrnLaw::Lookdown).unwrap();
    let opts = LambdaChainOptions { m_cut: 10_000, ..Default::default() };
    let chain: Vec<f64> =
        run_replicates(14, 2000, |rng, _| haplotype_chain_with(&law, 5, &opts, rng).unwrap().at(4).unwrap().max());
    let direct: Vec<f64> = run_replicates(15, 2000, |rng, _| sample_d_k(&law, 3, 10_000, rng).unwrap().max());
    let rep = ks_two_sample(&chain, &direct).unwrap();
    assert!(rep.passed(), "{rep:?}");
    let mut rng = coalsim_core::replicate_rng(16, 0);
    let run = haplotype_chain_lambda(&lambda, 5, 2000, &mut rng).unwrap();
    assert_eq!(run.m_cut, Some(2000));
}

#[test]
fn kingman_haplotype_snapshot_is_uniform_on_the_simplex() {
    let n = 200;
    let k = 5;
    let lambda = LambdaMeasure::kingman(1.0);
    let xs: Vec<f64> = run_replicates(17, 3000, |rng, i| {
        let p = simulate_forward_with(&lambda, n, &RunOptions::only(vec![k]), rng).unwrap().snapshot(k).unwrap();
        p[i % p.len()]
    });
    let rep = ks_one_sample(&xs, simplex_marginal_cdf((k - 1) as usize)).unwrap();
    assert!(rep.passed(), "{rep:?}");
}
