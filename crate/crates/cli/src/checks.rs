//! Verification checks and the suites that group them.
//!
//! Each check draws everything from streams derived from `(seed, check id)`.
//! A failing Monte Carlo check is repeated once on a fresh derived seed and
//! passes if either attempt does; exact checks run once.

use anyhow::{bail, Result};
use coalsim_core::chains::{haplotype_chain_binary, haplotype_chain_with, LambdaChainOptions};
use coalsim_core::coalescent::{is_pairwise_merge, simulate_coalescent_with, CoalescentRates};
use coalsim_core::forward::{forward_event_rate, run_population};
use coalsim_core::lambda::cdi_check;
use coalsim_core::lookdown::{run_fixation_line, simulate_lines, simulate_z_chain, JumpRule, LdStream, LineRates};
use coalsim_core::partition::coupon_collect;
use coalsim_core::stats::{
    bootstrap_covariance_se, chi_square_gof, chi_square_two_sample, correlation_test, covariance_compare,
    covariance_matrix, exact_check, ks_one_sample, ks_two_sample, mean_and_sd, mean_z_test, normal_two_sided,
    simplex_marginal_cdf, DEFAULT_ALPHA,
};
use coalsim_core::trajectory::RunOptions;
use coalsim_core::urn::{
    conditionally_uniform, degeneracy_probe, exact_enumerate, total_variation, urn_step, KingmanGrowth, LambdaGrowth,
    LambdaUrnLaw, Model, UrnState, DEFAULT_DEGENERACY_THRESHOLD, DEFAULT_M_CUT, DEFAULT_STATE_BOUND,
};
use coalsim_core::{
    derive_seed, replicate_rng, run_replicates, CdiVerdict, LambdaMeasure, MassPartition, TestReport, Trajectory,
};
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::output::{Attempt, CheckOutcome, SampleRow};

/// Outcome of one attempt at a check.
#[derive(Debug, Default)]
pub struct Trial {
    pub reports: Vec<TestReport>,
    pub data: Value,
    pub samples: Vec<SampleRow>,
}

impl Trial {
    fn sample(&mut self, series: &str, values: &[f64]) {
        self.samples.extend(values.iter().enumerate().map(|(index, &value)| SampleRow {
            series: series.to_string(),
            index,
            value,
        }));
    }

    fn histogram(&mut self, series: &str, counts: &[u64]) {
        let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        self.sample(series, &values);
    }

    fn passed(&self) -> bool {
        self.reports.iter().all(TestReport::passed)
    }
}

type CheckFn = fn(&ExperimentConfig, u64) -> Result<Trial>;

pub struct Check {
    pub id: &'static str,
    pub title: &'static str,
    /// Monte Carlo checks get one retry on a fresh seed.
    pub random: bool,
    pub exploratory: bool,
    run: CheckFn,
}

pub const SUITES: [&str; 9] = ["thm1", "thm2", "thm3", "thm4", "thm5", "prop2", "prop4", "prop5", "eq5"];

const fn check(id: &'static str, title: &'static str, random: bool, run: CheckFn) -> Check {
    Check { id, title, random, exploratory: false, run }
}

pub static CHECKS: [Check; 15] = [
    check("criterion-1", "extinction and coalescence times agree in law (binary)", true, extinction_marginals),
    check("criterion-2", "extinction process matches the block counting process jointly", true, extinction_process),
    check("criterion-3", "mean time to fixation is 2(1 - 1/N)", true, fixation_mean),
    check("criterion-4", "allele and block counts agree at a fixed time (Beta)", true, counts_at_time),
    check("criterion-5", "extinction and coalescence times agree in law (Beta)", true, beta_marginals),
    check("criterion-6", "ancestral partitions are uniform and merge pairwise", true, ancestral_partitions),
    check("criterion-7", "haplotype partitions match the binary limit chain", true, haplotype_binary),
    check("criterion-8", "haplotype partitions match the Lambda limit chain", true, haplotype_lambda),
    check("criterion-9", "urn and particle system agree exactly", false, intertwining),
    check("criterion-10", "Polya urn colour count is uniform", false, polya_uniform),
    check("criterion-11", "coming down from infinity classification", false, cdi_classification),
    check("criterion-12", "coupon collection counts are geometric", true, coupon_geometric),
    check("criterion-13", "look-down lines agree with the merger law and the Z-chain", true, lookdown_consistency),
    check("criterion-14", "Lambda-urn frequencies are martingales", true, urn_martingale),
    Check {
        id: "degeneracy-probe",
        title: "how often a Lambda-urn limit has a vanishing coordinate",
        random: true,
        exploratory: true,
        run: degeneracy,
    },
];

/// Check ids making up a suite (`None` for an unknown name).
pub fn suite_members(suite: &str) -> Option<&'static [&'static str]> {
    Some(match suite {
        "thm1" => &["criterion-1", "criterion-2", "criterion-3"],
        "thm2" => &["criterion-6"],
        "thm3" => &["criterion-7", "criterion-12"],
        "thm4" => &["criterion-4", "criterion-5", "criterion-13"],
        "thm5" => &["criterion-8"],
        "prop2" => &["criterion-14"],
        "prop4" => &["criterion-9", "criterion-10"],
        "prop5" => &["degeneracy-probe"],
        "eq5" => &["criterion-11"],
        _ => return None,
    })
}

pub fn find(id: &str) -> Option<&'static Check> {
    CHECKS.iter().find(|c| c.id == id)
}

/// Runs a check with the retry policy; returns the outcome and the samples
/// of the deciding attempt.
pub fn run_check(check: &Check, cfg: &ExperimentConfig, master_seed: u64) -> Result<(CheckOutcome, Vec<SampleRow>)> {
    let mut seed = derive_seed(master_seed, check.id);
    let mut attempts = Vec::new();
    let mut samples;
    loop {
        let mut trial = (check.run)(cfg, seed)?;
        for r in &mut trial.reports {
            *r = r.clone().with_metadata(check.id, seed);
        }
        let passed = trial.passed();
        samples = std::mem::take(&mut trial.samples);
        attempts.push(Attempt { seed, passed, reports: trial.reports, data: trial.data });
        if passed || !check.random || check.exploratory || attempts.len() == 2 {
            break;
        }
        seed = derive_seed(seed, "retry");
    }
    let passed = attempts.iter().any(|a| a.passed);
    let outcome = CheckOutcome {
        id: check.id.to_string(),
        title: check.title.to_string(),
        exploratory: check.exploratory,
        passed,
        attempts,
    };
    Ok((outcome, samples))
}

fn alpha(cfg: &ExperimentConfig) -> f64 {
    cfg.alpha.unwrap_or(DEFAULT_ALPHA)
}

/// Alpha under which a report passes exactly when `|z| < multiple`.
fn within_se(multiple: f64) -> f64 {
    normal_two_sided(multiple)
}

fn beta_half() -> LambdaMeasure {
    LambdaMeasure::beta(0.5, 1.5).expect("valid Beta measure")
}

fn block_counts(lambda: &LambdaMeasure, n: u64, reps: usize, opts: &RunOptions, seed: u64) -> Result<Vec<Trajectory>> {
    let rates = CoalescentRates::new(lambda, n)?;
    Ok(run_replicates(seed, reps, |rng, _| simulate_coalescent_with(&rates, opts, rng)))
}

fn allele_counts(lambda: &LambdaMeasure, n: u64, reps: usize, opts: &RunOptions, seed: u64) -> Result<Vec<Trajectory>> {
    let rates = forward_event_rate(lambda, n)?;
    Ok(run_replicates(seed, reps, |rng, _| run_population(&rates, n, opts, rng).0))
}

fn level_times(runs: &[Trajectory], k: u64) -> Vec<f64> {
    runs.iter().map(|r| r.level_time(k).expect("run reached level")).collect()
}

fn histogram(xs: impl IntoIterator<Item = u64>, len: usize) -> Vec<u64> {
    let mut h = vec![0u64; len];
    for x in xs {
        h[(x as usize).min(len - 1)] += 1;
    }
    h
}

fn mean(xs: &[f64]) -> f64 {
    mean_and_sd(xs).0
}

fn levels(cfg: &ExperimentConfig, n: u64, default: &[u64]) -> Result<Vec<u64>> {
    match &cfg.k {
        Some(ks) => {
            if let Some(k) = ks.iter().find(|&&k| !(2..=n).contains(&k)) {
                bail!("level k={k} outside 2..={n}");
            }
            Ok(ks.clone())
        }
        None => Ok(default.iter().copied().filter(|&k| k <= n).collect()),
    }
}

fn extinction_marginals(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(50);
    let reps = cfg.reps.unwrap_or(20_000);
    let ks = levels(cfg, n, &[2, 10, 25])?;
    let kingman = LambdaMeasure::kingman(1.0);
    let opts = RunOptions::times_only();
    let back = block_counts(&kingman, n, reps, &opts, derive_seed(seed, "coalescent"))?;
    let fore = allele_counts(&kingman, n, reps, &opts, derive_seed(seed, "forward"))?;
    let mut trial = Trial::default();
    let mut rows = Vec::new();
    for &k in &ks {
        let a = level_times(&back, k);
        let b = level_times(&fore, k);
        trial.reports.push(ks_two_sample(&a, &b)?.with_alpha(alpha(cfg)).named(format!("ks_two_sample T[k={k}]")));
        rows.push(json!({"k": k, "mean_coalescent": mean(&a), "mean_forward": mean(&b)}));
        trial.sample(&format!("coalescent T[k={k}]"), &a);
        trial.sample(&format!("forward T[k={k}]"), &b);
    }
    trial.data = json!({"n": n, "reps": reps, "levels": rows});
    Ok(trial)
}

fn extinction_process(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(50);
    if n < 10 {
        bail!("the joint comparison uses levels 2, 5 and 10 and needs n >= 10");
    }
    let reps = cfg.reps.unwrap_or(20_000);
    let ks = [2u64, 5, 10];
    let kingman = LambdaMeasure::kingman(1.0);
    let opts = RunOptions::times_only();
    let rows = |runs: &[Trajectory]| -> Vec<Vec<f64>> {
        runs.iter().map(|r| ks.iter().map(|&k| r.level_time(k).expect("level reached")).collect()).collect()
    };
    let back = rows(&block_counts(&kingman, n, reps, &opts, derive_seed(seed, "coalescent"))?);
    let fore = rows(&allele_counts(&kingman, n, reps, &opts, derive_seed(seed, "forward"))?);
    let (cb, cf) = (covariance_matrix(&back), covariance_matrix(&fore));
    let mut rng = replicate_rng(derive_seed(seed, "bootstrap"), 0);
    let se_b = bootstrap_covariance_se(&back, 200, &mut rng);
    let se_f = bootstrap_covariance_se(&fore, 200, &mut rng);
    let se: Vec<Vec<f64>> =
        se_b.iter().zip(&se_f).map(|(rb, rf)| rb.iter().zip(rf).map(|(x, y)| x.hypot(*y)).collect()).collect();
    let mut trial = Trial::default();
    trial.reports.push(covariance_compare(&cf, &cb, &se, 4.0)?.named("covariance_compare (T2, T5, T10)"));
    for (side, rows) in [("forward", &fore), ("coalescent", &back)] {
        for j in 0..ks.len() - 1 {
            let inc: Vec<f64> = rows.iter().map(|r| r[j] - r[j + 1]).collect();
            let past: Vec<f64> = rows.iter().map(|r| r[j + 1]).collect();
            let name = format!("correlation_test {side} T{}-T{} vs T{}", ks[j], ks[j + 1], ks[j + 1]);
            trial.reports.push(correlation_test(&inc, &past, 4.0)?.named(name));
        }
    }
    trial.data = json!({"n": n, "reps": reps, "levels": ks, "cov_forward": cf, "cov_coalescent": cb, "se": se});
    Ok(trial)
}

fn fixation_mean(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let ns = cfg.n.map_or_else(|| vec![10, 50], |n| vec![n]);
    let reps = cfg.reps.unwrap_or(100_000);
    let kingman = LambdaMeasure::kingman(1.0);
    let mut trial = Trial::default();
    let mut rows = Vec::new();
    for n in ns {
        let runs = allele_counts(&kingman, n, reps, &RunOptions::times_only(), derive_seed(seed, &format!("n={n}")))?;
        let xs = level_times(&runs, 2);
        let target = 2.0 * (1.0 - 1.0 / n as f64);
        let (m, sd) = mean_and_sd(&xs);
        trial
            .reports
            .push(mean_z_test(&xs, target)?.with_alpha(within_se(3.0)).named(format!("mean_z_test T[k=2] N={n}")));
        rows.push(json!({"n": n, "target": target, "mean": m, "se": sd / (reps as f64).sqrt()}));
    }
    trial.data = json!({"reps": reps, "populations": rows});
    Ok(trial)
}

fn counts_at_time(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(30);
    let t = cfg.t.unwrap_or(0.3);
    let reps = cfg.reps.unwrap_or(20_000);
    let lambda = beta_half();
    let opts = RunOptions::times_only();
    let len = n as usize + 1;
    let a = histogram(
        block_counts(&lambda, n, reps, &opts, derive_seed(seed, "coalescent"))?.iter().map(|r| r.count_at(t)),
        len,
    );
    let b = histogram(
        allele_counts(&lambda, n, reps, &opts, derive_seed(seed, "forward"))?.iter().map(|r| r.count_at(t)),
        len,
    );
    let mut trial = Trial::default();
    trial.reports.push(
        chi_square_two_sample(&a, &b)?.with_alpha(alpha(cfg)).named(format!("chi_square_two_sample count at t={t}")),
    );
    trial.histogram("coalescent blocks at t", &a);
    trial.histogram("forward alleles at t", &b);
    trial.data = json!({"n": n, "t": t, "reps": reps, "measure": lambda});
    Ok(trial)
}

fn beta_marginals(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(30);
    let reps = cfg.reps.unwrap_or(20_000);
    let ks = levels(cfg, n, &[2, 5])?;
    let lambda = beta_half();
    let opts = RunOptions::times_only();
    let back = block_counts(&lambda, n, reps, &opts, derive_seed(seed, "coalescent"))?;
    let fore = allele_counts(&lambda, n, reps, &opts, derive_seed(seed, "forward"))?;
    let mut trial = Trial::default();
    let mut rows = Vec::new();
    for &k in &ks {
        let a = level_times(&back, k);
        let b = level_times(&fore, k);
        trial.reports.push(ks_two_sample(&a, &b)?.with_alpha(alpha(cfg)).named(format!("ks_two_sample T[k={k}]")));
        rows.push(json!({"k": k, "mean_coalescent": mean(&a), "mean_forward": mean(&b)}));
        trial.sample(&format!("coalescent T[k={k}]"), &a);
        trial.sample(&format!("forward T[k={k}]"), &b);
    }
    trial.data = json!({"n": n, "reps": reps, "measure": lambda, "levels": rows});
    Ok(trial)
}

/// Snapshot level for the partition checks (first `--k`, else 5).
fn snapshot_level(cfg: &ExperimentConfig, n: u64) -> Result<u64> {
    let k = cfg.k.as_ref().and_then(|ks| ks.first().copied()).unwrap_or(5);
    if !(3..=n).contains(&k) {
        bail!("partition checks need 3 <= k <= n, got k={k}, n={n}");
    }
    Ok(k)
}

fn random_coordinate<R: Rng>(counts: &[u64], n: u64, rng: &mut R) -> f64 {
    counts[rng.random_range(0..counts.len())] as f64 / n as f64
}

fn ancestral_partitions(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(500);
    let reps = cfg.reps.unwrap_or(10_000);
    let k = snapshot_level(cfg, n)?;
    let rates = CoalescentRates::new(&LambdaMeasure::kingman(1.0), n)?;
    let opts = RunOptions::only(vec![k - 1, k]);
    let runs: Vec<(f64, bool)> = run_replicates(seed, reps, |rng, _| {
        let rec = simulate_coalescent_with(&rates, &opts, rng);
        let (at_k, below) = (&rec.snapshots[&k], &rec.snapshots[&(k - 1)]);
        (random_coordinate(at_k, n, rng), is_pairwise_merge(at_k, below))
    });
    let xs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let bad = runs.iter().filter(|r| !r.1).count();
    let mut trial = Trial::default();
    trial.reports.push(
        ks_one_sample(&xs, simplex_marginal_cdf((k - 1) as usize))?
            .with_alpha(alpha(cfg))
            .named(format!("ks_one_sample coordinate of pi[k={k}] vs Beta(1,{})", k - 2)),
    );
    trial.reports.push(exact_check(&format!("pairwise merge from k={k} to k={}", k - 1), bad, reps));
    trial.sample(&format!("coordinate of pi[k={k}]"), &xs);
    trial.data = json!({"n": n, "k": k, "reps": reps, "non_pairwise": bad});
    Ok(trial)
}

fn haplotype_binary(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(500);
    let reps = cfg.reps.unwrap_or(10_000);
    let k = snapshot_level(cfg, n)?;
    let rates = forward_event_rate(&LambdaMeasure::kingman(1.0), n)?;
    let opts = RunOptions::only(vec![k - 1, k]);
    let runs: Vec<(f64, f64)> = run_replicates(derive_seed(seed, "forward"), reps, |rng, _| {
        let rec = run_population(&rates, n, &opts, rng).0;
        let x = random_coordinate(&rec.snapshots[&k], n, rng);
        (x, rec.snapshot(k - 1).expect("level reached").max())
    });
    let chain = run_replicates(derive_seed(seed, "chain"), reps, |rng, _| {
        haplotype_chain_binary(k, rng).map(|run| run.at(k - 1).map(MassPartition::max).expect("chain covers level"))
    })
    .into_iter()
    .collect::<coalsim_core::Result<Vec<f64>>>()?;
    let xs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let largest: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let mut trial = Trial::default();
    trial.reports.push(
        ks_one_sample(&xs, simplex_marginal_cdf((k - 1) as usize))?
            .with_alpha(alpha(cfg))
            .named(format!("ks_one_sample coordinate of pi_hat[k={k}] vs Beta(1,{})", k - 2)),
    );
    trial.reports.push(
        ks_two_sample(&largest, &chain)?
            .with_alpha(alpha(cfg))
            .named(format!("ks_two_sample largest of pi_hat[k={}] vs binary chain", k - 1)),
    );
    trial.sample(&format!("coordinate of pi_hat[k={k}]"), &xs);
    trial.sample(&format!("forward largest of pi_hat[k={}]", k - 1), &largest);
    trial.sample(&format!("chain largest of pi_hat[k={}]", k - 1), &chain);
    trial.data = json!({"n": n, "k": k, "reps": reps, "mean_largest_forward": mean(&largest), "mean_largest_chain": mean(&chain)});
    Ok(trial)
}

fn haplotype_lambda(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let n = cfg.n.unwrap_or(300);
    let reps = cfg.reps.unwrap_or(5_000);
    let m_cut = cfg.m_cut.unwrap_or(DEFAULT_M_CUT);
    let start = 6u64;
    let level = 4u64;
    let lambda = beta_half();
    let rates = forward_event_rate(&lambda, n)?;
    let opts = RunOptions::only(vec![level]);
    let fore: Vec<f64> = run_replicates(derive_seed(seed, "forward"), reps, |rng, _| {
        run_population(&rates, n, &opts, rng).0.snapshot(level).expect("level reached").max()
    });
    let law = LambdaGrowth::with_law(&lambda, m_cut, LambdaUrnLaw::Lookdown)?;
    let chain_opts = LambdaChainOptions { m_cut, ..Default::default() };
    let chain = run_replicates(derive_seed(seed, "chain"), reps, |rng, _| {
        haplotype_chain_with(&law, start, &chain_opts, rng)
            .map(|run| run.at(level).map(MassPartition::max).expect("chain covers level"))
    })
    .into_iter()
    .collect::<coalsim_core::Result<Vec<f64>>>()?;
    let mut trial = Trial::default();
    trial.reports.push(
        ks_two_sample(&fore, &chain)?
            .with_alpha(alpha(cfg))
            .named(format!("ks_two_sample largest of pi_hat[k={level}] vs Lambda chain from K={start}")),
    );
    trial.sample(&format!("forward largest of pi_hat[k={level}]"), &fore);
    trial.sample(&format!("chain largest of pi_hat[k={level}]"), &chain);
    trial.data = json!({
        "n": n, "start": start, "level": level, "m_cut": m_cut, "reps": reps, "measure": lambda,
        "urn_law": LambdaUrnLaw::Lookdown,
        "mean_largest_forward": mean(&fore), "mean_largest_chain": mean(&chain),
    });
    Ok(trial)
}

fn intertwining(_cfg: &ExperimentConfig, _seed: u64) -> Result<Trial> {
    let initial = [1u64, 1];
    let mut tv_nonzero = 0;
    let mut not_uniform = 0;
    let mut rows = Vec::new();
    for steps in 1..=4 {
        let urn = exact_enumerate(Model::Urn, &KingmanGrowth, &initial, steps, DEFAULT_STATE_BOUND)?;
        let particles = exact_enumerate(Model::Particle, &KingmanGrowth, &initial, steps, DEFAULT_STATE_BOUND)?;
        let tv = total_variation(&urn.counts, &particles.counts);
        let uniform = conditionally_uniform(&particles);
        tv_nonzero += usize::from(!tv.is_zero());
        not_uniform += usize::from(!uniform);
        rows.push(json!({"steps": steps, "total_variation": tv.to_string(), "conditionally_uniform": uniform}));
    }
    let mut trial = Trial::default();
    trial.reports.push(exact_check("total variation between urn and particle counts is 0", tv_nonzero, 4));
    trial.reports.push(exact_check("arrangements uniform given counts", not_uniform, 4));
    trial.data = json!({"initial": initial, "steps": rows});
    Ok(trial)
}

fn polya_uniform(_cfg: &ExperimentConfig, _seed: u64) -> Result<Trial> {
    let law = exact_enumerate(Model::Urn, &KingmanGrowth, &[1, 1], 5, DEFAULT_STATE_BOUND)?;
    let sixth = BigRational::new(1.into(), 6.into());
    let zero = BigRational::zero();
    let probs: Vec<BigRational> =
        (1..=6u64).map(|j| law.counts.get(&vec![j, 7 - j]).unwrap_or(&zero).clone()).collect();
    let off = probs.iter().filter(|p| **p != sixth).count() + usize::from(law.counts.len() != 6);
    let mut trial = Trial::default();
    trial.reports.push(exact_check("colour-1 count after 5 steps is uniform on 1..=6", off, 6));
    trial.data = json!({"probabilities": probs.iter().map(ToString::to_string).collect::<Vec<_>>()});
    Ok(trial)
}

fn cdi_classification(_cfg: &ExperimentConfig, _seed: u64) -> Result<Trial> {
    let cases = [
        ("kingman", LambdaMeasure::kingman(1.0), CdiVerdict::Cdi),
        ("uniform", LambdaMeasure::uniform(), CdiVerdict::NotCdi),
        ("beta(0.5,1.5)", beta_half(), CdiVerdict::Cdi),
    ];
    let mut trial = Trial::default();
    let mut rows = Vec::new();
    for (name, lambda, expected) in cases {
        let (verdict, diag) = cdi_check(&lambda)?;
        trial.reports.push(exact_check(&format!("cdi verdict for {name}"), usize::from(verdict != expected), 1));
        rows.push(json!({
            "measure": name, "verdict": verdict, "expected": expected,
            "gamma_asymptotic": diag.gamma_asymptotic, "tail_ratio": diag.tail_ratio,
        }));
    }
    trial.data = json!({"cases": rows});
    Ok(trial)
}

fn coupon_geometric(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let reps = cfg.reps.unwrap_or(1_000_000);
    let m = MassPartition::new(vec![0.5, 0.5])?;
    let draws = run_replicates(seed, reps, |rng, _| coupon_collect(&m, rng).map(|c| (c.counts[0], c.total_draws)))
        .into_iter()
        .collect::<coalsim_core::Result<Vec<(u64, u64)>>>()?;
    // cells j = 1..=9 and j >= 10
    let cells = 10usize;
    let observed = histogram(draws.iter().map(|d| d.0 - 1), cells);
    let expected: Vec<f64> = (1..=cells).map(|j| 0.5f64.powi(j.min(cells - 1) as i32)).collect();
    let totals: Vec<f64> = draws.iter().map(|d| d.1 as f64).collect();
    let mut trial = Trial::default();
    trial
        .reports
        .push(chi_square_gof(&observed, &expected)?.with_alpha(alpha(cfg)).named("chi_square_gof count vs 2^-j"));
    trial.reports.push(mean_z_test(&totals, 3.0)?.with_alpha(within_se(3.0)).named("mean_z_test total draws vs 3"));
    trial.histogram("count histogram j=1..9, >=10", &observed);
    trial.data = json!({"reps": reps, "mean_total_draws": mean(&totals)});
    Ok(trial)
}

fn lookdown_consistency(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let jumps = cfg.reps.unwrap_or(100_000);
    let level = 10u64;
    let lambda = beta_half();
    let pmf = lambda.y_n_pmf(level)?;
    let expected: Vec<f64> = (1..level).map(|v| pmf.prob(v)).collect();
    let cells = (level - 1) as usize;
    let mut trial = Trial::default();

    let lines = LineRates::new(&lambda, 2 * level)?;
    let line_jumps: Vec<u64> = run_replicates(derive_seed(seed, "line"), jumps, |rng, _| {
        run_fixation_line(&lines, level, JumpRule::HitCount, rng).steps[1].1 - level
    });
    let line_hist = histogram(line_jumps.into_iter().map(|j| j - 1), cells);
    trial.reports.push(
        chi_square_gof(&line_hist, &expected)?
            .with_alpha(alpha(cfg))
            .named(format!("chi_square_gof line jump at l={level}")),
    );

    // the same jumps read off an event stream on more levels
    let stream = LdStream::new(&lambda, 3 * level)?;
    let mut rng = replicate_rng(derive_seed(seed, "stream"), 0);
    let mut stream_hist = vec![0u64; cells];
    let (mut t, mut seen) = (0.0, 0);
    while seen < jumps {
        let ev = stream.next_event(t, &mut rng);
        t = ev.t;
        let hits = ev.levels.iter().filter(|&&l| l <= level).count();
        if hits >= 2 {
            stream_hist[hits - 2] += 1;
            seen += 1;
        }
    }
    trial.reports.push(
        chi_square_gof(&stream_hist, &expected)?
            .with_alpha(alpha(cfg))
            .named(format!("chi_square_gof hits in [{level}] on a {}-level stream", 3 * level)),
    );

    let (n, k) = (20u64, 5u64);
    let kingman = LambdaMeasure::kingman(1.0);
    let z = run_replicates(derive_seed(seed, "z-chain"), jumps, |rng, _| {
        simulate_z_chain(&kingman, k, n, rng).map(|z| z.r)
    })
    .into_iter()
    .collect::<coalsim_core::Result<Vec<u64>>>()?;
    let stream = LdStream::new(&kingman, n)?;
    let measured = run_replicates(derive_seed(seed, "lines"), jumps, |rng, _| {
        simulate_lines(&stream, &[k - 1, k], rng).map(|l| l[0].level_at(l[1].exit_time))
    })
    .into_iter()
    .collect::<coalsim_core::Result<Vec<u64>>>()?;
    let len = n as usize + 1;
    let (z_hist, ld_hist) = (histogram(z, len), histogram(measured, len));
    trial.reports.push(
        chi_square_two_sample(&z_hist, &ld_hist)?
            .with_alpha(alpha(cfg))
            .named(format!("chi_square_two_sample R[N={n},k={k}]")),
    );
    trial.histogram("line jump histogram", &line_hist);
    trial.histogram("stream hit histogram", &stream_hist);
    trial.histogram("Z-chain R histogram", &z_hist);
    trial.histogram("look-down R histogram", &ld_hist);
    trial.data = json!({"level": level, "jumps": jumps, "expected": expected, "n": n, "k": k});
    Ok(trial)
}

fn urn_martingale(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let steps = cfg.reps.unwrap_or(100_000);
    let initial = vec![1u64, 1, 1];
    let mut trial = Trial::default();
    let mut rows = Vec::new();
    for (name, lambda) in [("kingman", LambdaMeasure::kingman(1.0)), ("beta(0.5,1.5)", beta_half())] {
        let law = LambdaGrowth::new(&lambda, 4096)?;
        // replicate i records the step out of the state reached after i mod 10 steps
        let incs = run_replicates(derive_seed(seed, name), steps, |rng, i| -> coalsim_core::Result<Vec<f64>> {
            let mut s = UrnState::new(initial.clone())?;
            for _ in 0..i % 10 {
                s = urn_step(&s, &law, rng)?;
            }
            let next = urn_step(&s, &law, rng)?;
            let (a, b) = (s.frequencies(), next.frequencies());
            Ok((0..initial.len()).map(|c| b[c] - a[c]).collect())
        })
        .into_iter()
        .collect::<coalsim_core::Result<Vec<Vec<f64>>>>()?;
        for c in 0..initial.len() {
            let xs: Vec<f64> = incs.iter().map(|v| v[c]).collect();
            let (m, sd) = mean_and_sd(&xs);
            trial.reports.push(
                mean_z_test(&xs, 0.0)?
                    .with_alpha(within_se(3.0))
                    .named(format!("mean_z_test increment {name} colour {c}")),
            );
            rows.push(json!({"measure": name, "colour": c, "mean": m, "se": sd / (steps as f64).sqrt()}));
        }
    }
    trial.data = json!({"steps": steps, "initial": initial, "increments": rows});
    Ok(trial)
}

fn degeneracy(cfg: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let k = cfg.k.as_ref().and_then(|ks| ks.first().copied()).unwrap_or(5) as usize;
    let m_cut = cfg.m_cut.unwrap_or(DEFAULT_M_CUT);
    let reps = cfg.reps.unwrap_or(200);
    let lambda = beta_half();
    let mut trial = Trial::default();
    let mut rows = Vec::new();
    for law in [LambdaUrnLaw::MergerSize, LambdaUrnLaw::Lookdown] {
        let label = serde_json::to_value(law)?.as_str().unwrap_or_default().to_string();
        let r =
            degeneracy_probe(&lambda, law, k, m_cut, reps, DEFAULT_DEGENERACY_THRESHOLD, derive_seed(seed, &label))?;
        trial.sample(&format!("{label} smallest coordinate"), &r.min_freqs);
        rows.push(json!({
            "urn_law": law, "k": r.k, "m_cut": r.m_cut, "threshold": r.threshold, "reps": r.reps,
            "fraction": r.fraction, "interval": r.interval,
        }));
    }
    trial.data = json!({"measure": lambda, "probes": rows});
    Ok(trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_cover_every_check_once() {
        let mut ids: Vec<&str> = SUITES.iter().flat_map(|s| suite_members(s).unwrap().iter().copied()).collect();
        ids.sort();
        let mut all: Vec<&str> = CHECKS.iter().map(|c| c.id).collect();
        all.sort();
        assert_eq!(ids, all);
        assert!(suite_members("thm9").is_none());
        assert!(SUITES.iter().flat_map(|s| suite_members(s).unwrap()).all(|id| find(id).is_some()));
    }

    #[test]
    fn exact_checks_pass_without_retry() {
        let cfg = ExperimentConfig::default();
        for id in ["criterion-9", "criterion-10"] {
            let (out, _) = run_check(find(id).unwrap(), &cfg, 1).unwrap();
            assert!(out.passed, "{id}");
            assert_eq!(out.attempts.len(), 1);
        }
    }

    #[test]
    fn small_runs_are_reproducible() {
        let cfg = ExperimentConfig { reps: Some(300), ..Default::default() };
        let check = find("criterion-12").unwrap();
        let (a, sa) = run_check(check, &cfg, 5).unwrap();
        let (b, sb) = run_check(check, &cfg, 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(sa, sb);
        let (c, _) = run_check(check, &cfg, 6).unwrap();
        assert_ne!(a.attempts[0].seed, c.attempts[0].seed);
    }

    #[test]
    fn out_of_range_levels_are_rejected() {
        let cfg = ExperimentConfig { n: Some(10), k: Some(vec![12]), reps: Some(50), ..Default::default() };
        assert!(run_check(find("criterion-1").unwrap(), &cfg, 1).is_err());
    }
}
