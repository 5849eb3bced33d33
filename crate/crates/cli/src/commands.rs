//! The subcommands. Each writes its CSV and `summary.json` into the output
//! directory and reports whether every verdict passed.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use coalsim_core::chains::{
    ancestral_chain, fragmentation_chain, haplotype_chain_binary, haplotype_chain_with, ChainKind, LambdaChainOptions,
};
use coalsim_core::coalescent::{simulate_coalescent_with, CoalescentRates};
use coalsim_core::forward::{forward_event_rate, run_population};
use coalsim_core::lambda::cdi_check;
use coalsim_core::lookdown::{run_fixation_line, LineRates};
use coalsim_core::stats::mean_and_sd;
use coalsim_core::trajectory::{RunOptions, SnapshotLevels};
use coalsim_core::urn::{run_urn_to_limit, KingmanGrowth, LambdaGrowth, LambdaUrnLaw, DEFAULT_M_CUT};
use coalsim_core::{run_replicates, LambdaMeasure, MassPartition, Trajectory};
use serde_json::json;

use crate::checks::{self, SUITES};
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{OutDir, PartitionRow, Summary, TrajectoryRow, PARTITION_HEADER, SAMPLE_HEADER, TRAJECTORY_HEADER};

pub const DEFAULT_OUT: &str = "coalsim-out";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Forward,
    Coalescent,
    Lookdown,
    Urn,
    Chain,
    Cdi,
    Verify(String),
}

impl Command {
    pub fn name(&self) -> &str {
        match self {
            Command::Forward => "forward",
            Command::Coalescent => "coalescent",
            Command::Lookdown => "lookdown",
            Command::Urn => "urn",
            Command::Chain => "chain",
            Command::Cdi => "cdi",
            Command::Verify(_) => "verify",
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub summaries: Vec<PathBuf>,
    /// One human-readable line per check or result.
    pub lines: Vec<String>,
}

pub fn run(cmd: &Command, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    match cmd {
        Command::Forward => population(cfg, &out, true),
        Command::Coalescent => population(cfg, &out, false),
        Command::Lookdown => lookdown(cfg, &out),
        Command::Urn => urn(cfg, &out),
        Command::Chain => chain(cfg, &out),
        Command::Cdi => cdi(cfg, &out),
        Command::Verify(suite) => verify(suite, cfg, &out),
    }
}

fn measure(cfg: &ExperimentConfig) -> Result<LambdaMeasure> {
    match cfg.scaled_lambda() {
        Some(m) => Ok(m?),
        None => bail!("a measure is required (--lambda or \"lambda\" in the config)"),
    }
}

fn population_size(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.n.ok_or_else(|| anyhow!("a population size is required (--n or \"n\" in the config)"))
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serialises")
}

fn finish(out: &OutDir, mut summary: Summary, artifacts: &[&str], lines: Vec<String>) -> Result<RunOutcome> {
    summary.artifacts = artifacts.iter().map(|s| s.to_string()).collect();
    summary.artifacts.push("summary.json".into());
    out.write_json("summary.json", &summary)?;
    Ok(RunOutcome { passed: summary.passed, summaries: vec![out.path("summary.json")], lines })
}

fn partition_rows(rep: usize, k: u64, p: &MassPartition) -> impl Iterator<Item = PartitionRow> + '_ {
    p.as_slice().iter().enumerate().map(move |(i, &frequency)| PartitionRow {
        replicate: rep,
        k,
        coordinate_index: i,
        frequency,
    })
}

/// `forward` (allele counts) or `coalescent` (block counts).
fn population(cfg: &ExperimentConfig, out: &Path, forward: bool) -> Result<RunOutcome> {
    let lambda = measure(cfg)?;
    let n = population_size(cfg)?;
    let reps = cfg.reps.unwrap_or(1);
    let seed = cfg.seed.unwrap_or(0);
    let snapshots = cfg.k.clone();
    if let Some(k) = snapshots.iter().flatten().find(|&&k| !(2..=n).contains(&k)) {
        bail!("snapshot level k={k} outside 2..={n}");
    }
    let opts =
        RunOptions { snapshots: snapshots.clone().map_or(SnapshotLevels::None, SnapshotLevels::Only), stop_at: 1 };
    let runs: Vec<Trajectory> = if forward {
        let rates = forward_event_rate(&lambda, n)?;
        run_replicates(seed, reps, |rng, _| run_population(&rates, n, &opts, rng).0)
    } else {
        let rates = CoalescentRates::new(&lambda, n)?;
        run_replicates(seed, reps, |rng, _| simulate_coalescent_with(&rates, &opts, rng))
    };
    let dir = OutDir::create(out)?;
    let rows = runs.iter().enumerate().flat_map(|(rep, r)| {
        r.jumps().map(move |(time, k, size)| TrajectoryRow { replicate: rep, k, time, jump_size: Some(size) })
    });
    dir.write_csv("trajectory.csv", &TRAJECTORY_HEADER, rows)?;
    let mut artifacts = vec!["trajectory.csv"];
    if snapshots.is_some() {
        let rows = runs.iter().enumerate().flat_map(|(rep, r)| {
            r.block_sequence().into_iter().flat_map(move |(k, p)| partition_rows(rep, k, &p).collect::<Vec<_>>())
        });
        dir.write_csv("partitions.csv", &PARTITION_HEADER, rows)?;
        artifacts.push("partitions.csv");
    }
    let levels = snapshots.unwrap_or_else(|| vec![2]);
    let level_means: Vec<_> = levels
        .iter()
        .map(|&k| {
            let ts: Vec<f64> = runs.iter().filter_map(|r| r.level_time(k)).collect();
            let (m, sd) = mean_and_sd(&ts);
            json!({"k": k, "mean_time": m, "sd_time": sd})
        })
        .collect();
    let mut data = json!({"n": n, "reps": reps, "measure": lambda, "levels": level_means});
    if let Some(t) = cfg.t {
        let counts: Vec<f64> = runs.iter().map(|r| r.count_at(t) as f64).collect();
        data["mean_count_at_t"] = json!({"t": t, "mean": mean_and_sd(&counts).0});
    }
    let name = if forward { "forward" } else { "coalescent" };
    let mut summary = Summary::new(name, cfg.experiment.as_deref().unwrap_or(name), seed, config_json(cfg));
    summary.data = data;
    let line = format!("{name}: {reps} replicates of N={n} written to {}", out.display());
    finish(&dir, summary, &artifacts, vec![line])
}

/// Fixation lines, one per `k` and replicate; rows list each jump with
/// `k` the line's starting level.
fn lookdown(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let lambda = measure(cfg)?;
    let n = population_size(cfg)?;
    let reps = cfg.reps.unwrap_or(1);
    let seed = cfg.seed.unwrap_or(0);
    let ks = cfg.k.clone().unwrap_or_else(|| vec![2]);
    if let Some(k) = ks.iter().find(|&&k| !(2..=n).contains(&k)) {
        bail!("line level k={k} outside 2..={n}");
    }
    let rule = cfg.rule.unwrap_or_default();
    let rates = LineRates::new(&lambda, n)?;
    let paths = run_replicates(seed, reps, |rng, _| {
        ks.iter().map(|&k| run_fixation_line(&rates, k, rule, rng)).collect::<Vec<_>>()
    });
    let dir = OutDir::create(out)?;
    let rows = paths.iter().enumerate().flat_map(|(rep, lines)| {
        lines.iter().flat_map(move |p| {
            p.steps.windows(2).map(move |w| TrajectoryRow {
                replicate: rep,
                k: p.k,
                time: w[1].0,
                jump_size: (w[1].1 != u64::MAX).then(|| w[1].1 - w[0].1),
            })
        })
    });
    dir.write_csv("trajectory.csv", &TRAJECTORY_HEADER, rows)?;
    let exits: Vec<_> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let ts: Vec<f64> = paths.iter().map(|l| l[i].exit_time).collect();
            let (m, sd) = mean_and_sd(&ts);
            json!({"k": k, "mean_exit_time": m, "sd_exit_time": sd})
        })
        .collect();
    let mut summary = Summary::new("lookdown", cfg.experiment.as_deref().unwrap_or("lookdown"), seed, config_json(cfg));
    summary.data = json!({"n": n, "reps": reps, "rule": rule, "measure": lambda, "lines": exits});
    let line = format!("lookdown: {reps} replicates of {} lines in N={n} written to {}", ks.len(), out.display());
    finish(&dir, summary, &["trajectory.csv"], vec![line])
}

/// Urn limits; rows carry `k` = number of colours.
fn urn(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let lambda = measure(cfg)?;
    let reps = cfg.reps.unwrap_or(1);
    let seed = cfg.seed.unwrap_or(0);
    let m_cut = cfg.m_cut.unwrap_or(DEFAULT_M_CUT);
    let initial = cfg.initial.clone().unwrap_or_else(|| vec![1, 1]);
    let law = cfg.urn_law.unwrap_or(LambdaUrnLaw::MergerSize);
    let growth = LambdaGrowth::with_law(&lambda, m_cut, law)?;
    let limits = run_replicates(seed, reps, |rng, _| run_urn_to_limit(&growth, &initial, m_cut, rng))
        .into_iter()
        .collect::<coalsim_core::Result<Vec<MassPartition>>>()?;
    let dir = OutDir::create(out)?;
    let colours = initial.len() as u64;
    let rows = limits.iter().enumerate().flat_map(|(rep, p)| partition_rows(rep, colours, p).collect::<Vec<_>>());
    dir.write_csv("partitions.csv", &PARTITION_HEADER, rows)?;
    let means: Vec<f64> = (0..initial.len()).map(|c| limits.iter().map(|p| p[c]).sum::<f64>() / reps as f64).collect();
    let mins: Vec<f64> = limits.iter().map(MassPartition::min).collect();
    let mut summary = Summary::new("urn", cfg.experiment.as_deref().unwrap_or("urn"), seed, config_json(cfg));
    summary.data = json!({
        "reps": reps, "m_cut": m_cut, "initial": initial, "urn_law": law, "measure": lambda,
        "mean_frequencies": means, "mean_smallest": mean_and_sd(&mins).0,
    });
    let line = format!("urn: {reps} limits written to {}", out.display());
    finish(&dir, summary, &["partitions.csv"], vec![line])
}

fn chain(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let kind = cfg.chain.unwrap_or(ChainKind::HaplotypeLambda);
    let reps = cfg.reps.unwrap_or(1);
    let seed = cfg.seed.unwrap_or(0);
    let start = cfg.k.as_ref().and_then(|ks| ks.first().copied()).unwrap_or(5);
    let m_cut = cfg.m_cut.unwrap_or(DEFAULT_M_CUT);
    let opts = LambdaChainOptions { m_cut, ..Default::default() };
    let lambda = match kind {
        ChainKind::HaplotypeLambda => Some(measure(cfg)?),
        _ => None,
    };
    let law = cfg.urn_law.unwrap_or(LambdaUrnLaw::Lookdown);
    let growth = match &lambda {
        Some(l) if !l.is_binary() => Some(LambdaGrowth::with_law(l, m_cut, law)?),
        _ => None,
    };
    let runs = run_replicates(seed, reps, |rng, _| match kind {
        ChainKind::Ancestral => ancestral_chain(start, rng),
        ChainKind::Fragmentation => fragmentation_chain(start, rng),
        ChainKind::HaplotypeBinary => haplotype_chain_binary(start, rng),
        ChainKind::HaplotypeLambda => match &growth {
            Some(g) => haplotype_chain_with(g, start, &opts, rng),
            None => haplotype_chain_with(&KingmanGrowth, start, &opts, rng),
        },
    })
    .into_iter()
    .collect::<coalsim_core::Result<Vec<_>>>()?;
    let dir = OutDir::create(out)?;
    let rows = runs.iter().enumerate().flat_map(|(rep, run)| {
        run.partitions.iter().flat_map(move |(k, p)| partition_rows(rep, *k, p).collect::<Vec<_>>())
    });
    dir.write_csv("partitions.csv", &PARTITION_HEADER, rows)?;
    let aborted = runs.iter().filter(|r| r.aborted).count();
    let warnings: Vec<String> = runs.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    let mut summary = Summary::new("chain", cfg.experiment.as_deref().unwrap_or("chain"), seed, config_json(cfg));
    summary.data = json!({
        "kind": kind, "start": start, "reps": reps, "m_cut": lambda.as_ref().map(|_| m_cut),
        "urn_law": lambda.as_ref().map(|_| law), "measure": lambda, "aborted": aborted, "warnings": warnings,
    });
    let line = format!("chain: {reps} runs from K={start} written to {}", out.display());
    finish(&dir, summary, &["partitions.csv"], vec![line])
}

fn cdi(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let lambda = measure(cfg)?;
    let (verdict, diag) = cdi_check(&lambda)?;
    let dir = OutDir::create(out)?;
    dir.write_csv("psi.csv", &["u", "psi"], diag.grid.iter().copied())?;
    let mut summary =
        Summary::new("cdi", cfg.experiment.as_deref().unwrap_or("cdi"), cfg.seed.unwrap_or(0), config_json(cfg));
    let label = serde_json::to_value(verdict)?;
    summary.data = json!({"measure": lambda, "verdict": verdict, "diagnostics": diag});
    let line = format!("{lambda}: {}", label.as_str().unwrap_or_default());
    finish(&dir, summary, &["psi.csv"], vec![line])
}

fn verify(suite: &str, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let suites: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if checks::suite_members(suite).is_some() {
        vec![suite]
    } else {
        let msg = format!("unknown suite {suite:?}; expected one of {} or all", SUITES.join(", "));
        return Err(ConfigError::new("verify", None, msg).into());
    };
    let seed = cfg.seed.unwrap_or(0);
    let mut outcome = RunOutcome { passed: true, summaries: Vec::new(), lines: Vec::new() };
    let mut overview = Vec::new();
    let mut all_reports = Vec::new();
    for name in &suites {
        let dir = OutDir::create(&out.join(name))?;
        let experiment = cfg.experiment.clone().unwrap_or_else(|| format!("verify-{name}"));
        let mut summary = Summary::new("verify", &experiment, seed, config_json(cfg));
        let mut samples = Vec::new();
        for id in checks::suite_members(name).expect("known suite") {
            let check = checks::find(id).expect("suite members exist");
            let started = std::time::Instant::now();
            let (result, rows) = checks::run_check(check, cfg, seed).with_context(|| format!("{id} failed to run"))?;
            let verdict = match (result.exploratory, result.passed) {
                (true, _) => "DONE",
                (false, true) => "PASS",
                (false, false) => "FAIL",
            };
            let detail = result
                .attempts
                .last()
                .map(|a| {
                    a.reports.iter().map(|r| format!("{} p={:.3e}", r.test, r.p_value)).collect::<Vec<_>>().join("; ")
                })
                .unwrap_or_default();
            outcome.lines.push(format!(
                "{verdict} {id} [{name}] {} ({} attempt(s), {:.1} s) {detail}",
                check.title,
                result.attempts.len(),
                started.elapsed().as_secs_f64()
            ));
            samples.extend(rows.into_iter().map(|mut r| {
                r.series = format!("{id}: {}", r.series);
                r
            }));
            summary.add_check(result);
        }
        summary.data = json!({"suite": name});
        dir.write_csv("samples.csv", &SAMPLE_HEADER, samples)?;
        summary.artifacts = vec!["samples.csv".into(), "summary.json".into()];
        dir.write_json("summary.json", &summary)?;
        outcome.passed &= summary.passed;
        outcome.summaries.push(dir.path("summary.json"));
        overview.push(json!({"suite": name, "passed": summary.passed}));
        all_reports.extend(summary.reports);
    }
    if suite == "all" {
        let dir = OutDir::create(out)?;
        let mut summary =
            Summary::new("verify", cfg.experiment.as_deref().unwrap_or("verify-all"), seed, config_json(cfg));
        summary.passed = outcome.passed;
        summary.reports = all_reports;
        summary.data = json!({"suites": overview});
        summary.artifacts = suites.iter().map(|s| format!("{s}/summary.json")).collect();
        summary.artifacts.push("summary.json".into());
        dir.write_json("summary.json", &summary)?;
        outcome.summaries.push(dir.path("summary.json"));
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            lambda: Some(LambdaMeasure::beta(0.5, 1.5).unwrap()),
            n: Some(12),
            reps: Some(5),
            seed: Some(3),
            out: Some(dir.to_path_buf()),
            ..Default::default()
        }
    }

    #[test]
    fn population_runs_write_consistent_csv() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig { k: Some(vec![3, 5]), ..cfg(dir.path()) };
        let res = run(&Command::Coalescent, &c).unwrap();
        assert!(res.passed);
        let mut rd = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
        let rows: Vec<(usize, u64, f64, u64)> = rd.deserialize().map(|r| r.unwrap()).collect();
        // every replicate's jumps add up to N - 1
        for rep in 0..5 {
            let total: u64 = rows.iter().filter(|r| r.0 == rep).map(|r| r.3).sum();
            assert_eq!(total, 11);
        }
        let mut rd = csv::Reader::from_path(dir.path().join("partitions.csv")).unwrap();
        let parts: Vec<(usize, u64, usize, f64)> = rd.deserialize().map(|r| r.unwrap()).collect();
        for rep in 0..5 {
            for k in [3u64, 5] {
                let s: f64 = parts.iter().filter(|r| r.0 == rep && r.1 == k).map(|r| r.3).sum();
                assert!((s - 1.0).abs() < 1e-12);
                // a multiple merger can cross several levels at once
                let len = parts.iter().filter(|r| r.0 == rep && r.1 == k).count() as u64;
                assert!((1..k).contains(&len));
            }
        }
    }

    #[test]
    fn missing_inputs_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig { lambda: None, ..cfg(dir.path()) };
        let e = run(&Command::Forward, &c).unwrap_err();
        assert!(e.to_string().contains("--lambda"));
        let c = ExperimentConfig { n: None, ..cfg(dir.path()) };
        assert!(run(&Command::Lookdown, &c).unwrap_err().to_string().contains("--n"));
        assert!(run(&Command::Verify("thm7".into()), &cfg(dir.path())).is_err());
    }

    #[test]
    fn every_subcommand_runs() {
        let dir = tempfile::tempdir().unwrap();
        for (i, cmd) in
            [Command::Forward, Command::Lookdown, Command::Urn, Command::Chain, Command::Cdi].into_iter().enumerate()
        {
            let out = dir.path().join(i.to_string());
            let c = ExperimentConfig { m_cut: Some(500), out: Some(out.clone()), ..cfg(dir.path()) };
            let res = run(&cmd, &c).unwrap();
            assert!(res.passed, "{cmd:?}");
            assert!(out.join("summary.json").is_file());
        }
    }
}
