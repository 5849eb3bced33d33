//! Command-line parsing and the process exit code.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::commands::{run, Command};
use crate::config::{resolve_lambda, ConfigError, ExperimentConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "coalsim",
    version,
    about = "Simulate and verify Lambda-coalescents, Lambda-Fleming-Viot populations and Lambda-urns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Extinction process of the population model started from N alleles.
    Forward,
    /// Block counting process of the (N, Lambda)-coalescent.
    Coalescent,
    /// Fixation lines of the look-down construction.
    Lookdown,
    /// Limits of a Lambda-urn.
    Urn,
    /// Limit chains (ancestral, fragmentation, haplotype).
    Chain,
    /// Coming-down-from-infinity classification.
    Cdi,
    /// Runs a verification suite (thm1..thm5, prop2, prop4, prop5, eq5, all).
    Verify { suite: String },
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub experiment: Option<String>,
    /// Measure JSON file, or kingman[:w], uniform, beta:a,b, dirac:x.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Population size N.
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Levels k (comma separated); the first is K for `chain`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Urn size at which limits are read off.
    #[arg(long = "mcut", global = true)]
    pub m_cut: Option<u64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "COALSIM_THREADS")]
    pub threads: Option<usize>,
    /// Multiplies Lambda by this factor.
    #[arg(long, global = true)]
    pub time_scale: Option<f64>,
    /// Time at which counts are read (`forward`, `coalescent`, criterion 4).
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// merger-size or lookdown.
    #[arg(long, global = true, value_parser = kebab::<coalsim_core::urn::LambdaUrnLaw>)]
    pub urn_law: Option<coalsim_core::urn::LambdaUrnLaw>,
    /// Initial urn counts (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub initial: Option<Vec<u64>>,
    /// ancestral, fragmentation, haplotype-binary or haplotype-lambda.
    #[arg(long, global = true, value_parser = kebab::<coalsim_core::chains::ChainKind>)]
    pub chain: Option<coalsim_core::chains::ChainKind>,
    /// hit-count or order-preserving.
    #[arg(long, global = true, value_parser = kebab::<coalsim_core::lookdown::JumpRule>)]
    pub rule: Option<coalsim_core::lookdown::JumpRule>,
}

fn kebab<T: DeserializeOwned + Send + Sync + Clone + 'static>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl Flags {
    /// The configuration these flags describe, merged over `--config`.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let lambda = self.lambda.as_deref().map(resolve_lambda).transpose()?;
        let flags = ExperimentConfig {
            experiment: self.experiment.clone(),
            lambda,
            n: self.n,
            k: self.k.clone(),
            reps: self.reps,
            seed: self.seed,
            m_cut: self.m_cut,
            alpha: self.alpha,
            out: self.out.clone(),
            time_scale: self.time_scale,
            t: self.t,
            urn_law: self.urn_law,
            initial: self.initial.clone(),
            chain: self.chain,
            rule: self.rule,
        };
        let cfg = base.merged(flags);
        cfg.validate().map_err(|(key, msg)| ConfigError {
            source: format!("--{}", if key == "m_cut" { "mcut".to_string() } else { key.replace('_', "-") }),
            line: None,
            message: msg,
        })?;
        Ok(cfg)
    }
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Sub::Forward => Command::Forward,
            Sub::Coalescent => Command::Coalescent,
            Sub::Lookdown => Command::Lookdown,
            Sub::Urn => Command::Urn,
            Sub::Chain => Command::Chain,
            Sub::Cdi => Command::Cdi,
            Sub::Verify { suite } => Command::Verify(suite.clone()),
        }
    }
}

/// Parses `args`, runs the command and returns the exit code: 0 when every
/// verdict passed, 1 when one failed, 2 for a bad configuration and 3 for
/// errors raised while simulating.
pub fn execute<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let cfg = match cli.flags.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(threads) = cli.flags.threads {
        // a second global pool in the same process is refused; keep the first
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(&cli.command.command(), &cfg) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let code = if e.downcast_ref::<ConfigError>().is_some() { EXIT_CONFIG } else { EXIT_RUNTIME };
            eprintln!("error: {e:#}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "coalsim",
            "verify",
            "thm1",
            "--n",
            "50",
            "--reps",
            "20000",
            "--seed",
            "7",
            "--k",
            "2,10",
            "--urn-law",
            "lookdown",
            "--lambda",
            "beta:0.5,1.5",
        ])
        .unwrap();
        assert!(matches!(&cli.command, Sub::Verify { suite } if suite == "thm1"));
        let cfg = cli.flags.resolve().unwrap();
        assert_eq!((cfg.n, cfg.reps, cfg.seed), (Some(50), Some(20000), Some(7)));
        assert_eq!(cfg.k, Some(vec![2, 10]));
        assert_eq!(cfg.urn_law, Some(coalsim_core::urn::LambdaUrnLaw::Lookdown));
        assert!(Cli::try_parse_from(["coalsim", "urn", "--urn-law", "bogus"]).is_err());
    }

    #[test]
    fn bad_values_give_config_exit_code() {
        assert_eq!(execute(["coalsim", "forward", "--lambda", "kingman", "--n", "10", "--reps", "0"]), EXIT_CONFIG);
        assert_eq!(execute(["coalsim", "forward", "--lambda", "nope", "--n", "10"]), EXIT_CONFIG);
        assert_eq!(execute(["coalsim", "frobnicate"]), EXIT_CONFIG);
    }
}
