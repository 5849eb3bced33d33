//! Experiment configuration: a JSON file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use coalsim_core::chains::ChainKind;
use coalsim_core::lookdown::JumpRule;
use coalsim_core::urn::LambdaUrnLaw;
use coalsim_core::LambdaMeasure;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

/// A configuration or measure error, reported as `source:line: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(source: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError { source: source.to_string(), line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Every setting an experiment can take. Unset fields fall back to the
/// command's defaults; flags override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaMeasure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cut: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub urn_law: Option<LambdaUrnLaw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<JumpRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    experiment: Option<String>,
    #[serde(borrow)]
    lambda: Option<&'a RawValue>,
    n: Option<u64>,
    k: Option<Vec<u64>>,
    reps: Option<usize>,
    seed: Option<u64>,
    m_cut: Option<u64>,
    alpha: Option<f64>,
    out: Option<PathBuf>,
    time_scale: Option<f64>,
    t: Option<f64>,
    urn_law: Option<LambdaUrnLaw>,
    initial: Option<Vec<u64>>,
    chain: Option<ChainKind>,
    rule: Option<JumpRule>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the first `"key":` in `text`.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(i) = text[from..].find(&needle) {
        let at = from + i;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(line_of_offset(text, at));
        }
        from = at + needle.len();
    }
    None
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(&source, None, format!("cannot read config: {e}")))?;
        Self::parse(&text, &source, path.parent())
    }

    /// Parses config text. Relative measure paths resolve against `base`.
    pub fn parse(text: &str, source: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::new(source, Some(e.line()), strip_position(&e)))?;
        let lambda = match raw.lambda {
            None => None,
            Some(v) => {
                let offset = v.get().as_ptr() as usize - text.as_ptr() as usize;
                let first_line = line_of_offset(text, offset);
                Some(parse_lambda_value(v.get(), source, first_line, base)?)
            }
        };
        let cfg = ExperimentConfig {
            experiment: raw.experiment,
            lambda,
            n: raw.n,
            k: raw.k,
            reps: raw.reps,
            seed: raw.seed,
            m_cut: raw.m_cut,
            alpha: raw.alpha,
            out: raw.out.map(|p| match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }),
            time_scale: raw.time_scale,
            t: raw.t,
            urn_law: raw.urn_law,
            initial: raw.initial,
            chain: raw.chain,
            rule: raw.rule,
        };
        cfg.validate().map_err(|(key, msg)| ConfigError::new(source, line_of_key(text, key), msg))?;
        Ok(cfg)
    }

    /// Checks ranges; on failure returns the offending key and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if let Some(r) = self.reps {
            if r < 1 {
                return Err(("reps", "reps must be >= 1".into()));
            }
        }
        if let Some(n) = self.n {
            if n < 2 {
                return Err(("n", format!("n must be >= 2, got {n}")));
            }
        }
        if let Some(ks) = &self.k {
            if ks.is_empty() || ks.iter().any(|&k| k < 2) {
                return Err(("k", "k must be a nonempty list of values >= 2".into()));
            }
            if let Some(n) = self.n {
                if let Some(k) = ks.iter().find(|&&k| k > n) {
                    return Err(("k", format!("k={k} exceeds n={n}")));
                }
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(("alpha", format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        if let Some(m) = self.m_cut {
            if m < 2 {
                return Err(("m_cut", format!("m_cut must be >= 2, got {m}")));
            }
        }
        if let Some(c) = self.time_scale {
            if !(c > 0.0 && c.is_finite()) {
                return Err(("time_scale", format!("time_scale must be finite and > 0, got {c}")));
            }
        }
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(("t", format!("t must be finite and >= 0, got {t}")));
            }
        }
        if let Some(b) = &self.initial {
            if b.is_empty() || b.contains(&0) {
                return Err(("initial", "initial urn counts must be a nonempty list of positive integers".into()));
            }
        }
        Ok(())
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged(self, other: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            experiment: other.experiment.or(self.experiment),
            lambda: other.lambda.or(self.lambda),
            n: other.n.or(self.n),
            k: other.k.or(self.k),
            reps: other.reps.or(self.reps),
            seed: other.seed.or(self.seed),
            m_cut: other.m_cut.or(self.m_cut),
            alpha: other.alpha.or(self.alpha),
            out: other.out.or(self.out),
            time_scale: other.time_scale.or(self.time_scale),
            t: other.t.or(self.t),
            urn_law: other.urn_law.or(self.urn_law),
            initial: other.initial.or(self.initial),
            chain: other.chain.or(self.chain),
            rule: other.rule.or(self.rule),
        }
    }

    /// Λ after applying the time scale.
    pub fn scaled_lambda(&self) -> Option<Result<LambdaMeasure, ConfigError>> {
        let lambda = self.lambda.as_ref()?;
        Some(match self.time_scale {
            None => Ok(lambda.clone()),
            Some(c) => lambda.scaled(c).map_err(|e| ConfigError::new("--time-scale", None, e.to_string())),
        })
    }
}

// serde_json appends " at line L column C"; the line is reported separately
fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

fn parse_lambda_value(
    raw: &str,
    source: &str,
    first_line: usize,
    base: Option<&Path>,
) -> Result<LambdaMeasure, ConfigError> {
    if let Ok(name) = serde_json::from_str::<String>(raw) {
        let resolved = match base {
            Some(b) if Path::new(&name).is_relative() && b.join(&name).is_file() => b.join(&name).display().to_string(),
            _ => name,
        };
        return resolve_lambda(&resolved);
    }
    LambdaMeasure::from_json(raw).map_err(|e| {
        // semantic errors from the measure's own validation carry line 0
        let line = first_line + e.line().saturating_sub(1);
        ConfigError::new(source, Some(line), format!("lambda: {}", strip_position(&e)))
    })
}

/// A measure from a shorthand (`kingman`, `kingman:W`, `uniform`,
/// `beta:A,B`, `dirac:X`) or from a JSON file.
pub fn resolve_lambda(spec: &str) -> Result<LambdaMeasure, ConfigError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(spec, None, format!("cannot read measure: {e}")))?;
        return LambdaMeasure::from_json(&text).map_err(|e| ConfigError::new(spec, Some(e.line()), strip_position(&e)));
    }
    let bad = |msg: String| ConfigError::new(spec, None, msg);
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| bad(format!("bad number {a:?}: {e}"))))
            .collect::<Result<_, _>>()?
    };
    let measure = match (name, nums.as_slice()) {
        ("kingman", []) => Ok(LambdaMeasure::kingman(1.0)),
        ("kingman", [w]) => LambdaMeasure::new(*w, vec![], vec![]),
        ("uniform", []) => Ok(LambdaMeasure::uniform()),
        ("beta", [a, b]) => LambdaMeasure::beta(*a, *b),
        ("dirac", [x]) => LambdaMeasure::dirac(*x),
        _ => return Err(bad("not a file and not one of kingman[:w], uniform, beta:a,b, dirac:x".to_string())),
    };
    measure.map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_and_shorthand_measures() {
        let text = r#"{
  "experiment": "x",
  "lambda": {"beta": [{"a": 0.5, "b": 1.5, "weight": 1}]},
  "n": 30,
  "k": [2, 5]
}"#;
        let c = ExperimentConfig::parse(text, "c.json", None).unwrap();
        assert_eq!(c.lambda, Some(LambdaMeasure::beta(0.5, 1.5).unwrap()));
        assert_eq!(c.k, Some(vec![2, 5]));
        let c = ExperimentConfig::parse(r#"{"lambda": "kingman"}"#, "c.json", None).unwrap();
        assert_eq!(c.lambda, Some(LambdaMeasure::kingman(1.0)));
        assert_eq!(resolve_lambda("dirac:0.5").unwrap(), LambdaMeasure::dirac(0.5).unwrap());
        assert!(resolve_lambda("beta:1").is_err());
    }

    #[test]
    fn errors_name_the_line() {
        let text = "{\n  \"n\": 10,\n  \"reps\": 0\n}";
        let e = ExperimentConfig::parse(text, "c.json", None).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("c.json:3: reps"), "{e}");

        let text = "{\n  \"n\": 10,\n  \"colour\": 1\n}";
        let e = ExperimentConfig::parse(text, "c.json", None).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("colour"), "{e}");

        let text = "{\n  \"lambda\": {\n    \"beta\": [\n      {\"a\": -1, \"b\": 1, \"weight\": 1}\n    ]\n  }\n}";
        let e = ExperimentConfig::parse(text, "c.json", None).unwrap_err();
        // serde reports the position just after the offending entry
        assert!(matches!(e.line, Some(4..=5)), "{e}");
        assert!(e.message.contains("Beta parameters"), "{e}");

        let e = ExperimentConfig::parse("{\"n\": 5, \"k\": [2, 9]}", "c.json", None).unwrap_err();
        assert!(e.message.contains("exceeds"), "{e}");
    }

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig { n: Some(10), reps: Some(5), ..Default::default() };
        let flags = ExperimentConfig { reps: Some(7), ..Default::default() };
        let m = file.merged(flags);
        assert_eq!((m.n, m.reps), (Some(10), Some(7)));
    }
}
