#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn coalsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coalsim"))
        .args(args)
        .current_dir(repo_root())
        .env_remove("COALSIM_THREADS")
        .output()
        .expect("binary runs")
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validates a summary against the shipped schema, panicking with every
/// violation.
pub fn assert_valid_summary(path: &Path) {
    let schema = read_json(&repo_root().join("schemas/summary.schema.json"));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let instance = read_json(path);
    let errors: Vec<String> =
        validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{} violates the schema:\n{}", path.display(), errors.join("\n"));
}

/// Every file below `dir` as (relative path, bytes), sorted.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
