//! CSV and JSON artifacts. Every file is a pure function of the resolved
//! configuration and seed: no timestamps, paths or thread counts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use coalsim_core::TestReport;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub replicate: usize,
    pub k: u64,
    pub time: f64,
    /// Empty when the size of the jump is unknown (a line leaving `[N]`).
    pub jump_size: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionRow {
    pub replicate: usize,
    pub k: u64,
    pub coordinate_index: usize,
    pub frequency: f64,
}

/// One observation of a named sample used by a verification test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub series: String,
    pub index: usize,
    pub value: f64,
}

/// One check of a verification suite and every attempt made at it.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    pub title: String,
    /// Exploratory checks carry data but no verdict.
    pub exploratory: bool,
    pub passed: bool,
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub seed: u64,
    pub passed: bool,
    pub reports: Vec<TestReport>,
    pub data: serde_json::Value,
}

/// The summary written next to every run's CSV output.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub schema_version: u32,
    pub command: String,
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub passed: bool,
    /// Reports deciding `passed` (final attempts only).
    pub reports: Vec<TestReport>,
    pub checks: Vec<CheckOutcome>,
    pub data: serde_json::Value,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn new(command: &str, experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        Summary {
            tool: "coalsim",
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            experiment: experiment.to_string(),
            seed,
            config,
            passed: true,
            reports: Vec::new(),
            checks: Vec::new(),
            data: serde_json::Value::Null,
            artifacts: Vec::new(),
        }
    }

    pub fn add_check(&mut self, check: CheckOutcome) {
        if let Some(last) = check.attempts.last() {
            self.reports.extend(last.reports.iter().cloned());
        }
        self.passed &= check.passed;
        self.checks.push(check);
    }
}

/// An output directory.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(OutDir { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes rows with a header (also for an empty table).
    pub fn write_csv<T: Serialize>(
        &self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = T>,
    ) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
        w.write_record(header)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut file =
            BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        serde_json::to_writer_pretty(&mut file, value)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["replicate", "k", "time", "jump_size"];
pub const PARTITION_HEADER: [&str; 4] = ["replicate", "k", "coordinate_index", "frequency"];
pub const SAMPLE_HEADER: [&str; 3] = ["series", "index", "value"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rfc4180_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        let rows = vec![
            SampleRow { series: "a,b".into(), index: 0, value: 0.5 },
            SampleRow { series: "q\"x".into(), index: 1, value: 2.0 },
        ];
        out.write_csv("s.csv", &SAMPLE_HEADER, rows).unwrap();
        let text = fs::read_to_string(out.path("s.csv")).unwrap();
        assert_eq!(text, "series,index,value\n\"a,b\",0,0.5\n\"q\"\"x\",1,2.0\n");
        out.write_csv("t.csv", &TRAJECTORY_HEADER, Vec::<TrajectoryRow>::new()).unwrap();
        assert_eq!(fs::read_to_string(out.path("t.csv")).unwrap(), "replicate,k,time,jump_size\n");
        let row = TrajectoryRow { replicate: 0, k: 3, time: 0.25, jump_size: None };
        out.write_csv("u.csv", &TRAJECTORY_HEADER, [row]).unwrap();
        assert_eq!(fs::read_to_string(out.path("u.csv")).unwrap(), "replicate,k,time,jump_size\n0,3,0.25,\n");
    }
}
