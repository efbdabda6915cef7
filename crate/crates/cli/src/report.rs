use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub task: usize,
    pub name: String,
    pub passed: bool,
    /// Non-blocking verdicts are reported but do not change the exit code.
    pub blocking: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskResult {
    pub task: usize,
    pub kind: String,
    pub result: Value,
    pub series: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timestamp {
    pub unix_secs: u64,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub rng: &'static str,
    pub seeds: Vec<u64>,
    pub config: Value,
    pub results: Vec<TaskResult>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
    /// The only field that changes between identical runs.
    pub timestamp: Timestamp,
}

/// Collects results, verdicts and CSV series for one run.
pub struct Recorder {
    out: PathBuf,
    pub results: Vec<TaskResult>,
    pub verdicts: Vec<Verdict>,
    task: usize,
}

impl Recorder {
    pub fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            results: Vec::new(),
            verdicts: Vec::new(),
            task: 0,
        })
    }

    pub fn begin(&mut self, index: usize, kind: &str) {
        self.task = index;
        self.results.push(TaskResult {
            task: index,
            kind: kind.to_string(),
            result: Value::Null,
            series: Vec::new(),
        });
    }

    pub fn result(&mut self, value: impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value)?;
        self.results.last_mut().expect("begin() first").result = v;
        Ok(())
    }

    pub fn verdict(&mut self, name: &str, passed: bool, detail: String) {
        self.push_verdict(name, passed, true, detail);
    }

    pub fn advisory(&mut self, name: &str, passed: bool, detail: String) {
        self.push_verdict(name, passed, false, detail);
    }

    fn push_verdict(&mut self, name: &str, passed: bool, blocking: bool, detail: String) {
        self.verdicts.push(Verdict {
            task: self.task,
            name: name.to_string(),
            passed,
            blocking,
            detail,
        });
    }

    /// Writes `NN-name.csv` with a header row.
    pub fn series<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<()> {
        let file = format!("{:02}-{name}.csv", self.task);
        let path = self.out.join(&file);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.as_ref())?;
        }
        w.flush()?;
        self.results.last_mut().expect("begin() first").series.push(file);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed || !v.blocking)
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn num(x: f64) -> String {
    format!("{x}")
}
