//! Run reports and their on-disk form.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::config::RunConfig;
use crate::suites::{SuiteOutput, Table, Verdict};

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub parts: Vec<SuiteOutput>,
    /// Suites that stopped on an error, with the message.
    pub diagnostics: Vec<(String, String)>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub wall_time: f64,
    pub threads: usize,
}

impl RunReport {
    pub fn new(config: RunConfig, threads: usize) -> Self {
        RunReport { config, parts: Vec::new(), diagnostics: Vec::new(), verdicts: BTreeMap::new(), wall_time: 0.0, threads }
    }

    /// Adds a verdict, keeping the worse one on a name clash.
    pub fn record(&mut self, name: &str, v: Verdict) {
        let slot = self.verdicts.entry(name.to_string()).or_insert(v);
        *slot = (*slot).max(v);
    }

    pub fn failed(&self) -> bool {
        self.verdicts.values().any(|v| *v == Verdict::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed() {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> Value {
        let suites: BTreeMap<String, Value> =
            self.parts.iter().map(|p| (p.suite.name().to_string(), p.summary.clone())).collect();
        let diagnostics: Vec<Value> =
            self.diagnostics.iter().map(|(s, m)| json!({ "suite": s, "error": m })).collect();
        json!({
            "config": serde_json::to_value(&self.config).expect("config serializes"),
            "suites": suites,
            "verdicts": self.verdicts,
            "diagnostics": diagnostics,
            "threads": self.threads,
            "wall_time": self.wall_time,
        })
    }

    /// `<suite>.csv` per completed suite, then `report.json`, each written
    /// to a temporary file in `dir` and renamed into place.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for p in &self.parts {
            if let Some(t) = &p.table {
                write_atomic(dir, &format!("{}.csv", p.suite.name()), &csv_bytes(t)?)?;
            }
        }
        let mut text = serde_json::to_string_pretty(&self.to_json()).map_err(io::Error::other)?;
        text.push('\n');
        write_atomic(dir, "report.json", text.as_bytes())
    }
}

pub fn csv_bytes(t: &Table) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}
