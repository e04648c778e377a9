//! File writers. Tables are comma-delimited with a header row; summaries
//! and manifests are JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dualrec::simstudy::ReplicationRecord;
use dualrec::{ChainTrace, PsrfReport, StudyRow};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

/// Writes one file into `dir`, creating the directory if needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Json(e.to_string()))?;
    text.push('\n');
    write_file(dir, name, &text)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_csv(trace: &ChainTrace) -> String {
    let mut out = String::from("iter,N,phi,p,p1dot\n");
    for i in 0..trace.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            trace.n[i],
            trace.phi[i],
            trace.p[i],
            trace.p1dot[i]
        );
    }
    out
}

pub fn psrf_csv(report: &PsrfReport) -> String {
    let mut out = String::from("k,r_hat_sqrt\n");
    for (k, v) in &report.curve {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

pub fn histogram_csv(hist: &std::collections::BTreeMap<u64, u64>) -> String {
    let mut out = String::from("N,count\n");
    for (n, c) in hist {
        let _ = writeln!(out, "{n},{c}");
    }
    out
}

pub fn study_csv(population: &str, estimator: &str, row: &StudyRow) -> String {
    let mut out = String::from(
        "population,method,estimator,n_true,replications,failures,average,se,rmse,bias,ci_lo,ci_hi,se_undefined\n",
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        csv_field(population),
        row.method,
        estimator,
        row.n_true,
        row.replications,
        row.failures,
        row.average,
        row.se,
        row.rmse,
        row.bias,
        opt(row.ci.map(|c| c.0)),
        opt(row.ci.map(|c| c.1)),
        row.se_undefined
    );
    out
}

pub fn replications_csv(records: &[ReplicationRecord]) -> String {
    let mut out =
        String::from("replication,x11,x10,x01,point,mean,median,map,sre,ci_lo,ci_hi,error\n");
    for r in records {
        let e = r.estimate.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replication + 1,
            opt(r.data.map(|d| d.x11)),
            opt(r.data.map(|d| d.x10)),
            opt(r.data.map(|d| d.x01)),
            opt(e.map(|e| e.point)),
            opt(e.map(|e| e.mean)),
            opt(e.map(|e| e.median)),
            opt(e.map(|e| e.map)),
            opt(e.map(|e| e.sre)),
            opt(e.and_then(|e| e.ci).map(|c| c.0)),
            opt(e.and_then(|e| e.ci).map(|c| c.1)),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    out
}

/// Everything needed to re-run a command bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Fully resolved arguments, excluding `--out`.
    pub argv: Vec<String>,
    pub settings: serde_json::Value,
    pub seeds: serde_json::Value,
    pub version: String,
    pub started_unix_secs: u64,
    pub wall_time_secs: f64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(
        command: &str,
        argv: Vec<String>,
        settings: serde_json::Value,
        seeds: serde_json::Value,
    ) -> Self {
        Self {
            command: command.to_string(),
            argv,
            settings,
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_time_secs: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Json(format!("{}: not a run manifest: {e}", path.display())))
    }
}
