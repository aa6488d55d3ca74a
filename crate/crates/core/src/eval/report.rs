use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Guidance,
    Automated,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Guidance => "guidance",
            Phase::Automated => "automated",
            Phase::Done => "done",
        }
    }
}

/// One evaluation point of a training session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub t_wall: f64,
    pub phase: Phase,
    pub step: u64,
    /// `success_rate` or `score`.
    pub metric: String,
    pub value: f64,
    /// Checkpoint path relative to the session directory.
    pub checkpoint: String,
}

fn read_jsonl(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Reads a metrics file, or every `metrics.jsonl` directly inside a
/// directory and its immediate subdirectories. Runs are named after their
/// directory and sorted by name.
pub fn read_metrics(path: &Path) -> Result<Vec<(String, Vec<MetricRecord>)>> {
    if path.is_file() {
        let name = path
            .parent()
            .and_then(|p| p.file_name())
            .map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
        return Ok(vec![(name, read_jsonl(path)?)]);
    }
    let mut runs = Vec::new();
    let own = path.join("metrics.jsonl");
    if own.is_file() {
        let name = path
            .file_name()
            .map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned());
        runs.push((name, read_jsonl(&own)?));
    }
    let mut dirs: Vec<_> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("metrics.jsonl").is_file())
        .collect();
    dirs.sort();
    for d in dirs {
        let name = d.file_name().expect("dir entry").to_string_lossy().into_owned();
        runs.push((name, read_jsonl(&d.join("metrics.jsonl"))?));
    }
    if runs.is_empty() {
        return Err(Error::Config(format!("no metrics.jsonl under {}", path.display())));
    }
    Ok(runs)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// `run,t_wall,phase,step,metric,value,checkpoint`, one row per record.
pub fn write_learning_curve(runs: &[(String, Vec<MetricRecord>)], path: &Path) -> Result<()> {
    let mut s = String::from("run,t_wall,phase,step,metric,value,checkpoint\n");
    for (run, records) in runs {
        for r in records {
            writeln!(
                s,
                "{run},{},{},{},{},{},{}",
                r.t_wall,
                r.phase.as_str(),
                r.step,
                r.metric,
                r.value,
                r.checkpoint
            )
            .expect("string write");
        }
    }
    write(path, &s)
}

/// `step,<label>...`: one column per labelled curve, one row per step
/// index. Shorter curves leave trailing cells empty.
pub fn write_exploration_curve(curves: &[(String, Vec<f64>)], path: &Path) -> Result<()> {
    let mut s = String::from("step");
    for (label, _) in curves {
        s.push(',');
        s.push_str(label);
    }
    s.push('\n');
    let len = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for i in 0..len {
        s.push_str(&i.to_string());
        for (_, c) in curves {
            s.push(',');
            if let Some(v) = c.get(i) {
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
    }
    write(path, &s)
}

/// `threshold,<time>...`: one row per threshold.
pub fn write_milestones(thresholds: &[f64], times: &[f64], matrix: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut s = String::from("threshold");
    for t in times {
        write!(s, ",t={t}").expect("string write");
    }
    s.push('\n');
    for (th, row) in thresholds.iter().zip(matrix) {
        s.push_str(&th.to_string());
        for v in row {
            write!(s, ",{v}").expect("string write");
        }
        s.push('\n');
    }
    write(path, &s)
}
