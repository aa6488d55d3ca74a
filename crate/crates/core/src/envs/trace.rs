use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Cell;
use crate::error::Result;

/// One decision step of an episode, as written to the trace log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: u64,
    /// Layout seed the episode was reset with; replaying the actions from
    /// this seed reproduces every observation.
    pub seed: u64,
    pub step: usize,
    /// Session-clock time of the decision step.
    pub t_wall: f64,
    pub agent: Option<Cell>,
    pub action: Vec<f64>,
    pub r_env: f64,
    pub visible_ratio: f64,
    pub done: bool,
}

/// Append-only JSON-lines trace log.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(TraceWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn append(&mut self, record: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
