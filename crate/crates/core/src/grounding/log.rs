use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::FeedbackSample;
use crate::error::{Error, Result};

/// Append-only JSON-lines feedback log, one `{t_wall, value, source}`
/// record per line.
pub struct FeedbackLog {
    out: BufWriter<File>,
}

impl FeedbackLog {
    pub fn create(path: &Path) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FeedbackLog {
            out: BufWriter::new(f),
        })
    }

    pub fn append(&mut self, sample: &FeedbackSample) -> Result<()> {
        serde_json::to_writer(&mut self.out, sample)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_feedback_log(path: &Path) -> Result<Vec<FeedbackSample>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: FeedbackSample = serde_json::from_str(&line)
            .map_err(|e| Error::Config(format!("feedback log line {}: {e}", n + 1)))?;
        out.push(FeedbackSample::new(s.t_wall, s.value, s.source));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grounding::FeedbackSource;

    #[test]
    fn log_replays_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feedback.jsonl");
        let samples = [
            FeedbackSample::new(0.5, 0.25, FeedbackSource::Human),
            FeedbackSample::new(1.5, -1.0, FeedbackSource::Scripted),
        ];
        {
            let mut log = FeedbackLog::create(&path).unwrap();
            for s in &samples {
                log.append(s).unwrap();
            }
            log.flush().unwrap();
        }
        assert_eq!(read_feedback_log(&path).unwrap(), samples);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"t_wall":0.5,"value":0.25,"source":"human"}"#));
    }
}
