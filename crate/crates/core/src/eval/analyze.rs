use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::report::{read_metrics, write_exploration_curve, write_learning_curve, write_milestones, MetricRecord};
use super::{exploration_curve, milestone_curve, EvalResult};
use crate::error::Result;

const MILESTONE_POINTS: usize = 10;

/// Files written by [`analyze`].
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub runs: usize,
    pub learning_curve: PathBuf,
    /// Only when the runs evaluated navigation tasks.
    pub exploration_curve: Option<PathBuf>,
    pub milestones: PathBuf,
}

#[derive(Deserialize)]
struct EvalLine {
    result: EvalResult,
}

/// The last evaluation in a session's `evals.jsonl`, if any.
pub fn last_evaluation(run_dir: &Path) -> Result<Option<EvalResult>> {
    let path = run_dir.join("evals.jsonl");
    if !path.is_file() {
        return Ok(None);
    }
    let mut last = None;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            last = Some(line);
        }
    }
    Ok(match last {
        Some(l) => Some(serde_json::from_str::<EvalLine>(&l)?.result),
        None => None,
    })
}

fn sibling(report: &Path, suffix: &str) -> PathBuf {
    let stem = report.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    report.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Default milestone thresholds for a metric.
pub fn milestone_thresholds(metric: &str) -> Vec<f64> {
    match metric {
        "score" => vec![30.0, 60.0, 90.0],
        _ => vec![0.25, 0.5, 0.75],
    }
}

/// Summarizes the session directories under `metrics` (or a single
/// session): the learning curve goes to `report`, the exploration curve
/// and milestone matrix to `<stem>_exploration.csv` and
/// `<stem>_milestones.csv` beside it.
pub fn analyze(metrics: &Path, report: &Path) -> Result<Analysis> {
    let runs = read_metrics(metrics)?;
    write_learning_curve(&runs, report)?;

    let run_dir = |name: &str| {
        if metrics.is_file() {
            metrics.parent().unwrap_or(Path::new(".")).to_path_buf()
        } else if metrics.file_name().is_some_and(|n| n.to_string_lossy() == name)
            && metrics.join("metrics.jsonl").is_file()
        {
            metrics.to_path_buf()
        } else {
            metrics.join(name)
        }
    };
    let mut curves = Vec::new();
    for (name, _) in &runs {
        if let Some(result) = last_evaluation(&run_dir(name))? {
            if result.task.is_navigation() {
                curves.push((name.clone(), exploration_curve(&[result])?));
            }
        }
    }
    let exploration = if curves.is_empty() {
        None
    } else {
        let path = sibling(report, "exploration");
        write_exploration_curve(&curves, &path)?;
        Some(path)
    };

    let metric = runs
        .iter()
        .flat_map(|(_, r)| r.first())
        .map(|r: &MetricRecord| r.metric.clone())
        .next()
        .unwrap_or_else(|| "success_rate".into());
    let series: Vec<Vec<(f64, f64)>> = runs
        .iter()
        .map(|(_, rs)| rs.iter().map(|r| (r.t_wall, r.value)).collect())
        .collect();
    let end = series
        .iter()
        .flatten()
        .map(|(t, _)| *t)
        .fold(0.0, f64::max);
    let times: Vec<f64> = (1..=MILESTONE_POINTS)
        .map(|i| end * i as f64 / MILESTONE_POINTS as f64)
        .collect();
    let thresholds = milestone_thresholds(&metric);
    let matrix = milestone_curve(&series, &thresholds, &times)?;
    let milestones = sibling(report, "milestones");
    write_milestones(&thresholds, &times, &matrix, &milestones)?;

    Ok(Analysis {
        runs: runs.len(),
        learning_curve: report.to_path_buf(),
        exploration_curve: exploration,
        milestones,
    })
}
