//! QD score, coverage and best objective over a result archive.

use std::fmt;

use crate::archive::ResultArchive;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// `Σ (f - min_f)` over occupied cells.
    pub qd_score: f64,
    /// Occupied fraction of all cells.
    pub coverage: f64,
    /// Highest stored objective, absent for an empty archive.
    pub best: Option<f64>,
    pub elapsed_ms: u64,
}

pub fn summarize(result: &ResultArchive, min_f: f64, elapsed_ms: u64) -> MetricsReport {
    let snapshot = result.snapshot();
    let qd_score = snapshot.iter().map(|(_, s)| s.objective - min_f).sum();
    let best = snapshot
        .iter()
        .map(|(_, s)| s.objective)
        .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |b| b.max(f))));
    MetricsReport {
        qd_score,
        coverage: snapshot.len() as f64 / result.spec().cells() as f64,
        best,
        elapsed_ms,
    }
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "qd_score,coverage,best,elapsed_ms";

    /// `qd_score,coverage,best,elapsed_ms`; `best` is blank when absent.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.qd_score,
            self.coverage,
            self.best.map(|b| b.to_string()).unwrap_or_default(),
            self.elapsed_ms
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "QD score {:.4e}  coverage {:.4}  best {}  time {:.2} min",
            self.qd_score,
            self.coverage,
            self.best.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into()),
            self.elapsed_ms as f64 / 60_000.0
        )
    }
}
