//! Per-run metric records, their CSV form and sweep aggregation.
//!
//! The CSV schema is `k,objective,recovery,delay,step_norm` with one row per
//! recorded iteration, followed by a `# summary ...` comment line carrying
//! the run totals. Floats are written in shortest round-trip form, so a
//! write/read cycle is lossless.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str = "k,objective,recovery,delay,step_norm";

/// One sampled iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub k: usize,
    pub objective: f64,
    pub recovery: f64,
    pub delay: u64,
    pub step_norm: f64,
}

/// Run totals, consistent with the final recorded row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub iterations_used: usize,
    pub stopped_early: bool,
    pub diverged: bool,
    pub boundary_hits: u64,
    pub wall_seconds: f64,
    pub final_stationarity: Option<f64>,
}

impl Default for RunSummary {
    fn default() -> Self {
        RunSummary {
            iterations_used: 0,
            stopped_early: false,
            diverged: false,
            boundary_hits: 0,
            wall_seconds: 0.0,
            final_stationarity: None,
        }
    }
}

/// Metrics stream of a single run plus its summary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<IterationRow>,
    pub summary: RunSummary,
    /// Count of observed delays, indexed by delay value.
    pub delay_counts: Vec<u64>,
    /// Requested iterate snapshots `(k, x^k)`.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// Iterate at the end of the run.
    pub final_point: Vec<f64>,
}

impl RunRecord {
    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.objective)
    }

    pub fn final_recovery(&self) -> Option<f64> {
        self.rows.last().map(|r| r.recovery)
    }

    pub fn observed_mean_delay(&self) -> f64 {
        let total: u64 = self.delay_counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let weighted: f64 = self
            .delay_counts
            .iter()
            .enumerate()
            .map(|(d, &c)| d as f64 * c as f64)
            .sum();
        weighted / total as f64
    }
}

/// Serializes the record to CSV. The summary is carried in a trailing
/// comment line (wall time deliberately excluded so reruns are
/// byte-identical); pass `include_wall` to keep it for timing sidecars.
pub fn write_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &record.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.k, row.objective, row.recovery, row.delay, row.step_norm
        )
        .expect("string write");
    }
    let s = &record.summary;
    writeln!(
        out,
        "# summary iterations_used={} stopped_early={} diverged={} boundary_hits={}",
        s.iterations_used, s.stopped_early, s.diverged, s.boundary_hits
    )
    .expect("string write");
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Parsed CSV content: rows plus the summary comment if present.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub rows: Vec<IterationRow>,
    pub iterations_used: Option<usize>,
    pub stopped_early: bool,
    pub diverged: bool,
    pub boundary_hits: u64,
}

pub fn read_csv(path: &Path) -> Result<ParsedRecord> {
    let content = std::fs::read_to_string(path)?;
    let mut lines = content.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::MalformedRecord(format!(
                "expected header '{CSV_HEADER}', got {other:?}"
            )))
        }
    }
    let mut parsed = ParsedRecord {
        rows: Vec::new(),
        iterations_used: None,
        stopped_early: false,
        diverged: false,
        boundary_hits: 0,
    };
    for line in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# summary ") {
            for piece in rest.split_whitespace() {
                let (key, value) = piece
                    .split_once('=')
                    .ok_or_else(|| Error::MalformedRecord(format!("bad summary field '{piece}'")))?;
                match key {
                    "iterations_used" => {
                        parsed.iterations_used = Some(value.parse().map_err(|_| {
                            Error::MalformedRecord(format!("bad iterations_used '{value}'"))
                        })?)
                    }
                    "stopped_early" => parsed.stopped_early = value == "true",
                    "diverged" => parsed.diverged = value == "true",
                    "boundary_hits" => {
                        parsed.boundary_hits = value.parse().map_err(|_| {
                            Error::MalformedRecord(format!("bad boundary_hits '{value}'"))
                        })?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::MalformedRecord(format!("expected 5 fields, got '{line}'")));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::MalformedRecord(format!("bad float '{s}'")))
        };
        parsed.rows.push(IterationRow {
            k: fields[0]
                .parse()
                .map_err(|_| Error::MalformedRecord(format!("bad iteration '{}'", fields[0])))?,
            objective: parse_f(fields[1])?,
            recovery: parse_f(fields[2])?,
            delay: fields[3]
                .parse()
                .map_err(|_| Error::MalformedRecord(format!("bad delay '{}'", fields[3])))?,
            step_norm: parse_f(fields[4])?,
        });
    }
    Ok(parsed)
}

/// One aggregated sweep cell, as plotted in the delay-robustness figures:
/// mean iterations-to-stop over the seeds of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCell {
    pub algo: String,
    pub tau_mean: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mean_iters: f64,
    pub diverged_count: usize,
}

pub const SUMMARY_HEADER: &str = "algo,tau_mean,alpha,beta,mean_iters,diverged_count";

/// Aggregates runs of one configuration cell: arithmetic mean of
/// iterations-used over non-diverged runs, with diverged runs counted but
/// excluded from the mean.
pub fn summarize_cell(
    algo: &str,
    tau_mean: f64,
    alpha: f64,
    beta: f64,
    runs: &[(usize, bool)],
) -> SummaryCell {
    let converged: Vec<usize> = runs.iter().filter(|(_, d)| !d).map(|(it, _)| *it).collect();
    let mean_iters = if converged.is_empty() {
        f64::NAN
    } else {
        converged.iter().sum::<usize>() as f64 / converged.len() as f64
    };
    SummaryCell {
        algo: algo.to_string(),
        tau_mean,
        alpha,
        beta,
        mean_iters,
        diverged_count: runs.len() - converged.len(),
    }
}

pub fn write_summary_csv(cells: &[SummaryCell], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.algo, c.tau_mean, c.alpha, c.beta, c.mean_iters, c.diverged_count
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_record() -> RunRecord {
        RunRecord {
            rows: vec![
                IterationRow {
                    k: 1,
                    objective: 1.5,
                    recovery: core::f64::consts::PI / 27.0,
                    delay: 3,
                    step_norm: 1e-17,
                },
                IterationRow {
                    k: 300,
                    objective: 0.25,
                    recovery: f64::MIN_POSITIVE,
                    delay: 0,
                    step_norm: 0.0,
                },
            ],
            summary: RunSummary {
                iterations_used: 300,
                stopped_early: true,
                diverged: false,
                boundary_hits: 0,
                wall_seconds: 0.5,
                final_stationarity: None,
            },
            delay_counts: vec![1, 0, 0, 1],
            snapshots: Vec::new(),
            final_point: vec![0.5, -0.5],
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let record = sample_record();
        write_csv(&record, &path).unwrap();
        let parsed = read_csv(&path).unwrap();
        assert_eq!(parsed.rows, record.rows);
        assert_eq!(parsed.iterations_used, Some(300));
        assert!(parsed.stopped_early);
        assert!(!parsed.diverged);
    }

    #[test]
    fn empty_record_writes_header_only_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let record = RunRecord::default();
        write_csv(&record, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let mut lines = content.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("# summary"));
        let parsed = read_csv(&path).unwrap();
        assert!(parsed.rows.is_empty());
    }

    #[test]
    fn summary_cell_excludes_diverged_runs() {
        let runs = vec![(100, false), (200, false), (123456, true)];
        let cell = summarize_cell("dspl", 5.0, 1.0, 0.0, &runs);
        assert_eq!(cell.mean_iters, 150.0);
        assert_eq!(cell.diverged_count, 1);
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "wrong,header\n1,2\n").unwrap();
        assert!(read_csv(&path).is_err());
        std::fs::write(&path, format!("{CSV_HEADER}\n1,2,3\n")).unwrap();
        assert!(read_csv(&path).is_err());
    }

    #[test]
    fn observed_mean_delay_from_counts() {
        let record = sample_record();
        assert_eq!(record.observed_mean_delay(), 1.5);
    }
}
