//! Experiment results and their long-format CSV / JSON exports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{five_numbers, mean_std};
use crate::error::{Error, Result};
use crate::iol::Style;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// One value of one series. `rep` is `None` for statistics across
/// repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub style: Style,
    pub rep: Option<usize>,
    pub t: usize,
    pub series: String,
    pub stat: String,
    pub value: f64,
}

/// A series' value at the last time step, summarized across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub style: Style,
    pub series: String,
    pub t: usize,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub style: Style,
    pub rep: usize,
    pub steps: usize,
    /// SHA-256 of the raw training rows in stream order.
    pub data_digest: String,
    pub peak_resident_features: usize,
    /// Wall-clock seconds per update step.
    pub step_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub library_version: String,
    pub run_id: String,
    pub config: ExperimentConfig,
    /// Ablation axis and value, when the run is part of a sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<(String, String)>,
    pub points: Vec<SeriesPoint>,
    pub summaries: Vec<Summary>,
    pub runs: Vec<RunInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    CsvLong,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv_long" | "csv" => Ok(ExportFormat::CsvLong),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Config(format!("unknown export format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["run_id", "style", "rep", "t", "series", "stat", "value"];

impl ExperimentReport {
    /// Per-repetition points followed by their cross-repetition statistics.
    pub fn new(run_id: String, config: ExperimentConfig, mut points: Vec<SeriesPoint>, runs: Vec<RunInfo>) -> Self {
        let (aggregates, summaries) = aggregate(&points, &config.styles);
        points.extend(aggregates);
        ExperimentReport {
            format_version: REPORT_FORMAT_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            run_id,
            config,
            sweep: None,
            points,
            summaries,
            runs,
        }
    }

    pub fn series_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.points.iter().map(|p| p.series.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Cross-repetition statistic `stat` of `series` over time.
    pub fn curve(&self, style: Style, series: &str, stat: &str) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.rep.is_none() && p.style == style && p.series == series && p.stat == stat)
            .map(|p| (p.t, p.value))
            .collect()
    }

    /// Per-repetition values of `series` at its last time step.
    pub fn final_values(&self, style: Style, series: &str) -> Vec<f64> {
        let mut last: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
        for p in &self.points {
            if let Some(rep) = p.rep {
                if p.style == style && p.series == series && p.stat == "value" {
                    let e = last.entry(rep).or_insert((p.t, p.value));
                    if p.t >= e.0 {
                        *e = (p.t, p.value);
                    }
                }
            }
        }
        last.into_values().map(|(_, v)| v).collect()
    }

    pub fn summary(&self, style: Style, series: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.style == style && s.series == series)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(CSV_HEADER).map_err(ser)?;
        for p in &self.points {
            let rep = p.rep.map(|r| r.to_string()).unwrap_or_default();
            w.write_record([
                self.run_id.as_str(),
                p.style.name(),
                &rep,
                &p.t.to_string(),
                &p.series,
                &p.stat,
                &p.value.to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported report format version {}",
                report.format_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Writes `<dir>/<run_id>.csv` and/or `<dir>/<run_id>.json`.
pub fn export_report(report: &ExperimentReport, dir: impl AsRef<Path>, formats: &[ExportFormat]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            ExportFormat::CsvLong => dir.join(format!("{}.csv", report.run_id)),
            ExportFormat::Json => dir.join(format!("{}.json", report.run_id)),
        };
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = std::io::BufWriter::new(file);
        match f {
            ExportFormat::CsvLong => report.write_csv(&mut out)?,
            ExportFormat::Json => out
                .write_all(report.to_json()?.as_bytes())
                .map_err(|e| Error::io(&path, e))?,
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

type Key = (usize, usize, String, String);

/// Cross-repetition rows: `value` series get mean/std and five-number
/// statistics, per-repetition statistics (layer quartiles, ...) get their
/// mean under the same stat name.
fn aggregate(points: &[SeriesPoint], styles: &[Style]) -> (Vec<SeriesPoint>, Vec<Summary>) {
    let style_pos = |s: Style| styles.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    let mut groups: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.rep.is_some()) {
        groups
            .entry((style_pos(p.style), p.t, p.series.clone(), p.stat.clone()))
            .or_default()
            .push(p.value);
    }
    let mut out = Vec::new();
    let mut last: BTreeMap<(usize, String), (usize, Vec<f64>)> = BTreeMap::new();
    for ((si, t, series, stat), values) in groups {
        let style = styles[si];
        let mk = |stat: &str, value: f64| SeriesPoint {
            style,
            rep: None,
            t,
            series: series.clone(),
            stat: stat.to_string(),
            value,
        };
        let (mean, std) = mean_std(&values).expect("nonempty group");
        if stat == "value" {
            let five = five_numbers(&values).expect("nonempty group");
            out.push(mk("mean", mean));
            out.push(mk("std", std));
            for (name, v) in ["min", "q1", "median", "q3", "max"].iter().zip(five) {
                out.push(mk(name, v));
            }
            let e = last.entry((si, series.clone())).or_insert((t, values.clone()));
            if t >= e.0 {
                *e = (t, values);
            }
        } else {
            out.push(mk(&stat, mean));
        }
    }
    let summaries = last
        .into_iter()
        .map(|((si, series), (t, values))| {
            let (mean, std) = mean_std(&values).expect("nonempty group");
            Summary {
                style: styles[si],
                series,
                t,
                n: values.len(),
                mean,
                std,
            }
        })
        .collect();
    (out, summaries)
}
