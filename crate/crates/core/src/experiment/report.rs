//! Coverage summaries and their CSV and JSON forms.

use crate::error::{Error, Result};
use crate::numeric::{mean, sort_floats, std_dev, type1_quantile};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Version tag of the CSV layouts written here.
pub const CSV_SCHEMA: &str = "isoci-coverage-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    All,
    Inner,
    Outskirt,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::All => "all",
            Region::Inner => "inner",
            Region::Outskirt => "outskirt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub method: String,
    pub index: usize,
    pub point: Vec<f64>,
    /// `Inner` or `Outskirt` when an inner region is configured, else `All`.
    pub region: Region,
    pub coverage: f64,
    pub mean_length: f64,
    pub median_length: f64,
    pub q1_length: f64,
    pub q3_length: f64,
    pub failures: usize,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub method: String,
    pub region: Region,
    pub points: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub dim: usize,
    pub rows: Vec<PointStats>,
    pub summaries: Vec<CoverageSummary>,
}

/// Per-point tallies for one method.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    pub hits: usize,
    pub failures: usize,
    pub lengths: Vec<f64>,
}

impl Tally {
    pub fn record(&mut self, outcome: Option<(bool, f64)>) {
        match outcome {
            Some((hit, len)) => {
                self.hits += hit as usize;
                self.lengths.push(len);
            }
            None => self.failures += 1,
        }
    }
}

fn length_stats(lengths: &mut [f64]) -> (f64, f64, f64, f64) {
    if lengths.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    sort_floats(lengths);
    (
        mean(lengths),
        type1_quantile(lengths, 0.5),
        type1_quantile(lengths, 0.25),
        type1_quantile(lengths, 0.75),
    )
}

impl CoverageReport {
    /// Builds rows in method-major order and summaries over all points and,
    /// when regions are present, over the inner and outskirt subsets.
    pub(crate) fn build(
        dim: usize,
        methods: &[String],
        points: &[Vec<f64>],
        regions: &[Region],
        mut tallies: Vec<Vec<Tally>>,
    ) -> Self {
        let mut rows = Vec::new();
        for (m, name) in methods.iter().enumerate() {
            for (p, x) in points.iter().enumerate() {
                let t = &mut tallies[m][p];
                let used = t.lengths.len();
                let (mean_length, median_length, q1_length, q3_length) = length_stats(&mut t.lengths);
                rows.push(PointStats {
                    method: name.clone(),
                    index: p,
                    point: x.clone(),
                    region: regions[p],
                    coverage: if used == 0 { f64::NAN } else { t.hits as f64 / used as f64 },
                    mean_length,
                    median_length,
                    q1_length,
                    q3_length,
                    failures: t.failures,
                    replications: used,
                });
            }
        }
        let mut summaries = Vec::new();
        let split = regions.iter().any(|&r| r != Region::All);
        for name in methods {
            let mut groups = vec![Region::All];
            if split {
                groups.extend([Region::Inner, Region::Outskirt]);
            }
            for g in groups {
                let mut cov: Vec<f64> = rows
                    .iter()
                    .filter(|r| &r.method == name && (g == Region::All || r.region == g) && r.coverage.is_finite())
                    .map(|r| r.coverage)
                    .collect();
                sort_floats(&mut cov);
                let empty = cov.is_empty();
                summaries.push(CoverageSummary {
                    method: name.clone(),
                    region: g,
                    points: cov.len(),
                    mean: if empty { f64::NAN } else { mean(&cov) },
                    median: if empty { f64::NAN } else { type1_quantile(&cov, 0.5) },
                    sd: if cov.len() < 2 { f64::NAN } else { std_dev(&cov) },
                    min: cov.first().copied().unwrap_or(f64::NAN),
                    max: cov.last().copied().unwrap_or(f64::NAN),
                });
            }
        }
        CoverageReport { dim, rows, summaries }
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a PointStats> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn summary(&self, method: &str, region: Region) -> Option<&CoverageSummary> {
        self.summaries.iter().find(|s| s.method == method && s.region == region)
    }

    /// Points whose first coordinate lies in `[lo, hi]` with coverage below `level`.
    pub fn count_below(&self, method: &str, level: f64, lo: f64, hi: f64) -> usize {
        self.rows_for(method).filter(|r| r.point[0] >= lo && r.point[0] <= hi && r.coverage < level).count()
    }

    /// One row per method and point.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["method".to_string(), "index".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        header.extend(
            ["region", "coverage", "mean_length", "median_length", "q1_length", "q3_length", "failures", "replications"]
                .map(String::from),
        );
        wtr.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.method.clone(), r.index.to_string()];
            rec.extend(r.point.iter().map(|v| v.to_string()));
            rec.extend([
                r.region.as_str().to_string(),
                r.coverage.to_string(),
                r.mean_length.to_string(),
                r.median_length.to_string(),
                r.q1_length.to_string(),
                r.q3_length.to_string(),
                r.failures.to_string(),
                r.replications.to_string(),
            ]);
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["method", "region", "points", "mean", "median", "sd", "min", "max"]).map_err(csv_err)?;
        for s in &self.summaries {
            wtr.write_record([
                s.method.clone(),
                s.region.as_str().to_string(),
                s.points.to_string(),
                s.mean.to_string(),
                s.median.to_string(),
                s.sd.to_string(),
                s.min.to_string(),
                s.max.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Length-study row for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub n: usize,
    pub coverage: f64,
    pub q1_length: f64,
    pub median_length: f64,
    pub q3_length: f64,
    pub oracle_length: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStudy {
    pub point: Vec<f64>,
    pub rows: Vec<LengthRow>,
    /// Least-squares slope of log median length on log n.
    pub slope: f64,
}

impl LengthStudy {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["n", "coverage", "q1_length", "median_length", "q3_length", "oracle_length", "failures"])
            .map_err(csv_err)?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.coverage.to_string(),
                r.q1_length.to_string(),
                r.median_length.to_string(),
                r.q3_length.to_string(),
                r.oracle_length.to_string(),
                r.failures.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Run metadata written next to the CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub replications: usize,
    pub threads: Option<usize>,
    pub elapsed_seconds: f64,
    pub config: serde_json::Value,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, replications: usize, threads: Option<usize>, config: serde_json::Value) -> Self {
        RunMetadata {
            schema: CSV_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            replications,
            threads,
            elapsed_seconds: 0.0,
            config,
        }
    }
}
