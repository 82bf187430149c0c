//! Confidence intervals and critical-value tables.

use crate::design::Sample;
use crate::error::{Error, Result};
use crate::isotonic::{block_fit, BlockFit};
use crate::sim::{quantiles, rate_constant, simulate_statistic, QuantileEstimate, SimConfig};
use crate::smooth::smooth_proxy;
use crate::variance::{difference_variance, local_block_variance};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Pivotal,
    MaxMinOnly,
    Oracle,
    BwLrt,
    Grenander,
    CurrentStatus,
    PanelCount,
    Glm,
}

impl CiMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CiMethod::Pivotal => "pivotal",
            CiMethod::MaxMinOnly => "max_min_only",
            CiMethod::Oracle => "oracle",
            CiMethod::BwLrt => "bw_lrt",
            CiMethod::Grenander => "grenander",
            CiMethod::CurrentStatus => "current_status",
            CiMethod::PanelCount => "panel_count",
            CiMethod::Glm => "glm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: CiMethod,
    /// Range the interval was intersected with, if any.
    pub clip: Option<(f64, f64)>,
    pub warning: Option<String>,
}

impl ConfidenceInterval {
    pub fn symmetric(center: f64, half_width: f64, level: f64, method: CiMethod) -> Self {
        ConfidenceInterval {
            center,
            half_width,
            lower: center - half_width,
            upper: center + half_width,
            level,
            method,
            clip: None,
            warning: None,
        }
    }

    /// Intersects with `[lo, hi]`.
    pub fn clipped(mut self, lo: f64, hi: f64) -> Self {
        self.lower = self.lower.max(lo);
        self.upper = self.upper.min(hi);
        if self.lower > self.upper {
            // Center outside the clip range; collapse onto the nearest end.
            let v = self.center.clamp(lo, hi);
            self.lower = v;
            self.upper = v;
        }
        self.clip = Some((lo, hi));
        self
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warning = Some(w.into());
        self
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `f_avg +- c * sigma_hat / sqrt(n_uv)`.
pub fn pivotal_ci(fit: &BlockFit, sigma_hat: f64, c_delta: f64, level: f64) -> ConfidenceInterval {
    let hw = c_delta * sigma_hat / (fit.n_uv as f64).sqrt();
    ConfidenceInterval::symmetric(fit.f_avg, hw, level, CiMethod::Pivotal)
}

/// Centered at the max-min estimate with the count of its own rectangle.
pub fn max_min_only_from_fit(fit: &BlockFit, sigma_hat: f64, c_delta: f64, level: f64) -> ConfidenceInterval {
    let hw = c_delta * sigma_hat / (fit.n_minus as f64).sqrt();
    ConfidenceInterval::symmetric(fit.f_minus, hw, level, CiMethod::MaxMinOnly)
}

pub fn max_min_only_ci(sample: &Sample, x0: &[f64], sigma_hat: f64, c_delta: f64) -> Result<ConfidenceInterval> {
    let fit = block_fit(sample, x0)?;
    Ok(max_min_only_from_fit(&fit, sigma_hat, c_delta, f64::NAN))
}

/// `c * (n / sigma^2)^(-1/(d+2)) * (prod partial_k / 2)^(1/(d+2))`.
pub fn oracle_half_width(partials: &[f64], sigma: f64, n: usize, c_delta: f64) -> Result<f64> {
    let k = rate_constant(partials)?;
    let d = partials.len() as f64;
    Ok(c_delta * (n as f64 / (sigma * sigma)).powf(-1.0 / (d + 2.0)) * k)
}

pub fn oracle_ci(center: f64, partials: &[f64], sigma: f64, n: usize, c_delta: f64) -> Result<ConfidenceInterval> {
    let hw = oracle_half_width(partials, sigma, n, c_delta)?;
    Ok(ConfidenceInterval::symmetric(center, hw, f64::NAN, CiMethod::Oracle))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Published,
    Simulated,
    CvAdjusted,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Published => "published",
            Provenance::Simulated => "simulated",
            Provenance::CvAdjusted => "cv_adjusted",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "published" => Ok(Provenance::Published),
            "simulated" => Ok(Provenance::Simulated),
            "cv_adjusted" => Ok(Provenance::CvAdjusted),
            _ => Err(Error::Config(format!("unknown provenance '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub d: usize,
    pub delta: f64,
    pub c: f64,
    pub provenance: Provenance,
    pub stderr: Option<f64>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub entries: Vec<CriticalValue>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    d: usize,
    delta: f64,
    c: f64,
    provenance: String,
    stderr: Option<f64>,
    seed: Option<u64>,
    #[serde(rename = "B")]
    b: Option<usize>,
}

impl CriticalValueTable {
    /// Published defaults for the self-normalized pivot.
    pub fn defaults() -> Self {
        let rows = [(1, 0.05, 2.11), (2, 0.05, 1.80), (3, 0.05, 1.63), (1, 0.10, 1.68), (2, 0.10, 1.42), (3, 0.10, 1.30)];
        CriticalValueTable {
            entries: rows
                .iter()
                .map(|&(d, delta, c)| CriticalValue {
                    d,
                    delta,
                    c,
                    provenance: Provenance::Published,
                    stderr: None,
                    seed: None,
                    replications: None,
                })
                .collect(),
        }
    }

    pub fn lookup(&self, d: usize, delta: f64) -> Option<f64> {
        self.entries.iter().find(|e| e.d == d && (e.delta - delta).abs() < 1e-12).map(|e| e.c)
    }

    pub fn insert(&mut self, entry: CriticalValue) {
        self.entries.retain(|e| !(e.d == entry.d && (e.delta - entry.delta).abs() < 1e-12));
        self.entries.push(entry);
    }

    pub fn from_quantiles(d: usize, q: &[QuantileEstimate], provenance: Provenance, seed: u64) -> Self {
        CriticalValueTable {
            entries: q
                .iter()
                .map(|e| CriticalValue {
                    d,
                    delta: e.delta,
                    c: e.c,
                    provenance,
                    stderr: Some(e.stderr),
                    seed: Some(seed),
                    replications: Some(e.replications),
                })
                .collect(),
        }
    }

    /// For each dimension, `c` strictly decreases as `delta` grows.
    pub fn is_monotone(&self) -> bool {
        let mut dims: Vec<usize> = self.entries.iter().map(|e| e.d).collect();
        dims.sort_unstable();
        dims.dedup();
        dims.into_iter().all(|d| {
            let mut v: Vec<&CriticalValue> = self.entries.iter().filter(|e| e.d == d).collect();
            v.sort_by(|a, b| a.delta.total_cmp(&b.delta));
            v.windows(2).all(|w| w[0].c > w[1].c)
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wr.serialize(CsvRow {
                d: e.d,
                delta: e.delta,
                c: e.c,
                provenance: e.provenance.as_str().to_string(),
                stderr: e.stderr,
                seed: e.seed,
                b: e.replications,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut entries = Vec::new();
        for row in rd.deserialize::<CsvRow>() {
            let row = row?;
            entries.push(CriticalValue {
                d: row.d,
                delta: row.delta,
                c: row.c,
                provenance: Provenance::parse(&row.provenance)?,
                stderr: row.stderr,
                seed: row.seed,
                replications: row.b,
            });
        }
        Ok(CriticalValueTable { entries })
    }
}

/// Noise level for recalibration: difference estimator on lattices with
/// every axis of length at least 3, local block variance otherwise.
pub fn calibration_sigma(sample: &Sample, x0: &[f64]) -> Result<f64> {
    match difference_variance(sample) {
        Ok(v) => Ok(v.sd()),
        Err(_) => {
            let fit = block_fit(sample, x0)?;
            Ok(local_block_variance(sample, &fit)?.sd())
        }
    }
}

/// Critical value recalibrated to the data: the pivot is simulated with the
/// smooth monotone proxy as truth and the estimated noise level.
pub fn adjusted_critical_value(
    sample: &Sample,
    x0: &[f64],
    delta: f64,
    replications: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if replications < 1000 {
        return Err(Error::InvalidArgument("recalibration needs at least 1000 replications".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} outside (0, 1]")));
    }
    let proxy = smooth_proxy(sample)?;
    let sigma = calibration_sigma(sample, x0)?;
    let cfg = SimConfig::from_values(sample.grid.clone(), proxy.y, x0.to_vec(), sigma, replications, seed)?;
    let v = simulate_statistic(&cfg)?;
    let q = quantiles(&v, &[delta]);
    Ok((q[0].c, q[0].stderr))
}
