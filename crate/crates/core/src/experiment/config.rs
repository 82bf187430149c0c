//! JSON experiment configuration.

use crate::ci::CriticalValueTable;
use crate::design::{DesignGrid, Lattice, Scatter};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lrt::BW_DEFAULT_THRESHOLD;
use crate::models::GlmFamily;
use crate::sim::replication_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Regression,
    Grenander,
    CurrentStatus,
    PanelCount,
    Glm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Pivotal,
    MaxMinOnly,
    CvAdjusted,
    BwLrt,
    Oracle,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Pivotal => "pivotal",
            MethodKind::MaxMinOnly => "max_min_only",
            MethodKind::CvAdjusted => "cv_adjusted",
            MethodKind::BwLrt => "bw_lrt",
            MethodKind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    #[default]
    Known,
    Difference,
    LocalBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Regular lattice with points `i / m` on each axis.
    Lattice { shape: Vec<usize> },
    /// Uniform random points in the unit cube, drawn once from `seed`.
    Uniform { n: usize, dim: usize, seed: u64 },
    /// Explicit scattered points.
    Points { points: Vec<Vec<f64>> },
}

impl GridSpec {
    pub fn build(&self) -> Result<DesignGrid> {
        match self {
            GridSpec::Lattice { shape } => Ok(DesignGrid::Lattice(Lattice::regular(shape)?)),
            GridSpec::Uniform { n, dim, seed } => {
                let mut rng = replication_rng(*seed, 0);
                let pts: Vec<Vec<f64>> = (0..*n).map(|_| (0..*dim).map(|_| rng.random::<f64>()).collect()).collect();
                Ok(DesignGrid::Scatter(Scatter::new(&pts)?))
            }
            GridSpec::Points { points } => Ok(DesignGrid::Scatter(Scatter::new(points)?)),
        }
    }
}

/// Inner region of a lattice: a preset name or inclusive index ranges per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InnerSpec {
    Preset(String),
    Ranges(Vec<[usize; 2]>),
}

impl InnerSpec {
    pub fn ranges(&self, shape: &[usize]) -> Result<Vec<[usize; 2]>> {
        let r = match self {
            InnerSpec::Ranges(r) => r.clone(),
            InnerSpec::Preset(name) if name == "standard" => shape
                .iter()
                .map(|&m| match m {
                    25 => Ok([4, 20]),
                    9 => Ok([2, 6]),
                    _ => Err(Error::Config(format!("inner preset \"standard\" has no region for axis length {m}"))),
                })
                .collect::<Result<_>>()?,
            InnerSpec::Preset(name) => return Err(Error::Config(format!("inner: unknown preset \"{name}\""))),
        };
        if r.len() != shape.len() {
            return Err(Error::Config(format!("inner: expected {} ranges, got {}", shape.len(), r.len())));
        }
        for (k, (&[a, b], &m)) in r.iter().zip(shape).enumerate() {
            if a > b || b >= m {
                return Err(Error::Config(format!("inner: range [{a}, {b}] invalid for axis {k} of length {m}")));
            }
        }
        Ok(r)
    }
}

fn one() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.05
}
fn default_methods() -> Vec<MethodKind> {
    vec![MethodKind::Pivotal]
}
fn default_bw() -> f64 {
    BW_DEFAULT_THRESHOLD
}
fn default_visits() -> usize {
    2
}
fn default_pilot() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelKind,
    /// Mean function (regression, glm), density (grenander), distribution
    /// function (current_status) or mean count function (panel_count).
    pub truth: String,
    /// Design for regression and glm.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Sample size for grenander, current_status and panel_count.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "one")]
    pub sigma: f64,
    pub replications: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    #[serde(default)]
    pub variance: VarianceMode,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the default critical value for the block intervals.
    #[serde(default)]
    pub critical_value: Option<f64>,
    /// Quantile of the rate-scaled error used by the oracle interval.
    #[serde(default)]
    pub oracle_critical_value: Option<f64>,
    #[serde(default = "default_bw")]
    pub bw_threshold: f64,
    /// Evaluation points; all design points when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub inner: Option<InnerSpec>,
    #[serde(default)]
    pub family: Option<GlmFamily>,
    /// Observation times per subject for panel_count.
    #[serde(default = "default_visits")]
    pub visits: usize,
    /// Upper end of the density support for grenander.
    #[serde(default = "one")]
    pub support: f64,
    /// Replications used to recalibrate critical values.
    #[serde(default = "default_pilot")]
    pub pilot_replications: usize,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    /// Parses and validates; parse errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn truth_expr(&self) -> Result<Expr> {
        Expr::parse(&self.truth).map_err(|e| Error::Config(format!("truth: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.replications == 0 {
            return bad("replications", "must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", format!("{} is outside (0, 1)", self.delta));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma", format!("{} is not a nonnegative number", self.sigma));
        }
        if !(self.bw_threshold > 0.0) {
            return bad("bw_threshold", "must be positive".into());
        }
        if let Some(c) = self.critical_value {
            if !(c >= 0.0 && c.is_finite()) {
                return bad("critical_value", format!("{c} is not a nonnegative number"));
            }
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required".into());
        }
        let expr = self.truth_expr()?;
        match self.model {
            ModelKind::Regression | ModelKind::Glm => {
                let grid = match &self.grid {
                    Some(g) => g.build().map_err(|e| Error::Config(format!("grid: {e}")))?,
                    None => return bad("grid", "required for this model".into()),
                };
                if expr.arity() > grid.dim() {
                    return bad("truth", format!("uses {} variables but the design has {}", expr.arity(), grid.dim()));
                }
                if self.model == ModelKind::Glm {
                    if grid.dim() != 1 {
                        return bad("grid", "glm designs are one-dimensional".into());
                    }
                    if self.family.is_none() {
                        return bad("family", "required for glm".into());
                    }
                }
                if let Some(pts) = &self.points {
                    if let Some(p) = pts.iter().find(|p| p.len() != grid.dim()) {
                        return bad("points", format!("point {p:?} does not have {} coordinates", grid.dim()));
                    }
                }
                if self.model == ModelKind::Regression {
                    if self.methods.contains(&MethodKind::BwLrt) && grid.dim() != 1 {
                        return bad("methods", "bw_lrt needs a one-dimensional design".into());
                    }
                    if self.methods.contains(&MethodKind::CvAdjusted) {
                        if self.pilot_replications < 1000 {
                            return bad("pilot_replications", "recalibration needs at least 1000".into());
                        }
                        if let Some(pts) = &self.points {
                            if pts.iter().any(|p| !grid.contains_point(p)) {
                                return bad("points", "cv_adjusted needs every point on the design".into());
                            }
                        }
                    }
                    if self.variance == VarianceMode::Difference {
                        if let Err(e) = difference_capable(&grid) {
                            return bad("variance", e);
                        }
                    }
                }
                if self.inner.is_some() {
                    match &grid {
                        DesignGrid::Lattice(l) => {
                            self.inner.as_ref().unwrap().ranges(l.shape())?;
                        }
                        DesignGrid::Scatter(_) => return bad("inner", "only available on lattices".into()),
                    }
                }
            }
            ModelKind::Grenander | ModelKind::CurrentStatus | ModelKind::PanelCount => {
                match self.n {
                    Some(n) if n >= 2 => {}
                    _ => return bad("n", "a sample size of at least 2 is required for this model".into()),
                }
                match &self.points {
                    Some(p) if !p.is_empty() && p.iter().all(|q| q.len() == 1) => {}
                    _ => return bad("points", "one or more one-dimensional points are required".into()),
                }
                if expr.arity() > 1 {
                    return bad("truth", "must be a function of x alone".into());
                }
                if self.model == ModelKind::Grenander && !(self.support > 0.0) {
                    return bad("support", "must be positive".into());
                }
                if self.model == ModelKind::PanelCount && self.visits == 0 {
                    return bad("visits", "must be at least 1".into());
                }
            }
        }
        Ok(())
    }

    /// The design for regression and glm runs.
    pub fn design(&self) -> Result<DesignGrid> {
        self.grid.as_ref().ok_or_else(|| Error::Config("grid: required for this model".into()))?.build()
    }

    pub fn block_critical_value(&self, dim: usize) -> Result<f64> {
        if let Some(c) = self.critical_value {
            return Ok(c);
        }
        CriticalValueTable::defaults().lookup(dim, self.delta).ok_or_else(|| {
            Error::Config(format!("critical_value: no default for d = {dim}, delta = {}; set it explicitly", self.delta))
        })
    }

    pub fn oracle_value(&self, dim: usize) -> Result<f64> {
        if let Some(c) = self.oracle_critical_value {
            return Ok(c);
        }
        match (dim, self.delta == 0.05) {
            (1, true) => Ok(1.9964),
            (2, true) => Ok(1.85),
            (3, true) => Ok(1.78),
            _ => Err(Error::Config(format!(
                "oracle_critical_value: no default for d = {dim}, delta = {}; set it explicitly",
                self.delta
            ))),
        }
    }
}

fn difference_capable(grid: &DesignGrid) -> std::result::Result<(), String> {
    match grid {
        DesignGrid::Scatter(_) => Err("the difference estimator needs a lattice design".into()),
        DesignGrid::Lattice(l) if l.dim() > 3 => Err("the difference estimator covers d <= 3".into()),
        DesignGrid::Lattice(l) if l.shape().iter().any(|&m| m < 3) => {
            Err("the difference estimator needs at least 3 points per axis".into())
        }
        _ => Ok(()),
    }
}
