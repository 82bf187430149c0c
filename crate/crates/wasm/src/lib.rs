//! Browser bindings. Every operation takes and returns a JSON string so the
//! page needs no generated glue beyond the three exported functions.

use isoci::ci::{pivotal_ci, CriticalValueTable};
use isoci::expr::Expr;
use isoci::models::grenander_ci;
use isoci::sim::{simulate_pivot_quantile, SimConfig};
use isoci::variance::{difference_variance, LocalBlockVariances};
use isoci::{BlockEstimator, DesignGrid, DesignMode, Lattice, Sample};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegressionRequest {
    /// Covariate rows; plain numbers are read as one-dimensional points.
    x: Vec<Point>,
    y: Vec<f64>,
    /// Query points; every design point when absent.
    #[serde(default)]
    x0: Option<Vec<Point>>,
    /// Known noise level; estimated when absent.
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    c: Option<f64>,
    #[serde(default = "default_delta")]
    delta: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    fn coords(self) -> Vec<f64> {
        match self {
            Point::Scalar(v) => vec![v],
            Point::Vector(v) => v,
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

#[derive(Serialize)]
struct Interval {
    x0: Vec<f64>,
    estimate: f64,
    lower: f64,
    upper: f64,
    sigma_hat: Option<f64>,
    block_count: Option<usize>,
    warning: Option<String>,
}

#[derive(Serialize)]
struct IntervalResponse {
    critical_value: f64,
    intervals: Vec<Interval>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))
}

fn default_c(c: Option<f64>, d: usize, delta: f64) -> Result<f64, String> {
    match c {
        Some(c) if c >= 0.0 && c.is_finite() => Ok(c),
        Some(c) => Err(format!("critical value {c} is not a nonnegative number")),
        None => CriticalValueTable::defaults()
            .lookup(d, delta)
            .ok_or_else(|| format!("no default critical value for d = {d}, delta = {delta}")),
    }
}

/// Pivotal intervals for isotonic regression.
pub fn regression_ci_json(request: &str) -> Result<String, String> {
    let req: RegressionRequest = parse(request)?;
    let points: Vec<Vec<f64>> = req.x.into_iter().map(Point::coords).collect();
    if points.len() != req.y.len() {
        return Err(format!("{} covariate rows but {} responses", points.len(), req.y.len()));
    }
    let (grid, order) = DesignGrid::from_points(&points, DesignMode::Auto).map_err(|e| e.to_string())?;
    let y = order.iter().map(|&i| req.y[i]).collect();
    let sample = Sample::new(grid, y).map_err(|e| e.to_string())?;
    let d = sample.dim();
    let c = default_c(req.c, d, req.delta)?;
    let queries = match req.x0 {
        Some(q) => q.into_iter().map(Point::coords).collect(),
        None => sample.grid.points(),
    };
    let global = req.sigma.or_else(|| difference_variance(&sample).ok().map(|v| v.sd()));
    let est = BlockEstimator::new(&sample.grid);
    let local = LocalBlockVariances::new(&sample);
    let intervals = queries
        .into_iter()
        .map(|x0| {
            let fit = est.fit(&sample.y, &x0).map_err(|e| e.to_string())?;
            let sigma = match global {
                Some(s) => s,
                None => local.at(&fit).map_err(|e| e.to_string())?.sqrt(),
            };
            let ci = pivotal_ci(&fit, sigma, c, 1.0 - req.delta);
            Ok(Interval {
                x0,
                estimate: ci.center,
                lower: ci.lower,
                upper: ci.upper,
                sigma_hat: Some(sigma),
                block_count: Some(fit.n_uv),
                warning: None,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&IntervalResponse { critical_value: c, intervals })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    shape: Vec<usize>,
    f0: String,
    #[serde(default)]
    x0: Option<Vec<f64>>,
    #[serde(default = "one")]
    sigma: f64,
    replications: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_deltas")]
    deltas: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.10]
}

/// Most replications the page may request in one call.
const MAX_REPLICATIONS: usize = 20_000;

/// Monte Carlo quantiles of the self-normalized pivot on a regular lattice.
pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = parse(request)?;
    if req.replications > MAX_REPLICATIONS {
        return Err(format!("at most {MAX_REPLICATIONS} replications in the browser"));
    }
    let lattice = Lattice::regular(&req.shape).map_err(|e| e.to_string())?;
    let d = lattice.dim();
    let f0 = Expr::parse(&req.f0).map_err(|e| e.to_string())?;
    let x0 = req.x0.unwrap_or_else(|| vec![0.5; d]);
    let cfg = SimConfig::from_expr(DesignGrid::Lattice(lattice), &f0, x0, req.sigma, req.replications, req.seed)
        .map_err(|e| e.to_string())?;
    let q = simulate_pivot_quantile(&cfg, &req.deltas).map_err(|e| e.to_string())?;
    to_json(&q)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GrenanderRequest {
    data: Vec<f64>,
    x0: Vec<f64>,
    #[serde(default)]
    c: Option<f64>,
    #[serde(default = "default_delta")]
    delta: f64,
}

/// Intervals for a nonincreasing density.
pub fn grenander_json(request: &str) -> Result<String, String> {
    let req: GrenanderRequest = parse(request)?;
    let c = default_c(req.c, 1, req.delta)?;
    let intervals = req
        .x0
        .iter()
        .map(|&t| {
            let ci = grenander_ci(&req.data, t, c).map_err(|e| e.to_string())?;
            Ok(Interval {
                x0: vec![t],
                estimate: ci.center,
                lower: ci.lower,
                upper: ci.upper,
                sigma_hat: None,
                block_count: None,
                warning: ci.warning,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&IntervalResponse { critical_value: c, intervals })
}

#[wasm_bindgen(js_name = regressionCi)]
pub fn regression_ci_js(request: &str) -> Result<String, JsError> {
    regression_ci_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulateCriticalValues)]
pub fn simulate_js(request: &str) -> Result<String, JsError> {
    simulate_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = grenanderCi)]
pub fn grenander_ci_js(request: &str) -> Result<String, JsError> {
    grenander_json(request).map_err(|e| JsError::new(&e))
}
