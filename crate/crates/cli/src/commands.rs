//! Subcommand bodies.

use super::{
    BwArgs, CiArgs, Critical, DesignArg, ExperimentArgs, FamilyArg, GlmArgs, GlmVarianceArg, GrenanderArgs, LengthArgs,
    MethodArg, ModelArgs, SimulateArgs, StatisticArg, VarianceArg,
};
use crate::data::{self, IntervalRow};
use isoci::ci::{adjusted_critical_value, max_min_only_from_fit, pivotal_ci, CriticalValueTable, Provenance};
use isoci::experiment::{
    run_bw_comparison, run_coverage, run_estimator_comparison, run_length_study, ExperimentConfig, RunMetadata,
};
use isoci::expr::Expr;
use isoci::lrt::{bw_interval, BwProfile};
use isoci::models::{
    current_status_ci, glm_isotonic_ci, grenander_ci_from_fit, grenander_fit, panel_count_ci, GlmFamily,
    GlmVarianceMode,
};
use isoci::sim::{simulate_d_quantile, simulate_pivot_quantile, SimConfig};
use isoci::variance::{difference_variance, LocalBlockVariances};
use isoci::{BlockEstimator, DesignGrid, DesignMode, Error, Lattice, Result};
use std::path::Path;
use std::time::Instant;

fn write_meta(
    path: Option<&Path>,
    command: &str,
    seed: u64,
    replications: usize,
    threads: Option<usize>,
    config: serde_json::Value,
    start: Instant,
) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut meta = RunMetadata::new(command, seed, replications, threads, config);
    meta.elapsed_seconds = start.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn args_json() -> serde_json::Value {
    serde_json::json!({ "args": std::env::args().skip(1).collect::<Vec<_>>() })
}

fn critical_value(crit: &Critical, d: usize) -> Result<f64> {
    if let Some(c) = crit.c {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("critical value {c} is not a nonnegative number")));
        }
        return Ok(c);
    }
    let table = match &crit.table {
        Some(p) => CriticalValueTable::read_csv(data::open(p)?)?,
        None => CriticalValueTable::defaults(),
    };
    table.lookup(d, crit.delta).ok_or_else(|| {
        Error::Config(format!("no critical value for d = {d}, delta = {}; pass --c or --table", crit.delta))
    })
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn queries(given: &[f64], observed: Vec<f64>) -> Vec<f64> {
    if given.is_empty() {
        distinct(observed)
    } else {
        given.to_vec()
    }
}

pub fn ci(a: CiArgs) -> Result<()> {
    let start = Instant::now();
    let mode = match a.design {
        DesignArg::Auto => DesignMode::Auto,
        DesignArg::Lattice => DesignMode::Lattice,
        DesignArg::Scatter => DesignMode::Scatter,
    };
    let sample = data::read_sample(&a.data, &a.response, mode)?;
    let d = sample.dim();
    let points = if a.x0.is_empty() { sample.grid.points() } else { a.x0.clone() };
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::InvalidArgument(format!("query point {p:?} does not have {d} coordinates")));
    }
    let fixed_c = match a.method {
        MethodArg::CvAdjusted => {
            if let Some(p) = points.iter().find(|p| !sample.grid.contains_point(p)) {
                return Err(Error::InvalidArgument(format!("recalibration needs design points, {p:?} is not one")));
            }
            None
        }
        _ => Some(critical_value(&a.critical, d)?),
    };
    if let Some(s) = a.sigma {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma {s} is not a nonnegative number")));
        }
    }
    let global_sigma = match (a.sigma, a.variance) {
        (Some(s), _) => Some(s),
        (None, VarianceArg::Difference) => Some(difference_variance(&sample)?.sd()),
        (None, VarianceArg::Auto) => difference_variance(&sample).ok().map(|v| v.sd()),
        (None, VarianceArg::LocalBlock) => None,
    };
    let est = BlockEstimator::new(&sample.grid);
    let local = LocalBlockVariances::new(&sample);
    let level = 1.0 - a.critical.delta;
    let mut out = Vec::with_capacity(points.len());
    for p in &points {
        let fit = est.fit(&sample.y, p)?;
        let sigma = match global_sigma {
            Some(s) => s,
            None => local.at(&fit)?.sqrt(),
        };
        let c = match fixed_c {
            Some(c) => c,
            None => adjusted_critical_value(&sample, p, a.critical.delta, a.replications, a.seed)?.0,
        };
        let (ci, count) = match a.method {
            MethodArg::MaxMinOnly => (max_min_only_from_fit(&fit, sigma, c, level), fit.n_minus),
            _ => (pivotal_ci(&fit, sigma, c, level), fit.n_uv),
        };
        out.push((ci, c, sigma, count as f64));
    }
    let rows: Vec<IntervalRow> = points
        .iter()
        .zip(&out)
        .map(|(p, (ci, c, s, n))| IntervalRow {
            point: p,
            ci,
            critical_value: *c,
            sigma_hat: Some(*s),
            block_count: Some(*n),
        })
        .collect();
    data::write_intervals(data::sink(a.output.out.as_deref())?, d, &rows)?;
    let reps = if a.method == MethodArg::CvAdjusted { a.replications } else { 0 };
    write_meta(a.output.meta.as_deref(), "ci", a.seed, reps, None, args_json(), start)
}

fn parse_shape(s: &str) -> Result<Vec<usize>> {
    s.split(['x', 'X', ','])
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("grid: '{t}' is not a positive integer")))
        })
        .collect()
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let shape = parse_shape(&a.grid)?;
    let d = shape.len();
    if let Some(dim) = a.dim {
        if dim != d {
            return Err(Error::InvalidArgument(format!("--dim {dim} does not match grid {}", a.grid)));
        }
    }
    let grid = DesignGrid::Lattice(Lattice::regular(&shape)?);
    let f0 = Expr::parse(&a.f0)?;
    let x0 = a.x0.clone().unwrap_or_else(|| vec![0.5; d]);
    let cfg = SimConfig::from_expr(grid, &f0, x0, a.sigma, a.replications, a.seed)?.with_threads(a.threads);
    let q = match a.statistic {
        StatisticArg::Pivot => simulate_pivot_quantile(&cfg, &a.deltas)?,
        StatisticArg::ScaledError => {
            let partials = a.partials.clone().or_else(|| cfg.partials.clone()).unwrap_or_default();
            simulate_d_quantile(&cfg, &partials, &a.deltas)?
        }
    };
    let table = CriticalValueTable::from_quantiles(d, &q, Provenance::Simulated, a.seed);
    table.write_csv(data::sink(a.output.out.as_deref())?)?;
    write_meta(a.output.meta.as_deref(), "simulate-critical-values", a.seed, a.replications, a.threads, args_json(), start)
}

fn load_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| Error::Io(format!("{}: {e}", a.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)
        .map_err(|e| Error::Config(format!("{}: {}", a.config.display(), e.to_string().trim_start_matches("config error: "))))?;
    if let Some(t) = a.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(b) = a.replications {
        cfg.replications = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::from_str(&cfg.to_json()).expect("config round-trips")
}

pub fn experiment(command: &str, a: ExperimentArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(&a)?;
    let report = match command {
        "compare-estimators" => run_estimator_comparison(&cfg)?,
        "compare-bw" => run_bw_comparison(&cfg)?,
        _ => run_coverage(&cfg)?,
    };
    let out = a.output.out.clone().or_else(|| cfg.output.clone().map(Into::into));
    report.write_csv(data::sink(out.as_deref())?)?;
    if let Some(p) = &a.summary {
        report.write_summary_csv(data::sink(Some(p))?)?;
    }
    write_meta(a.output.meta.as_deref(), command, cfg.seed, cfg.replications, cfg.threads, config_json(&cfg), start)
}

pub fn length_study(a: LengthArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = load_config(&a.experiment)?;
    let study = run_length_study(&cfg, &a.n)?;
    let out = a.experiment.output.out.clone().or_else(|| cfg.output.clone().map(Into::into));
    study.write_csv(data::sink(out.as_deref())?)?;
    eprintln!("slope of log median length on log n: {:.4}", study.slope);
    let mut config = config_json(&cfg);
    config["n"] = serde_json::json!(a.n);
    config["slope"] = serde_json::json!(study.slope);
    write_meta(a.experiment.output.meta.as_deref(), "length-study", cfg.seed, cfg.replications, cfg.threads, config, start)
}

fn write_line_intervals(
    output: &super::Output,
    command: &str,
    ts: &[f64],
    cis: &[isoci::ci::ConfidenceInterval],
    c: f64,
    sigma: Option<f64>,
    start: Instant,
) -> Result<()> {
    let pts: Vec<[f64; 1]> = ts.iter().map(|&t| [t]).collect();
    let rows: Vec<IntervalRow> = pts
        .iter()
        .zip(cis)
        .map(|(p, ci)| IntervalRow { point: p, ci, critical_value: c, sigma_hat: sigma, block_count: None })
        .collect();
    data::write_intervals(data::sink(output.out.as_deref())?, 1, &rows)?;
    write_meta(output.meta.as_deref(), command, 0, 0, None, args_json(), start)
}

pub fn grenander(a: GrenanderArgs) -> Result<()> {
    let start = Instant::now();
    let obs = data::read_column(&a.data, a.column.as_deref())?;
    let c = critical_value(&a.critical, 1)?;
    let ts = queries(&a.x0, obs.clone());
    let cis = ts.iter().map(|&t| Ok(grenander_ci_from_fit(&grenander_fit(&obs, t)?, c))).collect::<Result<Vec<_>>>()?;
    write_line_intervals(&a.output, "grenander-ci", &ts, &cis, c, None, start)
}

pub fn current_status(a: ModelArgs) -> Result<()> {
    let start = Instant::now();
    let d = data::read_current_status(&a.data)?;
    let c = critical_value(&a.critical, 1)?;
    let ts = queries(&a.x0, d.times.clone());
    let cis = ts.iter().map(|&t| current_status_ci(&d, t, c)).collect::<Result<Vec<_>>>()?;
    write_line_intervals(&a.output, "current-status-ci", &ts, &cis, c, None, start)
}

pub fn panel_count(a: ModelArgs) -> Result<()> {
    let start = Instant::now();
    let d = data::read_panel(&a.data)?;
    let c = critical_value(&a.critical, 1)?;
    let ts = queries(&a.x0, d.pooled().0);
    let cis = ts.iter().map(|&t| panel_count_ci(&d, t, c)).collect::<Result<Vec<_>>>()?;
    write_line_intervals(&a.output, "panel-count-ci", &ts, &cis, c, None, start)
}

pub fn glm(a: GlmArgs) -> Result<()> {
    let start = Instant::now();
    let (x, y) = data::read_sorted_pairs(&a.data, &a.response)?;
    let family = match a.family {
        FamilyArg::Gaussian => GlmFamily::Gaussian,
        FamilyArg::Bernoulli => GlmFamily::Bernoulli,
        FamilyArg::Poisson => GlmFamily::Poisson,
    };
    let mode = match a.variance {
        GlmVarianceArg::Family => GlmVarianceMode::Family,
        GlmVarianceArg::LocalBlock => GlmVarianceMode::LocalBlock,
    };
    let c = critical_value(&a.critical, 1)?;
    let ts = queries(&a.x0, x.clone());
    let cis = ts.iter().map(|&t| glm_isotonic_ci(&x, &y, family, t, c, mode)).collect::<Result<Vec<_>>>()?;
    write_line_intervals(&a.output, "glm-ci", &ts, &cis, c, None, start)
}

pub fn bw(a: BwArgs) -> Result<()> {
    let start = Instant::now();
    let sample = data::read_sample(&a.data, &a.response, DesignMode::Auto)?;
    if sample.dim() != 1 {
        return Err(Error::UnsupportedDim(sample.dim()));
    }
    if !(a.threshold > 0.0) {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    let var = match a.sigma {
        Some(s) if s >= 0.0 && s.is_finite() => s * s,
        Some(s) => return Err(Error::InvalidArgument(format!("sigma {s} is not a nonnegative number"))),
        None => difference_variance(&sample)?.value,
    };
    let profile = BwProfile::new(&sample)?;
    let ts = queries(&a.x0, sample.grid.points().into_iter().map(|p| p[0]).collect());
    let cis: Vec<_> = ts.iter().map(|&t| bw_interval(&profile, t, a.threshold * var)).collect();
    write_line_intervals(&a.output, "bw-ci", &ts, &cis, a.threshold, Some(var.sqrt()), start)
}
