//! Coverage, length and paired-comparison experiments. Replication `b` of
//! every experiment draws from the stream `(seed, b)`, and every method in a
//! run sees the same replications.

use super::config::{ExperimentConfig, MethodKind, ModelKind, VarianceMode};
use super::report::{CoverageReport, LengthRow, LengthStudy, Region, Tally};
use crate::ci::{max_min_only_from_fit, oracle_half_width, pivotal_ci, ConfidenceInterval};
use crate::design::{DesignGrid, Lattice, Sample};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::isotonic::{BlockEstimator, BlockFit};
use crate::lrt::{bw_interval, BwProfile};
use crate::models::{
    current_status_ci, glm_isotonic_ci, grenander_ci, panel_count_ci, CurrentStatusData, GlmFamily,
    GlmVarianceMode, PanelCountData, PanelSubject,
};
use crate::numeric::{sort_floats, type1_quantile};
use crate::par::map_indexed;
use crate::sim::{check_failures, gaussian_response, replication_rng, simulate_pivot_field};
use crate::smooth::smooth_proxy;
use crate::variance::{difference_variance, LocalBlockVariances};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Replications evaluated per parallel batch before tallying.
const BATCH: usize = 256;

/// Offset separating the recalibration streams from the experiment streams.
const PILOT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

type Outcome = Option<(bool, f64)>;

fn score(ci: &ConfidenceInterval, truth: f64) -> Outcome {
    if ci.lower.is_finite() && ci.upper.is_finite() {
        Some((ci.contains(truth), ci.length()))
    } else {
        None
    }
}

/// Runs `replicate` over all replications in order-preserving batches and
/// tallies outcomes per (method, point). `skip[m][p]` marks cells that are
/// not evaluated at all.
fn tally(
    replications: usize,
    threads: Option<usize>,
    methods: usize,
    points: usize,
    skip: &[Vec<bool>],
    replicate: impl Fn(usize) -> Vec<Outcome> + Sync + Send,
) -> Result<Vec<Vec<Tally>>> {
    let mut tallies = vec![vec![Tally::default(); points]; methods];
    let mut start = 0;
    while start < replications {
        let len = BATCH.min(replications - start);
        let outs = map_indexed(len, threads, |i| replicate(start + i));
        for o in outs {
            for m in 0..methods {
                for p in 0..points {
                    if !skip[m][p] {
                        tallies[m][p].record(o[m * points + p]);
                    }
                }
            }
        }
        start += len;
    }
    let evaluated: usize = skip.iter().flatten().filter(|s| !**s).count() * replications;
    let failed: usize = tallies.iter().flatten().map(|t| t.failures).sum();
    check_failures(failed, evaluated)?;
    Ok(tallies)
}

struct EvalPoint {
    x: Vec<f64>,
    design: Option<usize>,
    f0: f64,
    partials: Option<Vec<f64>>,
    region: Region,
}

fn tabulate(expr: &Expr, grid: &DesignGrid) -> Result<Vec<f64>> {
    let truth: Vec<f64> = (0..grid.len()).map(|i| expr.eval(&grid.point(i))).collect();
    if truth.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("truth: not finite on the design".into()));
    }
    Ok(truth)
}

fn regions(cfg: &ExperimentConfig, grid: &DesignGrid, points: &[Vec<f64>]) -> Result<Vec<Region>> {
    let (Some(spec), DesignGrid::Lattice(l)) = (&cfg.inner, grid) else {
        return Ok(vec![Region::All; points.len()]);
    };
    let ranges = spec.ranges(l.shape())?;
    Ok(points
        .iter()
        .map(|x| {
            let inside = ranges
                .iter()
                .zip(l.axes())
                .zip(x)
                .all(|((&[a, b], axis), &c)| c >= axis[a] && c <= axis[b]);
            if inside {
                Region::Inner
            } else {
                Region::Outskirt
            }
        })
        .collect())
}

struct Regression {
    grid: DesignGrid,
    est: BlockEstimator,
    truth: Vec<f64>,
    eval: Vec<EvalPoint>,
    /// Evaluation points are all design points in storage order.
    bulk: bool,
    methods: Vec<MethodKind>,
    sigma: f64,
    variance: VarianceMode,
    c: f64,
    c_oracle: f64,
    bw_threshold: f64,
    cv: Vec<f64>,
    seed: u64,
}

impl Regression {
    fn new(cfg: &ExperimentConfig, grid: DesignGrid) -> Result<Self> {
        let expr = cfg.truth_expr()?;
        let d = grid.dim();
        let truth = tabulate(&expr, &grid)?;
        let (points, bulk) = match &cfg.points {
            Some(p) => (p.clone(), false),
            None => (grid.points(), true),
        };
        let region = regions(cfg, &grid, &points)?;
        let eval: Vec<EvalPoint> = points
            .into_iter()
            .zip(region)
            .enumerate()
            .map(|(i, (x, region))| {
                let design = if bulk { Some(i) } else { (0..grid.len()).find(|&j| grid.point(j) == x) };
                let g = expr.gradient(&x, d);
                let partials = g.iter().all(|v| *v > 0.0 && v.is_finite()).then_some(g);
                EvalPoint { f0: expr.eval(&x), design, partials, region, x }
            })
            .collect();
        let c_oracle = if cfg.methods.contains(&MethodKind::Oracle) { cfg.oracle_value(d)? } else { f64::NAN };
        let mut r = Regression {
            est: BlockEstimator::new(&grid),
            grid,
            truth,
            eval,
            bulk,
            methods: cfg.methods.clone(),
            sigma: cfg.sigma,
            variance: cfg.variance,
            c: cfg.block_critical_value(d)?,
            c_oracle,
            bw_threshold: cfg.bw_threshold,
            cv: Vec::new(),
            seed: cfg.seed,
        };
        if r.methods.contains(&MethodKind::CvAdjusted) {
            r.cv = r.pilot_critical_values(cfg)?;
        }
        Ok(r)
    }

    /// Critical values recalibrated once per experiment: one pilot sample
    /// gives the smooth proxy and noise level, and the pivot is simulated at
    /// every design point in bulk.
    fn pilot_critical_values(&self, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
        let pilot_seed = cfg.seed.wrapping_add(PILOT_SEED_OFFSET);
        let y = gaussian_response(&self.truth, self.sigma, &mut replication_rng(pilot_seed, 0));
        let sample = Sample::new(self.grid.clone(), y)?;
        let proxy = smooth_proxy(&sample)?;
        let sigma = match difference_variance(&sample) {
            Ok(v) => v.sd(),
            Err(_) => {
                let fits = self.est.fit_all(&sample.y)?;
                let lv = LocalBlockVariances::new(&sample);
                let vals: Vec<f64> = fits.iter().filter_map(|f| lv.at(f).ok()).collect();
                (vals.iter().sum::<f64>() / vals.len().max(1) as f64).sqrt()
            }
        };
        let field = simulate_pivot_field(&self.grid, &proxy.y, sigma, cfg.pilot_replications, pilot_seed.wrapping_add(1), cfg.threads)?;
        self.eval
            .iter()
            .map(|e| {
                let i = e.design.ok_or_else(|| Error::Config("points: cv_adjusted needs design points".into()))?;
                Ok(type1_quantile(&field[i], 1.0 - cfg.delta))
            })
            .collect()
    }

    fn skip(&self) -> Vec<Vec<bool>> {
        self.methods
            .iter()
            .map(|m| self.eval.iter().map(|e| *m == MethodKind::Oracle && e.partials.is_none()).collect())
            .collect()
    }

    fn replicate(&self, b: usize) -> Vec<Outcome> {
        let mut rng = replication_rng(self.seed, b);
        let y = gaussian_response(&self.truth, self.sigma, &mut rng);
        let fits: Vec<Option<BlockFit>> = if self.bulk {
            match self.est.fit_all(&y) {
                Ok(v) => v.into_iter().map(Some).collect(),
                Err(_) => vec![None; self.eval.len()],
            }
        } else {
            self.eval.iter().map(|e| self.est.fit(&y, &e.x).ok()).collect()
        };
        let sample = Sample { grid: self.grid.clone(), y };
        let diff = match self.variance {
            VarianceMode::Difference => difference_variance(&sample).ok().map(|v| v.value),
            _ => None,
        };
        let local = (self.variance == VarianceMode::LocalBlock).then(|| LocalBlockVariances::new(&sample));
        let sigma_hat = |fit: &BlockFit| -> Option<f64> {
            match self.variance {
                VarianceMode::Known => Some(self.sigma),
                VarianceMode::Difference => diff.map(f64::sqrt),
                VarianceMode::LocalBlock => local.as_ref()?.at(fit).ok().map(f64::sqrt),
            }
        };
        let bw = self.methods.contains(&MethodKind::BwLrt).then(|| BwProfile::new(&sample).ok()).flatten();
        let bw_var = match self.variance {
            VarianceMode::Known => Some(self.sigma * self.sigma),
            _ => diff.or_else(|| difference_variance(&sample).ok().map(|v| v.value)),
        };
        let n = self.grid.len();
        let mut out = Vec::with_capacity(self.methods.len() * self.eval.len());
        for &m in &self.methods {
            for (p, e) in self.eval.iter().enumerate() {
                let fit = fits[p].as_ref();
                let o = match m {
                    MethodKind::Pivotal => fit.and_then(|f| score(&pivotal_ci(f, sigma_hat(f)?, self.c, f64::NAN), e.f0)),
                    MethodKind::MaxMinOnly => {
                        fit.and_then(|f| score(&max_min_only_from_fit(f, sigma_hat(f)?, self.c, f64::NAN), e.f0))
                    }
                    MethodKind::CvAdjusted => {
                        fit.and_then(|f| score(&pivotal_ci(f, sigma_hat(f)?, self.cv[p], f64::NAN), e.f0))
                    }
                    MethodKind::Oracle => fit.and_then(|f| {
                        let hw = oracle_half_width(e.partials.as_ref()?, self.sigma, n, self.c_oracle).ok()?;
                        score(&ConfidenceInterval::symmetric(f.f_avg, hw, f64::NAN, crate::ci::CiMethod::Oracle), e.f0)
                    }),
                    MethodKind::BwLrt => match (&bw, bw_var) {
                        (Some(profile), Some(v)) => score(&bw_interval(profile, e.x[0], self.bw_threshold * v), e.f0),
                        _ => None,
                    },
                };
                out.push(o);
            }
        }
        out
    }

    fn run(&self, threads: Option<usize>, replications: usize) -> Result<CoverageReport> {
        let skip = self.skip();
        let tallies = tally(replications, threads, self.methods.len(), self.eval.len(), &skip, |b| self.replicate(b))?;
        let names: Vec<String> = self.methods.iter().map(|m| m.as_str().to_string()).collect();
        let points: Vec<Vec<f64>> = self.eval.iter().map(|e| e.x.clone()).collect();
        let regions: Vec<Region> = self.eval.iter().map(|e| e.region).collect();
        Ok(CoverageReport::build(self.grid.dim(), &names, &points, &regions, tallies))
    }
}

/// Coverage proportions and interval lengths at each evaluation point.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    cfg.validate()?;
    match cfg.model {
        ModelKind::Regression => Regression::new(cfg, cfg.design()?)?.run(cfg.threads, cfg.replications),
        _ => run_model_coverage(cfg),
    }
}

/// Block-average and max-min-only intervals on shared replications.
pub fn run_estimator_comparison(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    if cfg.model != ModelKind::Regression {
        return Err(Error::Config("model: the estimator comparison is for regression".into()));
    }
    let cfg = ExperimentConfig { methods: vec![MethodKind::Pivotal, MethodKind::MaxMinOnly], ..cfg.clone() };
    run_coverage(&cfg)
}

/// Block-average and likelihood-ratio intervals on shared replications.
pub fn run_bw_comparison(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    if cfg.model != ModelKind::Regression {
        return Err(Error::Config("model: the likelihood-ratio comparison is for regression".into()));
    }
    if cfg.variance != VarianceMode::Known {
        return Err(Error::Config("variance: the likelihood-ratio comparison uses the known noise level".into()));
    }
    let cfg = ExperimentConfig { methods: vec![MethodKind::Pivotal, MethodKind::BwLrt], ..cfg.clone() };
    run_coverage(&cfg)
}

/// Interval lengths at one point for a range of sample sizes, with the
/// oracle length alongside. Lattices get `round(n^(1/d))` points per axis.
pub fn run_length_study(cfg: &ExperimentConfig, n_list: &[usize]) -> Result<LengthStudy> {
    cfg.validate()?;
    if cfg.model != ModelKind::Regression {
        return Err(Error::Config("model: the length study is for regression".into()));
    }
    if n_list.is_empty() {
        return Err(Error::Config("n: at least one sample size is required".into()));
    }
    let d = cfg.design()?.dim();
    let x0 = match &cfg.points {
        Some(p) if p.len() == 1 => p[0].clone(),
        Some(_) => return Err(Error::Config("points: the length study takes exactly one point".into())),
        None => vec![0.5; d],
    };
    let expr = cfg.truth_expr()?;
    let c_oracle = cfg.oracle_value(d).ok();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let m = (n as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
        let grid = DesignGrid::Lattice(Lattice::regular(&vec![m; d])?);
        let sub = ExperimentConfig {
            methods: vec![MethodKind::Pivotal],
            points: Some(vec![x0.clone()]),
            inner: None,
            ..cfg.clone()
        };
        let report = Regression::new(&sub, grid.clone())?.run(cfg.threads, cfg.replications)?;
        let row = &report.rows[0];
        let partials = expr.gradient(&x0, d);
        let oracle_length = c_oracle
            .and_then(|c| oracle_half_width(&partials, cfg.sigma, grid.len(), c).ok())
            .map_or(f64::NAN, |h| 2.0 * h);
        rows.push(LengthRow {
            n: grid.len(),
            coverage: row.coverage,
            q1_length: row.q1_length,
            median_length: row.median_length,
            q3_length: row.q3_length,
            oracle_length,
            failures: row.failures,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.median_length > 0.0 && r.median_length.is_finite())
        .map(|r| ((r.n as f64).ln(), r.median_length.ln()))
        .collect();
    Ok(LengthStudy { point: x0, slope: ols_slope(&pts), rows })
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if lambda > 0.0 {
        Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    }
}

fn run_model_coverage(cfg: &ExperimentConfig) -> Result<CoverageReport> {
    let expr = cfg.truth_expr()?;
    let f = |t: f64| expr.eval(&[t]);
    let c = cfg.block_critical_value(1)?;
    let (points, design_x): (Vec<Vec<f64>>, Vec<f64>) = match cfg.model {
        ModelKind::Glm => {
            let grid = cfg.design()?;
            let mut x: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)[0]).collect();
            sort_floats(&mut x);
            let pts = cfg.points.clone().unwrap_or_else(|| x.iter().map(|&v| vec![v]).collect());
            (pts, x)
        }
        _ => (cfg.points.clone().unwrap_or_default(), Vec::new()),
    };
    let truth_at: Vec<f64> = points.iter().map(|p| f(p[0])).collect();
    if truth_at.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("truth: not finite at the evaluation points".into()));
    }
    let n = cfg.n.unwrap_or(design_x.len());
    let name = match cfg.model {
        ModelKind::Grenander => "grenander",
        ModelKind::CurrentStatus => "current_status",
        ModelKind::PanelCount => "panel_count",
        ModelKind::Glm => "glm",
        ModelKind::Regression => unreachable!("handled by the regression runner"),
    };
    let envelope = if cfg.model == ModelKind::Grenander {
        let e = f(0.0).max(f(cfg.support * 1e-12));
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Config("truth: the density must be positive and finite at 0".into()));
        }
        e
    } else {
        f64::NAN
    };
    let theta: Vec<f64> = design_x.iter().map(|&x| f(x)).collect();
    let family = cfg.family.unwrap_or(GlmFamily::Gaussian);
    let glm_mode = if cfg.variance == VarianceMode::LocalBlock { GlmVarianceMode::LocalBlock } else { GlmVarianceMode::Family };

    let replicate = |b: usize| -> Vec<Outcome> {
        let mut rng = replication_rng(cfg.seed, b);
        let eval = |ci: Result<ConfidenceInterval>, t: f64| ci.ok().and_then(|ci| score(&ci, t));
        match cfg.model {
            ModelKind::Grenander => {
                let data: Vec<f64> = (0..n)
                    .map(|_| loop {
                        let x = cfg.support * (1.0 - rng.random::<f64>());
                        if rng.random::<f64>() * envelope <= f(x) {
                            break x;
                        }
                    })
                    .collect();
                points.iter().zip(&truth_at).map(|(p, &t)| eval(grenander_ci(&data, p[0], c), t)).collect()
            }
            ModelKind::CurrentStatus => {
                let times: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let ind: Vec<bool> = times.iter().map(|&t| rng.random::<f64>() <= f(t)).collect();
                match CurrentStatusData::new(times, ind) {
                    Ok(d) => points.iter().zip(&truth_at).map(|(p, &t)| eval(current_status_ci(&d, p[0], c), t)).collect(),
                    Err(_) => vec![None; points.len()],
                }
            }
            ModelKind::PanelCount => {
                let subjects = (0..n)
                    .map(|_| {
                        let mut times: Vec<f64> = (0..cfg.visits).map(|_| rng.random::<f64>()).collect();
                        sort_floats(&mut times);
                        let mut level = 0.0;
                        let mut count = 0;
                        let counts = times
                            .iter()
                            .map(|&t| {
                                let next = f(t);
                                count += poisson(next - level, &mut rng);
                                level = level.max(next);
                                count
                            })
                            .collect();
                        PanelSubject { times, counts }
                    })
                    .collect();
                match PanelCountData::new(subjects) {
                    Ok(d) => points.iter().zip(&truth_at).map(|(p, &t)| eval(panel_count_ci(&d, p[0], c), t)).collect(),
                    Err(_) => vec![None; points.len()],
                }
            }
            ModelKind::Glm => {
                let y: Vec<f64> = theta
                    .iter()
                    .map(|&th| match family {
                        GlmFamily::Gaussian => {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            th + cfg.sigma * z
                        }
                        GlmFamily::Bernoulli => (rng.random::<f64>() < th) as u8 as f64,
                        GlmFamily::Poisson => poisson(th, &mut rng) as f64,
                    })
                    .collect();
                points
                    .iter()
                    .zip(&truth_at)
                    .map(|(p, &t)| eval(glm_isotonic_ci(&design_x, &y, family, p[0], c, glm_mode), t))
                    .collect()
            }
            ModelKind::Regression => unreachable!("handled by the regression runner"),
        }
    };
    let skip = vec![vec![false; points.len()]];
    let tallies = tally(cfg.replications, cfg.threads, 1, points.len(), &skip, replicate)?;
    let regions = vec![Region::All; points.len()];
    Ok(CoverageReport::build(1, &[name.to_string()], &points, &regions, tallies))
}
