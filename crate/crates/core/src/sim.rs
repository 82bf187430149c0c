//! Monte-Carlo calibration of critical values.
//!
//! Replication `b` draws its noise from a ChaCha8 stream keyed by
//! `(seed, b)`, so results do not depend on scheduling or thread count.

use crate::design::DesignGrid;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::isotonic::{BlockEstimator, BlockFit};
use crate::numeric::{sort_floats, type1_quantile};
use crate::par::map_indexed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `sqrt(n_uv) |f_hat - f0| / sigma`
    Pivot,
    /// `(n / sigma^2)^(1/(d+2)) |f_hat - f0| / K`
    ScaledError,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: DesignGrid,
    /// Truth at every design point, in storage order.
    pub truth: Vec<f64>,
    pub x0: Vec<f64>,
    pub f0_x0: f64,
    pub sigma: f64,
    pub replications: usize,
    pub seed: u64,
    pub statistic: Statistic,
    /// Partial derivatives of the truth at `x0`, for the scaled error.
    pub partials: Option<Vec<f64>>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub delta: f64,
    pub c: f64,
    pub stderr: f64,
    pub replications: usize,
}

impl SimConfig {
    pub fn from_expr(
        grid: DesignGrid,
        f0: &Expr,
        x0: Vec<f64>,
        sigma: f64,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = grid.dim();
        if f0.arity() > d {
            return Err(Error::Expr(format!("truth uses {} variables but the design has {d}", f0.arity())));
        }
        let truth: Vec<f64> = (0..grid.len()).map(|i| f0.eval(&grid.point(i))).collect();
        if truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::Expr("truth is not finite on the design".into()));
        }
        let f0_x0 = f0.eval(&x0);
        let partials = Some(f0.gradient(&x0, d));
        let mut cfg = SimConfig::from_values(grid, truth, x0, sigma, replications, seed)?;
        cfg.f0_x0 = f0_x0;
        cfg.partials = partials;
        Ok(cfg)
    }

    /// Truth given by values at the design points; `x0` must be one of them.
    pub fn from_values(
        grid: DesignGrid,
        truth: Vec<f64>,
        x0: Vec<f64>,
        sigma: f64,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        if truth.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: truth.len() });
        }
        if replications == 0 {
            return Err(Error::InvalidArgument("need at least one replication".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be a nonnegative number, got {sigma}")));
        }
        if x0.len() != grid.dim() {
            return Err(Error::LengthMismatch { expected: grid.dim(), got: x0.len() });
        }
        let f0_x0 = (0..grid.len())
            .find(|&i| grid.point(i) == x0)
            .map(|i| truth[i])
            .unwrap_or(f64::NAN);
        Ok(SimConfig {
            grid,
            truth,
            x0,
            f0_x0,
            sigma,
            replications,
            seed,
            statistic: Statistic::Pivot,
            partials: None,
            threads: None,
        })
    }

    pub fn with_statistic(mut self, s: Statistic) -> Self {
        self.statistic = s;
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

/// The noise stream of replication `b`.
pub fn replication_rng(seed: u64, b: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    rng
}

/// `truth + sigma * N(0, 1)` noise, drawn in storage order.
pub fn gaussian_response(truth: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    truth
        .iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            m + sigma * z
        })
        .collect()
}

/// `sqrt(n_uv) |f_avg - f0| / sigma`, with the noiseless convention
/// `0` for an exact fit and `inf` otherwise.
pub fn pivot(fit: &BlockFit, f0: f64, sigma: f64) -> f64 {
    let err = (fit.f_avg - f0).abs();
    if sigma == 0.0 {
        return if err == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (fit.n_uv as f64).sqrt() * err / sigma
}

/// `(prod_k partial_k / 2)^(1/(d+2))`.
pub fn rate_constant(partials: &[f64]) -> Result<f64> {
    for (index, &value) in partials.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonpositivePartial { index, value });
        }
    }
    let d = partials.len() as f64;
    Ok(partials.iter().map(|p| p / 2.0).product::<f64>().powf(1.0 / (d + 2.0)))
}

fn statistic_of(cfg: &SimConfig, fit: &BlockFit, k: f64) -> f64 {
    match cfg.statistic {
        Statistic::Pivot => pivot(fit, cfg.f0_x0, cfg.sigma),
        Statistic::ScaledError => {
            let err = (fit.f_avg - cfg.f0_x0).abs();
            if cfg.sigma == 0.0 {
                return if err == 0.0 { 0.0 } else { f64::INFINITY };
            }
            let d = cfg.grid.dim() as f64;
            let n = cfg.grid.len() as f64;
            (n / (cfg.sigma * cfg.sigma)).powf(1.0 / (d + 2.0)) * err / k
        }
    }
}

fn validate(cfg: &SimConfig) -> Result<f64> {
    if cfg.f0_x0.is_nan() {
        return Err(Error::InvalidArgument("truth at the query point is unknown".into()));
    }
    match cfg.statistic {
        Statistic::Pivot => {
            if !cfg.grid.contains_point(&cfg.x0) {
                return Err(Error::InvalidArgument("the pivot is simulated at a design point".into()));
            }
            Ok(1.0)
        }
        Statistic::ScaledError => {
            let p = cfg
                .partials
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("scaled error needs partial derivatives".into()))?;
            rate_constant(p)
        }
    }
}

/// One replication's statistic.
pub fn run_replication(cfg: &SimConfig, est: &BlockEstimator, b: usize) -> Result<f64> {
    let k = validate(cfg)?;
    let mut rng = replication_rng(cfg.seed, b);
    let y = gaussian_response(&cfg.truth, cfg.sigma, &mut rng);
    let fit = est.fit(&y, &cfg.x0)?;
    Ok(statistic_of(cfg, &fit, k))
}

/// Fails when more than 0.1% of replications failed.
pub fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed * 1000 > total {
        return Err(Error::ReplicationFailures { failed, total });
    }
    Ok(())
}

/// All replication statistics, sorted ascending; failed replications are
/// dropped after the failure-rate check.
pub fn simulate_statistic(cfg: &SimConfig) -> Result<Vec<f64>> {
    let k = validate(cfg)?;
    let est = BlockEstimator::new(&cfg.grid);
    let raw = map_indexed(cfg.replications, cfg.threads, |b| {
        let mut rng = replication_rng(cfg.seed, b);
        let y = gaussian_response(&cfg.truth, cfg.sigma, &mut rng);
        est.fit(&y, &cfg.x0).map(|f| statistic_of(cfg, &f, k))
    });
    let failed = raw.iter().filter(|r| r.is_err()).count();
    check_failures(failed, raw.len())?;
    let mut v: Vec<f64> = raw.into_iter().filter_map(|r| r.ok()).collect();
    sort_floats(&mut v);
    Ok(v)
}

/// Type-1 quantiles at levels `1 - delta` with an order-statistic standard
/// error: the width of the distribution-free 95% interval for the quantile
/// divided by `2 * 1.96`.
pub fn quantiles(sorted: &[f64], deltas: &[f64]) -> Vec<QuantileEstimate> {
    let n = sorted.len();
    deltas
        .iter()
        .map(|&delta| {
            let p = 1.0 - delta;
            let c = type1_quantile(sorted, p);
            let half = 1.96 * (n as f64 * delta * (1.0 - delta)).sqrt();
            let centre = n as f64 * p;
            let rank = |r: f64| (r.ceil().max(1.0) as usize).min(n);
            let lo = sorted[rank(centre - half) - 1];
            let hi = sorted[rank(centre + half) - 1];
            let stderr = if hi.is_finite() && lo.is_finite() { (hi - lo) / (2.0 * 1.96) } else { f64::INFINITY };
            QuantileEstimate { delta, c, stderr, replications: n }
        })
        .collect()
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(Error::InvalidArgument(format!("delta {d} outside (0, 1]")));
    }
    Ok(())
}

/// Quantiles of the self-normalized pivot.
pub fn simulate_pivot_quantile(cfg: &SimConfig, deltas: &[f64]) -> Result<Vec<QuantileEstimate>> {
    check_deltas(deltas)?;
    let cfg = SimConfig { statistic: Statistic::Pivot, ..cfg.clone() };
    let v = simulate_statistic(&cfg)?;
    Ok(quantiles(&v, deltas))
}

/// Quantiles of the rate-scaled error.
pub fn simulate_d_quantile(cfg: &SimConfig, partials: &[f64], deltas: &[f64]) -> Result<Vec<QuantileEstimate>> {
    check_deltas(deltas)?;
    rate_constant(partials)?;
    let cfg = SimConfig { statistic: Statistic::ScaledError, partials: Some(partials.to_vec()), ..cfg.clone() };
    let v = simulate_statistic(&cfg)?;
    Ok(quantiles(&v, deltas))
}

/// Pivots at every design point for each replication, computed in bulk.
/// Returns one sorted vector of pivots per design point.
pub fn simulate_pivot_field(
    grid: &DesignGrid,
    truth: &[f64],
    sigma: f64,
    replications: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let est = BlockEstimator::new(grid);
    let per_rep = map_indexed(replications, threads, |b| {
        let mut rng = replication_rng(seed, b);
        let y = gaussian_response(truth, sigma, &mut rng);
        est.fit_all(&y)
            .map(|fits| fits.iter().zip(truth).map(|(f, &t)| pivot(f, t, sigma)).collect::<Vec<f64>>())
    });
    let failed = per_rep.iter().filter(|r| r.is_err()).count();
    check_failures(failed, replications)?;
    let mut field = vec![Vec::with_capacity(replications); grid.len()];
    for rep in per_rep.into_iter().flatten() {
        for (i, v) in rep.into_iter().enumerate() {
            field[i].push(v);
        }
    }
    for v in &mut field {
        sort_floats(v);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Lattice;
    use rand::Rng;

    fn line(n: usize) -> DesignGrid {
        DesignGrid::Lattice(Lattice::regular(&[n]).unwrap())
    }

    #[test]
    fn noiseless_pivot_is_zero() {
        let f0 = Expr::parse("x").unwrap();
        let cfg = SimConfig::from_expr(line(20), &f0, vec![0.5], 0.0, 5, 1).unwrap();
        let est = BlockEstimator::new(&cfg.grid);
        for b in 0..5 {
            assert_eq!(run_replication(&cfg, &est, b).unwrap(), 0.0);
        }
    }

    #[test]
    fn replication_is_reproducible() {
        let f0 = Expr::parse("5*(x-0.5)").unwrap();
        let cfg = SimConfig::from_expr(line(50), &f0, vec![0.5], 1.0, 10, 42).unwrap();
        let est = BlockEstimator::new(&cfg.grid);
        assert_eq!(run_replication(&cfg, &est, 3).unwrap(), run_replication(&cfg, &est, 3).unwrap());
    }

    #[test]
    fn streams_are_uncorrelated() {
        let b = 20_000;
        let mut r0 = replication_rng(7, 0);
        let mut r1 = replication_rng(7, 1);
        let a: Vec<f64> = (0..b).map(|_| r0.random::<f64>()).collect();
        let c: Vec<f64> = (0..b).map(|_| r1.random::<f64>()).collect();
        let ma = a.iter().sum::<f64>() / b as f64;
        let mc = c.iter().sum::<f64>() / b as f64;
        let cov: f64 = a.iter().zip(&c).map(|(x, y)| (x - ma) * (y - mc)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vc: f64 = c.iter().map(|y| (y - mc).powi(2)).sum();
        let r = cov / (va * vc).sqrt();
        assert!(r.abs() < 4.0 / (b as f64).sqrt(), "r = {r}");
    }

    #[test]
    fn quantile_edges_and_monotonicity() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = quantiles(&v, &[1.0, 0.5, 0.05, 0.01]);
        assert_eq!(q[0].c, 1.0);
        assert_eq!(q[1].c, 50.0);
        assert_eq!(q[2].c, 95.0);
        assert!(q.windows(2).all(|w| w[0].c <= w[1].c));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let f0 = Expr::parse("2*x1 + x2").unwrap();
        let g = DesignGrid::Lattice(Lattice::regular(&[6, 6]).unwrap());
        let x0 = g.point(14);
        let base = SimConfig::from_expr(g, &f0, x0, 1.0, 64, 9).unwrap();
        let a = simulate_pivot_quantile(&base.clone().with_threads(Some(1)), &[0.05, 0.1]).unwrap();
        let b = simulate_pivot_quantile(&base.with_threads(Some(3)), &[0.05, 0.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn off_design_query_rejected() {
        let f0 = Expr::parse("x").unwrap();
        let cfg = SimConfig::from_expr(line(10), &f0, vec![0.55], 1.0, 5, 1).unwrap();
        assert!(simulate_pivot_quantile(&cfg, &[0.05]).is_err());
    }
}
