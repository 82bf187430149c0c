//! Decreasing density estimation: the left derivative of the least concave
//! majorant of the empirical distribution function.

use crate::ci::{CiMethod, ConfidenceInterval};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrenanderFit {
    /// Vertices of the majorant, starting at 0.
    pub knots: Vec<f64>,
    /// Empirical distribution function at each vertex.
    pub cdf: Vec<f64>,
    /// Density on `(knots[j], knots[j + 1]]`.
    pub slopes: Vec<f64>,
    pub n: usize,
    pub x0: f64,
    pub value: f64,
    pub u_hat: f64,
    pub v_hat: f64,
}

impl GrenanderFit {
    /// Fitted density at `x`; zero beyond the largest observation.
    pub fn density(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(j) => self.slopes[j],
            None if x > 0.0 => 0.0,
            None => f64::NAN,
        }
    }

    fn segment(&self, x: f64) -> Option<usize> {
        if !(x > 0.0) || x > *self.knots.last().unwrap() {
            return None;
        }
        Some(self.knots.partition_point(|&k| k < x) - 1)
    }
}

fn majorant(data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for (i, &v) in x.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match pts.last_mut() {
            Some(p) if p.0 == v => p.1 = f,
            _ => pts.push((v, f)),
        }
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // Drop `a` when it lies on or below the chord from `o` to `p`.
            if (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.into_iter().unzip()
}

pub fn grenander_fit(data: &[f64], x0: f64) -> Result<GrenanderFit> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    if data.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument("observations must be positive and finite".into()));
    }
    let (knots, cdf) = majorant(data);
    let slopes: Vec<f64> = (0..knots.len() - 1)
        .map(|j| (cdf[j + 1] - cdf[j]) / (knots[j + 1] - knots[j]))
        .collect();
    let mut fit = GrenanderFit {
        knots,
        cdf,
        slopes,
        n: data.len(),
        x0,
        value: f64::NAN,
        u_hat: f64::NAN,
        v_hat: f64::NAN,
    };
    let j = fit.segment(x0).ok_or(Error::OutOfSupport(x0))?;
    fit.value = fit.slopes[j];
    fit.u_hat = fit.knots[j];
    fit.v_hat = fit.knots[j + 1];
    Ok(fit)
}

/// `f_hat +- c * sqrt(f_hat) / sqrt(n (v_hat - u_hat))`, intersected with `[0, inf)`.
pub fn grenander_ci_from_fit(fit: &GrenanderFit, c_delta: f64) -> ConfidenceInterval {
    let hw = c_delta * fit.value.sqrt() / (fit.n as f64 * (fit.v_hat - fit.u_hat)).sqrt();
    ConfidenceInterval::symmetric(fit.value, hw, f64::NAN, CiMethod::Grenander).clipped(0.0, f64::INFINITY)
}

pub fn grenander_ci(data: &[f64], x0: f64, c_delta: f64) -> Result<ConfidenceInterval> {
    Ok(grenander_ci_from_fit(&grenander_fit(data, x0)?, c_delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::replication_rng;
    use rand::Rng;

    /// `inf_{0 < u < x0} sup_{v >= x0} (F(v) - F(u)) / (v - u)` over the
    /// points where the extremes can occur.
    fn min_max_oracle(data: &[f64], x0: f64) -> f64 {
        let n = data.len() as f64;
        let ecdf = |t: f64| data.iter().filter(|&&v| v <= t).count() as f64 / n;
        let us: Vec<f64> = std::iter::once(0.0).chain(data.iter().copied().filter(|&v| v < x0)).collect();
        let vs: Vec<f64> = std::iter::once(x0).chain(data.iter().copied().filter(|&v| v >= x0)).collect();
        us.iter()
            .map(|&u| vs.iter().map(|&v| (ecdf(v) - ecdf(u)) / (v - u)).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn needs_two_points() {
        assert!(grenander_fit(&[1.0], 0.5).is_err());
        let eps = 1e-3;
        let fit = grenander_fit(&[1.0, 1.0 + eps], 0.5).unwrap();
        // One chord from the origin: height 1 / width.
        assert!((fit.value - 1.0 / (1.0 + eps)).abs() < 1e-12);
        assert_eq!((fit.u_hat, fit.v_hat), (0.0, 1.0 + eps));
    }

    #[test]
    fn out_of_support() {
        assert_eq!(grenander_fit(&[1.0, 2.0], 2.5).unwrap_err(), Error::OutOfSupport(2.5));
        assert_eq!(grenander_fit(&[1.0, 2.0], 0.0).unwrap_err(), Error::OutOfSupport(0.0));
    }

    #[test]
    fn matches_min_max_formula() {
        for rep in 0..25 {
            let mut rng = replication_rng(77, rep);
            let data: Vec<f64> = (0..20).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let top = data.iter().copied().fold(0.0, f64::max);
            let fit = grenander_fit(&data, top).unwrap();
            let integral: f64 =
                fit.slopes.iter().enumerate().map(|(j, s)| s * (fit.knots[j + 1] - fit.knots[j])).sum();
            assert!((integral - 1.0).abs() < 1e-12);
            assert!(fit.slopes.windows(2).all(|w| w[0] > w[1]));
            for q in 0..200 {
                let x0 = top * (q as f64 + 0.5) / 200.0;
                let lcm = grenander_fit(&data, x0).unwrap().value;
                let oracle = min_max_oracle(&data, x0);
                assert!((lcm - oracle).abs() < 1e-10, "x0={x0}: {lcm} vs {oracle}");
            }
        }
    }

    #[test]
    fn interval_arithmetic() {
        let fit = grenander_fit(&[1.0, 2.0, 3.0, 5.0], 2.0).unwrap();
        let ci = grenander_ci_from_fit(&fit, 0.0);
        assert_eq!((ci.lower, ci.upper), (fit.value, fit.value));
        let ci = grenander_ci_from_fit(&fit, 2.11);
        let expected = 2.11 * fit.value.sqrt() / (4.0 * (fit.v_hat - fit.u_hat)).sqrt();
        assert!((ci.half_width - expected).abs() < 1e-15);
        assert!(ci.lower >= 0.0);
    }
}
