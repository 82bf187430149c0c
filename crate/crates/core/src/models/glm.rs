//! Isotonic regression in one-parameter exponential families, parametrized
//! by the mean. The maximum likelihood fit is the isotonic regression of the
//! responses for every family.

use crate::ci::{CiMethod, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::isotonic::{weighted_isotonic_max_min, WeightedSeries, WindowFit};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmFamily {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl GlmFamily {
    /// Variance as a function of the mean; `None` when it involves an
    /// unknown dispersion.
    pub fn variance(self, theta: f64) -> Option<f64> {
        match self {
            GlmFamily::Gaussian => None,
            GlmFamily::Bernoulli => Some(theta * (1.0 - theta)),
            GlmFamily::Poisson => Some(theta),
        }
    }

    /// Closure of the mean domain.
    pub fn range(self) -> (f64, f64) {
        match self {
            GlmFamily::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
            GlmFamily::Bernoulli => (0.0, 1.0),
            GlmFamily::Poisson => (0.0, f64::INFINITY),
        }
    }

    fn check(self, y: f64) -> bool {
        match self {
            GlmFamily::Gaussian => y.is_finite(),
            GlmFamily::Bernoulli => y == 0.0 || y == 1.0,
            GlmFamily::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Bernoulli => "bernoulli",
            GlmFamily::Poisson => "poisson",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmVarianceMode {
    /// The family variance at the fitted mean.
    Family,
    /// Mean squared deviation from the fit over the window.
    LocalBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub window: WindowFit,
    pub variance: f64,
    pub mode: GlmVarianceMode,
}

pub fn glm_isotonic_fit(x: &[f64], y: &[f64], family: GlmFamily, x0: f64, mode: GlmVarianceMode) -> Result<GlmFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("covariates must be sorted nondecreasing".into()));
    }
    if let Some(i) = y.iter().position(|&v| !family.check(v)) {
        return Err(Error::InvalidArgument(format!(
            "response {} at index {i} is not valid for the {} family",
            y[i],
            family.as_str()
        )));
    }
    let window = weighted_isotonic_max_min(&WeightedSeries::from_points(x, y)?, x0)?;
    let local = || {
        let ss: f64 = x
            .iter()
            .zip(y)
            .filter(|(&xi, _)| xi >= window.u_hat && xi <= window.v_hat)
            .map(|(_, &yi)| (yi - window.value).powi(2))
            .sum();
        ss / window.weight
    };
    let (variance, mode) = match mode {
        GlmVarianceMode::LocalBlock => (local(), mode),
        GlmVarianceMode::Family => match family.variance(window.value) {
            Some(v) => (v, mode),
            None => (local(), GlmVarianceMode::LocalBlock),
        },
    };
    Ok(GlmFit { window, variance, mode })
}

/// `theta +- c * sigma_hat / sqrt(#{x_i in [u_hat, v_hat]})`, intersected
/// with the closure of the mean domain.
pub fn glm_isotonic_ci(
    x: &[f64],
    y: &[f64],
    family: GlmFamily,
    x0: f64,
    c_delta: f64,
    mode: GlmVarianceMode,
) -> Result<ConfidenceInterval> {
    let fit = glm_isotonic_fit(x, y, family, x0, mode)?;
    let hw = c_delta * fit.variance.max(0.0).sqrt() / fit.window.weight.sqrt();
    let (lo, hi) = family.range();
    let mut ci = ConfidenceInterval::symmetric(fit.window.value, hw, f64::NAN, CiMethod::Glm);
    if family != GlmFamily::Gaussian {
        ci = ci.clipped(lo, hi);
    }
    let at_boundary = fit.window.value <= lo || fit.window.value >= hi;
    Ok(if fit.mode == GlmVarianceMode::Family && at_boundary {
        ci.with_warning("boundary variance: the fit sits on the edge of the mean domain and the family variance vanishes")
    } else {
        ci
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::pivotal_ci;
    use crate::design::{DesignGrid, Lattice, Sample};
    use crate::isotonic::block_fit;
    use crate::models::current_status::{current_status_fit, CurrentStatusData};
    use crate::sim::{gaussian_response, replication_rng};
    use crate::variance::local_block_variance;
    use rand::Rng;

    #[test]
    fn bernoulli_matches_current_status() {
        for rep in 0..30 {
            let mut rng = replication_rng(11, rep);
            let mut t: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
            t.sort_by(f64::total_cmp);
            let d: Vec<bool> = t.iter().map(|&ti| rng.random::<f64>() < ti).collect();
            let y: Vec<f64> = d.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let cs = CurrentStatusData::new(t.clone(), d).unwrap();
            for &t0 in &t {
                let g = glm_isotonic_fit(&t, &y, GlmFamily::Bernoulli, t0, GlmVarianceMode::Family).unwrap();
                assert_eq!(g.window, current_status_fit(&cs, t0).unwrap());
            }
        }
    }

    #[test]
    fn gaussian_matches_regression() {
        let grid = Lattice::regular(&[60]).unwrap();
        let x: Vec<f64> = grid.axes()[0].clone();
        let truth: Vec<f64> = x.iter().map(|v| v * v).collect();
        let mut rng = replication_rng(3, 0);
        let y = gaussian_response(&truth, 0.2, &mut rng);
        let sample = Sample::new(DesignGrid::Lattice(grid), y.clone()).unwrap();
        for &x0 in &x {
            let fit = block_fit(&sample, &[x0]).unwrap();
            let var = local_block_variance(&sample, &fit).unwrap();
            let reg = pivotal_ci(&fit, var.sd(), 2.11, f64::NAN);
            for mode in [GlmVarianceMode::Family, GlmVarianceMode::LocalBlock] {
                let g = glm_isotonic_ci(&x, &y, GlmFamily::Gaussian, x0, 2.11, mode).unwrap();
                assert!((g.center - reg.center).abs() < 1e-12);
                assert!((g.lower - reg.lower).abs() < 1e-12 && (g.upper - reg.upper).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bernoulli_boundary_warns() {
        let x = [0.1, 0.2, 0.3, 0.4];
        let y = [0.0, 0.0, 1.0, 1.0];
        let ci = glm_isotonic_ci(&x, &y, GlmFamily::Bernoulli, 0.1, 2.11, GlmVarianceMode::Family).unwrap();
        assert_eq!(ci.length(), 0.0);
        assert!(ci.warning.is_some());
        let ci = glm_isotonic_ci(&x, &y, GlmFamily::Bernoulli, 0.1, 2.11, GlmVarianceMode::LocalBlock).unwrap();
        assert!(ci.warning.is_none());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(glm_isotonic_fit(&[0.2, 0.1], &[0.0, 1.0], GlmFamily::Bernoulli, 0.1, GlmVarianceMode::Family).is_err());
        assert!(glm_isotonic_fit(&[0.1, 0.2], &[0.5, 1.0], GlmFamily::Bernoulli, 0.1, GlmVarianceMode::Family).is_err());
        assert!(glm_isotonic_fit(&[0.1, 0.2], &[-1.0, 1.0], GlmFamily::Poisson, 0.1, GlmVarianceMode::Family).is_err());
    }
}
