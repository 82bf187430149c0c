//! Interval-censored observations: the distribution function of an unseen
//! event time from the indicators `1{X <= T}` at inspection times `T`.

use crate::ci::{CiMethod, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::isotonic::{weighted_isotonic_max_min, WeightedSeries, WindowFit};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentStatusData {
    pub times: Vec<f64>,
    pub indicators: Vec<bool>,
}

impl CurrentStatusData {
    pub fn new(times: Vec<f64>, indicators: Vec<bool>) -> Result<Self> {
        if times.len() != indicators.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: indicators.len() });
        }
        if times.is_empty() {
            return Err(Error::EmptySeries);
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("inspection times must be finite".into()));
        }
        Ok(CurrentStatusData { times, indicators })
    }

    pub fn series(&self) -> Result<WeightedSeries> {
        let y: Vec<f64> = self.indicators.iter().map(|&d| if d { 1.0 } else { 0.0 }).collect();
        WeightedSeries::from_points(&self.times, &y)
    }
}

/// Isotonic estimate of the distribution function at `t0` with its window;
/// the window weight counts the inspection times inside it.
pub fn current_status_fit(data: &CurrentStatusData, t0: f64) -> Result<WindowFit> {
    weighted_isotonic_max_min(&data.series()?, t0)
}

/// `F +- c * sqrt(F (1 - F)) / sqrt(#{T in [u_hat, v_hat]})`, intersected with `[0, 1]`.
pub fn current_status_ci(data: &CurrentStatusData, t0: f64, c_delta: f64) -> Result<ConfidenceInterval> {
    let fit = current_status_fit(data, t0)?;
    let f = fit.value;
    let hw = c_delta * (f * (1.0 - f)).max(0.0).sqrt() / fit.weight.sqrt();
    let ci = ConfidenceInterval::symmetric(f, hw, f64::NAN, CiMethod::CurrentStatus).clipped(0.0, 1.0);
    Ok(if f <= 0.0 || f >= 1.0 {
        ci.with_warning("degenerate at boundary: the estimate is 0 or 1 and the interval collapses")
    } else {
        ci
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_events_observed() {
        let d = CurrentStatusData::new(vec![0.1, 0.4, 0.7], vec![true; 3]).unwrap();
        let ci = current_status_ci(&d, 0.4, 2.11).unwrap();
        assert_eq!((ci.lower, ci.upper), (1.0, 1.0));
        assert!(ci.warning.is_some());
    }

    #[test]
    fn two_sorted_indicators() {
        let d = CurrentStatusData::new(vec![0.3, 0.6], vec![false, true]).unwrap();
        assert_eq!(current_status_fit(&d, 0.3).unwrap().value, 0.0);
        let ci = current_status_ci(&d, 0.6, 2.11).unwrap();
        assert_eq!(ci.center, 1.0);
        assert!(ci.warning.is_some());
    }

    #[test]
    fn interior_interval() {
        let d = CurrentStatusData::new(vec![0.5, 0.1, 0.3, 0.9, 0.7], vec![true, false, true, true, false]).unwrap();
        let fit = current_status_fit(&d, 0.5).unwrap();
        // Sorted indicators 0,1,1,0,1 pool to 0, 2/3, 2/3, 2/3, 1.
        assert!((fit.value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fit.weight, 3.0);
        let ci = current_status_ci(&d, 0.5, 2.11).unwrap();
        let hw = 2.11 * (2.0f64 / 9.0).sqrt() / 3f64.sqrt();
        assert!((ci.lower - (2.0 / 3.0 - hw)).abs() < 1e-15);
        assert_eq!(ci.upper, 1.0);
        assert!(ci.warning.is_none());
    }
}
