//! Panel count data: the mean function of a counting process observed at a
//! few random times per subject, fitted by the pooled weighted isotonic
//! regression of the counts.

use crate::ci::{CiMethod, ConfidenceInterval};
use crate::error::{Error, Result};
use crate::isotonic::{weighted_isotonic_max_min, WeightedSeries, WindowFit};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Read;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSubject {
    pub times: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCountData {
    pub subjects: Vec<PanelSubject>,
}

#[derive(Debug, Deserialize)]
struct LongRow {
    subject: String,
    time: f64,
    count: u64,
}

impl PanelCountData {
    pub fn new(subjects: Vec<PanelSubject>) -> Result<Self> {
        if subjects.iter().all(|s| s.times.is_empty()) {
            return Err(Error::EmptySeries);
        }
        for (i, s) in subjects.iter().enumerate() {
            if s.times.len() != s.counts.len() {
                return Err(Error::LengthMismatch { expected: s.times.len(), got: s.counts.len() });
            }
            if s.times.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidArgument(format!("subject {i} has a non-finite time")));
            }
            if s.times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidArgument(format!("subject {i} has decreasing observation times")));
            }
        }
        Ok(PanelCountData { subjects })
    }

    /// Long format with header `subject,time,count`; rows of a subject need
    /// not be contiguous or ordered.
    pub fn from_long_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut rows: Vec<Vec<(f64, u64)>> = Vec::new();
        for rec in rdr.deserialize::<LongRow>() {
            let row = rec.map_err(|e| Error::Io(e.to_string()))?;
            let k = *index.entry(row.subject).or_insert_with(|| {
                rows.push(Vec::new());
                rows.len() - 1
            });
            rows[k].push((row.time, row.count));
        }
        let subjects = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (times, counts) = r.into_iter().unzip();
                PanelSubject { times, counts }
            })
            .collect();
        PanelCountData::new(subjects)
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// All `(time, count)` pairs across subjects.
    pub fn pooled(&self) -> (Vec<f64>, Vec<f64>) {
        self.subjects
            .iter()
            .flat_map(|s| s.times.iter().zip(&s.counts).map(|(&t, &c)| (t, c as f64)))
            .unzip()
    }

    /// Distinct times with their multiplicities and mean counts.
    pub fn series(&self) -> Result<WeightedSeries> {
        let (t, n) = self.pooled();
        WeightedSeries::from_points(&t, &n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelFit {
    pub window: WindowFit,
    /// Mean squared deviation of the counts in the window from the estimate.
    pub sigma2: f64,
}

pub fn panel_count_fit(data: &PanelCountData, t0: f64) -> Result<PanelFit> {
    let (t, n) = data.pooled();
    let window = weighted_isotonic_max_min(&WeightedSeries::from_points(&t, &n)?, t0)?;
    let mut ss = 0.0;
    for (&ti, &ni) in t.iter().zip(&n) {
        if ti >= window.u_hat && ti <= window.v_hat {
            ss += (ni - window.value).powi(2);
        }
    }
    let sigma2 = ss / window.weight;
    Ok(PanelFit { window, sigma2 })
}

/// `Lambda +- c * sigma_hat / sqrt(n_uv)`, intersected with `[0, inf)`, where
/// `n_uv` counts every observation time in the window.
pub fn panel_count_ci(data: &PanelCountData, t0: f64, c_delta: f64) -> Result<ConfidenceInterval> {
    let fit = panel_count_fit(data, t0)?;
    let hw = c_delta * fit.sigma2.sqrt() / fit.window.weight.sqrt();
    Ok(ConfidenceInterval::symmetric(fit.window.value, hw, f64::NAN, CiMethod::PanelCount).clipped(0.0, f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci::pivotal_ci;
    use crate::design::{DesignGrid, Sample, Scatter};
    use crate::isotonic::{block_fit, pava_unit};
    use crate::sim::replication_rng;
    use crate::variance::local_block_variance;
    use rand::Rng;

    #[test]
    fn single_observation() {
        let d = PanelCountData::new(vec![PanelSubject { times: vec![1.0], counts: vec![3] }]).unwrap();
        let ci = panel_count_ci(&d, 1.0, 2.11).unwrap();
        assert_eq!((ci.center, ci.lower, ci.upper), (3.0, 3.0, 3.0));
    }

    #[test]
    fn rejects_decreasing_times() {
        let s = PanelSubject { times: vec![2.0, 1.0], counts: vec![0, 1] };
        assert!(PanelCountData::new(vec![s]).is_err());
    }

    #[test]
    fn long_csv_groups_and_sorts() {
        let text = "subject,time,count\na,0.5,2\nb,0.2,0\na,0.1,1\nb,0.9,4\n";
        let d = PanelCountData::from_long_csv(text.as_bytes()).unwrap();
        assert_eq!(d.n_subjects(), 2);
        assert_eq!(d.subjects[0], PanelSubject { times: vec![0.1, 0.5], counts: vec![1, 2] });
        assert_eq!(d.subjects[1].times, vec![0.2, 0.9]);
    }

    #[test]
    fn single_visits_reduce_to_regression() {
        for rep in 0..50 {
            let mut rng = replication_rng(5, rep);
            let n = 30;
            let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            times.sort_by(f64::total_cmp);
            let counts: Vec<u64> = (0..n).map(|i| (i as u64) / 4 + rng.random_range(0..4)).collect();
            let subjects = times
                .iter()
                .zip(&counts)
                .map(|(&t, &c)| PanelSubject { times: vec![t], counts: vec![c] })
                .collect();
            let d = PanelCountData::new(subjects).unwrap();
            let y: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            assert_eq!(d.series().unwrap().fitted(), pava_unit(&y));
            let pts: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
            let sample = Sample::new(DesignGrid::Scatter(Scatter::new(&pts).unwrap()), y).unwrap();
            for &t0 in times.iter().step_by(3) {
                let fit = block_fit(&sample, &[t0]).unwrap();
                let var = local_block_variance(&sample, &fit).unwrap();
                let reg = pivotal_ci(&fit, var.sd(), 2.11, f64::NAN).clipped(0.0, f64::INFINITY);
                let pan = panel_count_ci(&d, t0, 2.11).unwrap();
                assert!((reg.center - pan.center).abs() < 1e-12);
                assert!((reg.lower - pan.lower).abs() < 1e-12);
                assert!((reg.upper - pan.upper).abs() < 1e-12);
            }
        }
    }
}
