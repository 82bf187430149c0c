//! Tricube local polynomial smoothing and the smooth monotone proxy used to
//! recalibrate critical values.

use crate::design::Sample;
use crate::error::{Error, Result};
use crate::isotonic::fit_at_design_points;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoessParams {
    /// Fraction of points in each neighbourhood.
    pub span: f64,
    /// Local polynomial degree; `None` picks 2 on the line and 1 otherwise.
    pub degree: Option<usize>,
}

impl Default for LoessParams {
    fn default() -> Self {
        LoessParams { span: 0.75, degree: None }
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn basis(dx: &[f64], degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree >= 1 {
        out.extend_from_slice(dx);
    }
    if degree >= 2 {
        for a in 0..dx.len() {
            for b in a..dx.len() {
                out.push(dx[a] * dx[b]);
            }
        }
    }
}

/// Local polynomial fit evaluated at each of `points`, with neighbourhoods
/// of the `floor(n * span)` nearest points and tricube weights.
pub fn loess(points: &[Vec<f64>], values: &[f64], params: LoessParams) -> Result<Vec<f64>> {
    let n = points.len();
    if values.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: values.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(params.span > 0.0) {
        return Err(Error::InvalidArgument("span must be positive".into()));
    }
    let d = points[0].len();
    let degree = params.degree.unwrap_or(if d == 1 { 2 } else { 1 });
    let q = ((n as f64 * params.span).floor() as usize).clamp(1, n);
    let mut dist = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut row = Vec::new();
    let mut out = Vec::with_capacity(n);
    for x in points {
        for (j, p) in points.iter().enumerate() {
            dist[j] = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        }
        scratch.copy_from_slice(&dist);
        let (_, h, _) = scratch.select_nth_unstable_by(q - 1, f64::total_cmp);
        let h = *h;
        // Slightly widened so the q-th neighbour keeps a positive weight.
        let h = if h > 0.0 { h * (1.0 + 1e-10) } else { f64::MIN_POSITIVE };
        let w: Vec<f64> = dist.iter().map(|&r| tricube(r / h)).collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateNeighborhood);
        }
        basis(&vec![0.0; d], degree, &mut row);
        let p = row.len();
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwy = DVector::<f64>::zeros(p);
        let mut dx = vec![0.0; d];
        for j in 0..n {
            if w[j] == 0.0 {
                continue;
            }
            for k in 0..d {
                dx[k] = points[j][k] - x[k];
            }
            basis(&dx, degree, &mut row);
            for a in 0..p {
                xtwy[a] += w[j] * row[a] * values[j];
                for b in 0..p {
                    xtwx[(a, b)] += w[j] * row[a] * row[b];
                }
            }
        }
        let local_constant = xtwy[0] / xtwx[(0, 0)];
        let fitted = xtwx
            .clone()
            .cholesky()
            .map(|c| c.solve(&xtwy)[0])
            .filter(|v| v.is_finite())
            .unwrap_or(local_constant);
        out.push(fitted);
    }
    Ok(out)
}

/// Smooth monotone stand-in for the truth: the block-average fit, smoothed,
/// then isotonized again with the block-average estimator.
pub fn smooth_proxy(sample: &Sample) -> Result<Sample> {
    smooth_proxy_with(sample, LoessParams::default())
}

pub fn smooth_proxy_with(sample: &Sample, params: LoessParams) -> Result<Sample> {
    let fitted = fit_at_design_points(sample)?.f_avg;
    let smoothed = loess(&sample.grid.points(), &fitted, params)?;
    let stage1 = Sample::new(sample.grid.clone(), smoothed)?;
    let proxy = fit_at_design_points(&stage1)?.f_avg;
    Sample::new(sample.grid.clone(), proxy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignGrid, Lattice};
    use crate::sim::{gaussian_response, replication_rng};

    fn lattice(shape: &[usize]) -> DesignGrid {
        DesignGrid::Lattice(Lattice::regular(shape).unwrap())
    }

    #[test]
    fn reproduces_linear_input() {
        for shape in [vec![40], vec![8, 9]] {
            let g = lattice(&shape);
            let y: Vec<f64> = g.points().iter().map(|p| 1.0 + p.iter().enumerate().map(|(k, c)| (k + 2) as f64 * c).sum::<f64>()).collect();
            let s = Sample::new(g, y.clone()).unwrap();
            let proxy = smooth_proxy(&s).unwrap();
            let dev = proxy.y.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-6, "deviation {dev}");
        }
    }

    #[test]
    fn constant_stays_constant() {
        let g = lattice(&[5, 5]);
        let s = Sample::new(g, vec![2.0; 25]).unwrap();
        let proxy = smooth_proxy(&s).unwrap();
        assert!(proxy.y.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn quadratic_reproduced_on_the_line() {
        let g = lattice(&[30]);
        let pts = g.points();
        let y: Vec<f64> = pts.iter().map(|p| p[0] * p[0] - p[0]).collect();
        let fit = loess(&pts, &y, LoessParams::default()).unwrap();
        for (a, b) in fit.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn proxy_beats_raw_fit_mostly() {
        let g = lattice(&[100]);
        let truth: Vec<f64> = g.points().iter().map(|p| (2.0 * p[0]).exp()).collect();
        let mut wins = 0;
        let trials = 200;
        for b in 0..trials {
            let mut rng = replication_rng(2024, b);
            let y = gaussian_response(&truth, 1.0, &mut rng);
            let s = Sample::new(g.clone(), y).unwrap();
            let raw = fit_at_design_points(&s).unwrap().f_avg;
            let proxy = smooth_proxy(&s).unwrap();
            assert!(proxy.y.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let e_raw = raw.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let e_proxy = proxy.y.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if e_proxy < e_raw {
                wins += 1;
            }
        }
        assert!(wins as f64 >= 0.8 * trials as f64, "{wins} of {trials}");
    }
}
