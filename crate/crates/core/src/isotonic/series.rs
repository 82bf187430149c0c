//! Weighted series on the line and the max-min window at a query point.

use super::pava::{expand, pava_blocks, PavaBlock};
use crate::error::{Error, Result};
use crate::numeric::Dd;
use serde::{Deserialize, Serialize};

/// Distinct sorted positions with positive weights and per-position means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSeries {
    positions: Vec<f64>,
    weights: Vec<f64>,
    means: Vec<f64>,
}

impl WeightedSeries {
    pub fn new(positions: Vec<f64>, weights: Vec<f64>, means: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptySeries);
        }
        if weights.len() != positions.len() {
            return Err(Error::LengthMismatch { expected: positions.len(), got: weights.len() });
        }
        if means.len() != positions.len() {
            return Err(Error::LengthMismatch { expected: positions.len(), got: means.len() });
        }
        if positions.iter().chain(&means).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("series values must be finite".into()));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("positions must be strictly increasing".into()));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::NonpositiveWeight(i));
        }
        Ok(WeightedSeries { positions, weights, means })
    }

    /// Groups raw `(x, y)` pairs by distinct `x`: weight is the multiplicity,
    /// mean the average response.
    pub fn from_points(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let mut positions = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut sums: Vec<Dd> = Vec::new();
        for &i in &order {
            if positions.last() == Some(&x[i]) {
                *weights.last_mut().unwrap() += 1.0;
                let s = sums.last_mut().unwrap();
                *s = s.add_f64(y[i]);
            } else {
                positions.push(x[i]);
                weights.push(1.0);
                sums.push(Dd::from_f64(y[i]));
            }
        }
        let means = sums.iter().zip(&weights).map(|(s, w)| s.value() / w).collect();
        WeightedSeries::new(positions, weights, means)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn blocks(&self) -> Vec<PavaBlock> {
        pava_blocks(&self.means, &self.weights)
    }

    /// Weighted isotonic fit at each position.
    pub fn fitted(&self) -> Vec<f64> {
        expand(&self.blocks(), self.len())
    }
}

/// The max-min value at `t0` and its window `[u_hat, v_hat]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub value: f64,
    pub u_hat: f64,
    pub v_hat: f64,
    /// Inclusive position indices of the window.
    pub lo: usize,
    pub hi: usize,
    /// Total weight inside the window.
    pub weight: f64,
}

/// Both one-sided estimates on the line, with their optimal windows given
/// as inclusive index pairs.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LineFit {
    pub f_minus: f64,
    pub f_plus: f64,
    /// `(u*, inner v)` of the max-min problem.
    pub minus: (usize, usize),
    /// `(inner u, v*)` of the min-max problem.
    pub plus: (usize, usize),
}

pub(crate) struct Prefix {
    w: Vec<Dd>,
    s: Vec<Dd>,
}

impl Prefix {
    pub fn new(weights: &[f64], sums: &[f64]) -> Self {
        let mut w = Vec::with_capacity(weights.len() + 1);
        let mut s = Vec::with_capacity(weights.len() + 1);
        w.push(Dd::ZERO);
        s.push(Dd::ZERO);
        for (a, b) in weights.iter().zip(sums) {
            w.push(w.last().unwrap().add_f64(*a));
            s.push(s.last().unwrap().add_f64(*b));
        }
        Prefix { w, s }
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.w[v + 1].sub(self.w[u]).value()
    }

    #[inline]
    pub fn mean(&self, u: usize, v: usize) -> f64 {
        self.s[v + 1].sub(self.s[u]).value() / self.weight(u, v)
    }
}

/// Max-min and min-max over windows `[u, v]` with `u <= left < right <= v`
/// by direct search. Ties: the outer max keeps the largest `u`, the inner
/// min the smallest `v`; mirrored for min-max.
pub(crate) fn line_search(p: &Prefix, m: usize, left: usize, right: usize) -> LineFit {
    let mut best = f64::NEG_INFINITY;
    let mut minus = (0, right);
    for u in 0..=left {
        let mut run = f64::INFINITY;
        let mut arg = right;
        for v in right..m {
            let val = p.mean(u, v);
            if val < run {
                run = val;
                arg = v;
            }
            if run < best {
                break;
            }
        }
        if run >= best {
            best = run;
            minus = (u, arg);
        }
    }
    let f_minus = best;
    let mut best = f64::INFINITY;
    let mut plus = (left, right);
    for v in right..m {
        let mut run = f64::NEG_INFINITY;
        let mut arg = 0;
        for u in 0..=left {
            let val = p.mean(u, v);
            if val >= run {
                run = val;
                arg = u;
            }
            if run > best {
                break;
            }
        }
        if run < best {
            best = run;
            plus = (arg, v);
        }
    }
    LineFit { f_minus, f_plus: best, minus, plus }
}

/// Fit at `t0` on the line. At a position the window is the constant
/// piece of the isotonic fit containing it; between positions the windows
/// come from a direct search.
pub(crate) fn line_fit(positions: &[f64], weights: &[f64], sums: &[f64], t0: f64) -> Result<LineFit> {
    let m = positions.len();
    if m == 0 {
        return Err(Error::EmptySeries);
    }
    match positions.binary_search_by(|p| p.total_cmp(&t0)) {
        Ok(i) => {
            let means: Vec<f64> = sums.iter().zip(weights).map(|(s, w)| s / w).collect();
            let blocks = pava_blocks(&means, weights);
            let b = blocks
                .iter()
                .find(|b| b.start <= i && i < b.end)
                .expect("blocks cover every index");
            let v = b.mean();
            Ok(LineFit { f_minus: v, f_plus: v, minus: (b.start, b.end - 1), plus: (b.start, b.end - 1) })
        }
        Err(ins) => {
            if ins == 0 || ins == m {
                return Err(Error::NoFeasibleBlock);
            }
            let p = Prefix::new(weights, sums);
            Ok(line_search(&p, m, ins - 1, ins))
        }
    }
}

/// Weighted max-min estimate at `t0` with the window `[u_hat, v_hat]`
/// taken from the max-min lower end and the min-max upper end.
pub fn weighted_isotonic_max_min(series: &WeightedSeries, t0: f64) -> Result<WindowFit> {
    let pos = series.positions();
    if !(t0 >= pos[0] && t0 <= pos[pos.len() - 1]) {
        return Err(Error::OutOfRange(t0));
    }
    let sums: Vec<f64> = series.means().iter().zip(series.weights()).map(|(m, w)| m * w).collect();
    let fit = line_fit(pos, series.weights(), &sums, t0)?;
    let (lo, hi) = (fit.minus.0, fit.plus.1);
    let weight = series.weights()[lo..=hi].iter().sum();
    Ok(WindowFit { value: fit.f_minus, u_hat: pos[lo], v_hat: pos[hi], lo, hi, weight })
}
