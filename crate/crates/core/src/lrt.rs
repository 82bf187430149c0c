//! Likelihood-ratio test for the value of a monotone regression function at
//! a point, and the confidence interval obtained by inverting it.
//!
//! Under `H0: f(x0) = m0` the constrained fit is the isotonic fit of the
//! points left of (and at) `x0` capped at `m0`, joined to the isotonic fit
//! of the points right of `x0` floored at `m0`. The statistic is the increase
//! in residual sum of squares.

use crate::ci::{CiMethod, ConfidenceInterval};
use crate::design::Sample;
use crate::error::{Error, Result};
use crate::isotonic::pava::{expand, pava_blocks};
use crate::numeric::Dd;
use crate::variance::difference_variance;
use serde::{Deserialize, Serialize};

/// Default threshold for the inverted test.
pub const BW_DEFAULT_THRESHOLD: f64 = 2.26916;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    /// `RSS(constrained) - RSS(unconstrained)`.
    pub stat: f64,
    /// The same statistic from the sum over the points where the two fits
    /// differ: `sum (m0 - f_hat)^2 - sum (m0 - f_hat0)^2`.
    pub stat_restricted: f64,
    pub f_hat: Vec<f64>,
    pub f_hat0: Vec<f64>,
    /// Design points (storage order) where the fits differ.
    pub j_n: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    Known(f64),
    /// Difference estimator on the sample.
    Difference,
}

/// Responses grouped by distinct design coordinate.
struct Groups {
    positions: Vec<f64>,
    weights: Vec<f64>,
    sums: Vec<f64>,
    /// Within-group sum of squares about the group mean.
    ss: Vec<f64>,
    group_of: Vec<usize>,
}

impl Groups {
    fn new(sample: &Sample) -> Result<Self> {
        if sample.dim() != 1 {
            return Err(Error::UnsupportedDim(sample.dim()));
        }
        let x: Vec<f64> = (0..sample.len()).map(|i| sample.grid.point(i)[0]).collect();
        let mut positions = x.clone();
        positions.sort_by(f64::total_cmp);
        positions.dedup();
        let group_of: Vec<usize> =
            x.iter().map(|v| positions.binary_search_by(|p| p.total_cmp(v)).unwrap()).collect();
        let m = positions.len();
        let mut weights = vec![0.0; m];
        let mut acc = vec![Dd::ZERO; m];
        for (&g, &y) in group_of.iter().zip(&sample.y) {
            weights[g] += 1.0;
            acc[g] = acc[g].add_f64(y);
        }
        let sums: Vec<f64> = acc.iter().map(|a| a.value()).collect();
        let mut ss_acc = vec![Dd::ZERO; m];
        for (&g, &y) in group_of.iter().zip(&sample.y) {
            let r = y - sums[g] / weights[g];
            ss_acc[g] = ss_acc[g].add_f64(r * r);
        }
        let ss = ss_acc.iter().map(|a| a.value()).collect();
        Ok(Groups { positions, weights, sums, ss, group_of })
    }

    fn means(&self) -> Vec<f64> {
        self.sums.iter().zip(&self.weights).map(|(s, w)| s / w).collect()
    }

    /// Number of groups at or left of `x0`.
    fn split(&self, x0: f64) -> usize {
        self.positions.partition_point(|&p| p <= x0)
    }
}

fn fit_groups(g: &Groups, s: usize, m0: f64) -> (Vec<f64>, Vec<f64>) {
    let means = g.means();
    let m = means.len();
    let full = expand(&pava_blocks(&means, &g.weights), m);
    let mut constrained = Vec::with_capacity(m);
    let left = expand(&pava_blocks(&means[..s], &g.weights[..s]), s);
    constrained.extend(left.into_iter().map(|v| v.min(m0)));
    let right = expand(&pava_blocks(&means[s..], &g.weights[s..]), m - s);
    constrained.extend(right.into_iter().map(|v| v.max(m0)));
    (full, constrained)
}

/// Constrained fit under `f(x0) = m0`, at every design point.
pub fn constrained_isotonic(sample: &Sample, x0: f64, m0: f64) -> Result<Vec<f64>> {
    let g = Groups::new(sample)?;
    let (_, c) = fit_groups(&g, g.split(x0), m0);
    Ok(g.group_of.iter().map(|&k| c[k]).collect())
}

pub fn lrt_statistic(sample: &Sample, x0: f64, m0: f64) -> Result<LrtResult> {
    let g = Groups::new(sample)?;
    let (full, cons) = fit_groups(&g, g.split(x0), m0);
    let f_hat: Vec<f64> = g.group_of.iter().map(|&k| full[k]).collect();
    let f_hat0: Vec<f64> = g.group_of.iter().map(|&k| cons[k]).collect();
    let mut rss = Dd::ZERO;
    let mut rss0 = Dd::ZERO;
    for ((&y, &a), &b) in sample.y.iter().zip(&f_hat).zip(&f_hat0) {
        rss = rss.add_f64((y - a) * (y - a));
        rss0 = rss0.add_f64((y - b) * (y - b));
    }
    let stat = rss0.sub(rss).value();
    let j_n: Vec<usize> = (0..sample.len()).filter(|&i| f_hat[i] != f_hat0[i]).collect();
    let mut restricted = Dd::ZERO;
    for &i in &j_n {
        restricted = restricted.add_f64((m0 - f_hat[i]).powi(2)).sub(Dd::from_f64((m0 - f_hat0[i]).powi(2)));
    }
    Ok(LrtResult { stat, stat_restricted: restricted.value(), f_hat, f_hat0, j_n })
}

const NIL: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    weight: f64,
    sum: f64,
    /// Sum of squares of all points in this node's stack about their block means.
    cum_ss: f64,
    ss: f64,
    parent: usize,
}

impl Node {
    fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

fn merge(a: &Node, b: &Node) -> (f64, f64, f64) {
    let w = a.weight + b.weight;
    let dm = a.mean() - b.mean();
    (w, a.sum + b.sum, a.ss + b.ss + a.weight * b.weight / w * dm * dm)
}

/// The statistic as a function of `m0` for every split position at once,
/// using persistent pool-adjacent-violators stacks built from both ends.
#[derive(Debug, Clone)]
pub struct BwProfile {
    positions: Vec<f64>,
    full_means: Vec<f64>,
    data_lo: f64,
    data_hi: f64,
    nodes: Vec<Node>,
    /// Top of the stack of the first `s` groups.
    prefix_top: Vec<usize>,
    /// Top (leftmost block) of the stack of groups `s..`.
    suffix_top: Vec<usize>,
    rss_full: f64,
}

impl BwProfile {
    pub fn new(sample: &Sample) -> Result<Self> {
        let g = Groups::new(sample)?;
        let m = g.positions.len();
        let mut nodes: Vec<Node> = Vec::with_capacity(4 * m);
        let cum = |nodes: &Vec<Node>, p: usize| if p == NIL { 0.0 } else { nodes[p].cum_ss };

        let mut prefix_top = vec![NIL; m + 1];
        let mut top = NIL;
        for k in 0..m {
            let mut cur = Node { weight: g.weights[k], sum: g.sums[k], cum_ss: 0.0, ss: g.ss[k], parent: NIL };
            while top != NIL && nodes[top].mean() >= cur.mean() {
                let (w, s, ss) = merge(&nodes[top], &cur);
                cur = Node { weight: w, sum: s, cum_ss: 0.0, ss, parent: NIL };
                top = nodes[top].parent;
            }
            cur.parent = top;
            cur.cum_ss = cum(&nodes, top) + cur.ss;
            nodes.push(cur);
            top = nodes.len() - 1;
            prefix_top[k + 1] = top;
        }
        let rss_full = cum(&nodes, top);

        let mut suffix_top = vec![NIL; m + 1];
        let mut top = NIL;
        for k in (0..m).rev() {
            let mut cur = Node { weight: g.weights[k], sum: g.sums[k], cum_ss: 0.0, ss: g.ss[k], parent: NIL };
            while top != NIL && cur.mean() >= nodes[top].mean() {
                let (w, s, ss) = merge(&cur, &nodes[top]);
                cur = Node { weight: w, sum: s, cum_ss: 0.0, ss, parent: NIL };
                top = nodes[top].parent;
            }
            cur.parent = top;
            cur.cum_ss = cum(&nodes, top) + cur.ss;
            nodes.push(cur);
            top = nodes.len() - 1;
            suffix_top[k] = top;
        }

        let means = g.means();
        let full_means = expand(&pava_blocks(&means, &g.weights), m);
        let data_lo = sample.y.iter().copied().fold(f64::INFINITY, f64::min);
        let data_hi = sample.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(BwProfile { positions: g.positions, full_means, data_lo, data_hi, nodes, prefix_top, suffix_top, rss_full })
    }

    fn split(&self, x0: f64) -> usize {
        self.positions.partition_point(|&p| p <= x0)
    }

    /// `RSS(constrained) - RSS(unconstrained)` for the split after `s` groups.
    pub fn stat_at_split(&self, s: usize, m0: f64) -> f64 {
        let (l, r) = (self.prefix_top[s], self.suffix_top[s]);
        let cum = |p: usize| if p == NIL { 0.0 } else { self.nodes[p].cum_ss };
        let mut stat = cum(l) + cum(r) - self.rss_full;
        let mut p = l;
        while p != NIL && self.nodes[p].mean() > m0 {
            let n = &self.nodes[p];
            stat += n.weight * (n.mean() - m0).powi(2);
            p = n.parent;
        }
        let mut p = r;
        while p != NIL && self.nodes[p].mean() < m0 {
            let n = &self.nodes[p];
            stat += n.weight * (n.mean() - m0).powi(2);
            p = n.parent;
        }
        stat.max(0.0)
    }

    pub fn stat(&self, x0: f64, m0: f64) -> f64 {
        self.stat_at_split(self.split(x0), m0)
    }

    /// Unconstrained fit value used as the starting point at `x0`.
    pub fn center(&self, x0: f64) -> f64 {
        let s = self.split(x0);
        self.full_means[if s > 0 { s - 1 } else { 0 }]
    }

    /// `{m0 : stat(m0) <= threshold}` by geometric bracketing from the
    /// unconstrained fit followed by bisection. The flag is set when the
    /// statistic stays below the threshold out to the search limit.
    pub fn invert(&self, x0: f64, threshold: f64) -> (f64, f64, bool) {
        let s = self.split(x0);
        let start = self.center(x0);
        let span = (self.data_hi - self.data_lo).max(f64::EPSILON.sqrt());
        let limits = (self.data_lo - span, self.data_hi + span);
        let f = |m: f64| self.stat_at_split(s, m);
        let (hi, f_hi) = bracket(&f, start, span, limits.1, threshold);
        let (lo, f_lo) = bracket(&f, start, -span, limits.0, threshold);
        (lo, hi, f_hi || f_lo)
    }
}

fn bracket(f: &impl Fn(f64) -> f64, start: f64, span: f64, limit: f64, threshold: f64) -> (f64, bool) {
    const TOL: f64 = 1e-8;
    let dir = span.signum();
    let beyond = |m: f64| (m - limit) * dir >= 0.0;
    let mut inside = start;
    let mut step = span.abs() / 256.0;
    let outside = loop {
        let mut cand = inside + dir * step;
        if beyond(cand) {
            cand = limit;
        }
        if f(cand) > threshold {
            break cand;
        }
        if beyond(cand) {
            return (limit, true);
        }
        inside = cand;
        step *= 2.0;
    };
    let (mut a, mut b) = (inside, outside);
    while (b - a).abs() > TOL {
        let mid = 0.5 * (a + b);
        if f(mid) > threshold {
            b = mid;
        } else {
            a = mid;
        }
    }
    (0.5 * (a + b), false)
}

/// Confidence interval from inverting the likelihood-ratio test. With an
/// estimated noise level the threshold is scaled by the variance estimate.
pub fn bw_ci(sample: &Sample, x0: f64, d_delta: f64, sigma: SigmaMode) -> Result<ConfidenceInterval> {
    if !(d_delta > 0.0) {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    let var = match sigma {
        SigmaMode::Known(s) => s * s,
        SigmaMode::Difference => difference_variance(sample)?.value,
    };
    let profile = BwProfile::new(sample)?;
    Ok(bw_interval(&profile, x0, d_delta * var))
}

pub fn bw_interval(profile: &BwProfile, x0: f64, threshold: f64) -> ConfidenceInterval {
    let (lo, hi, flagged) = profile.invert(x0, threshold);
    let center = profile.center(x0);
    let ci = ConfidenceInterval {
        center,
        half_width: 0.5 * (hi - lo),
        lower: lo,
        upper: hi,
        level: f64::NAN,
        method: CiMethod::BwLrt,
        clip: None,
        warning: None,
    };
    if flagged {
        ci.with_warning("nonfinite bracket: the statistic stays below the threshold over the search range")
    } else {
        ci
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignGrid, Lattice, Scatter};
    use proptest::prelude::*;

    fn line(y: Vec<f64>) -> Sample {
        let n = y.len();
        Sample::new(DesignGrid::Lattice(Lattice::regular(&[n]).unwrap()), y).unwrap()
    }

    #[test]
    fn two_point_cases() {
        let s = line(vec![0.0, 2.0]);
        assert_eq!(constrained_isotonic(&s, 0.75, 1.0).unwrap(), vec![0.0, 2.0]);
        let s = line(vec![2.0, 0.0]);
        assert_eq!(constrained_isotonic(&s, 0.75, 1.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(lrt_statistic(&s, 0.75, 1.0).unwrap().stat, 0.0);
        let r = lrt_statistic(&s, 0.75, 0.5).unwrap();
        assert!((r.stat - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interval_contains_fit() {
        let s = line(vec![0.1, 0.5, 0.2, 0.9, 1.4, 1.0, 1.8]);
        for i in 0..7 {
            let x0 = s.grid.point(i)[0];
            let ci = bw_ci(&s, x0, 2.26916, SigmaMode::Known(0.3)).unwrap();
            assert!(ci.lower <= ci.center && ci.center <= ci.upper);
            // Nothing lies right of the last point, so raising m0 is free there.
            assert_eq!(ci.warning.is_some(), i == 6);
            let tiny = bw_ci(&s, x0, 1e-9, SigmaMode::Known(0.3)).unwrap();
            assert!(tiny.length() < ci.length());
            assert!(tiny.lower <= tiny.center && tiny.center <= tiny.upper);
        }
    }

    #[test]
    fn rejects_higher_dimension() {
        let g = DesignGrid::Scatter(Scatter::new(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap());
        let s = Sample::new(g, vec![0.0, 1.0]).unwrap();
        assert_eq!(lrt_statistic(&s, 0.2, 0.0).unwrap_err(), Error::UnsupportedDim(2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn statistic_forms_agree(
            y in prop::collection::vec(-3.0f64..3.0, 1..100),
            t in 0.0f64..1.0,
            m0 in -4.0f64..4.0,
        ) {
            let s = line(y);
            let r = lrt_statistic(&s, t, m0).unwrap();
            prop_assert!(r.stat >= -1e-12);
            let scale = r.stat.abs().max(1.0);
            prop_assert!((r.stat - r.stat_restricted).abs() <= 1e-8 * scale,
                "{} vs {}", r.stat, r.stat_restricted);
            let p = BwProfile::new(&s).unwrap();
            prop_assert!((p.stat(t, m0) - r.stat.max(0.0)).abs() <= 1e-8 * scale);
        }

        #[test]
        fn zero_at_fit_and_monotone_profile(
            y in prop::collection::vec(-3.0f64..3.0, 2..60),
            t in 0.0f64..1.0,
        ) {
            let s = line(y);
            let p = BwProfile::new(&s).unwrap();
            let c = p.center(t);
            prop_assert!(p.stat(t, c) < 1e-9);
            let mut prev = 0.0;
            for k in 1..40 {
                let v = p.stat(t, c + k as f64 * 0.1);
                prop_assert!(v >= prev - 1e-9);
                prev = v;
            }
            let mut prev = 0.0;
            for k in 1..40 {
                let v = p.stat(t, c - k as f64 * 0.1);
                prop_assert!(v >= prev - 1e-9);
                prev = v;
            }
        }

        #[test]
        fn location_scale(
            y in prop::collection::vec(-3.0f64..3.0, 2..40),
            t in 0.0f64..1.0,
            m0 in -3.0f64..3.0,
            a in -5.0f64..5.0,
            c in 0.2f64..3.0,
        ) {
            let base = lrt_statistic(&line(y.clone()), t, m0).unwrap().stat;
            let shifted = lrt_statistic(&line(y.iter().map(|v| v + a).collect()), t, m0 + a).unwrap().stat;
            prop_assert!((shifted - base).abs() <= 1e-8 * base.max(1.0));
            let scaled = lrt_statistic(&line(y.iter().map(|v| v * c).collect()), t, m0 * c).unwrap().stat;
            prop_assert!((scaled - c * c * base).abs() <= 1e-8 * (c * c * base).max(1.0));
        }
    }
}
