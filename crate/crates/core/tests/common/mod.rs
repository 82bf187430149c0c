//! Exhaustive corner-enumeration oracle shared by the integration tests.
#![allow(dead_code)]

use isoci::design::{candidate_corners, Sample, Side};

/// Naive block mean: plain scan, no tables.
pub fn naive_mean(s: &Sample, lo: &[f64], hi: &[f64]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..s.len() {
        let p = s.grid.point(i);
        if p.iter().zip(lo.iter().zip(hi)).all(|(c, (a, b))| a <= c && c <= b) {
            sum += s.y[i];
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

pub struct Enumerated {
    pub max_min: f64,
    pub u_star: Vec<f64>,
    pub v_inner: Vec<f64>,
    pub min_max: f64,
    pub v_star: Vec<f64>,
}

/// Exhaustive search over all corner pairs with the documented tie rules.
pub fn enumerate(s: &Sample, x0: &[f64]) -> Option<Enumerated> {
    let us = candidate_corners(&s.grid, x0, Side::LowerLeft);
    let vs = candidate_corners(&s.grid, x0, Side::UpperRight);
    let mut best = f64::NEG_INFINITY;
    let mut found = None;
    for u in &us {
        let mut inner: Option<(f64, &Vec<f64>)> = None;
        for v in &vs {
            if let Some(m) = naive_mean(s, u, v) {
                if inner.is_none_or(|(b, _)| m < b) {
                    inner = Some((m, v));
                }
            }
        }
        if let Some((m, v)) = inner {
            if m >= best {
                best = m;
                found = Some((u.clone(), v.clone()));
            }
        }
    }
    let (u_star, v_inner) = found?;
    let max_min = best;
    let mut best = f64::INFINITY;
    let mut v_star = None;
    for v in &vs {
        let mut inner: Option<f64> = None;
        for u in &us {
            if let Some(m) = naive_mean(s, u, v) {
                if inner.is_none_or(|b| m >= b) {
                    inner = Some(m);
                }
            }
        }
        if let Some(m) = inner {
            if m < best {
                best = m;
                v_star = Some(v.clone());
            }
        }
    }
    Some(Enumerated { max_min, u_star, v_inner, min_max: best, v_star: v_star? })
}
