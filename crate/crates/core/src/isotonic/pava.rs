//! Pool-adjacent-violators for weighted univariate isotonic regression.

use crate::error::{Error, Result};

/// A maximal run `start..end` of the fit sharing one value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PavaBlock {
    pub start: usize,
    pub end: usize,
    pub weight: f64,
    pub sum: f64,
}

impl PavaBlock {
    #[inline]
    pub fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

/// Level sets of the nondecreasing weighted least-squares fit. Adjacent
/// blocks with equal means are pooled, so block means are strictly
/// increasing and each block is a maximal constant piece.
///
/// Inputs are not validated; see [`pava`].
pub fn pava_blocks(values: &[f64], weights: &[f64]) -> Vec<PavaBlock> {
    let mut stack: Vec<PavaBlock> = Vec::with_capacity(values.len());
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        let mut cur = PavaBlock { start: i, end: i + 1, weight: w, sum: w * v };
        while let Some(prev) = stack.last() {
            if prev.sum * cur.weight >= cur.sum * prev.weight {
                cur = PavaBlock {
                    start: prev.start,
                    end: cur.end,
                    weight: prev.weight + cur.weight,
                    sum: prev.sum + cur.sum,
                };
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    stack
}

pub(crate) fn expand(blocks: &[PavaBlock], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for b in blocks {
        out[b.start..b.end].fill(b.mean());
    }
    out
}

fn validate(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch { expected: values.len(), got: weights.len() });
    }
    if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::NonpositiveWeight(i));
    }
    Ok(())
}

/// Weighted isotonic (nondecreasing) regression of `values`.
pub fn pava(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    validate(values, weights)?;
    Ok(expand(&pava_blocks(values, weights), values.len()))
}

/// Unit-weight isotonic regression.
pub fn pava_unit(values: &[f64]) -> Vec<f64> {
    let w = vec![1.0; values.len()];
    expand(&pava_blocks(values, &w), values.len())
}

/// Nonincreasing fit, by reflection.
pub fn pava_decreasing(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    Ok(pava(&neg, weights)?.into_iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Min-max formula evaluated by brute force over all windows.
    fn brute(values: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = values.len();
        (0..n)
            .map(|i| {
                (0..=i)
                    .map(|u| {
                        (i..n)
                            .map(|v| {
                                let w: f64 = weights[u..=v].iter().sum();
                                let s: f64 = (u..=v).map(|k| weights[k] * values[k]).sum();
                                s / w
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn small_cases() {
        assert_eq!(pava_unit(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(pava_unit(&[3.0, 1.0, 2.0]), brute(&[3.0, 1.0, 2.0], &[1.0; 3]));
        assert_eq!(pava_unit(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(pava_unit(&[1.0, 3.0, 2.0]), vec![1.0, 2.5, 2.5]);
        assert_eq!(pava_unit(&[1.0, 3.0, 2.0]), brute(&[1.0, 3.0, 2.0], &[1.0; 3]));
    }

    #[test]
    fn rejects_bad_weights() {
        assert_eq!(pava(&[1.0], &[0.0]).unwrap_err(), Error::NonpositiveWeight(0));
        assert!(matches!(pava(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn equal_neighbours_pool() {
        let b = pava_blocks(&[1.0, 1.0, 2.0], &[1.0; 3]);
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].start, b[0].end), (0, 2));
    }

    proptest! {
        #[test]
        fn matches_minmax_formula(
            data in prop::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 1..25)
        ) {
            let (v, w): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
            let fit = pava(&v, &w).unwrap();
            for (a, b) in fit.iter().zip(brute(&v, &w)) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn monotone_idempotent_mass_preserving(
            data in prop::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 1..60)
        ) {
            let (v, w): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
            let fit = pava(&v, &w).unwrap();
            prop_assert!(fit.windows(2).all(|p| p[0] <= p[1]));
            let again = pava(&fit, &w).unwrap();
            for (a, b) in fit.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let lhs: f64 = fit.iter().zip(&w).map(|(f, w)| f * w).sum();
            let rhs: f64 = v.iter().zip(&w).map(|(f, w)| f * w).sum();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn projection_is_contraction(
            data in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60)
        ) {
            let (a, b): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
            let fa = pava_unit(&a);
            let fb = pava_unit(&b);
            let d_fit: f64 = fa.iter().zip(&fb).map(|(x, y)| (x - y).powi(2)).sum();
            let d_raw: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(d_fit <= d_raw + 1e-9);
        }
    }
}
