//! Noise-variance estimators: the local second moment over the fitted block
//! and lattice difference stencils.

use crate::design::{lattice_index_box, Block, BlockSumTable, DesignGrid, Lattice, Sample};
use crate::error::{Error, Result};
use crate::isotonic::BlockFit;
use crate::numeric::Dd;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    LocalBlock,
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub method: VarianceMethod,
    /// Number of squared terms averaged.
    pub terms: usize,
}

impl VarianceEstimate {
    pub fn sd(&self) -> f64 {
        self.value.sqrt()
    }
}

/// Mean squared deviation of the responses in `[u_hat, v_hat]` about the
/// block-average estimate.
pub fn local_block_variance(sample: &Sample, fit: &BlockFit) -> Result<VarianceEstimate> {
    let block = Block { lo: fit.u_hat.clone(), hi: fit.v_hat.clone() };
    let idx = sample.indices_in(&block);
    if idx.is_empty() {
        return Err(Error::NoFeasibleBlock);
    }
    let mut acc = Dd::ZERO;
    for &i in &idx {
        let r = sample.y[i] - fit.f_avg;
        acc = acc.add_f64(r * r);
    }
    Ok(VarianceEstimate {
        value: acc.value() / idx.len() as f64,
        method: VarianceMethod::LocalBlock,
        terms: idx.len(),
    })
}

/// Local block variances for many fits on one sample. On lattices the block
/// sums of `Y` and `Y^2` come from summed-area tables.
pub struct LocalBlockVariances<'a> {
    sample: &'a Sample,
    tables: Option<(BlockSumTable, BlockSumTable)>,
}

impl<'a> LocalBlockVariances<'a> {
    pub fn new(sample: &'a Sample) -> Self {
        let tables = sample.grid.as_lattice().map(|l| {
            let sq: Vec<f64> = sample.y.iter().map(|v| v * v).collect();
            (BlockSumTable::from_lattice(l, &sample.y), BlockSumTable::from_lattice(l, &sq))
        });
        LocalBlockVariances { sample, tables }
    }

    pub fn at(&self, fit: &BlockFit) -> Result<f64> {
        match (&self.tables, self.sample.grid.as_lattice()) {
            (Some((s1, s2)), Some(l)) => {
                let block = Block { lo: fit.u_hat.clone(), hi: fit.v_hat.clone() };
                let (lo, hi) = lattice_index_box(l, &block).ok_or(Error::NoFeasibleBlock)?;
                let n = BlockSumTable::count(&lo, &hi) as f64;
                let f = fit.f_avg;
                let ss = s2.sum_dd(&lo, &hi).sub(Dd::from_f64(2.0 * f * s1.sum_dd(&lo, &hi).value()));
                Ok((ss.value() / n + f * f).max(0.0))
            }
            _ => local_block_variance(self.sample, fit).map(|v| v.value),
        }
    }
}

/// Difference estimator on a lattice: squared discrete Laplacians
/// `2d*Y_i - sum of the 2d axis neighbours`, averaged over interior points
/// and normalized by `4d^2 + 2d` (6, 20, 42 for d = 1, 2, 3).
pub fn difference_variance(sample: &Sample) -> Result<VarianceEstimate> {
    match &sample.grid {
        DesignGrid::Lattice(l) => difference_variance_lattice(l, &sample.y),
        DesignGrid::Scatter(_) => Err(Error::ScatterUnsupported),
    }
}

pub fn difference_variance_lattice(l: &Lattice, y: &[f64]) -> Result<VarianceEstimate> {
    let d = l.dim();
    if d > 3 {
        return Err(Error::UnsupportedDim(d));
    }
    if y.len() != l.len() {
        return Err(Error::LengthMismatch { expected: l.len(), got: y.len() });
    }
    for (axis, &len) in l.shape().iter().enumerate() {
        if len < 3 {
            return Err(Error::TooSmallAxis { axis, len, min: 3 });
        }
    }
    let shape = l.shape();
    let strides = l.strides();
    let center = 2.0 * d as f64;
    let mut acc = Dd::ZERO;
    let mut terms = 0usize;
    let lo = vec![1; d];
    let hi: Vec<usize> = shape.iter().map(|m| m - 2).collect();
    crate::design::for_each_in_box(&lo, &hi, |idx| {
        let i = l.ravel(idx);
        let mut r = center * y[i];
        for s in strides {
            r -= y[i - s] + y[i + s];
        }
        acc = acc.add_f64(r * r);
        terms += 1;
    });
    let norm = (4 * d * d + 2 * d) as f64;
    Ok(VarianceEstimate { value: acc.value() / (norm * terms as f64), method: VarianceMethod::Difference, terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bulk_local_variance_matches_direct() {
        use crate::sim::{gaussian_response, replication_rng};
        let l = Lattice::regular(&[7, 6]).unwrap();
        let g = DesignGrid::Lattice(l);
        let truth: Vec<f64> = g.points().iter().map(|p| 3.0 + p[0] + 2.0 * p[1]).collect();
        let y = gaussian_response(&truth, 0.5, &mut replication_rng(9, 0));
        let s = Sample::new(g, y).unwrap();
        let fits = crate::isotonic::BlockEstimator::new(&s.grid).fit_all(&s.y).unwrap();
        let bulk = LocalBlockVariances::new(&s);
        for f in &fits {
            let direct = local_block_variance(&s, f).unwrap().value;
            assert!((bulk.at(f).unwrap() - direct).abs() < 1e-12 * direct.max(1.0));
        }
    }
    use crate::isotonic::block_fit;
    use proptest::prelude::*;

    fn lattice_sample(shape: &[usize], y: Vec<f64>) -> Sample {
        Sample::new(DesignGrid::Lattice(Lattice::regular(shape).unwrap()), y).unwrap()
    }

    #[test]
    fn alternating_line() {
        let s = lattice_sample(&[5], vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        let v = difference_variance(&s).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.terms, 3);
    }

    #[test]
    fn small_axis_and_high_dim_rejected() {
        let s = lattice_sample(&[3, 2], vec![0.0; 6]);
        assert_eq!(difference_variance(&s).unwrap_err(), Error::TooSmallAxis { axis: 1, len: 2, min: 3 });
        let s = lattice_sample(&[3, 3, 3, 3], vec![0.0; 81]);
        assert_eq!(difference_variance(&s).unwrap_err(), Error::UnsupportedDim(4));
    }

    #[test]
    fn local_block_hand_case() {
        let s = lattice_sample(&[2], vec![0.0, 2.0]);
        let mut fit = block_fit(&s, &[1.0]).unwrap();
        fit.u_hat = vec![0.5];
        fit.v_hat = vec![1.0];
        fit.f_avg = 1.0;
        assert_eq!(local_block_variance(&s, &fit).unwrap().value, 1.0);
        let c = lattice_sample(&[4], vec![3.0; 4]);
        let f = block_fit(&c, &[0.5]).unwrap();
        assert_eq!(local_block_variance(&c, &f).unwrap().value, 0.0);
    }

    fn shapes() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, f64)> {
        (1usize..=3)
            .prop_flat_map(|d| prop::collection::vec(3usize..=6, d))
            .prop_flat_map(|shape| {
                let n: usize = shape.iter().product();
                let d = shape.len();
                (
                    Just(shape),
                    prop::collection::vec((-20i32..=20).prop_map(f64::from), n),
                    prop::collection::vec((-5i32..=5).prop_map(f64::from), d + 1),
                    0.1f64..5.0,
                )
            })
    }

    proptest! {
        #[test]
        fn linear_trends_vanish((shape, y, coef, c) in shapes()) {
            let l = Lattice::regular(&shape).unwrap();
            let trend: Vec<f64> = (0..l.len())
                .map(|i| coef[0] + l.index_of(i).iter().zip(&coef[1..]).map(|(a, b)| *a as f64 * b).sum::<f64>())
                .collect();
            prop_assert_eq!(difference_variance_lattice(&l, &trend).unwrap().value, 0.0);
            let shifted: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a + b).collect();
            let base = difference_variance_lattice(&l, &y).unwrap().value;
            prop_assert_eq!(difference_variance_lattice(&l, &shifted).unwrap().value, base);
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let sv = difference_variance_lattice(&l, &scaled).unwrap().value;
            prop_assert!((sv - c * c * base).abs() <= 1e-9 * (1.0 + c * c * base));
        }

        #[test]
        fn local_block_matches_naive_and_scales(
            y in prop::collection::vec(-5.0f64..5.0, 9),
            c in 0.1f64..4.0,
            pick in 0usize..9,
        ) {
            let s = lattice_sample(&[3, 3], y.clone());
            let x0 = s.grid.point(pick);
            let f = block_fit(&s, &x0).unwrap();
            let v = local_block_variance(&s, &f).unwrap();
            let mut naive = 0.0;
            let mut n = 0;
            for i in 0..9 {
                let p = s.grid.point(i);
                if p.iter().zip(f.u_hat.iter().zip(&f.v_hat)).all(|(x, (a, b))| a <= x && x <= b) {
                    naive += (y[i] - f.f_avg).powi(2);
                    n += 1;
                }
            }
            prop_assert_eq!(n, f.n_uv);
            prop_assert!((v.value - naive / n as f64).abs() < 1e-12);
            let sc = lattice_sample(&[3, 3], y.iter().map(|a| a * c).collect());
            let fc = block_fit(&sc, &x0).unwrap();
            let vc = local_block_variance(&sc, &fc).unwrap();
            prop_assert!((vc.value - c * c * v.value).abs() < 1e-9 * (1.0 + vc.value));
        }
    }
}
