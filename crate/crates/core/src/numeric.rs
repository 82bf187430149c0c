//! Small numerical helpers shared across modules.

/// Double-double accumulator (unevaluated sum `hi + lo`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let hi = s + e;
        Dd { hi, lo: e - (hi - s) }
    }

    #[inline]
    pub fn sub(self, o: Dd) -> Dd {
        self.add(Dd { hi: -o.hi, lo: -o.lo })
    }

    #[inline]
    pub fn add_f64(self, x: f64) -> Dd {
        let (s, e) = two_sum(self.hi, x);
        let e = e + self.lo;
        let hi = s + e;
        Dd { hi, lo: e - (hi - s) }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Dd::ZERO;
    for v in values {
        acc = acc.add_f64(v);
    }
    acc.value()
}

/// Type-1 empirical quantile of already sorted data: the order statistic at
/// 1-based rank `ceil(p * n)`, clamped to `[1, n]`.
pub fn type1_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Linear-interpolation quantile (R type 7), used for descriptive summaries.
pub fn interp_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (divisor `n - 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64).sqrt()
}

pub fn sort_floats(values: &mut [f64]) {
    values.sort_by(|a, b| a.total_cmp(b));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_recovers_cancellation() {
        let big = 1e16;
        let s = Dd::from_f64(big).add_f64(1.0).add_f64(-big);
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn type1_quantile_edges() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(type1_quantile(&v, 0.0), 1.0);
        assert_eq!(type1_quantile(&v, 0.5), 2.0);
        assert_eq!(type1_quantile(&v, 0.51), 3.0);
        assert_eq!(type1_quantile(&v, 1.0), 4.0);
    }
}
