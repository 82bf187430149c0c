//! Designs (full lattices and scattered points), samples and block queries.
//!
//! Blocks are closed on both ends: a design point `x` belongs to `[lo, hi]`
//! iff `lo <= x <= hi` coordinatewise. Lattice samples get summed-area
//! tables with double-double accumulation so that any block sum costs
//! `2^d` lookups; scattered samples are scanned point by point.

use crate::error::{Error, Result};
use crate::numeric::Dd;
use serde::{Deserialize, Serialize};

/// A full Cartesian lattice. Points are stored in row-major order with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    axes: Vec<Vec<f64>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Lattice {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidDesign("lattice needs at least one axis".into()));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::InvalidDesign(format!("axis {k} is empty")));
            }
            if axis.iter().any(|c| !c.is_finite() || !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidDesign(format!("axis {k} has coordinates outside [0, 1]")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidDesign(format!("axis {k} is not strictly increasing")));
            }
        }
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let mut strides = vec![1; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let len = shape.iter().product();
        Ok(Lattice { axes, shape, strides, len })
    }

    /// The balanced lattice `{1/m_k, 2/m_k, ..., 1}` on every axis.
    pub fn regular(shape: &[usize]) -> Result<Self> {
        let axes = shape
            .iter()
            .map(|&m| (1..=m).map(|i| i as f64 / m as f64).collect())
            .collect();
        Lattice::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (k, s) in self.strides.iter().enumerate() {
            out[k] = flat / s;
            flat %= s;
        }
    }

    pub fn index_of(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        self.unravel(flat, &mut idx);
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index_of(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, axis)| axis[i])
            .collect()
    }

    pub fn coords_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect()
    }

    /// Flat index of `x` if it is exactly a lattice point.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut idx = Vec::with_capacity(self.dim());
        for (axis, &c) in self.axes.iter().zip(x) {
            idx.push(axis.binary_search_by(|a| a.total_cmp(&c)).ok()?);
        }
        Some(self.ravel(&idx))
    }
}

/// Scattered design points, stored in insertion order. Duplicates allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    dim: usize,
    coords: Vec<f64>,
}

impl Scatter {
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidDesign("scatter design needs points of positive dimension".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidDesign(format!("point {i} has dimension {} != {dim}", p.len())));
            }
            if p.iter().any(|c| !c.is_finite() || !(0.0..=1.0).contains(c)) {
                return Err(Error::InvalidDesign(format!("point {i} lies outside [0, 1]^d")));
            }
            coords.extend_from_slice(p);
        }
        Ok(Scatter { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignGrid {
    Lattice(Lattice),
    Scatter(Scatter),
}

/// How to interpret a list of points read from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    /// Lattice when the points are exactly a Cartesian product, else scatter.
    #[default]
    Auto,
    Lattice,
    Scatter,
}

impl DesignGrid {
    pub fn dim(&self) -> usize {
        match self {
            DesignGrid::Lattice(l) => l.dim(),
            DesignGrid::Scatter(s) => s.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DesignGrid::Lattice(l) => l.len(),
            DesignGrid::Scatter(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, DesignGrid::Lattice(_))
    }

    pub fn as_lattice(&self) -> Option<&Lattice> {
        match self {
            DesignGrid::Lattice(l) => Some(l),
            DesignGrid::Scatter(_) => None,
        }
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            DesignGrid::Lattice(l) => l.point(i),
            DesignGrid::Scatter(s) => s.point(i).to_vec(),
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Sorted distinct coordinate values per axis. Block corners only need
    /// to range over these values.
    pub fn axis_values(&self) -> Vec<Vec<f64>> {
        match self {
            DesignGrid::Lattice(l) => l.axes().to_vec(),
            DesignGrid::Scatter(s) => (0..s.dim())
                .map(|k| {
                    let mut v: Vec<f64> = (0..s.len()).map(|i| s.point(i)[k]).collect();
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    v
                })
                .collect(),
        }
    }

    /// Whether `x` coincides with a design point.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        match self {
            DesignGrid::Lattice(l) => l.locate(x).is_some(),
            DesignGrid::Scatter(s) => (0..s.len()).any(|i| s.point(i) == x),
        }
    }

    /// Builds a design from a list of points, detecting an exact Cartesian
    /// product when asked. Returns the design and, for each design point in
    /// storage order, the index of the input point it came from.
    pub fn from_points(points: &[Vec<f64>], mode: DesignMode) -> Result<(DesignGrid, Vec<usize>)> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("no points".into()));
        }
        if mode != DesignMode::Scatter {
            if let Some((lattice, order)) = detect_lattice(points)? {
                return Ok((DesignGrid::Lattice(lattice), order));
            }
            if mode == DesignMode::Lattice {
                return Err(Error::InvalidDesign("points are not an exact Cartesian product".into()));
            }
        }
        let s = Scatter::new(points)?;
        Ok((DesignGrid::Scatter(s), (0..points.len()).collect()))
    }
}

fn detect_lattice(points: &[Vec<f64>]) -> Result<Option<(Lattice, Vec<usize>)>> {
    let scatter = Scatter::new(points)?;
    let axes = DesignGrid::Scatter(scatter).axis_values();
    let total: usize = axes.iter().map(Vec::len).product();
    if total != points.len() {
        return Ok(None);
    }
    let lattice = Lattice::new(axes)?;
    let mut order = vec![usize::MAX; total];
    for (i, p) in points.iter().enumerate() {
        let flat = lattice.locate(p).expect("coordinates come from the points");
        if order[flat] != usize::MAX {
            return Ok(None);
        }
        order[flat] = i;
    }
    Ok(Some((lattice, order)))
}

/// A design together with one response per design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub grid: DesignGrid,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn new(grid: DesignGrid, y: Vec<f64>) -> Result<Self> {
        if y.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: y.len() });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("response {i} is not finite")));
        }
        Ok(Sample { grid, y })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Mean and count of responses at design points inside the closed block,
    /// by direct scan. The mean is NaN when the count is zero.
    pub fn block_mean(&self, block: &Block) -> (f64, usize) {
        let mut acc = Dd::ZERO;
        let mut count = 0;
        for i in 0..self.len() {
            if block.contains(&self.grid.point(i)) {
                acc = acc.add_f64(self.y[i]);
                count += 1;
            }
        }
        if count == 0 {
            (f64::NAN, 0)
        } else {
            (acc.value() / count as f64, count)
        }
    }

    /// Indices of design points in the closed block.
    pub fn indices_in(&self, block: &Block) -> Vec<usize> {
        match &self.grid {
            DesignGrid::Lattice(l) => match lattice_index_box(l, block) {
                Some((lo, hi)) => {
                    let mut out = Vec::new();
                    for_each_in_box(&lo, &hi, |idx| out.push(l.ravel(idx)));
                    out
                }
                None => Vec::new(),
            },
            DesignGrid::Scatter(s) => (0..s.len()).filter(|&i| block.contains(s.point(i))).collect(),
        }
    }
}

/// Closed axis-aligned block `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Block {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::LengthMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidArgument("block lower corner exceeds upper corner".into()));
        }
        Ok(Block { lo, hi })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| l <= c && c <= h)
    }
}

/// Index box of lattice points inside a coordinate block, or None if empty.
pub(crate) fn lattice_index_box(l: &Lattice, block: &Block) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut lo = Vec::with_capacity(l.dim());
    let mut hi = Vec::with_capacity(l.dim());
    for (k, axis) in l.axes().iter().enumerate() {
        let a = axis.partition_point(|&c| c < block.lo[k]);
        let b = axis.partition_point(|&c| c <= block.hi[k]);
        if a >= b {
            return None;
        }
        lo.push(a);
        hi.push(b - 1);
    }
    Some((lo, hi))
}

/// Visits every multi-index in the inclusive box `[lo, hi]` in ascending
/// lexicographic order (last axis fastest).
pub(crate) fn for_each_in_box(lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        f(&idx);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] < hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = lo[k];
        }
    }
}

/// Like [`for_each_in_box`] but stops as soon as `f` returns false.
pub(crate) fn for_each_in_box_until(lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize]) -> bool) {
    let d = lo.len();
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        if !f(&idx) {
            return;
        }
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] < hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = lo[k];
        }
    }
}

/// Summed-area table over a lattice sample. Sums are stored as double-double
/// values; block counts follow from the index box.
#[derive(Debug, Clone)]
pub struct BlockSumTable {
    shape: Vec<usize>,
    pstrides: Vec<usize>,
    prefix: Vec<Dd>,
}

impl BlockSumTable {
    pub fn from_lattice(lattice: &Lattice, y: &[f64]) -> Self {
        Self::from_dense(lattice.shape(), y)
    }

    /// Table over a dense row-major array of the given shape.
    pub fn from_dense(shape: &[usize], values: &[f64]) -> Self {
        let shape = shape.to_vec();
        let d = shape.len();
        let mut pstrides = vec![1; d];
        for k in (0..d.saturating_sub(1)).rev() {
            pstrides[k] = pstrides[k + 1] * (shape[k + 1] + 1);
        }
        let plen = pstrides[0] * (shape[0] + 1);
        let mut table = BlockSumTable { shape, pstrides, prefix: vec![Dd::ZERO; plen] };
        table.refill(values);
        table
    }

    /// Recomputes the table for new values on the same shape.
    pub fn refill(&mut self, values: &[f64]) {
        let d = self.shape.len();
        debug_assert_eq!(values.len(), self.shape.iter().product::<usize>());
        self.prefix.iter_mut().for_each(|p| *p = Dd::ZERO);
        let mut idx = vec![0usize; d];
        for &v in values {
            let p: usize = idx.iter().zip(&self.pstrides).map(|(i, s)| (i + 1) * s).sum();
            self.prefix[p] = Dd::from_f64(v);
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < self.shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        // Running sums along each axis in turn.
        let plen = self.prefix.len();
        for k in 0..d {
            let stride = self.pstrides[k];
            let extent = self.shape[k] + 1;
            for p in 0..plen {
                if (p / stride) % extent >= 1 {
                    self.prefix[p] = self.prefix[p].add(self.prefix[p - stride]);
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Sum over the inclusive index box `[lo, hi]` (must be nonempty).
    #[inline]
    pub fn sum_dd(&self, lo: &[usize], hi: &[usize]) -> Dd {
        let p = &self.prefix;
        let s = &self.pstrides;
        match lo.len() {
            1 => p[hi[0] + 1].sub(p[lo[0]]),
            2 => {
                let (a0, b0) = (lo[0] * s[0], (hi[0] + 1) * s[0]);
                let (a1, b1) = (lo[1], hi[1] + 1);
                p[b0 + b1].sub(p[a0 + b1]).sub(p[b0 + a1]).add(p[a0 + a1])
            }
            3 => {
                let (a0, b0) = (lo[0] * s[0], (hi[0] + 1) * s[0]);
                let (a1, b1) = (lo[1] * s[1], (hi[1] + 1) * s[1]);
                let (a2, b2) = (lo[2], hi[2] + 1);
                p[b0 + b1 + b2]
                    .sub(p[a0 + b1 + b2])
                    .sub(p[b0 + a1 + b2])
                    .sub(p[b0 + b1 + a2])
                    .add(p[a0 + a1 + b2])
                    .add(p[a0 + b1 + a2])
                    .add(p[b0 + a1 + a2])
                    .sub(p[a0 + a1 + a2])
            }
            d => {
                let mut acc = Dd::ZERO;
                for corner in 0..(1usize << d) {
                    let mut off = 0;
                    let mut lows = 0;
                    for k in 0..d {
                        if corner >> k & 1 == 1 {
                            off += (hi[k] + 1) * s[k];
                        } else {
                            off += lo[k] * s[k];
                            lows += 1;
                        }
                    }
                    acc = if lows % 2 == 0 { acc.add(p[off]) } else { acc.sub(p[off]) };
                }
                acc
            }
        }
    }

    #[inline]
    pub fn count(lo: &[usize], hi: &[usize]) -> usize {
        lo.iter().zip(hi).map(|(a, b)| b + 1 - a).product()
    }

    /// Mean over the inclusive index box `[lo, hi]` (must be nonempty).
    #[inline]
    pub fn mean_idx(&self, lo: &[usize], hi: &[usize]) -> f64 {
        self.sum_dd(lo, hi).value() / Self::count(lo, hi) as f64
    }

    /// Mean and count of a coordinate block. NaN mean when empty.
    pub fn block_mean(&self, lattice: &Lattice, block: &Block) -> (f64, usize) {
        match lattice_index_box(lattice, block) {
            Some((lo, hi)) => (self.mean_idx(&lo, &hi), Self::count(&lo, &hi)),
            None => (f64::NAN, 0),
        }
    }
}

/// Builds the summed-area table of a lattice sample.
pub fn build_tables(sample: &Sample) -> Result<BlockSumTable> {
    match &sample.grid {
        DesignGrid::Lattice(l) => Ok(BlockSumTable::from_lattice(l, &sample.y)),
        DesignGrid::Scatter(_) => Err(Error::ScatterUnsupported),
    }
}

/// Which corner of the block is being searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    LowerLeft,
    UpperRight,
}

/// Per-axis index range of candidate corners, or None when some axis has
/// no admissible coordinate.
pub(crate) fn candidate_ranges(axes: &[Vec<f64>], x0: &[f64], side: Side) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut lo = Vec::with_capacity(axes.len());
    let mut hi = Vec::with_capacity(axes.len());
    for (axis, &c) in axes.iter().zip(x0) {
        match side {
            Side::LowerLeft => {
                let n = axis.partition_point(|&a| a <= c);
                if n == 0 {
                    return None;
                }
                lo.push(0);
                hi.push(n - 1);
            }
            Side::UpperRight => {
                let first = axis.partition_point(|&a| a < c);
                if first == axis.len() {
                    return None;
                }
                lo.push(first);
                hi.push(axis.len() - 1);
            }
        }
    }
    Some((lo, hi))
}

/// Candidate block corners on design coordinates: the Cartesian product of
/// per-axis coordinates on the requested side of `x0`, in lexicographic order.
pub fn candidate_corners(grid: &DesignGrid, x0: &[f64], side: Side) -> Vec<Vec<f64>> {
    let axes = grid.axis_values();
    let mut out = Vec::new();
    if let Some((lo, hi)) = candidate_ranges(&axes, x0, side) {
        for_each_in_box(&lo, &hi, |idx| {
            out.push(idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect());
        });
    }
    out
}
