//! Block max-min, min-max and average estimators in general dimension.
//!
//! Candidate corners range over per-axis design coordinates, so every search
//! runs in index space. Lattices use a summed-area table directly; scattered
//! designs are mapped onto the lattice of their per-axis ranks, where a cell
//! may hold zero or several points.
//!
//! Ties: the outer maximization keeps the lexicographically largest lower
//! corner and the inner minimization the lexicographically smallest upper
//! corner. The min-max problem mirrors this. In one dimension every search
//! goes through the isotonic fit and the window at a design point is the
//! constant piece containing it.

use super::series::{line_fit, LineFit};
use crate::design::{
    candidate_ranges, for_each_in_box_until, Block, BlockSumTable, DesignGrid, Lattice, Sample, Side,
};
use crate::error::{Error, Result};
use crate::numeric::Dd;
use serde::{Deserialize, Serialize};

/// Estimates at one query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFit {
    pub f_minus: f64,
    pub f_plus: f64,
    pub f_avg: f64,
    pub u_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// Design points in `[u_hat, v_hat]`.
    pub n_uv: usize,
    /// Tightened optimal rectangle of the max-min problem.
    pub minus_block: Block,
    /// Design points in `minus_block`.
    pub n_minus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMin {
    pub value: f64,
    pub u_star: Vec<f64>,
    pub v_star_inner: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub value: f64,
    pub v_star: Vec<f64>,
    pub u_star_inner: Vec<f64>,
}

/// Estimates at every design point, in storage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFits {
    pub f_minus: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub f_avg: Vec<f64>,
}

/// Largest dense rank lattice built for a scattered design.
const MAX_RANK_CELLS: usize = 1 << 22;

/// Precomputed structure for repeated fits on one design.
#[derive(Debug, Clone)]
pub struct BlockEstimator {
    grid: DesignGrid,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Line(LineIndex),
    Lattice,
    Scatter(RankIndex),
}

#[derive(Debug, Clone)]
struct LineIndex {
    positions: Vec<f64>,
    weights: Vec<f64>,
    group_of: Vec<usize>,
}

impl LineIndex {
    fn new(grid: &DesignGrid) -> Self {
        let x: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)[0]).collect();
        let mut positions = x.clone();
        positions.sort_by(f64::total_cmp);
        positions.dedup();
        let group_of: Vec<usize> = x
            .iter()
            .map(|v| positions.binary_search_by(|p| p.total_cmp(v)).unwrap())
            .collect();
        let mut weights = vec![0.0; positions.len()];
        for &g in &group_of {
            weights[g] += 1.0;
        }
        LineIndex { positions, weights, group_of }
    }

    fn sums(&self, y: &[f64]) -> Vec<f64> {
        let mut acc = vec![Dd::ZERO; self.positions.len()];
        for (&g, &v) in self.group_of.iter().zip(y) {
            acc[g] = acc[g].add_f64(v);
        }
        acc.into_iter().map(Dd::value).collect()
    }

    fn count(&self, lo: usize, hi: usize) -> usize {
        self.weights[lo..=hi].iter().sum::<f64>() as usize
    }

    fn fit_from(&self, lf: &LineFit) -> BlockFit {
        let p = &self.positions;
        let (ulo, vhi) = (lf.minus.0, lf.plus.1);
        BlockFit {
            f_minus: lf.f_minus,
            f_plus: lf.f_plus,
            f_avg: (lf.f_minus + lf.f_plus) / 2.0,
            u_hat: vec![p[ulo]],
            v_hat: vec![p[vhi]],
            n_uv: self.count(ulo, vhi),
            minus_block: Block { lo: vec![p[lf.minus.0]], hi: vec![p[lf.minus.1]] },
            n_minus: self.count(lf.minus.0, lf.minus.1),
        }
    }
}

#[derive(Debug, Clone)]
struct RankIndex {
    axes: Vec<Vec<f64>>,
    shape: Vec<usize>,
    /// Per-point rank multi-index, flattened `n * d`.
    ranks: Vec<usize>,
    /// Per-point dense cell, when the dense lattice is small enough.
    cells: Option<Vec<usize>>,
    counts: Option<BlockSumTable>,
}

impl RankIndex {
    fn new(grid: &DesignGrid) -> Self {
        let axes = grid.axis_values();
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let d = shape.len();
        let n = grid.len();
        let mut ranks = Vec::with_capacity(n * d);
        for i in 0..n {
            let p = grid.point(i);
            for k in 0..d {
                ranks.push(axes[k].binary_search_by(|a| a.total_cmp(&p[k])).unwrap());
            }
        }
        let total = shape.iter().try_fold(1usize, |a, &m| a.checked_mul(m));
        let (cells, counts) = match total {
            Some(t) if t <= MAX_RANK_CELLS => {
                let mut strides = vec![1; d];
                for k in (0..d - 1).rev() {
                    strides[k] = strides[k + 1] * shape[k + 1];
                }
                let cells: Vec<usize> = ranks
                    .chunks(d)
                    .map(|r| r.iter().zip(&strides).map(|(a, s)| a * s).sum())
                    .collect();
                let mut dense = vec![0.0; t];
                for &c in &cells {
                    dense[c] += 1.0;
                }
                (Some(cells), Some(BlockSumTable::from_dense(&shape, &dense)))
            }
            _ => (None, None),
        };
        RankIndex { axes, shape, ranks, cells, counts }
    }

    fn dim(&self) -> usize {
        self.shape.len()
    }

    fn point_in(&self, i: usize, lo: &[usize], hi: &[usize]) -> bool {
        let d = self.dim();
        self.ranks[i * d..(i + 1) * d]
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(r, (a, b))| a <= r && r <= b)
    }

    fn sums_table(&self, y: &[f64]) -> Option<BlockSumTable> {
        let cells = self.cells.as_ref()?;
        let mut dense = vec![0.0; self.shape.iter().product()];
        let mut acc = vec![Dd::ZERO; dense.len()];
        for (&c, &v) in cells.iter().zip(y) {
            acc[c] = acc[c].add_f64(v);
        }
        for (d, a) in dense.iter_mut().zip(acc) {
            *d = a.value();
        }
        Some(BlockSumTable::from_dense(&self.shape, &dense))
    }

    fn count(&self, lo: &[usize], hi: &[usize]) -> usize {
        match &self.counts {
            Some(t) => t.sum_dd(lo, hi).value() as usize,
            None => (0..self.ranks.len() / self.dim()).filter(|&i| self.point_in(i, lo, hi)).count(),
        }
    }

    fn coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.axes).map(|(&i, a)| a[i]).collect()
    }

    /// Rank bounding box of the points inside the index box.
    fn tighten(&self, lo: &[usize], hi: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let d = self.dim();
        let mut blo = hi.to_vec();
        let mut bhi = lo.to_vec();
        for i in 0..self.ranks.len() / d {
            if self.point_in(i, lo, hi) {
                for k in 0..d {
                    let r = self.ranks[i * d + k];
                    blo[k] = blo[k].min(r);
                    bhi[k] = bhi[k].max(r);
                }
            }
        }
        (blo, bhi)
    }
}

/// Block means in index space.
trait Cells {
    fn mean(&self, lo: &[usize], hi: &[usize]) -> Option<f64>;
}

impl Cells for BlockSumTable {
    #[inline]
    fn mean(&self, lo: &[usize], hi: &[usize]) -> Option<f64> {
        Some(self.mean_idx(lo, hi))
    }
}

struct ScatterCells<'a> {
    rank: &'a RankIndex,
    sums: Option<BlockSumTable>,
    y: &'a [f64],
}

impl Cells for ScatterCells<'_> {
    fn mean(&self, lo: &[usize], hi: &[usize]) -> Option<f64> {
        match (&self.sums, &self.rank.counts) {
            (Some(s), Some(c)) => {
                let count = c.sum_dd(lo, hi).value();
                (count > 0.0).then(|| s.sum_dd(lo, hi).value() / count)
            }
            _ => {
                let mut acc = Dd::ZERO;
                let mut count = 0usize;
                for (i, &v) in self.y.iter().enumerate() {
                    if self.rank.point_in(i, lo, hi) {
                        acc = acc.add_f64(v);
                        count += 1;
                    }
                }
                (count > 0).then(|| acc.value() / count as f64)
            }
        }
    }
}

type Ranges = (Vec<usize>, Vec<usize>);

fn ranges(axes: &[Vec<f64>], x0: &[f64]) -> Result<(Ranges, Ranges)> {
    let u = candidate_ranges(axes, x0, Side::LowerLeft).ok_or(Error::NoFeasibleBlock)?;
    let v = candidate_ranges(axes, x0, Side::UpperRight).ok_or(Error::NoFeasibleBlock)?;
    Ok((u, v))
}

/// Returns `(value, u*, inner v)`.
fn search_max_min(cells: &impl Cells, u: &Ranges, v: &Ranges) -> Option<(f64, Vec<usize>, Vec<usize>)> {
    let mut best = f64::NEG_INFINITY;
    let mut found: Option<(Vec<usize>, Vec<usize>)> = None;
    for_each_in_box_until(&u.0, &u.1, |ui| {
        let mut run = f64::INFINITY;
        let mut arg: Option<Vec<usize>> = None;
        for_each_in_box_until(&v.0, &v.1, |vi| {
            if let Some(m) = cells.mean(ui, vi) {
                if m < run {
                    run = m;
                    arg = Some(vi.to_vec());
                }
            }
            run >= best
        });
        if let Some(a) = arg {
            if run >= best {
                best = run;
                found = Some((ui.to_vec(), a));
            }
        }
        true
    });
    found.map(|(u, v)| (best, u, v))
}

/// Returns `(value, v*, inner u)`.
fn search_min_max(cells: &impl Cells, u: &Ranges, v: &Ranges) -> Option<(f64, Vec<usize>, Vec<usize>)> {
    let mut best = f64::INFINITY;
    let mut found: Option<(Vec<usize>, Vec<usize>)> = None;
    for_each_in_box_until(&v.0, &v.1, |vi| {
        let mut run = f64::NEG_INFINITY;
        let mut arg: Option<Vec<usize>> = None;
        for_each_in_box_until(&u.0, &u.1, |ui| {
            if let Some(m) = cells.mean(ui, vi) {
                if m >= run {
                    run = m;
                    arg = Some(ui.to_vec());
                }
            }
            run <= best
        });
        if let Some(a) = arg {
            if run < best {
                best = run;
                found = Some((vi.to_vec(), a));
            }
        }
        true
    });
    found.map(|(v, u)| (best, v, u))
}

struct IndexSolution {
    f_minus: f64,
    u_star: Vec<usize>,
    v_inner: Vec<usize>,
    f_plus: f64,
    v_star: Vec<usize>,
    u_inner: Vec<usize>,
}

fn solve(cells: &impl Cells, axes: &[Vec<f64>], x0: &[f64]) -> Result<IndexSolution> {
    let (u, v) = ranges(axes, x0)?;
    let (f_minus, u_star, v_inner) = search_max_min(cells, &u, &v).ok_or(Error::NoFeasibleBlock)?;
    let (f_plus, v_star, u_inner) = search_min_max(cells, &u, &v).ok_or(Error::NoFeasibleBlock)?;
    Ok(IndexSolution { f_minus, u_star, v_inner, f_plus, v_star, u_inner })
}

impl BlockEstimator {
    pub fn new(grid: &DesignGrid) -> Self {
        let kind = if grid.dim() == 1 {
            Kind::Line(LineIndex::new(grid))
        } else if grid.is_lattice() {
            Kind::Lattice
        } else {
            Kind::Scatter(RankIndex::new(grid))
        };
        BlockEstimator { grid: grid.clone(), kind }
    }

    pub fn grid(&self) -> &DesignGrid {
        &self.grid
    }

    fn check(&self, y: &[f64], x0: &[f64]) -> Result<()> {
        if y.len() != self.grid.len() {
            return Err(Error::LengthMismatch { expected: self.grid.len(), got: y.len() });
        }
        if x0.len() != self.grid.dim() {
            return Err(Error::LengthMismatch { expected: self.grid.dim(), got: x0.len() });
        }
        Ok(())
    }

    fn lattice(&self) -> &Lattice {
        self.grid.as_lattice().expect("lattice kind")
    }

    pub fn max_min(&self, y: &[f64], x0: &[f64]) -> Result<MaxMin> {
        let fit = self.fit(y, x0)?;
        Ok(MaxMin { value: fit.f_minus, u_star: fit.minus_block.lo, v_star_inner: fit.minus_block.hi })
    }

    pub fn min_max(&self, y: &[f64], x0: &[f64]) -> Result<MinMax> {
        self.check(y, x0)?;
        match &self.kind {
            Kind::Line(li) => {
                let lf = line_fit(&li.positions, &li.weights, &li.sums(y), x0[0])?;
                let p = &li.positions;
                Ok(MinMax { value: lf.f_plus, v_star: vec![p[lf.plus.1]], u_star_inner: vec![p[lf.plus.0]] })
            }
            Kind::Lattice => {
                let l = self.lattice();
                let table = BlockSumTable::from_lattice(l, y);
                let (u, v) = ranges(l.axes(), x0)?;
                let (value, vs, ui) = search_min_max(&table, &u, &v).ok_or(Error::NoFeasibleBlock)?;
                Ok(MinMax { value, v_star: l.coords_of(&vs), u_star_inner: l.coords_of(&ui) })
            }
            Kind::Scatter(r) => {
                let cells = ScatterCells { rank: r, sums: r.sums_table(y), y };
                let (u, v) = ranges(&r.axes, x0)?;
                let (value, vs, ui) = search_min_max(&cells, &u, &v).ok_or(Error::NoFeasibleBlock)?;
                let (blo, bhi) = r.tighten(&ui, &vs);
                Ok(MinMax { value, v_star: r.coords(&bhi), u_star_inner: r.coords(&blo) })
            }
        }
    }

    pub fn fit(&self, y: &[f64], x0: &[f64]) -> Result<BlockFit> {
        self.check(y, x0)?;
        match &self.kind {
            Kind::Line(li) => {
                let lf = line_fit(&li.positions, &li.weights, &li.sums(y), x0[0])?;
                Ok(li.fit_from(&lf))
            }
            Kind::Lattice => {
                let l = self.lattice();
                let table = BlockSumTable::from_lattice(l, y);
                let s = solve(&table, l.axes(), x0)?;
                Ok(lattice_fit(l, &s))
            }
            Kind::Scatter(r) => {
                let cells = ScatterCells { rank: r, sums: r.sums_table(y), y };
                let s = solve(&cells, &r.axes, x0)?;
                Ok(self.scatter_fit(r, &s, x0))
            }
        }
    }

    fn scatter_fit(&self, r: &RankIndex, s: &IndexSolution, x0: &[f64]) -> BlockFit {
        let (mlo, mhi) = r.tighten(&s.u_star, &s.v_inner);
        let (plo, phi) = r.tighten(&s.u_inner, &s.v_star);
        let mut u_hat: Vec<f64> = r.coords(&mlo).iter().zip(x0).map(|(a, b)| a.min(*b)).collect();
        let mut v_hat: Vec<f64> = r.coords(&phi).iter().zip(x0).map(|(a, b)| a.max(*b)).collect();
        let count = |lo: &[f64], hi: &[f64]| {
            let block = Block { lo: lo.to_vec(), hi: hi.to_vec() };
            (0..self.grid.len()).filter(|&i| block.contains(&self.grid.point(i))).count()
        };
        let mut n_uv = count(&u_hat, &v_hat);
        if n_uv == 0 {
            // The two corners can come from disjoint rectangles; fall back
            // to the box spanning both.
            let (plo, mhi) = (r.coords(&plo), r.coords(&mhi));
            for k in 0..u_hat.len() {
                u_hat[k] = u_hat[k].min(plo[k]);
                v_hat[k] = v_hat[k].max(mhi[k]);
            }
            n_uv = count(&u_hat, &v_hat);
        }
        BlockFit {
            f_minus: s.f_minus,
            f_plus: s.f_plus,
            f_avg: (s.f_minus + s.f_plus) / 2.0,
            u_hat,
            v_hat,
            n_uv,
            minus_block: Block { lo: r.coords(&mlo), hi: r.coords(&mhi) },
            n_minus: r.count(&s.u_star, &s.v_inner),
        }
    }

    /// Fits at every design point, in storage order.
    pub fn fit_all(&self, y: &[f64]) -> Result<Vec<BlockFit>> {
        if y.len() != self.grid.len() {
            return Err(Error::LengthMismatch { expected: self.grid.len(), got: y.len() });
        }
        match &self.kind {
            Kind::Line(li) => {
                let sums = li.sums(y);
                let means: Vec<f64> = sums.iter().zip(&li.weights).map(|(s, w)| s / w).collect();
                let blocks = super::pava::pava_blocks(&means, &li.weights);
                let mut per_group = Vec::with_capacity(li.positions.len());
                for b in &blocks {
                    let v = b.mean();
                    let lf = LineFit {
                        f_minus: v,
                        f_plus: v,
                        minus: (b.start, b.end - 1),
                        plus: (b.start, b.end - 1),
                    };
                    let fit = li.fit_from(&lf);
                    per_group.extend(std::iter::repeat_n(fit, b.end - b.start));
                }
                Ok(li.group_of.iter().map(|&g| per_group[g].clone()).collect())
            }
            Kind::Lattice => {
                let l = self.lattice();
                let table = BlockSumTable::from_lattice(l, y);
                Ok(bulk_lattice(l, &table))
            }
            Kind::Scatter(r) => {
                let cells = ScatterCells { rank: r, sums: r.sums_table(y), y };
                (0..self.grid.len())
                    .map(|i| {
                        let x0 = self.grid.point(i);
                        let s = solve(&cells, &r.axes, &x0)?;
                        Ok(self.scatter_fit(r, &s, &x0))
                    })
                    .collect()
            }
        }
    }
}

fn lattice_fit(l: &Lattice, s: &IndexSolution) -> BlockFit {
    BlockFit {
        f_minus: s.f_minus,
        f_plus: s.f_plus,
        f_avg: (s.f_minus + s.f_plus) / 2.0,
        u_hat: l.coords_of(&s.u_star),
        v_hat: l.coords_of(&s.v_star),
        n_uv: BlockSumTable::count(&s.u_star, &s.v_star),
        minus_block: Block { lo: l.coords_of(&s.u_star), hi: l.coords_of(&s.v_inner) },
        n_minus: BlockSumTable::count(&s.u_star, &s.v_inner),
    }
}

/// Both one-sided estimates at every lattice point by dynamic programming
/// over lower (resp. upper) corners. For a fixed lower corner `u`, the
/// inner minimum over `v >= x` satisfies
/// `S(x) = min(mean[u, x], min_k S(x + e_k))`, swept in descending order;
/// the min-max side is the mirror image with prefix maxima.
fn bulk_lattice(l: &Lattice, table: &BlockSumTable) -> Vec<BlockFit> {
    let n = l.len();
    let d = l.dim();
    let shape = l.shape();
    let strides = l.strides();

    let mut best_m = vec![f64::NEG_INFINITY; n];
    let mut best_u = vec![0usize; n];
    let mut best_vin = vec![0usize; n];
    let mut s_val = vec![0.0f64; n];
    let mut s_arg = vec![0usize; n];
    let mut u = vec![0usize; d];
    let mut x = vec![0usize; d];
    for uf in 0..n {
        l.unravel(uf, &mut u);
        for k in 0..d {
            x[k] = shape[k] - 1;
        }
        let mut xf = n - 1;
        'sweep: loop {
            let mut val = table.mean_idx(&u, &x);
            let mut arg = xf;
            for k in 0..d {
                if x[k] + 1 < shape[k] {
                    let j = xf + strides[k];
                    let (cv, ca) = (s_val[j], s_arg[j]);
                    if cv < val || (cv == val && ca < arg) {
                        val = cv;
                        arg = ca;
                    }
                }
            }
            s_val[xf] = val;
            s_arg[xf] = arg;
            if val >= best_m[xf] {
                best_m[xf] = val;
                best_u[xf] = uf;
                best_vin[xf] = arg;
            }
            let mut k = d;
            loop {
                if k == 0 {
                    break 'sweep;
                }
                k -= 1;
                if x[k] > u[k] {
                    x[k] -= 1;
                    xf -= strides[k];
                    break;
                }
                xf += (shape[k] - 1 - u[k]) * strides[k];
                x[k] = shape[k] - 1;
            }
        }
    }

    let mut best_p = vec![f64::INFINITY; n];
    let mut best_v = vec![0usize; n];
    let mut h_val = s_val;
    let mut h_arg = s_arg;
    let mut v = u;
    for vf in 0..n {
        l.unravel(vf, &mut v);
        x.iter_mut().for_each(|c| *c = 0);
        let mut xf = 0;
        'sweep: loop {
            let mut val = table.mean_idx(&x, &v);
            let mut arg = xf;
            for k in 0..d {
                if x[k] >= 1 {
                    let j = xf - strides[k];
                    let (cv, ca) = (h_val[j], h_arg[j]);
                    if cv > val || (cv == val && ca > arg) {
                        val = cv;
                        arg = ca;
                    }
                }
            }
            h_val[xf] = val;
            h_arg[xf] = arg;
            if val < best_p[xf] {
                best_p[xf] = val;
                best_v[xf] = vf;
            }
            let mut k = d;
            loop {
                if k == 0 {
                    break 'sweep;
                }
                k -= 1;
                if x[k] < v[k] {
                    x[k] += 1;
                    xf += strides[k];
                    break;
                }
                xf -= x[k] * strides[k];
                x[k] = 0;
            }
        }
    }

    (0..n)
        .map(|i| {
            let s = IndexSolution {
                f_minus: best_m[i],
                u_star: l.index_of(best_u[i]),
                v_inner: l.index_of(best_vin[i]),
                f_plus: best_p[i],
                v_star: l.index_of(best_v[i]),
                u_inner: Vec::new(),
            };
            lattice_fit(l, &s)
        })
        .collect()
}

pub fn block_max_min(sample: &Sample, x0: &[f64]) -> Result<MaxMin> {
    BlockEstimator::new(&sample.grid).max_min(&sample.y, x0)
}

pub fn block_min_max(sample: &Sample, x0: &[f64]) -> Result<MinMax> {
    BlockEstimator::new(&sample.grid).min_max(&sample.y, x0)
}

pub fn block_fit(sample: &Sample, x0: &[f64]) -> Result<BlockFit> {
    BlockEstimator::new(&sample.grid).fit(&sample.y, x0)
}

pub fn fit_at_design_points(sample: &Sample) -> Result<DesignFits> {
    let fits = BlockEstimator::new(&sample.grid).fit_all(&sample.y)?;
    Ok(DesignFits {
        f_minus: fits.iter().map(|f| f.f_minus).collect(),
        f_plus: fits.iter().map(|f| f.f_plus).collect(),
        f_avg: fits.iter().map(|f| f.f_avg).collect(),
    })
}
