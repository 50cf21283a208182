//! Dyadic grids over cubes in R^n (n ≤ 3) and piecewise-constant functions on them.
//!
//! A [`DyadicGrid`] covers `[c - r, c + r]^n` with `2^K` cells per axis. Cells are
//! half-open `∏ [a_i, a_i + h[` except the last cell on each axis, which is closed,
//! so the cells tile the closed cube exactly. Cell `(i_0, .., i_{n-1})` has linear
//! index `i_0 + 2^K i_1 + 2^{2K} i_2` (axis 0 varies fastest).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

pub const MAX_DIM: usize = 3;

/// Upper limit on the number of cells of a single grid.
pub const MAX_CELLS: usize = 1 << 28;

/// Multi-index of a cell or vertex; entries past the grid dimension are zero.
pub type Index = [usize; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridHeader", into = "GridHeader")]
pub struct DyadicGrid {
    dim: usize,
    center: [f64; MAX_DIM],
    half_width: f64,
    depth: u32,
}

/// On-disk header `{n, c, r, K}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridHeader {
    pub n: usize,
    pub c: Vec<f64>,
    pub r: f64,
    #[serde(rename = "K")]
    pub k: u32,
}

impl TryFrom<GridHeader> for DyadicGrid {
    type Error = Error;

    fn try_from(h: GridHeader) -> Result<Self> {
        DyadicGrid::new(h.n, &h.c, h.r, h.k)
    }
}

impl From<DyadicGrid> for GridHeader {
    fn from(g: DyadicGrid) -> Self {
        GridHeader {
            n: g.dim,
            c: g.center().to_vec(),
            r: g.half_width,
            k: g.depth,
        }
    }
}

impl DyadicGrid {
    pub fn new(dim: usize, center: &[f64], half_width: f64, depth: u32) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if center.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "center has {} coordinates, expected {dim}",
                center.len()
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width must be positive and finite, got {half_width}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGrid("center must be finite".into()));
        }
        let bits = dim as u64 * depth as u64;
        if bits > MAX_CELLS.trailing_zeros() as u64 {
            return Err(Error::InvalidGrid(format!(
                "2^({dim}·{depth}) cells exceed the limit of {MAX_CELLS}"
            )));
        }
        let mut c = [0.0; MAX_DIM];
        c[..dim].copy_from_slice(center);
        Ok(Self {
            dim,
            center: c,
            half_width,
            depth,
        })
    }

    /// Grid on `[-1, 1]^n`.
    pub fn unit(dim: usize, depth: u32) -> Result<Self> {
        Self::new(dim, &vec![0.0; dim], 1.0, depth)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn cells_per_axis(&self) -> usize {
        1 << self.depth
    }

    pub fn cell_count(&self) -> usize {
        1 << (self.depth as usize * self.dim)
    }

    /// Cell side `h = 2r / 2^K`.
    pub fn side(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_axis() as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_width
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_width
    }

    /// Same cube at another depth.
    pub fn with_depth(&self, depth: u32) -> Result<Self> {
        Self::new(self.dim, self.center(), self.half_width, depth)
    }

    /// True when both grids cover the same cube (depths may differ).
    pub fn same_cube(&self, other: &Self) -> bool {
        self.dim == other.dim && self.half_width == other.half_width && self.center() == other.center()
    }

    #[inline]
    pub fn multi_index(&self, linear: usize) -> Index {
        let k = self.depth as usize;
        let mask = self.cells_per_axis() - 1;
        let mut idx = [0; MAX_DIM];
        for (a, slot) in idx.iter_mut().enumerate().take(self.dim) {
            *slot = (linear >> (a * k)) & mask;
        }
        idx
    }

    #[inline]
    pub fn linear_index(&self, idx: &Index) -> usize {
        let k = self.depth as usize;
        (0..self.dim).fold(0, |acc, a| acc | (idx[a] << (a * k)))
    }

    /// Stride of the linear index along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        1 << (axis * self.depth as usize)
    }

    #[inline]
    pub fn cell_center(&self, linear: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(linear);
        let h = self.side();
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.lower(a) + h * (idx[a] as f64 + 0.5);
        }
        x
    }

    /// Lower corner of a cell.
    pub fn cell_corner(&self, idx: &Index) -> [f64; MAX_DIM] {
        let h = self.side();
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.lower(a) + h * idx[a] as f64;
        }
        x
    }

    /// Cell containing `point`, or `None` outside the closed cube.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        let mut idx = [0; MAX_DIM];
        let n = self.cells_per_axis();
        let h = self.side();
        for a in 0..self.dim {
            let x = point[a];
            if !(x >= self.lower(a) && x <= self.upper(a)) {
                return None;
            }
            let t = ((x - self.lower(a)) / h).floor();
            idx[a] = (t.max(0.0) as usize).min(n - 1);
        }
        Some(self.linear_index(&idx))
    }

    /// Axis-aligned index range `[lo, hi]` (inclusive) of cells whose centers
    /// may lie in `[min, max]` along `axis`; `None` if empty.
    pub fn center_range(&self, axis: usize, min: f64, max: f64) -> Option<(usize, usize)> {
        let h = self.side();
        let n = self.cells_per_axis() as f64;
        let lo = ((min - self.lower(axis)) / h - 0.5).ceil().max(0.0);
        let hi = ((max - self.lower(axis)) / h - 0.5).floor().min(n - 1.0);
        if !(lo <= hi) {
            return None;
        }
        Some((lo as usize, hi as usize))
    }

    pub fn vertices_per_axis(&self) -> usize {
        self.cells_per_axis() + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices_per_axis().pow(self.dim as u32)
    }

    #[inline]
    pub fn vertex_linear(&self, idx: &Index) -> usize {
        let m = self.vertices_per_axis();
        (0..self.dim).rev().fold(0, |acc, a| acc * m + idx[a])
    }

    pub fn vertex_multi(&self, mut linear: usize) -> Index {
        let m = self.vertices_per_axis();
        let mut idx = [0; MAX_DIM];
        for slot in idx.iter_mut().take(self.dim) {
            *slot = linear % m;
            linear /= m;
        }
        idx
    }

    pub fn vertex_position(&self, idx: &Index) -> [f64; MAX_DIM] {
        self.cell_corner(idx)
    }
}

/// Piecewise-constant real function on a [`DyadicGrid`], zero outside the cube.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: DyadicGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: DyadicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                cell: grid.multi_index(i)[..grid.dim()].to_vec(),
                center: grid.cell_center(i)[..grid.dim()].to_vec(),
                value: values[i],
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: DyadicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: DyadicGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.cell_count()],
            grid,
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_sampler<F>(grid: DyadicGrid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let n = grid.dim();
        let mut values = Vec::with_capacity(grid.cell_count());
        for i in 0..grid.cell_count() {
            let x = grid.cell_center(i);
            let v = f(&x[..n]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    cell: grid.multi_index(i)[..n].to_vec(),
                    center: x[..n].to_vec(),
                    value: v,
                });
            }
            values.push(v);
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, linear: usize) -> f64 {
        self.values[linear]
    }

    /// Value at a point; zero outside the cube.
    pub fn value_at(&self, point: &[f64]) -> f64 {
        self.grid.locate(point).map_or(0.0, |i| self.values[i])
    }

    /// `∫ u`.
    pub fn integral(&self) -> f64 {
        numeric::sum(self.values.iter().copied()) * self.grid.cell_volume()
    }

    /// `‖u‖_{L^p}`; pass `f64::INFINITY` for the sup norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.values, self.grid.cell_volume(), p)
    }

    /// Exact variation of the piecewise-constant function extended by zero:
    /// the sum of all face jumps (including jumps to zero across the outer
    /// boundary) times `h^{n-1}`.
    pub fn total_variation(&self) -> f64 {
        let g = &self.grid;
        let n = g.cells_per_axis();
        let mut acc = CompensatedSum::new();
        for i in 0..g.cell_count() {
            let idx = g.multi_index(i);
            let v = self.values[i];
            for a in 0..g.dim() {
                if idx[a] == 0 {
                    acc.add(v.abs());
                }
                if idx[a] + 1 < n {
                    acc.add((v - self.values[i + g.stride(a)]).abs());
                } else {
                    acc.add(v.abs());
                }
            }
        }
        acc.value() * g.side().powi(g.dim() as i32 - 1)
    }

    /// Block means over level-`k` dyadic cubes, returned on the depth-`k` grid.
    pub fn block_means(&self, k: u32) -> Result<GridFunction> {
        let g = &self.grid;
        if k > g.depth() {
            return Err(Error::DepthOutOfRange {
                level: k,
                depth: g.depth(),
            });
        }
        let coarse = g.with_depth(k)?;
        let shift = g.depth() - k;
        let mut acc = vec![CompensatedSum::new(); coarse.cell_count()];
        for (i, &v) in self.values.iter().enumerate() {
            let mut idx = g.multi_index(i);
            for slot in idx.iter_mut().take(g.dim()) {
                *slot >>= shift;
            }
            acc[coarse.linear_index(&idx)].add(v);
        }
        let per_block = (1usize << (shift as usize * g.dim())) as f64;
        let values = acc.iter().map(|s| s.value() / per_block).collect();
        Ok(GridFunction { grid: coarse, values })
    }

    /// Piecewise-constant refinement onto the same cube at a finer `depth`.
    pub fn prolong(&self, depth: u32) -> Result<GridFunction> {
        let g = &self.grid;
        if depth < g.depth() {
            return Err(Error::InvalidParameter(format!(
                "cannot prolong depth {} to coarser depth {depth}",
                g.depth()
            )));
        }
        let fine = g.with_depth(depth)?;
        let shift = depth - g.depth();
        let values = (0..fine.cell_count())
            .map(|i| {
                let mut idx = fine.multi_index(i);
                for slot in idx.iter_mut().take(g.dim()) {
                    *slot >>= shift;
                }
                self.values[g.linear_index(&idx)]
            })
            .collect();
        Ok(GridFunction { grid: fine, values })
    }

    /// Replaces each level-`k` block by its mean; the grid is unchanged.
    pub fn dyadic_average(&self, k: u32) -> Result<GridFunction> {
        if k == self.grid.depth() {
            return Ok(self.clone());
        }
        self.block_means(k)?.prolong(self.grid.depth())
    }

    /// `u ∘ η_m` with `η_m(x) = m x`, for `|m|` a power of two. The result lives on
    /// the cube with center `c / m` and half-width `r / |m|`; cell values are
    /// permuted (reversed along every axis when `m < 0`), never interpolated.
    pub fn rescale(&self, m: f64) -> Result<GridFunction> {
        if !is_signed_power_of_two(m) {
            return Err(Error::NotPowerOfTwo(m));
        }
        let g = &self.grid;
        let center: Vec<f64> = g.center().iter().map(|c| c / m).collect();
        let grid = DyadicGrid::new(g.dim(), &center, g.half_width() / m.abs(), g.depth())?;
        let values = if m > 0.0 {
            self.values.clone()
        } else {
            let last = g.cells_per_axis() - 1;
            (0..g.cell_count())
                .map(|i| {
                    let mut idx = g.multi_index(i);
                    for slot in idx.iter_mut().take(g.dim()) {
                        *slot = last - *slot;
                    }
                    self.values[g.linear_index(&idx)]
                })
                .collect()
        };
        Ok(GridFunction { grid, values })
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise `a·self + b·other` on identical grids.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("combine needs identical grids".into()));
        }
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Errors with the first offending cell unless every value is 0 or 1.
    pub fn check_indicator(&self) -> Result<()> {
        match self.values.iter().position(|&v| v != 0.0 && v != 1.0) {
            Some(cell) => Err(Error::NotIndicator {
                cell,
                value: self.values[cell],
            }),
            None => Ok(()),
        }
    }

    /// Largest absolute cellwise difference on identical grids.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("comparison needs identical grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Grid `L^p` norm of cell values with cell volume `vol`.
pub(crate) fn lp_norm_of(values: &[f64], vol: f64, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("L^p needs p ≥ 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    if p == 1.0 {
        return Ok(numeric::sum(values.iter().map(|v| v.abs())) * vol);
    }
    let s = numeric::sum(values.iter().map(|v| v.abs().powf(p)));
    Ok((s * vol).powf(1.0 / p))
}

pub(crate) fn is_signed_power_of_two(m: f64) -> bool {
    if !m.is_finite() || m == 0.0 {
        return false;
    }
    let a = m.abs();
    let e = a.log2().round();
    (-60.0..=60.0).contains(&e) && 2f64.powi(e as i32) == a
}
