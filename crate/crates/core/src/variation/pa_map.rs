//! Maps given by vertex samples on a dyadic grid, affine on Kuhn simplices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, Index, MAX_DIM};
use crate::simplex::{det, factorial, Point};
use crate::variation::kuhn::{chain, permutation_sign, permutations, Permutation};

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffineMap {
    grid: DyadicGrid,
    components: usize,
    /// `values[v * components + c]` is component `c` at vertex `v`.
    values: Vec<f64>,
}

impl PiecewiseAffineMap {
    pub fn new(grid: DyadicGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidParameter("map needs at least one component".into()));
        }
        if values.len() != grid.vertex_count() * components {
            return Err(Error::GridMismatch(format!(
                "{} vertex values for {} vertices × {components} components",
                values.len(),
                grid.vertex_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("vertex values must be finite".into()));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Samples `f(x, out)` at every grid vertex.
    pub fn from_fn<F>(grid: DyadicGrid, components: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let n = grid.dim();
        let values: Vec<f64> = (0..grid.vertex_count())
            .into_par_iter()
            .flat_map_iter(|v| {
                let x = grid.vertex_position(&grid.vertex_multi(v));
                let mut out = vec![0.0; components];
                f(&x[..n], &mut out);
                out
            })
            .collect();
        Self::new(grid, components, values)
    }

    pub fn identity(grid: DyadicGrid) -> Self {
        let n = grid.dim();
        Self::from_fn(grid, n, |x, out| out.copy_from_slice(x)).expect("coordinates are finite")
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn vertex_value(&self, v: &Index, c: usize) -> f64 {
        self.values[self.grid.vertex_linear(v) * self.components + c]
    }

    #[inline]
    pub fn vertex_point(&self, v: &Index) -> Point {
        let base = self.grid.vertex_linear(v) * self.components;
        let mut p = [0.0; MAX_DIM];
        let m = self.components.min(MAX_DIM);
        p[..m].copy_from_slice(&self.values[base..base + m]);
        p
    }

    /// Evaluates the affine extension at a point of the closed cube.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let g = &self.grid;
        let n = g.dim();
        let cell = g
            .locate(x)
            .ok_or_else(|| Error::InvalidParameter(format!("point {x:?} outside the map's cube")))?;
        let idx = g.multi_index(cell);
        let h = g.side();
        let mut t = [0.0; MAX_DIM];
        let mut order: Permutation = [0, 1, 2];
        for a in 0..n {
            t[a] = ((x[a] - g.lower(a)) / h - idx[a] as f64).clamp(0.0, 1.0);
        }
        order[..n].sort_by(|&a, &b| t[b].total_cmp(&t[a]).then(a.cmp(&b)));
        let verts = chain(g, &idx, &order);
        for (c, o) in out.iter_mut().enumerate().take(self.components) {
            let mut v = self.vertex_value(&verts[0], c);
            for j in 0..n {
                let d = self.vertex_value(&verts[j + 1], c) - self.vertex_value(&verts[j], c);
                v += t[order[j]] * d;
            }
            *o = v;
        }
        Ok(())
    }

    /// Same function sampled on a finer grid over the same cube (exact: the
    /// finer Kuhn triangulation refines the coarser one).
    pub fn refine(&self, depth: u32) -> Result<Self> {
        if depth < self.grid.depth() {
            return Err(Error::InvalidParameter(format!(
                "cannot refine depth {} to {depth}",
                self.grid.depth()
            )));
        }
        let fine = self.grid.with_depth(depth)?;
        let m = self.components;
        Self::from_fn(fine, m, |x, out| {
            self.eval(x, out).expect("vertices lie in the cube");
        })
    }

    /// `x ↦ F(x / m)` on the grid with center `m·c` and half-width `|m|·r`,
    /// for `m` a signed power of two. Vertex values are permuted, not resampled.
    pub fn precompose_scaling(&self, m: f64) -> Result<Self> {
        if !crate::grid::is_signed_power_of_two(m) {
            return Err(Error::NotPowerOfTwo(m));
        }
        let g = &self.grid;
        let center: Vec<f64> = g.center().iter().map(|c| c * m).collect();
        let grid = DyadicGrid::new(g.dim(), &center, g.half_width() * m.abs(), g.depth())?;
        let values = if m > 0.0 {
            self.values.clone()
        } else {
            let last = g.cells_per_axis();
            let mut out = vec![0.0; self.values.len()];
            for v in 0..g.vertex_count() {
                let mut idx = g.vertex_multi(v);
                for slot in idx.iter_mut().take(g.dim()) {
                    *slot = last - *slot;
                }
                let src = g.vertex_linear(&idx) * self.components;
                out[v * self.components..(v + 1) * self.components]
                    .copy_from_slice(&self.values[src..src + self.components]);
            }
            out
        };
        Self::new(grid, self.components, values)
    }

    /// Restriction to the sub-cube with lower vertex `origin` spanning `2^depth`
    /// cells per axis. Vertex values are copied.
    pub fn sub_map(&self, origin: &Index, depth: u32) -> Result<Self> {
        let g = &self.grid;
        let n = g.dim();
        let span = 1usize << depth;
        if (0..n).any(|a| origin[a] + span > g.cells_per_axis()) {
            return Err(Error::InvalidParameter(format!(
                "sub-cube at {origin:?} with {span} cells leaves the grid"
            )));
        }
        let half = 0.5 * g.side() * span as f64;
        let corner = g.vertex_position(origin);
        let center: Vec<f64> = corner[..n].iter().map(|c| c + half).collect();
        let grid = DyadicGrid::new(n, &center, half, depth)?;
        let m = self.components;
        let mut values = Vec::with_capacity(grid.vertex_count() * m);
        for v in 0..grid.vertex_count() {
            let mut idx = grid.vertex_multi(v);
            for a in 0..n {
                idx[a] += origin[a];
            }
            let src = g.vertex_linear(&idx) * m;
            values.extend_from_slice(&self.values[src..src + m]);
        }
        Self::new(grid, m, values)
    }

    /// Componentwise `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::GridMismatch("maps live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.grid, self.components, values)
    }

    /// Replaces component `c` by `f(old value, vertex position)`.
    pub fn map_component<F>(&self, c: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> f64,
    {
        let n = self.grid.dim();
        let mut values = self.values.clone();
        for v in 0..self.grid.vertex_count() {
            let x = self.grid.vertex_position(&self.grid.vertex_multi(v));
            let slot = &mut values[v * self.components + c];
            *slot = f(*slot, &x[..n]);
        }
        Self::new(self.grid, self.components, values)
    }

    /// Swaps two components.
    pub fn swap_components(&self, a: usize, b: usize) -> Self {
        let mut values = self.values.clone();
        for chunk in values.chunks_mut(self.components) {
            chunk.swap(a, b);
        }
        Self {
            grid: self.grid,
            components: self.components,
            values,
        }
    }

    /// Keeps the listed components in the given order.
    pub fn select(&self, comps: &[usize]) -> Result<Self> {
        let values = self
            .values
            .chunks(self.components)
            .flat_map(|ch| comps.iter().map(move |&c| ch[c]))
            .collect();
        Self::new(self.grid, comps.len(), values)
    }

    /// Exact Lipschitz constant of component `c`: the largest gradient norm
    /// over all simplices.
    pub fn lipschitz(&self, c: usize) -> f64 {
        let g = &self.grid;
        let n = g.dim();
        let perms = permutations(n);
        let h = g.side();
        (0..g.cell_count())
            .into_par_iter()
            .map(|cell| {
                let idx = g.multi_index(cell);
                perms
                    .iter()
                    .map(|p| {
                        let verts = chain(g, &idx, p);
                        let s: f64 = (0..n)
                            .map(|j| {
                                let d = self.vertex_value(&verts[j + 1], c) - self.vertex_value(&verts[j], c);
                                d * d
                            })
                            .sum();
                        s.sqrt() / h
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max − min` of component `c` (attained at vertices).
    pub fn oscillation(&self, c: usize) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .skip(c)
            .step_by(self.components)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo
    }

    /// Certified upper bound for `Lip^α` of component `c`:
    /// `min(L|x−y|, osc) ≤ L^α |x−y|^α osc^{1−α}`.
    pub fn holder_bound(&self, c: usize, alpha: f64) -> f64 {
        let osc = self.oscillation(c);
        if alpha == 0.0 {
            return osc;
        }
        let l = self.lipschitz(c);
        if alpha == 1.0 {
            return l;
        }
        l.powf(alpha) * osc.powf(1.0 - alpha)
    }

    /// Calls `f(cell, permutation, D, sign σ)` for every simplex, where the
    /// columns `D[j] = F(v_{j+1}) − F(v_j)` are the image edge vectors along the
    /// chain. Requires `components == n`.
    pub(crate) fn simplex_edges(&self, cell_idx: &Index, perm: &Permutation) -> [Point; MAX_DIM] {
        let n = self.grid.dim();
        let verts = chain(&self.grid, cell_idx, perm);
        let mut d = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            let a = self.vertex_point(&verts[j + 1]);
            let b = self.vertex_point(&verts[j]);
            for c in 0..n {
                d[j][c] = a[c] - b[c];
            }
        }
        d
    }

    /// `∫_cell det DF`, summed over the cell's simplices.
    pub fn cell_det_integral(&self, cell: usize) -> f64 {
        let n = self.grid.dim();
        let idx = self.grid.multi_index(cell);
        let nf = factorial(n) as f64;
        permutations(n)
            .iter()
            .map(|p| permutation_sign(p, n) * det(n, &self.simplex_edges(&idx, p)) / nf)
            .sum()
    }
}
