//! Brouwer degree fields of piecewise-affine maps, sampled at target cell
//! centers.
//!
//! Every Kuhn simplex `Δ` with affine part `A` adds `sign(det A)` to the
//! target cells whose centers lie in `A(Δ)` under the half-open rule of
//! [`crate::simplex`], so the count at a center equals the degree at a
//! generic nearby point. Centers within `1e−12·h` of an image facet are
//! flagged, as are centers in the bounding box of a degenerate image.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm_of, DyadicGrid, GridFunction, Index, MAX_DIM};
use crate::holder::HolderFunction;
use crate::io;
use crate::numeric::{fit_line, LineFit};
use crate::simplex::{bands, Locator, Point, Simplex};
use crate::variation::kuhn::{chain, permutation_sign, permutations, Permutation};
use crate::variation::PiecewiseAffineMap;

const SCATTER_BANDS: usize = 64;
const FACET_TOL: f64 = 1e-12;
/// Relative distance (to the image diameter) below which a query point
/// counts as lying on the boundary image.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSource {
    pub map_id: String,
    pub source_depth: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeField {
    grid: DyadicGrid,
    values: Vec<i32>,
    flagged: Vec<usize>,
    degenerate_simplices: usize,
    pub source: FieldSource,
}

impl DegreeField {
    pub fn zeros(grid: DyadicGrid) -> Self {
        Self {
            grid,
            values: vec![0; grid.cell_count()],
            flagged: Vec::new(),
            degenerate_simplices: 0,
            source: FieldSource {
                map_id: "empty".into(),
                source_depth: 0,
            },
        }
    }

    pub fn with_map_id(mut self, id: impl Into<String>) -> Self {
        self.source.map_id = id.into();
        self
    }

    pub fn grid(&self) -> &DyadicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> i32 {
        self.values[cell]
    }

    /// Value at the cell containing `x`, or 0 outside the target cube.
    pub fn value_at(&self, x: &[f64]) -> i32 {
        self.grid.locate(x).map_or(0, |c| self.values[c])
    }

    /// Sorted cells whose centers hit an image facet or a degenerate image.
    pub fn flagged(&self) -> &[usize] {
        &self.flagged
    }

    pub fn degenerate_simplices(&self) -> usize {
        self.degenerate_simplices
    }

    pub fn to_grid_function(&self) -> GridFunction {
        GridFunction::new(self.grid, self.values.iter().map(|&v| v as f64).collect())
            .expect("integer values are finite")
    }

    /// `∫ deg dL^n` over the target cube.
    pub fn integral(&self) -> f64 {
        self.values.iter().map(|&v| v as i64).sum::<i64>() as f64 * self.grid.cell_volume()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_field(self, p)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("degree fields live on different grids".into()));
        }
        Ok(())
    }

    /// Cellwise sum; flags are merged.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut flagged: Vec<usize> = self.flagged.iter().chain(&other.flagged).copied().collect();
        flagged.sort_unstable();
        flagged.dedup();
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            flagged,
            degenerate_simplices: self.degenerate_simplices + other.degenerate_simplices,
            source: self.source.clone(),
        })
    }

    /// `‖self − other‖_p` on the common target grid.
    pub fn diff_norm(&self, other: &Self, p: f64) -> Result<f64> {
        self.check_same(other)?;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) as f64)
            .collect();
        lp_norm_of(&d, self.grid.cell_volume(), p)
    }

    /// True when every nonzero cell has its center in the box `[lo, hi]`.
    pub fn supported_in(&self, lo: &[f64], hi: &[f64]) -> bool {
        let n = self.grid.dim();
        self.values.iter().enumerate().all(|(c, &v)| {
            v == 0 || {
                let x = self.grid.cell_center(c);
                (0..n).all(|a| x[a] >= lo[a] && x[a] <= hi[a])
            }
        })
    }

    /// Writes `<stem>.json`/`<stem>.csv` and, in 2-D, `<stem>.pgm`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        let u = self.to_grid_function();
        io::save_grid_function(&u, dir, stem)?;
        if self.grid.dim() == 2 {
            io::write_pgm(&u, &dir.join(format!("{stem}.pgm")))?;
        }
        Ok(())
    }
}

/// Grid `L^p` norm of the integer field; `p ≥ 1`.
pub fn lp_norm_field(field: &DegreeField, p: f64) -> Result<f64> {
    let v: Vec<f64> = field.values.iter().map(|&x| x as f64).collect();
    lp_norm_of(&v, field.grid.cell_volume(), p)
}

fn check_square(map: &PiecewiseAffineMap) -> Result<()> {
    let n = map.grid().dim();
    if map.components() != n {
        return Err(Error::InvalidParameter(format!(
            "degree needs n = {n} components, got {}",
            map.components()
        )));
    }
    Ok(())
}

/// Image of the simplex `(cell, σ)` and the orientation sign of its affine
/// part, or `None` for the sign when the image is degenerate.
#[inline]
fn image_simplex(map: &PiecewiseAffineMap, idx: &Index, perm: &Permutation) -> (Simplex, Option<i32>) {
    let g = map.grid();
    let n = g.dim();
    let verts = chain(g, idx, perm);
    let mut pts = [[0.0; MAX_DIM]; MAX_DIM + 1];
    for (j, p) in pts.iter_mut().enumerate().take(n + 1) {
        *p = map.vertex_point(&verts[j]);
    }
    let s = Simplex::new(n, &pts);
    let d = s.edge_det();
    let sign = if d == 0.0 || !d.is_finite() {
        None
    } else {
        Some(if d * permutation_sign(perm, n) > 0.0 { 1 } else { -1 })
    };
    (s, sign)
}

/// Output of a weighted scatter: per-cell sums, tie flags and the number of
/// degenerate simplices.
pub(crate) struct Scatter<T> {
    pub values: Vec<T>,
    pub flagged: Vec<usize>,
    pub degenerate: usize,
}

/// Adds `±weight(source cell)` to every target cell whose center lies in the
/// image of a simplex, with the sign of the simplex's affine part. Simplices
/// of cells with zero weight are skipped.
pub(crate) fn scatter<T, W>(map: &PiecewiseAffineMap, target: &DyadicGrid, weight: W) -> Result<Scatter<T>>
where
    T: Copy + Default + PartialEq + std::ops::AddAssign + std::ops::Neg<Output = T> + Send + Sync,
    W: Fn(usize) -> T + Sync,
{
    check_square(map)?;
    let g = map.grid();
    let n = g.dim();
    if target.dim() != n {
        return Err(Error::GridMismatch(format!(
            "target dimension {} differs from source dimension {n}",
            target.dim()
        )));
    }
    let perms = permutations(n);
    let np = perms.len();
    let total = g.cell_count() * np;
    let tol = FACET_TOL * target.side();
    let last = n - 1;
    let row_bands = bands(target.cells_per_axis(), SCATTER_BANDS);
    let per = row_bands[0].1 + 1;
    let zero = T::default();

    let spans: Vec<(Option<(usize, usize)>, bool)> = (0..total)
        .into_par_iter()
        .map(|id| {
            if weight(id / np) == zero {
                return (None, false);
            }
            let idx = g.multi_index(id / np);
            let (s, sign) = image_simplex(map, &idx, &perms[id % np]);
            let (lo, hi) = s.bbox();
            (
                target.center_range(last, lo[last] - tol, hi[last] + tol),
                sign.is_none(),
            )
        })
        .collect();
    let degenerate = spans.iter().filter(|s| s.1).count();
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); row_bands.len()];
    for (id, (span, _)) in spans.iter().enumerate() {
        if let Some((a, b)) = span {
            for bucket in &mut buckets[a / per..=b / per] {
                bucket.push(id as u32);
            }
        }
    }
    drop(spans);

    let slab = target.cell_count() / target.cells_per_axis();
    let mut values = vec![zero; target.cell_count()];
    let mut flags = vec![false; target.cell_count()];
    values
        .par_chunks_mut(per * slab)
        .zip(flags.par_chunks_mut(per * slab))
        .zip(row_bands.par_iter())
        .zip(buckets.par_iter())
        .for_each(|(((vals, fl), &band), bucket)| {
            let offset = band.0 * slab;
            for &id in bucket {
                let id = id as usize;
                let idx = g.multi_index(id / np);
                let (s, sign) = image_simplex(map, &idx, &perms[id % np]);
                match (sign, s.locator()) {
                    (Some(sign), Some(loc)) => {
                        let w = weight(id / np);
                        let w = if sign > 0 { w } else { -w };
                        for_each_hit(target, &s, &loc, tol, band, |cell, inside, tie| {
                            if inside {
                                vals[cell - offset] += w;
                            }
                            if tie {
                                fl[cell - offset] = true;
                            }
                        });
                    }
                    _ => flag_box(target, &s, tol, band, |cell| fl[cell - offset] = true),
                }
            }
        });
    let flagged = flags.iter().enumerate().filter(|(_, &f)| f).map(|(c, _)| c).collect();
    Ok(Scatter {
        values,
        flagged,
        degenerate,
    })
}

/// Degree field of `map` sampled at the cell centers of `target`.
pub fn affine_degree_field(map: &PiecewiseAffineMap, target: &DyadicGrid) -> Result<DegreeField> {
    let s = scatter(map, target, |_| 1i32)?;
    Ok(DegreeField {
        grid: *target,
        values: s.values,
        flagged: s.flagged,
        degenerate_simplices: s.degenerate,
        source: FieldSource {
            map_id: "piecewise-affine".into(),
            source_depth: map.grid().depth(),
        },
    })
}

#[inline]
fn for_each_hit<F: FnMut(usize, bool, bool)>(
    target: &DyadicGrid,
    s: &Simplex,
    loc: &Locator,
    tol: f64,
    band: (usize, usize),
    mut f: F,
) {
    crate::simplex::for_each_center_in(target, s, loc, tol, band, |cell, hit| f(cell, hit.inside, hit.tie));
}

fn flag_box<F: FnMut(usize)>(target: &DyadicGrid, s: &Simplex, tol: f64, band: (usize, usize), mut f: F) {
    let n = target.dim();
    let (lo, hi) = s.bbox();
    let mut ranges = [(0usize, 0usize); MAX_DIM];
    for a in 0..n {
        match target.center_range(a, lo[a] - tol, hi[a] + tol) {
            Some(r) => ranges[a] = r,
            None => return,
        }
    }
    ranges[n - 1].0 = ranges[n - 1].0.max(band.0);
    ranges[n - 1].1 = ranges[n - 1].1.min(band.1);
    if ranges[n - 1].0 > ranges[n - 1].1 {
        return;
    }
    let mut idx = [0; MAX_DIM];
    for a in 0..n {
        idx[a] = ranges[a].0;
    }
    'outer: loop {
        f(target.linear_index(&idx));
        for a in 0..n {
            if idx[a] < ranges[a].1 {
                idx[a] += 1;
                continue 'outer;
            }
            idx[a] = ranges[a].0;
        }
        return;
    }
}

fn image_diameter(map: &PiecewiseAffineMap) -> f64 {
    let n = map.grid().dim();
    let mut lo = [f64::INFINITY; MAX_DIM];
    let mut hi = [f64::NEG_INFINITY; MAX_DIM];
    for v in map.values().chunks(n) {
        for a in 0..n {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    (0..n).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt()
}

/// Calls `f` with the image of every boundary facet of the triangulation.
fn for_each_boundary_facet<F: FnMut(&[Point])>(map: &PiecewiseAffineMap, mut f: F) {
    let g = map.grid();
    let n = g.dim();
    let top = g.cells_per_axis();
    let perms = permutations(n);
    let mut pts = [[0.0; MAX_DIM]; MAX_DIM];
    for cell in 0..g.cell_count() {
        let idx = g.multi_index(cell);
        if !(0..n).any(|a| idx[a] == 0 || idx[a] + 1 == top) {
            continue;
        }
        for p in &perms {
            let verts = chain(g, &idx, p);
            for skip in 0..=n {
                let facet = (0..=n).filter(|&j| j != skip).map(|j| verts[j]);
                let on_face = (0..n).any(|a| {
                    let mut it = facet.clone().map(|v| v[a]);
                    let first = it.next().expect("facets are nonempty");
                    (first == 0 || first == top) && it.all(|c| c == first)
                });
                if on_face {
                    for (slot, v) in pts.iter_mut().zip(facet) {
                        *slot = map.vertex_point(&v);
                    }
                    f(&pts[..n]);
                }
            }
        }
    }
}

fn dist_point_segment(q: &Point, a: &Point, b: &Point) -> f64 {
    let mut ab = [0.0; MAX_DIM];
    let mut aq = [0.0; MAX_DIM];
    for i in 0..MAX_DIM {
        ab[i] = b[i] - a[i];
        aq[i] = q[i] - a[i];
    }
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 {
        (dot(&aq, &ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..MAX_DIM).map(|i| (aq[i] - t * ab[i]).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_point_triangle(q: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    let sub = |u: &Point, v: &Point| [u[0] - v[0], u[1] - v[1], u[2] - v[2]];
    let (ab, ac, aq) = (sub(b, a), sub(c, a), sub(q, a));
    let nrm = [
        ab[1] * ac[2] - ab[2] * ac[1],
        ab[2] * ac[0] - ab[0] * ac[2],
        ab[0] * ac[1] - ab[1] * ac[0],
    ];
    let n2 = dot(&nrm, &nrm);
    if n2 > 0.0 {
        // barycentric coordinates of the projection
        let cross = |u: &Point, v: &Point| {
            [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ]
        };
        let s = dot(&cross(&aq, &ac), &nrm) / n2;
        let t = dot(&cross(&ab, &aq), &nrm) / n2;
        if s >= 0.0 && t >= 0.0 && s + t <= 1.0 {
            return dot(&aq, &nrm).abs() / n2.sqrt();
        }
    }
    dist_point_segment(q, a, b)
        .min(dist_point_segment(q, b, c))
        .min(dist_point_segment(q, a, c))
}

/// Distance from `q` to the image of the cube's boundary.
pub fn boundary_image_distance(map: &PiecewiseAffineMap, q: &[f64]) -> Result<f64> {
    check_square(map)?;
    let n = map.grid().dim();
    if q.len() != n {
        return Err(Error::InvalidParameter(format!(
            "query point must have {n} coordinates"
        )));
    }
    let mut qp = [0.0; MAX_DIM];
    qp[..n].copy_from_slice(q);
    let mut best = f64::INFINITY;
    for_each_boundary_facet(map, |f| {
        let d = match n {
            1 => (qp[0] - f[0][0]).abs(),
            2 => dist_point_segment(&qp, &f[0], &f[1]),
            _ => dist_point_triangle(&qp, &f[0], &f[1], &f[2]),
        };
        best = best.min(d);
    });
    Ok(best)
}

/// Degree of `map` at `q`, which must lie off the image of the boundary.
pub fn degree_at(map: &PiecewiseAffineMap, q: &[f64]) -> Result<i64> {
    let dist = boundary_image_distance(map, q)?;
    let scale = image_diameter(map).max(f64::MIN_POSITIVE);
    if dist <= BOUNDARY_TOL * scale {
        return Err(Error::OnBoundaryImage {
            point: q.to_vec(),
            distance: dist,
        });
    }
    let g = map.grid();
    let n = g.dim();
    let perms = permutations(n);
    let tol = FACET_TOL * scale;
    let total: i64 = (0..g.cell_count())
        .into_par_iter()
        .map(|cell| {
            let idx = g.multi_index(cell);
            let mut acc = 0i64;
            for p in &perms {
                let (s, sign) = image_simplex(map, &idx, p);
                let Some(sign) = sign else { continue };
                let (lo, hi) = s.bbox();
                if (0..n).any(|a| q[a] < lo[a] - tol || q[a] > hi[a] + tol) {
                    continue;
                }
                if let Some(loc) = s.locator() {
                    if loc.locate(q, tol).inside {
                        acc += sign as i64;
                    }
                }
            }
            acc
        })
        .sum();
    Ok(total)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementLevel {
    pub k: u32,
    /// `‖D_k‖_p`, one entry per requested `p`.
    pub norms: Vec<f64>,
    /// `‖D_k − D_{k_prev}‖_p` against the previous depth.
    pub diffs: Vec<Option<f64>>,
    pub flagged_cells: usize,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeFit {
    pub p: f64,
    /// Fit of `log2 ‖D_{k+1} − D_k‖_p` against the coarser depth `k`.
    pub fit: Option<LineFit>,
    /// `n − 1 − τ_n / p`.
    pub predicted: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementReport {
    pub dim: usize,
    pub alphas: Vec<f64>,
    pub tau: f64,
    pub p: Vec<f64>,
    /// `p` within 1% of `τ_n / d` for the supplied `d`; reported, not classified.
    pub near_critical: Vec<bool>,
    pub levels: Vec<RefinementLevel>,
    pub slopes: Vec<SlopeFit>,
    #[serde(skip)]
    pub fields: Vec<DegreeField>,
}

impl RefinementReport {
    /// Rows `(k, p, norm, diff)`; `diff` is empty at the first depth.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.levels.iter().flat_map(|l| {
            self.p.iter().enumerate().map(move |(i, p)| {
                vec![
                    l.k.to_string(),
                    io::format_value(*p),
                    io::format_value(l.norms[i]),
                    l.diffs[i].map(io::format_value).unwrap_or_default(),
                ]
            })
        });
        io::write_table(path, &["k", "p", "norm", "diff"], rows)
    }

    /// Successive differences for `p` index `i`, by coarser depth.
    pub fn diff_series(&self, i: usize) -> Vec<(u32, f64)> {
        self.levels
            .windows(2)
            .filter_map(|w| w[1].diffs[i].map(|d| (w[0].k, d)))
            .collect()
    }

    pub fn norm_series(&self, i: usize) -> Vec<(u32, f64)> {
        self.levels.iter().map(|l| (l.k, l.norms[i])).collect()
    }
}

/// Samples the components at the vertices of `cube.with_depth(k)`.
pub fn sample_map(components: &[HolderFunction], cube: &DyadicGrid, k: u32) -> Result<PiecewiseAffineMap> {
    let n = cube.dim();
    if components.len() != n {
        return Err(Error::InvalidParameter(format!(
            "need {n} components, got {}",
            components.len()
        )));
    }
    PiecewiseAffineMap::from_fn(cube.with_depth(k)?, n, |x, out| {
        for (o, c) in out.iter_mut().zip(components) {
            *o = c.eval(x);
        }
    })
}

/// Largest displacement of boundary vertices of `fine` relative to the
/// affine interpolant `coarse`.
fn boundary_displacement(fine: &PiecewiseAffineMap, coarse: &PiecewiseAffineMap) -> f64 {
    let g = fine.grid();
    let n = g.dim();
    let top = g.cells_per_axis();
    let mut out = [0.0; MAX_DIM];
    let mut worst: f64 = 0.0;
    for v in 0..g.vertex_count() {
        let idx = g.vertex_multi(v);
        if !(0..n).any(|a| idx[a] == 0 || idx[a] == top) {
            continue;
        }
        let x = g.vertex_position(&idx);
        coarse.eval(&x[..n], &mut out[..n]).expect("same cube");
        let p = fine.vertex_point(&idx);
        let d: f64 = (0..n).map(|a| (p[a] - out[a]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    worst
}

/// Degree fields of the vertex samplings of `components` over `cube` at each
/// depth, with `L^p` norms, successive differences and slope fits. `d` is the
/// boundary dimension used for the critical exponent `τ_n / d`.
pub fn degree_refinement(
    components: &[HolderFunction],
    cube: &DyadicGrid,
    depths: &[u32],
    target: &DyadicGrid,
    p: &[f64],
    d: f64,
) -> Result<RefinementReport> {
    let n = cube.dim();
    if depths.is_empty() || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("depths must be nonempty and increasing".into()));
    }
    if p.iter().any(|&q| q.is_nan() || q < 1.0) {
        return Err(Error::InvalidExponent(format!("L^p needs p ≥ 1, got {p:?}")));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "boundary dimension must be positive, got {d}"
        )));
    }
    let alphas: Vec<f64> = components.iter().map(|c| c.alpha()).collect();
    let tau: f64 = alphas.iter().sum();
    for &q in p {
        if q >= tau / d {
            log::warn!("p = {q} is not below τ_n/d = {}", tau / d);
        }
    }
    let mut levels: Vec<RefinementLevel> = Vec::new();
    let mut fields: Vec<DegreeField> = Vec::new();
    let mut prev_map: Option<PiecewiseAffineMap> = None;
    for &k in depths {
        let map = sample_map(components, cube, k)?;
        let field = affine_degree_field(&map, target)?.with_map_id("holder-sampled");
        let norms = p.iter().map(|&q| field.lp_norm(q)).collect::<Result<Vec<_>>>()?;
        let diffs = match fields.last() {
            Some(prev) => p
                .iter()
                .map(|&q| field.diff_norm(prev, q).map(Some))
                .collect::<Result<_>>()?,
            None => vec![None; p.len()],
        };
        let warning = prev_map.as_ref().and_then(|pm| {
            let moved = boundary_displacement(&map, pm);
            (moved < target.side()).then(|| {
                format!(
                    "boundary image moves by {moved:.3e}, less than the target cell side {:.3e}",
                    target.side()
                )
            })
        });
        if let Some(w) = &warning {
            log::warn!("depth {k}: {w}");
        }
        levels.push(RefinementLevel {
            k,
            norms,
            diffs,
            flagged_cells: field.flagged().len(),
            warning,
        });
        fields.push(field);
        prev_map = Some(map);
    }
    let mut report = RefinementReport {
        dim: n,
        alphas,
        tau,
        p: p.to_vec(),
        near_critical: p.iter().map(|&q| (q - tau / d).abs() <= 0.01 * tau / d).collect(),
        levels,
        slopes: Vec::new(),
        fields,
    };
    report.slopes = (0..p.len())
        .map(|i| {
            let pts: Vec<(f64, f64)> = report
                .diff_series(i)
                .into_iter()
                .filter(|&(_, v)| v > 0.0)
                .map(|(k, v)| (k as f64, v.log2()))
                .collect();
            SlopeFit {
                p: p[i],
                fit: if pts.len() >= 3 { fit_line(&pts).ok() } else { None },
                predicted: n as f64 - 1.0 - tau / p[i],
            }
        })
        .collect();
    Ok(report)
}
