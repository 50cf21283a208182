//! Whitney decomposition of a grid-resolved open set into dyadic cubes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{DyadicGrid, GridFunction, Index, MAX_DIM};

/// Squared Euclidean distance transform of a binary mask, in cell units:
/// for each cell the squared center distance to the nearest marked cell
/// (`f64::INFINITY` when nothing is marked).
pub fn squared_distance_transform(grid: &DyadicGrid, marked: &[bool]) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let mut d: Vec<f64> = marked.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        let lines: Vec<usize> = (0..grid.cell_count())
            .filter(|&i| grid.multi_index(i)[axis] == 0)
            .collect();
        let results: Vec<Vec<f64>> = lines
            .par_iter()
            .map(|&start| {
                let f: Vec<f64> = (0..n).map(|j| d[start + j * stride]).collect();
                edt_1d(&f)
            })
            .collect();
        for (&start, line) in lines.iter().zip(results) {
            for (j, v) in line.into_iter().enumerate() {
                d[start + j * stride] = v;
            }
        }
    }
    d
}

/// Lower envelope of parabolas (Felzenszwalb–Huttenlocher).
fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![f64::INFINITY; n];
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        return out;
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let inter = |p: usize, q: usize| {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    for &q in &sites {
        while let Some(&p) = v.last() {
            let s = inter(p, q);
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        if v.is_empty() {
            v.push(q);
            z.push(f64::NEG_INFINITY);
        } else {
            let s = inter(*v.last().unwrap(), q);
            v.push(q);
            z.push(s);
        }
    }
    z.push(f64::INFINITY);
    let mut j = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let dq = q as f64 - p as f64;
        *slot = dq * dq + f[p];
    }
    out
}

/// Distance from each closed cell to the complement of the open set
/// (outside cells and everything beyond the grid cube), in length units.
pub fn distance_to_complement(indicator: &GridFunction) -> Vec<f64> {
    let g = indicator.grid();
    let n = g.cells_per_axis();
    let dim = g.dim();
    let inside: Vec<bool> = indicator.values().iter().map(|&v| v != 0.0).collect();
    // Closed cells at index offset Δ are h·|max(|Δ| − 1, 0)| apart, which is the
    // center distance to the outside set dilated by one cell in every direction.
    let dilated: Vec<bool> = (0..g.cell_count())
        .into_par_iter()
        .map(|i| {
            if !inside[i] {
                return true;
            }
            let idx = g.multi_index(i);
            let mut off = [0i64; MAX_DIM];
            loop {
                let mut j = [0usize; MAX_DIM];
                let mut ok = true;
                for a in 0..dim {
                    let t = idx[a] as i64 + off[a] - 1;
                    if t < 0 || t >= n as i64 {
                        ok = false;
                        break;
                    }
                    j[a] = t as usize;
                }
                if ok && !inside[g.linear_index(&j)] {
                    return true;
                }
                let mut a = 0;
                loop {
                    if a == dim {
                        return false;
                    }
                    if off[a] < 2 {
                        off[a] += 1;
                        break;
                    }
                    off[a] = 0;
                    a += 1;
                }
            }
        })
        .collect();
    let sq = squared_distance_transform(g, &dilated);
    let h = g.side();
    sq.par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let idx = g.multi_index(i);
            let border = (0..dim).map(|a| idx[a].min(n - 1 - idx[a])).min().unwrap() as f64;
            h * s.sqrt().min(border)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyLevel {
    pub k: u32,
    /// Side `2r·2^{−k}`.
    pub side: f64,
    /// Multi-indices of the selected cubes on the depth-`k` grid.
    pub cubes: Vec<Index>,
}

impl WhitneyLevel {
    pub fn count(&self) -> usize {
        self.cubes.len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyDecomposition {
    pub grid: DyadicGrid,
    pub levels: Vec<WhitneyLevel>,
    /// Measure of the open set.
    pub volume: f64,
    /// Measure not covered by selected cubes (the finest-scale shell).
    pub residual: f64,
}

impl WhitneyDecomposition {
    pub fn counts(&self) -> Vec<(u32, usize)> {
        self.levels.iter().map(|l| (l.k, l.count())).collect()
    }

    pub fn covered_volume(&self) -> f64 {
        let n = self.grid.dim() as i32;
        self.levels.iter().map(|l| l.count() as f64 * l.side.powi(n)).sum()
    }
}

/// Greedy coarse-to-fine Whitney selection on levels `0..=max_scale` (clamped
/// to the grid depth): a level-`k` cube is selected when its distance to the
/// complement is at least its side and no coarser selected cube contains it.
/// Any nonzero cell value counts as inside.
pub fn whitney(indicator: &GridFunction, max_scale: u32) -> Result<WhitneyDecomposition> {
    let g = *indicator.grid();
    let depth = g.depth();
    let max_scale = max_scale.min(depth);
    let dim = g.dim();
    let volume = indicator.values().iter().filter(|&&v| v != 0.0).count() as f64 * g.cell_volume();

    // min-pooled distances per level, finest first
    let mut pooled = vec![distance_to_complement(indicator)];
    for k in (0..depth).rev() {
        let fine = g.with_depth(k + 1)?;
        let coarse = g.with_depth(k)?;
        let prev = pooled.last().unwrap();
        let next: Vec<f64> = (0..coarse.cell_count())
            .into_par_iter()
            .map(|c| {
                let idx = coarse.multi_index(c);
                let mut m = f64::INFINITY;
                for corner in 0..(1usize << dim) {
                    let mut f = [0; MAX_DIM];
                    for a in 0..dim {
                        f[a] = 2 * idx[a] + ((corner >> a) & 1);
                    }
                    m = m.min(prev[fine.linear_index(&f)]);
                }
                m
            })
            .collect();
        pooled.push(next);
    }
    pooled.reverse();

    let mut levels = Vec::new();
    let mut covered_parent: Vec<bool> = vec![false; 1];
    for k in 0..=max_scale {
        let lg = g.with_depth(k)?;
        let side = lg.side();
        let dist = &pooled[k as usize];
        let mut covered = vec![false; lg.cell_count()];
        let mut cubes = Vec::new();
        for c in 0..lg.cell_count() {
            let idx = lg.multi_index(c);
            let parent_taken = if k == 0 {
                false
            } else {
                let mut p = idx;
                for slot in p.iter_mut().take(dim) {
                    *slot >>= 1;
                }
                covered_parent[g.with_depth(k - 1)?.linear_index(&p)]
            };
            if parent_taken {
                covered[c] = true;
            } else if dist[c] >= side {
                covered[c] = true;
                cubes.push(idx);
            }
        }
        levels.push(WhitneyLevel { k, side, cubes });
        covered_parent = covered;
    }
    let mut dec = WhitneyDecomposition {
        grid: g,
        levels,
        volume,
        residual: 0.0,
    };
    dec.residual = volume - dec.covered_volume();
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::fit_line;

    fn brute_sq_edt(g: &DyadicGrid, marked: &[bool]) -> Vec<f64> {
        (0..g.cell_count())
            .map(|i| {
                let a = g.multi_index(i);
                (0..g.cell_count())
                    .filter(|&j| marked[j])
                    .map(|j| {
                        let b = g.multi_index(j);
                        (0..g.dim()).map(|t| (a[t] as f64 - b[t] as f64).powi(2)).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn edt_matches_brute_force() {
        for dim in 1..=3 {
            let g = DyadicGrid::unit(dim, if dim == 3 { 3 } else { 4 }).unwrap();
            let marked: Vec<bool> = (0..g.cell_count()).map(|i| (i * 7919 + 13) % 23 == 0).collect();
            assert_eq!(squared_distance_transform(&g, &marked), brute_sq_edt(&g, &marked));
        }
    }

    #[test]
    fn distance_uses_closed_cells() {
        let g = DyadicGrid::unit(2, 3).unwrap();
        let u = GridFunction::constant(g, 1.0);
        let d = distance_to_complement(&u);
        // corner cell touches the cube boundary; the central cells are 3 cells away
        assert_eq!(d[0], 0.0);
        assert!((d[g.linear_index(&[3, 4, 0])] - 3.0 * g.side()).abs() < 1e-15);
    }

    #[test]
    fn square_decomposition_is_disjoint_and_counts_grow_linearly() {
        let g = DyadicGrid::new(2, &[0.5, 0.5], 1.0, 9).unwrap();
        let u = GridFunction::from_sampler(g, |x| {
            (x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0) as u8 as f64
        })
        .unwrap();
        let dec = whitney(&u, 9).unwrap();
        // disjointness through finest-cell ownership
        let mut owner = vec![false; g.cell_count()];
        for l in &dec.levels {
            let shift = 9 - l.k;
            for c in &l.cubes {
                for i in 0..(1usize << shift) {
                    for j in 0..(1usize << shift) {
                        let f = g.linear_index(&[(c[0] << shift) + i, (c[1] << shift) + j, 0]);
                        assert!(!owner[f]);
                        assert_eq!(u.value(f), 1.0);
                        owner[f] = true;
                    }
                }
            }
        }
        assert!(dec.residual >= 0.0);
        assert!((dec.volume - dec.covered_volume() - dec.residual).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = dec
            .counts()
            .into_iter()
            .filter(|&(k, c)| k >= 5 && c > 0)
            .map(|(k, c)| (k as f64, (c as f64).log2()))
            .collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn single_cell_and_empty() {
        let g = DyadicGrid::unit(2, 4).unwrap();
        let mut v = vec![0.0; g.cell_count()];
        v[g.linear_index(&[5, 6, 0])] = 1.0;
        let u = GridFunction::new(g, v).unwrap();
        let dec = whitney(&u, 10).unwrap();
        assert_eq!(dec.levels.len(), 5);
        assert!(dec.levels.iter().all(|l| l.count() == 0));
        assert!((dec.residual - g.cell_volume()).abs() < 1e-15);

        let empty = whitney(&GridFunction::zeros(g), 4).unwrap();
        assert_eq!(empty.volume, 0.0);
        assert!(empty.levels.iter().all(|l| l.count() == 0));
    }

    #[test]
    fn selected_cubes_respect_distance_rule() {
        let g = DyadicGrid::unit(2, 7).unwrap();
        let u = GridFunction::from_sampler(g, |x| (x[0] * x[0] + 2.0 * x[1] * x[1] < 0.6) as u8 as f64).unwrap();
        let dec = whitney(&u, 7).unwrap();
        let d = distance_to_complement(&u);
        for l in &dec.levels {
            let shift = 7 - l.k;
            for c in &l.cubes {
                let mut m = f64::INFINITY;
                for i in 0..(1usize << shift) {
                    for j in 0..(1usize << shift) {
                        m = m.min(d[g.linear_index(&[(c[0] << shift) + i, (c[1] << shift) + j, 0])]);
                    }
                }
                assert!(m >= l.side);
            }
        }
    }
}
