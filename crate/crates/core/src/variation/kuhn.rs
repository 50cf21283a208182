//! Kuhn (Freudenthal) triangulation of grid cells.
//!
//! For a permutation `σ` of the axes, the simplex of cell `x` has vertices
//! `x, x + h e_{σ(0)}, x + h (e_{σ(0)} + e_{σ(1)}), …`. The `n!` simplices of a
//! cell tile it, and the triangulation of a dyadic grid refines the
//! triangulation of every coarser dyadic grid over the same cube.

use crate::grid::{DyadicGrid, Index, MAX_DIM};
use crate::simplex::factorial;

pub type Permutation = [usize; MAX_DIM];

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Permutation> {
    fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool; MAX_DIM], out: &mut Vec<Permutation>) {
        if cur.len() == n {
            let mut p = [0; MAX_DIM];
            p[..n].copy_from_slice(cur);
            out.push(p);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::with_capacity(factorial(n));
    rec(n, &mut Vec::new(), &mut [false; MAX_DIM], &mut out);
    out
}

/// `+1` or `−1`.
pub fn permutation_sign(p: &Permutation, n: usize) -> f64 {
    let mut inversions = 0;
    for i in 0..n {
        for j in i + 1..n {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KuhnSimplex {
    pub cell: usize,
    pub permutation: Permutation,
    /// Vertex multi-indices on the grid's vertex lattice.
    pub vertices: Vec<Index>,
}

impl KuhnSimplex {
    pub fn volume(&self, grid: &DyadicGrid) -> f64 {
        grid.cell_volume() / factorial(grid.dim()) as f64
    }

    pub fn positions(&self, grid: &DyadicGrid) -> Vec<[f64; MAX_DIM]> {
        self.vertices.iter().map(|v| grid.vertex_position(v)).collect()
    }
}

/// Vertex chain of the simplex `(cell, σ)`.
#[inline]
pub fn chain(grid: &DyadicGrid, cell_idx: &Index, perm: &Permutation) -> [Index; MAX_DIM + 1] {
    let n = grid.dim();
    let mut out = [[0; MAX_DIM]; MAX_DIM + 1];
    out[0] = *cell_idx;
    for j in 0..n {
        out[j + 1] = out[j];
        out[j + 1][perm[j]] += 1;
    }
    out
}

/// The `n!` Kuhn simplices of a cell.
pub fn kuhn_simplices(grid: &DyadicGrid, cell: usize) -> Vec<KuhnSimplex> {
    let n = grid.dim();
    let idx = grid.multi_index(cell);
    permutations(n)
        .into_iter()
        .map(|p| KuhnSimplex {
            cell,
            permutation: p,
            vertices: chain(grid, &idx, &p)[..=n].to_vec(),
        })
        .collect()
}
