//! Affine simplices in R^n (n ≤ 3): barycentric coordinates and a half-open
//! point-location rule shared by rasterization and degree computations.
//!
//! A point on a facet belongs to the simplex iff the facet's inward normal has
//! a positive first nonzero component. This is the limit of moving the query
//! point by `(t, t², t³)` with `t → 0⁺`, so adjacent simplices never both claim
//! a shared facet point and the count of covering simplices equals the count
//! at a generic nearby point.

use crate::grid::{DyadicGrid, MAX_DIM};

pub type Point = [f64; MAX_DIM];

/// Relative size below which a normal component counts as zero in the
/// tie-breaking rule.
const ZERO_COMPONENT: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct Simplex {
    pub dim: usize,
    pub vertices: [Point; MAX_DIM + 1],
}

impl Simplex {
    pub fn new(dim: usize, vertices: &[Point]) -> Self {
        let mut v = [[0.0; MAX_DIM]; MAX_DIM + 1];
        v[..=dim].copy_from_slice(&vertices[..=dim]);
        Self { dim, vertices: v }
    }

    /// Edge matrix determinant `det[v_1 − v_0, …, v_n − v_0]` (columns).
    pub fn edge_det(&self) -> f64 {
        let e = self.edges();
        det(self.dim, &e)
    }

    /// Signed volume `det / n!`.
    pub fn signed_volume(&self) -> f64 {
        self.edge_det() / factorial(self.dim) as f64
    }

    /// `e[j]` is the column `v_{j+1} − v_0`.
    fn edges(&self) -> [Point; MAX_DIM] {
        let mut e = [[0.0; MAX_DIM]; MAX_DIM];
        for (j, col) in e.iter_mut().enumerate().take(self.dim) {
            for a in 0..self.dim {
                col[a] = self.vertices[j + 1][a] - self.vertices[0][a];
            }
        }
        e
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; MAX_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_DIM];
        for v in &self.vertices[..=self.dim] {
            for a in 0..self.dim {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    /// Barycentric solver, or `None` when the simplex is degenerate.
    pub fn locator(&self) -> Option<Locator> {
        let e = self.edges();
        let d = det(self.dim, &e);
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let inv = inverse(self.dim, &e, d);
        let mut grads = [[0.0; MAX_DIM]; MAX_DIM + 1];
        for i in 0..self.dim {
            grads[i + 1] = inv[i];
            for a in 0..self.dim {
                grads[0][a] -= inv[i][a];
            }
        }
        let mut norms = [0.0; MAX_DIM + 1];
        let mut owns = [false; MAX_DIM + 1];
        for i in 0..=self.dim {
            norms[i] = grads[i][..self.dim].iter().map(|g| g * g).sum::<f64>().sqrt();
            owns[i] = grads[i][..self.dim]
                .iter()
                .find(|g| g.abs() > ZERO_COMPONENT * norms[i])
                .is_some_and(|&g| g > 0.0);
        }
        Some(Locator {
            dim: self.dim,
            origin: self.vertices[0],
            inv,
            norms,
            owns,
            det: d,
        })
    }
}

/// Precomputed inverse edge matrix of a nondegenerate simplex.
#[derive(Clone, Copy, Debug)]
pub struct Locator {
    dim: usize,
    origin: Point,
    /// Row `i` is the gradient of barycentric coordinate `i + 1`.
    inv: [Point; MAX_DIM],
    norms: [f64; MAX_DIM + 1],
    owns: [bool; MAX_DIM + 1],
    det: f64,
}

/// Result of locating a point against a simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hit {
    pub inside: bool,
    /// The point is within tolerance of some facet hyperplane while not
    /// strictly outside another one.
    pub tie: bool,
}

impl Locator {
    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn barycentric(&self, q: &[f64]) -> [f64; MAX_DIM + 1] {
        let mut lam = [0.0; MAX_DIM + 1];
        let mut d = [0.0; MAX_DIM];
        for a in 0..self.dim {
            d[a] = q[a] - self.origin[a];
        }
        let mut rest = 1.0;
        for i in 0..self.dim {
            let l: f64 = (0..self.dim).map(|a| self.inv[i][a] * d[a]).sum();
            lam[i + 1] = l;
            rest -= l;
        }
        lam[0] = rest;
        lam
    }

    /// Half-open membership; `tol` is a distance, not a barycentric value.
    #[inline]
    pub fn locate(&self, q: &[f64], tol: f64) -> Hit {
        let lam = self.barycentric(q);
        let mut inside = true;
        let mut tie = false;
        for i in 0..=self.dim {
            let t = tol * self.norms[i];
            if lam[i] > t {
                continue;
            }
            if lam[i] < -t {
                return Hit {
                    inside: false,
                    tie: false,
                };
            }
            tie = true;
            if !self.owns[i] {
                inside = false;
            }
        }
        Hit { inside, tie }
    }

    /// Distance from `q` to the nearest facet hyperplane.
    pub fn facet_distance(&self, q: &[f64]) -> f64 {
        let lam = self.barycentric(q);
        (0..=self.dim)
            .map(|i| lam[i].abs() / self.norms[i])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Calls `f(linear, hit)` for every cell center of `grid` inside `simplex`
/// under the half-open rule, restricted to last-axis indices in `band`.
pub fn for_each_center_in<F>(
    grid: &DyadicGrid,
    simplex: &Simplex,
    loc: &Locator,
    tol: f64,
    band: (usize, usize),
    mut f: F,
) where
    F: FnMut(usize, Hit),
{
    let n = grid.dim();
    let (lo, hi) = simplex.bbox();
    let mut ranges = [(0usize, 0usize); MAX_DIM];
    for a in 0..n {
        match grid.center_range(a, lo[a] - tol, hi[a] + tol) {
            Some(r) => ranges[a] = r,
            None => return,
        }
    }
    let last = n - 1;
    ranges[last].0 = ranges[last].0.max(band.0);
    ranges[last].1 = ranges[last].1.min(band.1);
    if ranges[last].0 > ranges[last].1 {
        return;
    }
    let h = grid.side();
    let mut idx = [0usize; MAX_DIM];
    for a in 0..n {
        idx[a] = ranges[a].0;
    }
    let mut q = [0.0; MAX_DIM];
    loop {
        for a in 0..n {
            q[a] = grid.lower(a) + h * (idx[a] as f64 + 0.5);
        }
        let hit = loc.locate(&q[..n], tol);
        if hit.inside || hit.tie {
            f(grid.linear_index(&idx), hit);
        }
        let mut a = 0;
        loop {
            if a == n {
                return;
            }
            if idx[a] < ranges[a].1 {
                idx[a] += 1;
                break;
            }
            idx[a] = ranges[a].0;
            a += 1;
        }
    }
}

/// Splits `0..len` into at most `bands` contiguous ranges (inclusive ends).
pub fn bands(len: usize, bands: usize) -> Vec<(usize, usize)> {
    let bands = bands.clamp(1, len.max(1));
    let per = len.div_ceil(bands);
    (0..len)
        .step_by(per.max(1))
        .map(|s| (s, (s + per).min(len) - 1))
        .collect()
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Determinant of the matrix with columns `c[0..n]`.
pub fn det(n: usize, c: &[Point; MAX_DIM]) -> f64 {
    match n {
        1 => c[0][0],
        2 => c[0][0] * c[1][1] - c[1][0] * c[0][1],
        3 => {
            c[0][0] * (c[1][1] * c[2][2] - c[2][1] * c[1][2]) - c[1][0] * (c[0][1] * c[2][2] - c[2][1] * c[0][2])
                + c[2][0] * (c[0][1] * c[1][2] - c[1][1] * c[0][2])
        }
        _ => unreachable!("dimension is 1..=3"),
    }
}

/// Inverse of the column matrix `c`, returned by rows.
fn inverse(n: usize, c: &[Point; MAX_DIM], d: f64) -> [Point; MAX_DIM] {
    // m[a][j] = c[j][a]
    let m = |a: usize, j: usize| c[j][a];
    let mut r = [[0.0; MAX_DIM]; MAX_DIM];
    match n {
        1 => r[0][0] = 1.0 / d,
        2 => {
            r[0][0] = m(1, 1) / d;
            r[0][1] = -m(0, 1) / d;
            r[1][0] = -m(1, 0) / d;
            r[1][1] = m(0, 0) / d;
        }
        3 => {
            for i in 0..3 {
                for j in 0..3 {
                    // cofactor of m[j][i]
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    r[i][j] = (m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0)) / d;
                }
            }
        }
        _ => unreachable!("dimension is 1..=3"),
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Simplex {
        Simplex::new(2, &[[a[0], a[1], 0.0], [b[0], b[1], 0.0], [c[0], c[1], 0.0]])
    }

    #[test]
    fn barycentric_sums_to_one_and_reproduces_point() {
        let s = Simplex::new(3, &[[0.1, 0.2, 0.0], [1.0, 0.0, 0.3], [0.0, 1.2, 0.1], [0.2, 0.3, 0.9]]);
        let loc = s.locator().unwrap();
        let q = [0.3, 0.25, 0.2];
        let lam = loc.barycentric(&q);
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for a in 0..3 {
            let x: f64 = (0..4).map(|i| lam[i] * s.vertices[i][a]).sum();
            assert!((x - q[a]).abs() < 1e-14);
        }
    }

    #[test]
    fn shared_edge_assigned_once() {
        // unit square split along the diagonal, query points on the diagonal
        let lower = tri([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]);
        let upper = tri([0.0, 0.0], [1.0, 1.0], [0.0, 1.0]);
        let (l, u) = (lower.locator().unwrap(), upper.locator().unwrap());
        for t in [0.1, 0.5, 0.77] {
            let q = [t, t];
            let hits = [l.locate(&q, 1e-12), u.locate(&q, 1e-12)];
            assert!(hits.iter().all(|h| h.tie));
            assert_eq!(hits.iter().filter(|h| h.inside).count(), 1);
        }
    }

    #[test]
    fn degenerate_has_no_locator() {
        assert!(tri([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]).locator().is_none());
    }

    #[test]
    fn bands_cover_range() {
        assert_eq!(bands(10, 3), vec![(0, 3), (4, 7), (8, 9)]);
        assert_eq!(bands(2, 8), vec![(0, 0), (1, 1)]);
    }

    proptest! {
        /// Fan of triangles around a point: any query point (including on the
        /// spokes and at the hub) is claimed by exactly one triangle.
        #[test]
        fn fan_partition(m in 3usize..9, qx in -0.3f64..0.3, qy in -0.3f64..0.3, snap in 0usize..3) {
            let ang = |i: usize| 2.0 * std::f64::consts::PI * i as f64 / m as f64 + 0.1;
            let fan: Vec<Locator> = (0..m)
                .map(|i| {
                    let (a, b) = (ang(i), ang(i + 1));
                    tri([0.0, 0.0], [a.cos(), a.sin()], [b.cos(), b.sin()]).locator().unwrap()
                })
                .collect();
            let q = match snap {
                0 => [qx, qy],
                1 => [0.0, 0.0],
                _ => [qx.abs() * ang(0).cos(), qx.abs() * ang(0).sin()],
            };
            let count = fan.iter().filter(|l| l.locate(&q, 1e-12).inside).count();
            prop_assert_eq!(count, 1);
        }

        #[test]
        fn tetra_inverse_is_inverse(v in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let pts: Vec<Point> = (0..4).map(|i| [v[3 * i], v[3 * i + 1], v[3 * i + 2]]).collect();
            let s = Simplex::new(3, &pts);
            prop_assume!(s.edge_det().abs() > 1e-3);
            let loc = s.locator().unwrap();
            for i in 0..4 {
                let lam = loc.barycentric(&pts[i]);
                for (j, l) in lam.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((l - expect).abs() < 1e-9);
                }
            }
        }
    }
}
