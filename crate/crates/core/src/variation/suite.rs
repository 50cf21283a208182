//! Families of piecewise-affine test maps for [`super::valpha_lower`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::DyadicGrid;
use crate::variation::pa_map::PiecewiseAffineMap;
use crate::young::weierstrass_terms;

#[derive(Clone, Debug)]
pub struct TestMap {
    pub id: String,
    pub map: PiecewiseAffineMap,
}

#[derive(Clone, Debug, Default)]
pub struct Suite {
    pub members: Vec<TestMap>,
}

impl Suite {
    pub fn push(&mut self, id: impl Into<String>, map: PiecewiseAffineMap) {
        self.members.push(TestMap { id: id.into(), map });
    }

    pub fn extend(&mut self, other: Suite) {
        self.members.extend(other.members);
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Number of random piecewise-affine members.
    pub random_members: usize,
    /// Depth on which random vertex values are drawn before refinement.
    pub random_depth: u32,
    /// Truncation levels of the oscillatory pairs (2-D only).
    pub oscillatory_levels: Vec<usize>,
    pub oscillatory_alpha: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            random_members: 8,
            random_depth: 2,
            oscillatory_levels: vec![1, 2, 3],
            oscillatory_alpha: 0.5,
        }
    }
}

/// Coordinate maps with the `f` slot clamped or trigonometrically modulated
/// along one axis and the remaining coordinates as `g`.
pub fn coordinate_suite(grid: &DyadicGrid) -> Result<Suite> {
    let n = grid.dim();
    let r = grid.half_width();
    let mut suite = Suite::default();
    for axis in 0..n {
        let others: Vec<usize> = (0..n).filter(|&a| a != axis).collect();
        let c = grid.center()[axis];
        let clamps = [
            (-1.0, 1.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (-0.5, 0.5),
            (-0.75, 0.25),
            (-0.25, 0.75),
        ];
        for (lo, hi) in clamps {
            let (a, b) = (c + lo * r, c + hi * r);
            let map = PiecewiseAffineMap::from_fn(*grid, n, |x, o| {
                o[0] = x[axis].clamp(a, b);
                for (slot, &j) in others.iter().enumerate() {
                    o[slot + 1] = x[j];
                }
            })?;
            suite.push(format!("coord-clamp-x{axis}[{lo},{hi}]"), map);
        }
        for m in [1.0, 2.0, 4.0, 8.0] {
            for phase in [0.0, 0.5 * PI] {
                let w = PI * m / r;
                let map = PiecewiseAffineMap::from_fn(*grid, n, |x, o| {
                    o[0] = (w * (x[axis] - c) + phase).sin();
                    for (slot, &j) in others.iter().enumerate() {
                        o[slot + 1] = x[j];
                    }
                })?;
                suite.push(format!("coord-trig-x{axis}-m{m}-p{phase:.3}"), map);
            }
        }
    }
    Ok(suite)
}

/// Random vertex values in `[−1, 1]` on a coarse grid, refined to `grid`.
pub fn random_suite(grid: &DyadicGrid, members: usize, coarse_depth: u32, seed: u64) -> Result<Suite> {
    let n = grid.dim();
    let coarse = grid.with_depth(coarse_depth.min(grid.depth()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Suite::default();
    for i in 0..members {
        let values = (0..coarse.vertex_count() * n)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let map = PiecewiseAffineMap::new(coarse, n, values)?.refine(grid.depth())?;
        suite.push(format!("random-{seed}-{i}"), map);
    }
    Ok(suite)
}

/// Oscillatory pairs `(ψ·f_k∘θ, ψ·g_k∘θ)` with `θ` the angle about the cube
/// center and `ψ` a cutoff that vanishes on the inner quarter of the cube and
/// equals one on its outer half. Empty unless the grid is 2-D.
pub fn oscillatory_suite(grid: &DyadicGrid, levels: &[usize], alpha: f64) -> Result<Suite> {
    let mut suite = Suite::default();
    if grid.dim() != 2 {
        return Ok(suite);
    }
    let c = [grid.center()[0], grid.center()[1]];
    let r = grid.half_width();
    for &k in levels {
        let map = PiecewiseAffineMap::from_fn(*grid, 2, |x, o| {
            let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
            let rho = dx.abs().max(dy.abs()) / r;
            let psi = ((rho - 0.25) / 0.25).clamp(0.0, 1.0);
            let (f, g) = weierstrass_terms(alpha, k, dy.atan2(dx));
            o[0] = psi * f;
            o[1] = psi * g;
        })?;
        suite.push(format!("oscillatory-a{alpha}-k{k}"), map);
    }
    Ok(suite)
}

/// Union of the coordinate, random and oscillatory families.
pub fn standard_suite(grid: &DyadicGrid, cfg: &SuiteConfig) -> Result<Suite> {
    let mut s = coordinate_suite(grid)?;
    s.extend(random_suite(grid, cfg.random_members, cfg.random_depth, cfg.seed)?);
    s.extend(oscillatory_suite(grid, &cfg.oscillatory_levels, cfg.oscillatory_alpha)?);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;
    use crate::variation::pairing;

    #[test]
    fn suite_sizes_and_determinism() {
        let g = DyadicGrid::unit(2, 4).unwrap();
        let cfg = SuiteConfig::default();
        let a = standard_suite(&g, &cfg).unwrap();
        let b = standard_suite(&g, &cfg).unwrap();
        assert_eq!(a.len(), 2 * 14 + 8 + 3);
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.map, y.map);
        }
        let g3 = DyadicGrid::unit(3, 2).unwrap();
        assert_eq!(standard_suite(&g3, &cfg).unwrap().len(), 3 * 14 + 8);
    }

    #[test]
    fn oscillatory_pairing_on_square_winds() {
        // ∫_Q det D(f, g) = ∮_{∂Q} f dg, and along ∂Q the cutoff is 1, so the
        // pairing approaches ∫_0^{2π} f_k dg_k = π k as the grid refines.
        let g = DyadicGrid::unit(2, 8).unwrap();
        let u = GridFunction::constant(g, 1.0);
        let s = oscillatory_suite(&g, &[1, 2], 0.5).unwrap();
        for (m, k) in s.members.iter().zip([1.0, 2.0]) {
            let p = pairing(&u, &m.map).unwrap();
            assert!((p - PI * k).abs() < 0.05 * PI * k, "k = {k}: {p}");
        }
    }
}
