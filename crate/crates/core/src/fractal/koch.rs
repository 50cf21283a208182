//! Koch snowflake as a union of equilateral triangles, generation by generation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction};
use crate::numeric::CompensatedSum;
use crate::simplex::{bands, for_each_center_in, Simplex};

/// Default bound on the total number of triangles of a ledger.
pub const DEFAULT_TRIANGLE_CAP: u64 = 5_000_000;

pub type Triangle = [[f64; 2]; 3];

/// `log 4 / log 3`, the dimension of the snowflake boundary.
pub fn koch_dimension() -> f64 {
    4f64.ln() / 3f64.ln()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Generation {
    pub k: u32,
    /// Counter-clockwise triangles.
    pub triangles: Vec<Triangle>,
    /// Nominal side length `s0·3^{−k}`.
    pub side: f64,
    /// Nominal area of each triangle `a0·3^{−2k}`.
    pub area: f64,
}

impl Generation {
    /// Sum of measured triangle areas.
    pub fn mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for t in &self.triangles {
            s.add(triangle_area(t));
        }
        s.value()
    }

    /// Triangle count times measured mean side length. This is the boundary
    /// mass convention `3·4^{k−1} s0 3^{−k}`; the full perimeter is three
    /// times larger.
    pub fn boundary_mass(&self) -> f64 {
        self.perimeter() / 3.0
    }

    /// Sum of measured triangle perimeters.
    pub fn perimeter(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for t in &self.triangles {
            for i in 0..3 {
                let (p, q) = (t[i], t[(i + 1) % 3]);
                s.add((q[0] - p[0]).hypot(q[1] - p[1]));
            }
        }
        s.value()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TriangleLedger {
    pub s0: f64,
    pub a0: f64,
    pub generations: Vec<Generation>,
}

impl TriangleLedger {
    pub fn max_generation(&self) -> u32 {
        self.generations.len() as u32 - 1
    }

    /// Closed form `3·4^{k−1} a0 3^{−2k}` (`a0` at `k = 0`).
    pub fn closed_form_mass(&self, k: u32) -> f64 {
        if k == 0 {
            self.a0
        } else {
            0.75 * self.a0 * (4.0f64 / 9.0).powi(k as i32)
        }
    }

    /// Closed form `3·4^{k−1} s0 3^{−k}` (`s0` at `k = 0`).
    pub fn closed_form_boundary_mass(&self, k: u32) -> f64 {
        if k == 0 {
            self.s0
        } else {
            0.75 * self.s0 * (4.0f64 / 3.0).powi(k as i32)
        }
    }

    /// Radius of the circle through the outer vertices of the generation-0 triangle.
    pub fn circumradius(&self) -> f64 {
        self.s0 / 3f64.sqrt()
    }

    /// All triangles of generations `0..=upto`, in generation order.
    pub fn triangles(&self, upto: u32) -> impl Iterator<Item = &Triangle> {
        self.generations[..=(upto.min(self.max_generation()) as usize)]
            .iter()
            .flat_map(|g| g.triangles.iter())
    }
}

pub fn triangle_area(t: &Triangle) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

/// Number of triangles in generations `0..=levels`.
pub fn triangle_count(levels: u32) -> u64 {
    // 1 + Σ_{k=1}^{L} 3·4^{k−1} = 4^L
    4u64.saturating_pow(levels)
}

/// Builds generations `0..=levels` of the snowflake with base side `s0`,
/// centered at the origin with one vertex pointing up.
pub fn koch_ledger(levels: u32, s0: f64) -> Result<TriangleLedger> {
    koch_ledger_capped(levels, s0, DEFAULT_TRIANGLE_CAP)
}

pub fn koch_ledger_capped(levels: u32, s0: f64, cap: u64) -> Result<TriangleLedger> {
    if !(s0.is_finite() && s0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "side length must be positive, got {s0}"
        )));
    }
    let requested = triangle_count(levels);
    if levels > 31 || requested > cap {
        return Err(Error::CapExceeded { requested, cap });
    }
    let a0 = 3f64.sqrt() / 4.0 * s0 * s0;
    let radius = s0 / 3f64.sqrt();
    let vertex = |deg: f64| {
        let t = deg.to_radians();
        [radius * t.cos(), radius * t.sin()]
    };
    let base: Triangle = [vertex(90.0), vertex(210.0), vertex(330.0)];
    let mut generations = vec![Generation {
        k: 0,
        triangles: vec![base],
        side: s0,
        area: a0,
    }];
    // counter-clockwise closed boundary polygon, first point not repeated
    let mut boundary: Vec<[f64; 2]> = base.to_vec();
    let (c, s) = (0.5, -(3f64.sqrt()) / 2.0); // rotation by −60°
    for k in 1..=levels {
        let m = boundary.len();
        let mut next = Vec::with_capacity(4 * m);
        let mut tris = Vec::with_capacity(m);
        for i in 0..m {
            let p = boundary[i];
            let q = boundary[(i + 1) % m];
            let d = [(q[0] - p[0]) / 3.0, (q[1] - p[1]) / 3.0];
            let a = [p[0] + d[0], p[1] + d[1]];
            let b = [p[0] + 2.0 * d[0], p[1] + 2.0 * d[1]];
            let apex = [a[0] + c * d[0] - s * d[1], a[1] + s * d[0] + c * d[1]];
            tris.push([a, apex, b]);
            next.extend_from_slice(&[p, a, apex, b]);
        }
        boundary = next;
        generations.push(Generation {
            k,
            triangles: tris,
            side: s0 * 3f64.powi(-(k as i32)),
            area: a0 * 9f64.powi(-(k as i32)),
        });
    }
    Ok(TriangleLedger { s0, a0, generations })
}

/// Number of row bands used when rasterizing.
const RASTER_BANDS: usize = 64;

/// Indicator of the union of generations `0..=levels` sampled at cell centers,
/// with the half-open edge rule of [`crate::simplex`].
pub fn koch_indicator(ledger: &TriangleLedger, grid: &DyadicGrid, levels: u32) -> Result<GridFunction> {
    if grid.dim() != 2 {
        return Err(Error::InvalidGrid(format!(
            "snowflake rasterization needs a 2-D grid, got dimension {}",
            grid.dim()
        )));
    }
    let simplices: Vec<Simplex> = ledger
        .triangles(levels)
        .map(|t| {
            Simplex::new(
                2,
                &[
                    [t[0][0], t[0][1], 0.0],
                    [t[1][0], t[1][1], 0.0],
                    [t[2][0], t[2][1], 0.0],
                ],
            )
        })
        .collect();
    let n = grid.cells_per_axis();
    let tol = 1e-12 * grid.side();
    let row_bands = bands(n, RASTER_BANDS);
    // bucket triangles by the bands their bounding boxes meet
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); row_bands.len()];
    let per = row_bands[0].1 + 1;
    for (i, s) in simplices.iter().enumerate() {
        let (lo, hi) = s.bbox();
        if let Some((a, b)) = grid.center_range(1, lo[1] - tol, hi[1] + tol) {
            for bucket in &mut buckets[a / per..=b / per] {
                bucket.push(i);
            }
        }
    }
    let mut values = vec![0.0; grid.cell_count()];
    values
        .par_chunks_mut(per * n)
        .zip(row_bands.par_iter())
        .zip(buckets.par_iter())
        .for_each(|((chunk, &band), bucket)| {
            let offset = band.0 * n;
            for &i in bucket {
                let s = &simplices[i];
                let loc = s.locator().expect("snowflake triangles are nondegenerate");
                for_each_center_in(grid, s, &loc, tol, band, |cell, hit| {
                    if hit.inside {
                        chunk[cell - offset] = 1.0;
                    }
                });
            }
        });
    GridFunction::new(*grid, values)
}

/// Smallest grid centered at the origin that contains the snowflake.
pub fn snowflake_grid(ledger: &TriangleLedger, depth: u32) -> Result<DyadicGrid> {
    // the snowflake lies in the disc of radius s0/√3
    DyadicGrid::new(2, &[0.0, 0.0], ledger.circumradius() * 1.0001, depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_counts_and_areas() {
        let led = koch_ledger(5, 1.0).unwrap();
        assert_eq!(led.generations[0].triangles.len(), 1);
        for k in 1..=5 {
            let g = &led.generations[k as usize];
            assert_eq!(g.triangles.len(), 3 * 4usize.pow(k - 1));
            for t in &g.triangles {
                assert!(triangle_area(t) > 0.0);
                assert!((triangle_area(t) - g.area).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn first_generation_masses() {
        let led = koch_ledger(2, 1.0).unwrap();
        let a0 = 3f64.sqrt() / 4.0;
        assert!((led.generations[0].mass() - a0).abs() < 1e-15);
        let d = koch_dimension();
        let m1 = 0.75 * a0 * 3f64.powf(d - 2.0);
        assert!((led.generations[1].mass() - m1).abs() < 1e-14);
        assert!((led.generations[1].triangles.len() as f64 * a0 / 9.0 - m1).abs() < 1e-14);
        let b2 = 0.75 * 3f64.powf(2.0 * (d - 1.0));
        assert!((led.generations[2].boundary_mass() - b2).abs() < 1e-13);
        assert!((led.generations[2].side - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn cap_is_enforced() {
        match koch_ledger_capped(6, 1.0, 1000) {
            Err(Error::CapExceeded { requested, cap }) => {
                assert_eq!(requested, 4096);
                assert_eq!(cap, 1000);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(koch_ledger(2, 0.0).is_err());
    }

    #[test]
    fn triangles_have_disjoint_interiors() {
        // centroids of every triangle lie in no other triangle
        let led = koch_ledger(3, 1.0).unwrap();
        let all: Vec<&Triangle> = led.triangles(3).collect();
        let locs: Vec<_> = all
            .iter()
            .map(|t| {
                Simplex::new(
                    2,
                    &[
                        [t[0][0], t[0][1], 0.0],
                        [t[1][0], t[1][1], 0.0],
                        [t[2][0], t[2][1], 0.0],
                    ],
                )
                .locator()
                .unwrap()
            })
            .collect();
        for (i, t) in all.iter().enumerate() {
            let c = [(t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0];
            let hits = locs.iter().filter(|l| l.locate(&c, 0.0).inside).count();
            assert_eq!(hits, 1, "triangle {i}");
        }
    }

    #[test]
    fn level_zero_rasterization_converges() {
        let led = koch_ledger(0, 1.5).unwrap();
        let mut prev = f64::INFINITY;
        for depth in [6, 8, 10] {
            let g = snowflake_grid(&led, depth).unwrap();
            let u = koch_indicator(&led, &g, 0).unwrap();
            let err = (u.lp_norm(1.0).unwrap() - led.a0).abs();
            assert!(err < 3.0 * led.s0 * g.side());
            assert!(err < prev || err < 1e-3);
            prev = err;
        }
    }

    #[test]
    fn outside_hexagon_is_zero() {
        let led = koch_ledger(4, 1.5).unwrap();
        let g = snowflake_grid(&led, 7).unwrap();
        let u = koch_indicator(&led, &g, 4).unwrap();
        let r = led.circumradius();
        for i in 0..g.cell_count() {
            let x = g.cell_center(i);
            // the snowflake lies inside the hexagon with circumradius r
            let inside_hex = (0..6).all(|j| {
                let t = (60.0 * j as f64).to_radians();
                x[0] * t.cos() + x[1] * t.sin() <= r * 3f64.sqrt() / 2.0 + 1e-12
            });
            if !inside_hex {
                assert_eq!(u.value(i), 0.0);
            }
        }
    }
}
