//! End-to-end checks with fixed parameters and tolerances. Each check
//! returns a [`CriterionResult`]; [`run_all`] runs them in order.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::decomp::{decompose, interpolation_lp_check, rate_fit, DecompositionLedger, Window};
use crate::degree::{affine_degree_field, degree_refinement};
use crate::error::Result;
use crate::fractal::{boundary_cells, box_counting, koch_dimension, koch_indicator, koch_ledger, snowflake_grid};
use crate::grid::{DyadicGrid, GridFunction};
use crate::maps::{self, ShearPair};
use crate::pushforward::{diffeo_oracle, pushforward};
use crate::simplex::Simplex;
use crate::variation::{pairing, PiecewiseAffineMap};
use crate::young::{circle_table, stieltjes, stieltjes_right, PartitionedPath};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    /// The numerical condition holds.
    pub value_ok: bool,
    pub elapsed_ms: u128,
    pub limit_ms: u128,
    pub detail: String,
}

impl CriterionResult {
    pub fn within_time(&self) -> bool {
        self.elapsed_ms <= self.limit_ms
    }

    pub fn passed(&self) -> bool {
        self.value_ok && self.within_time()
    }

    /// One line: `PASS|FAIL <id> <name> (<ms> ms / <limit> ms): <detail>`.
    pub fn line(&self) -> String {
        format!(
            "{} criterion {} {} ({} ms / {} ms{}): {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_ms,
            self.limit_ms,
            if self.within_time() { "" } else { ", over time" },
            self.detail
        )
    }
}

fn timed<F>(id: u32, name: &str, limit: Duration, f: F) -> CriterionResult
where
    F: FnOnce() -> Result<(bool, String)>,
{
    let t0 = Instant::now();
    let (value_ok, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name: name.into(),
        value_ok,
        elapsed_ms: t0.elapsed().as_millis(),
        limit_ms: limit.as_millis(),
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Masses of generations `1..=8` of the unit snowflake against the closed forms.
pub fn koch_exactness() -> CriterionResult {
    timed(1, "koch-exactness", Duration::from_secs(1), || {
        let led = koch_ledger(8, 1.0)?;
        let (s0, a0) = (led.s0, led.a0);
        let mut worst: f64 = 0.0;
        for g in &led.generations[1..] {
            let k = g.k as i32;
            let mass = 3.0 * 4f64.powi(k - 1) * a0 * 3f64.powi(-2 * k);
            let bmass = 3.0 * 4f64.powi(k - 1) * s0 * 3f64.powi(-k);
            worst = worst.max(rel(g.mass(), mass)).max(rel(g.boundary_mass(), bmass));
        }
        Ok((worst <= 1e-12, format!("max relative error {worst:.2e}")))
    })
}

/// `∫_{S¹} f_k dg_k = π k` for `k ≤ 6` on `2^16` knots.
pub fn pi_k_reproduction() -> CriterionResult {
    timed(2, "pi-k-reproduction", Duration::from_secs(5), || {
        let alpha = 3f64.ln() / 4f64.ln();
        let rows = circle_table(alpha, 6, 1 << 16)?;
        let worst = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
        Ok((worst <= 1e-2, format!("max relative error {worst:.2e}")))
    })
}

fn koch_indicator_at(depth: u32) -> Result<GridFunction> {
    let led = koch_ledger(8, 1.0)?;
    let grid = snowflake_grid(&led, depth)?;
    koch_indicator(&led, &grid, 8)
}

/// Box-counting slope of the generation-8 boundary at grid depth 11.
pub fn box_dimension() -> CriterionResult {
    timed(3, "box-counting-dimension", Duration::from_secs(10), || {
        let u = koch_indicator_at(11)?;
        let cells = boundary_cells(&u);
        let bc = box_counting(u.grid(), &cells, 2, 8)?;
        let target = koch_dimension();
        Ok((
            (bc.dimension - target).abs() <= 0.08,
            format!("slope {:.4} vs {target:.5}", bc.dimension),
        ))
    })
}

/// Identity and reflection fields, and the norm of a single affine simplex.
pub fn degree_exactness() -> CriterionResult {
    timed(4, "degree-exactness", Duration::from_secs(1), || {
        let q = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 6)?;
        let target = DyadicGrid::new(2, &[0.5, 0.5], 1.0, 8)?;
        let h = target.side();
        let id = PiecewiseAffineMap::identity(q);
        let refl = PiecewiseAffineMap::from_fn(q, 2, |x, o| {
            o[0] = 1.0 - x[0];
            o[1] = x[1];
        })?;
        let mut bad = 0;
        for (map, sign) in [(&id, 1), (&refl, -1)] {
            let f = affine_degree_field(map, &target)?;
            for c in 0..target.cell_count() {
                let x = target.cell_center(c);
                if distance_to_unit_square_boundary(&x) <= h {
                    continue;
                }
                let inside = (0.0..1.0).contains(&x[0]) && (0.0..1.0).contains(&x[1]);
                if f.value(c) != sign * inside as i32 {
                    bad += 1;
                }
            }
        }
        // one Kuhn triangle with a nondegenerate image; its partner collapses
        let cell = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 0)?;
        let verts = [[0.1, 0.2, 0.0], [0.9, 0.3, 0.0], [0.7, 0.8, 0.0]];
        let m = PiecewiseAffineMap::new(cell, 2, vec![0.1, 0.2, 0.9, 0.3, 0.1, 0.2, 0.7, 0.8])?;
        let fine = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 9)?;
        let f = affine_degree_field(&m, &fine)?;
        let vol = Simplex::new(2, &verts).signed_volume().abs();
        let layer = boundary_layer_measure(&fine, &verts);
        let mut worst: f64 = 0.0;
        for p in [1.0, 2.0, 3.0] {
            worst = worst.max((f.lp_norm(p)?.powf(p) - vol).abs());
        }
        Ok((
            bad == 0 && worst <= layer,
            format!("{bad} interior mismatches; simplex |‖deg‖_p^p − vol| = {worst:.2e} ≤ layer {layer:.2e}"),
        ))
    })
}

fn distance_to_unit_square_boundary(x: &[f64]) -> f64 {
    let ex = (-x[0]).max(x[0] - 1.0).max(0.0);
    let ey = (-x[1]).max(x[1] - 1.0).max(0.0);
    if ex > 0.0 || ey > 0.0 {
        ex.hypot(ey)
    } else {
        x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1])
    }
}

/// Measure of the target cells whose centers lie within half a cell diagonal
/// of an edge of the triangle.
fn boundary_layer_measure(grid: &DyadicGrid, v: &[[f64; 3]; 3]) -> f64 {
    let reach = grid.side() * 0.5 * 2f64.sqrt();
    let seg = |p: [f64; 3], a: [f64; 3], b: [f64; 3]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
    };
    let count = (0..grid.cell_count())
        .filter(|&c| {
            let x = grid.cell_center(c);
            (0..3).any(|i| seg(x, v[i], v[(i + 1) % 3]) <= reach)
        })
        .count();
    count as f64 * grid.cell_volume()
}

/// `L¹` gap between the pushforward of a square indicator under a shear
/// diffeomorphism and the closed-form density, over sampling depths 5..=8.
pub fn change_of_variables() -> CriterionResult {
    timed(5, "change-of-variables-oracle", Duration::from_secs(30), || {
        let g = DyadicGrid::unit(2, 2)?;
        let u = GridFunction::from_sampler(g, |x| {
            ((-0.5..0.5).contains(&x[0]) && (-0.5..0.5).contains(&x[1])) as u8 as f64
        })?;
        let phi = Arc::new(ShearPair::default());
        let comps = maps::diffeo_components(phi.clone(), phi.lipschitz_bound());
        let target = DyadicGrid::new(2, &[0.0, 0.0], 2.0, 11)?;
        let oracle = diffeo_oracle(&u, phi.as_ref(), &target)?;
        let mut gaps = Vec::new();
        for w in 5..=8 {
            let r = pushforward(&u, &comps, 2, w, &target, &[1.0], 1.0)?;
            gaps.push(r.density().combine(1.0, &oracle, -1.0)?.lp_norm(1.0)?);
        }
        let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
        let ok = ratios.iter().all(|&r| r >= 1.7);
        let gaps: Vec<String> = gaps.iter().map(|g| format!("{g:.3e}")).collect();
        Ok((ok, format!("gaps [{}], ratios {ratios:.2?}", gaps.join(", "))))
    })
}

/// Degree refinement of the `0.7`-Hölder winding map on the unit square.
pub fn integrability_frontier() -> CriterionResult {
    timed(6, "integrability-frontier", Duration::from_secs(120), || {
        let cube = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 0)?;
        let comps = maps::winding_components(0.7, 24, &cube)?;
        let target = DyadicGrid::new(2, &[0.0, 0.0], 2.0, 10)?;
        let rep = degree_refinement(&comps, &cube, &[4, 5, 6, 7, 8, 9], &target, &[1.1, 2.0], 1.0)?;
        let diffs: Vec<f64> = rep
            .diff_series(0)
            .into_iter()
            .filter(|&(k, _)| k >= 6)
            .map(|(_, d)| d)
            .collect();
        let shrinking = diffs.len() == 3 && diffs.windows(2).all(|w| w[1] < w[0]);
        let norms: Vec<f64> = rep.norm_series(1).into_iter().map(|(_, v)| v).collect();
        let tail = &norms[norms.len() - 3..];
        let rising = tail.windows(2).all(|w| w[1] >= w[0]);
        Ok((
            shrinking && rising,
            format!("p=1.1 diffs after depth 6 {diffs:.3?}; p=2 norms at depths 7..9 {tail:.3?}"),
        ))
    })
}

fn koch_decomposition() -> Result<DecompositionLedger> {
    Ok(decompose(&koch_indicator_at(10)?).with_alpha(koch_dimension() - 1.0))
}

/// Level rates of the dyadic decomposition of the snowflake at depth 10.
pub fn decomposition_rates() -> CriterionResult {
    timed(7, "decomposition-rates", Duration::from_secs(20), || {
        let led = koch_decomposition()?;
        let fit = rate_fit(&led, Window::new(2, 8))?;
        let d = koch_dimension();
        let ok = (fit.slope_tv() - (d - 1.0)).abs() <= 0.1 && (fit.slope_l1() - (d - 2.0)).abs() <= 0.1;
        Ok((
            ok,
            format!(
                "slope_tv {:.4} (target {:.4}), slope_l1 {:.4} (target {:.4})",
                fit.slope_tv(),
                d - 1.0,
                fit.slope_l1(),
                d - 2.0
            ),
        ))
    })
}

/// Identities that hold to machine precision.
pub fn structural_identities() -> CriterionResult {
    timed(8, "structural-identities", Duration::from_secs(60), || {
        let mut notes = Vec::new();
        let mut ok = true;
        let mut check = |name: &str, err: f64, tol: f64| {
            ok &= err <= tol;
            notes.push(format!("{name} {err:.1e}"));
        };

        let g = DyadicGrid::unit(2, 6)?;
        let u = GridFunction::from_sampler(g, |x| (3.0 * x[0]).sin() * x[1] + (x[0] > 0.2) as u8 as f64)?;
        let led = decompose(&u);
        check("telescoping", led.partial_sum(led.depth())?.max_abs_diff(&u)?, 1e-12);

        let gs = DyadicGrid::unit(2, 4)?;
        let us = GridFunction::from_sampler(gs, |x| x[0] * x[0] - x[1] + 0.25)?;
        let f = PiecewiseAffineMap::from_fn(gs, 2, |x, o| {
            o[0] = (5.0 * x[0]).sin() + x[1];
            o[1] = x[0] * x[1] + (3.0 * x[1]).cos();
        })?;
        let p = pairing(&us, &f)?;
        check(
            "antisymmetry",
            (p + pairing(&us, &f.swap_components(0, 1))?).abs(),
            1e-13 * (1.0 + p.abs()),
        );

        let mut worst: f64 = 0.0;
        for m in [2.0, 4.0] {
            let small = us.rescale(m)?;
            let fm = PiecewiseAffineMap::from_fn(*small.grid(), 2, |x, o| {
                o[0] = (5.0 * x[0]).sin() + x[1];
                o[1] = x[0] * x[1] + (3.0 * x[1]).cos();
            })?;
            let lhs = pairing(&small, &fm)?;
            let rhs = pairing(&us, &fm.precompose_scaling(m)?)?;
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
        check("scaling", worst, 1e-13);

        let n = 1000;
        let fp = PartitionedPath::uniform_interval(0.0, 3.0, n, |t| (2.0 * t).sin() + t)?;
        let gp = PartitionedPath::uniform_interval(0.0, 3.0, n, |t| (t * t).cos())?;
        let lhs = stieltjes(&fp, &gp)? + stieltjes_right(&gp, &fp)?;
        let rhs = fp.values[n] * gp.values[n] - fp.values[0] * gp.values[0];
        check("by-parts", (lhs - rhs).abs(), 1e-12);

        let sq = GridFunction::from_sampler(DyadicGrid::unit(2, 7)?, |x| {
            ((-0.5..0.5).contains(&x[0]) && (-0.5..0.5).contains(&x[1])) as u8 as f64
        })?;
        check("square-tv", (sq.total_variation() - 4.0).abs(), 1e-12);

        Ok((ok, notes.join(", ")))
    })
}

/// Interpolation series of the snowflake decomposition for `p = 1.3` and `p = 3`.
pub fn higher_integrability() -> CriterionResult {
    timed(9, "higher-integrability", Duration::from_secs(5), || {
        let led = koch_decomposition()?;
        let low = interpolation_lp_check(&led, 1.3)?;
        let high = interpolation_lp_check(&led, 3.0)?;
        let threshold = 2.0 / (1.0 + led.alpha.unwrap_or(0.0));
        Ok((
            low.converged && !high.converged,
            format!(
                "threshold {threshold:.4}; p=1.3 slope {:.3?} converged {}; p=3 slope {:.3?} converged {}",
                low.slope, low.converged, high.slope, high.converged
            ),
        ))
    })
}

pub fn run_all() -> Vec<CriterionResult> {
    vec![
        koch_exactness(),
        pi_k_reproduction(),
        box_dimension(),
        degree_exactness(),
        change_of_variables(),
        integrability_frontier(),
        decomposition_rates(),
        structural_identities(),
        higher_integrability(),
    ]
}
