//! Pushforward densities `v(y) = Σ_R a_R deg(φ, R, y)` of block-constant grid
//! functions under Hölder maps, with a closed-form oracle for
//! diffeomorphisms.

use serde::{Deserialize, Serialize};

use crate::degree::{affine_degree_field, sample_map, scatter};
use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction, MAX_DIM};
use crate::holder::HolderFunction;
use crate::numeric::{fit_line, slope_margin, LineFit};

/// Exponent bookkeeping for a map with component exponents `α_i` acting on a
/// function whose jump set has box-counting dimension `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentData {
    pub alphas: Vec<f64>,
    /// `τ_n = Σ α_i`.
    pub tau_n: f64,
    /// `τ_{n−1} = τ_n − max α_i`.
    pub tau_n1: f64,
    pub d: f64,
    /// `n − 1 + (d − τ_{n−1}) / (τ_n − τ_{n−1})`.
    pub d_prime: f64,
    /// `τ_n / d`; `L^p` bounds hold below it.
    pub critical_p: f64,
    /// Expected decay exponent `τ_n − d` of successive differences in the
    /// sampling scale.
    pub decay_exponent: f64,
}

pub fn exponent_data(alphas: &[f64], d: f64) -> Result<ExponentData> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidExponent(format!(
            "exponents must lie in ]0, 1], got {alphas:?}"
        )));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dimension must be finite and ≥ 0, got {d}"
        )));
    }
    let n = alphas.len() as f64;
    let tau_n: f64 = alphas.iter().sum();
    if tau_n <= d {
        return Err(Error::Hypothesis(format!("τ_n = {tau_n} must exceed d = {d}")));
    }
    let top = alphas.iter().copied().fold(0.0, f64::max);
    let tau_n1 = tau_n - top;
    Ok(ExponentData {
        alphas: alphas.to_vec(),
        tau_n,
        tau_n1,
        d,
        d_prime: n - 1.0 + (d - tau_n1) / (tau_n - tau_n1),
        critical_p: if d > 0.0 { tau_n / d } else { f64::INFINITY },
        decay_exponent: tau_n - d,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PushforwardResult {
    #[serde(skip)]
    pub v: Option<GridFunction>,
    pub block_depth: u32,
    pub working_depth: u32,
    pub p: Vec<f64>,
    pub norms: Vec<f64>,
    pub exponents: ExponentData,
    pub flagged_cells: usize,
}

impl PushforwardResult {
    pub fn density(&self) -> &GridFunction {
        self.v.as_ref().expect("density is present on computed results")
    }
}

fn check_blocks(u: &GridFunction, k: u32) -> Result<GridFunction> {
    let means = u.block_means(k)?;
    let back = means.prolong(u.grid().depth())?;
    let scale = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if back.max_abs_diff(u)? > 1e-12 * scale {
        return Err(Error::Hypothesis(format!(
            "u is not constant on level-{k} blocks; apply dyadic_average first"
        )));
    }
    Ok(means)
}

/// `v = Σ_R a_R deg(φ_w, R, ·)` over the level-`k` blocks `R` of `u`, with `φ`
/// sampled at the vertices of depth `working_depth` and evaluated at the cell
/// centers of `target`. `d` is the dimension entering `τ_n > d`.
#[allow(clippy::too_many_arguments)]
pub fn pushforward(
    u: &GridFunction,
    components: &[HolderFunction],
    block_depth: u32,
    working_depth: u32,
    target: &DyadicGrid,
    p: &[f64],
    d: f64,
) -> Result<PushforwardResult> {
    let g = u.grid();
    let n = g.dim();
    if components.len() != n {
        return Err(Error::InvalidParameter(format!(
            "need {n} components, got {}",
            components.len()
        )));
    }
    if working_depth < block_depth {
        return Err(Error::InvalidParameter(format!(
            "working depth {working_depth} is coarser than block depth {block_depth}"
        )));
    }
    if p.iter().any(|&q| q.is_nan() || q < 1.0) {
        return Err(Error::InvalidExponent(format!("L^p needs p ≥ 1, got {p:?}")));
    }
    let alphas: Vec<f64> = components.iter().map(|c| c.alpha()).collect();
    let exponents = exponent_data(&alphas, d)?;
    for &q in p {
        if q >= exponents.critical_p {
            log::warn!("p = {q} is not below τ_n/d = {}", exponents.critical_p);
        }
    }
    let means = check_blocks(u, block_depth)?;
    let map = sample_map(components, g, working_depth)?;
    let wg = *map.grid();
    let shift = working_depth - block_depth;
    let bg = *means.grid();
    let weight = |cell: usize| {
        let mut idx = wg.multi_index(cell);
        for slot in idx.iter_mut().take(n) {
            *slot >>= shift;
        }
        means.value(bg.linear_index(&idx))
    };
    let s = scatter(&map, target, weight)?;
    let v = GridFunction::new(*target, s.values)?;
    let norms = p.iter().map(|&q| v.lp_norm(q)).collect::<Result<Vec<_>>>()?;
    Ok(PushforwardResult {
        v: Some(v),
        block_depth,
        working_depth,
        p: p.to_vec(),
        norms,
        exponents,
        flagged_cells: s.flagged.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub depth: u32,
    pub norm: f64,
    /// `‖v_depth − v_prev‖_p`.
    pub diff: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub p: f64,
    pub exponents: ExponentData,
    pub rows: Vec<ConvergenceRow>,
    /// Fit of `log2 diff` against the finer depth, over nonzero differences.
    pub fit: Option<LineFit>,
    pub margin: f64,
    pub cauchy: bool,
    /// Norms over the last three depths do not decrease.
    pub non_decreasing: bool,
}

/// Successive `L^p` differences of the pushforward as the sampling depth of
/// `φ` increases.
pub fn pushforward_convergence(
    u: &GridFunction,
    components: &[HolderFunction],
    block_depth: u32,
    depths: &[u32],
    target: &DyadicGrid,
    p: f64,
    d: f64,
) -> Result<ConvergenceTable> {
    if depths.len() < 2 || depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("need at least two increasing depths".into()));
    }
    let mut rows = Vec::with_capacity(depths.len());
    let mut prev: Option<GridFunction> = None;
    let mut exponents = None;
    for &w in depths {
        let r = pushforward(u, components, block_depth, w, target, &[p], d)?;
        let v = r.v.expect("computed");
        let diff = match &prev {
            Some(pv) => Some(v.combine(1.0, pv, -1.0)?.lp_norm(p)?),
            None => None,
        };
        rows.push(ConvergenceRow {
            depth: w,
            norm: r.norms[0],
            diff,
        });
        exponents = Some(r.exponents);
        prev = Some(v);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.diff.filter(|&x| x > 0.0).map(|x| (r.depth as f64, x.log2())))
        .collect();
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.diff).collect();
    let (fit, margin, cauchy) = if pts.len() >= 3 {
        let fit = fit_line(&pts)?;
        let span = pts[pts.len() - 1].0 - pts[0].0;
        let margin = slope_margin(&fit, span);
        let ok = fit.slope < -margin;
        (Some(fit), margin, ok)
    } else {
        // too few nonzero differences to fit: accept stationary tails
        let ok = diffs.last().is_some_and(|&x| x == 0.0) || diffs.windows(2).all(|w| w[1] <= w[0]);
        (None, 0.0, ok)
    };
    let tail = &rows[rows.len().saturating_sub(3)..];
    let non_decreasing = tail.windows(2).all(|w| w[1].norm >= w[0].norm);
    Ok(ConvergenceTable {
        p,
        exponents: exponents.expect("at least one depth"),
        rows,
        fit,
        margin,
        cauchy,
        non_decreasing,
    })
}

/// A smooth injective map with closed-form inverse and Jacobian determinant.
pub trait Diffeomorphism: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn inverse(&self, y: &[f64], out: &mut [f64]);
    fn jacobian_det(&self, x: &[f64]) -> f64;
}

/// `v(y) = u(φ^{−1}(y)) sign(det Dφ)` at the cell centers of `target`, and 0
/// where `φ^{−1}(y)` leaves the cube of `u`.
pub fn diffeo_oracle(u: &GridFunction, phi: &dyn Diffeomorphism, target: &DyadicGrid) -> Result<GridFunction> {
    let n = u.grid().dim();
    if phi.dim() != n || target.dim() != n {
        return Err(Error::GridMismatch(format!(
            "oracle needs matching dimensions, got u: {n}, φ: {}, target: {}",
            phi.dim(),
            target.dim()
        )));
    }
    GridFunction::from_sampler(*target, |y| {
        let mut x = [0.0; MAX_DIM];
        phi.inverse(y, &mut x[..n]);
        match u.grid().locate(&x[..n]) {
            Some(c) => u.value(c) * phi.jacobian_det(&x[..n]).signum(),
            None => 0.0,
        }
    })
}

/// Degree field of `φ` on the whole cube, as a grid function; equals the
/// pushforward of the indicator of the cube.
pub fn cube_degree(
    components: &[HolderFunction],
    cube: &DyadicGrid,
    depth: u32,
    target: &DyadicGrid,
) -> Result<GridFunction> {
    let map = sample_map(components, cube, depth)?;
    Ok(affine_degree_field(&map, target)?.to_grid_function())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{self, LinearMap, ShearPair};
    use std::sync::Arc;

    fn square_indicator(k: u32) -> GridFunction {
        let g = DyadicGrid::unit(2, k).unwrap();
        GridFunction::from_sampler(g, |x| {
            ((-0.5..0.5).contains(&x[0]) && (-0.5..0.5).contains(&x[1])) as u8 as f64
        })
        .unwrap()
    }

    #[test]
    fn exponent_bookkeeping() {
        let e = exponent_data(&[0.7, 0.7], 1.0).unwrap();
        assert!((e.tau_n - 1.4).abs() < 1e-15);
        assert!((e.tau_n1 - 0.7).abs() < 1e-15);
        assert!((e.d_prime - (1.0 + 0.3 / 0.7)).abs() < 1e-15);
        assert!((e.critical_p - 1.4).abs() < 1e-15);
        assert!(matches!(exponent_data(&[0.5, 0.5], 1.0), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn identity_reproduces_u() {
        let g = DyadicGrid::unit(2, 5).unwrap();
        let u = GridFunction::from_sampler(g, |x| (3.0 * x[0]).floor() + x[1].signum())
            .unwrap()
            .dyadic_average(3)
            .unwrap();
        let id = maps::identity_components(2);
        let r = pushforward(&u, &id, 3, 5, &g, &[1.0, 2.0], 1.0).unwrap();
        assert!(r.density().max_abs_diff(&u).unwrap() < 1e-12);
        assert!((r.norms[0] - u.lp_norm(1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_rough_u_and_low_tau() {
        let g = DyadicGrid::unit(2, 4).unwrap();
        let u = GridFunction::from_sampler(g, |x| x[0]).unwrap();
        let id = maps::identity_components(2);
        assert!(matches!(
            pushforward(&u, &id, 2, 4, &g, &[1.0], 1.0),
            Err(Error::Hypothesis(_))
        ));
        let u = u.dyadic_average(2).unwrap();
        assert!(matches!(
            pushforward(&u, &id, 2, 4, &g, &[1.0], 2.5),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn linear_map_matches_closed_form() {
        let a = Arc::new(LinearMap::new2([[1.0, 0.5], [-0.25, -1.0]]).unwrap());
        let u = square_indicator(4)
            .combine(
                2.0,
                &GridFunction::from_sampler(*square_indicator(4).grid(), |x| (x[0] > 0.0) as u8 as f64).unwrap(),
                -0.5,
            )
            .unwrap();
        let comps = maps::diffeo_components(a.clone(), 1.5);
        let target = DyadicGrid::unit(2, 7).unwrap().with_depth(7).unwrap();
        let target = DyadicGrid::new(2, &[0.0, 0.0], 2.0, target.depth()).unwrap();
        let r = pushforward(&u, &comps, 2, 4, &target, &[1.0], 1.0).unwrap();
        let oracle = diffeo_oracle(&u, a.as_ref(), &target).unwrap();
        // an affine map is reproduced exactly; differences only where a center
        // sits on an image facet
        let diff = r.density().combine(1.0, &oracle, -1.0).unwrap();
        let bad = diff.values().iter().filter(|v| v.abs() > 1e-12).count();
        assert!(bad <= r.flagged_cells, "{bad} > {}", r.flagged_cells);
        assert!(oracle.values().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn indicator_of_cube_is_degree_field() {
        let comps = maps::winding_components(0.7, 12, &DyadicGrid::unit(2, 0).unwrap()).unwrap();
        let g = DyadicGrid::unit(2, 5).unwrap();
        let target = DyadicGrid::new(2, &[0.0, 0.0], 2.0, 7).unwrap();
        let u = GridFunction::constant(g, 1.0);
        let r = pushforward(&u, &comps, 0, 5, &target, &[1.0], 1.0).unwrap();
        let deg = cube_degree(&comps, &g, 5, &target).unwrap();
        assert_eq!(r.density().values(), deg.values());
    }

    #[test]
    fn union_of_blocks_by_additivity() {
        let comps = maps::complex_square_components();
        let g = DyadicGrid::unit(2, 5).unwrap();
        let target = DyadicGrid::new(2, &[0.0, 0.0], 2.0, 7).unwrap();
        let u = GridFunction::from_sampler(g, |x| (x[0] < 0.0 || x[1] > 0.5) as u8 as f64).unwrap();
        let r = pushforward(&u, &comps, 2, 5, &target, &[1.0], 1.0).unwrap();
        let map = sample_map(&comps, &g, 5).unwrap();
        let mut sum = crate::degree::DegreeField::zeros(target);
        for by in 0..4 {
            for bx in 0..4 {
                let origin = [bx * 8, by * 8, 0];
                let c = g.cell_corner(&origin);
                if c[0] < 0.0 || c[1] >= 0.5 {
                    let f = affine_degree_field(&map.sub_map(&origin, 3).unwrap(), &target).unwrap();
                    sum = sum.add(&f).unwrap();
                }
            }
        }
        assert_eq!(r.density().values(), sum.to_grid_function().values());
    }

    #[test]
    fn linear_in_u_and_mass_inequality() {
        let comps = maps::complex_square_components();
        let g = DyadicGrid::unit(2, 4).unwrap();
        let target = DyadicGrid::new(2, &[0.0, 0.0], 2.0, 7).unwrap();
        let u1 = GridFunction::from_sampler(g, |x| x[0] + 2.0 * x[1])
            .unwrap()
            .dyadic_average(2)
            .unwrap();
        let u2 = GridFunction::from_sampler(g, |x| (x[0] * x[1]).cos())
            .unwrap()
            .dyadic_average(2)
            .unwrap();
        let push = |u: &GridFunction| pushforward(u, &comps, 2, 4, &target, &[1.0], 1.0).unwrap();
        let lhs = push(&u1.combine(0.7, &u2, -1.3).unwrap());
        let rhs = push(&u1).density().combine(0.7, push(&u2).density(), -1.3).unwrap();
        assert!(lhs.density().max_abs_diff(&rhs).unwrap() < 1e-12);

        let map = sample_map(&comps, &g, 4).unwrap();
        let means = u1.block_means(2).unwrap();
        let mut bound = 0.0;
        for b in 0..means.grid().cell_count() {
            let bi = means.grid().multi_index(b);
            let f = affine_degree_field(&map.sub_map(&[bi[0] * 4, bi[1] * 4, 0], 2).unwrap(), &target).unwrap();
            bound += means.value(b).abs() * f.lp_norm(1.0).unwrap();
        }
        assert!(push(&u1).norms[0] <= bound + 1e-12);
    }

    #[test]
    fn scaling_law_of_norms() {
        // components scaled by λ: ‖v_λ‖_p = λ^{τ/p} ‖v‖_p with τ = 2
        let g = DyadicGrid::unit(2, 4).unwrap();
        let u = square_indicator(4);
        let target = DyadicGrid::new(2, &[0.0, 0.0], 8.0, 9).unwrap();
        let p = 1.5;
        let mut pts = Vec::new();
        for lam in [1.0, 2.0, 4.0] {
            let a = Arc::new(ShearPair::default().scaled(lam));
            let r = pushforward(&u, &maps::diffeo_components(a, lam * 3.0), 2, 4, &target, &[p], 1.0).unwrap();
            pts.push((f64::log2(lam), r.norms[0].log2()));
        }
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope - 2.0 / p).abs() < 0.05, "slope {}", fit.slope);
        let _ = g;
    }

    #[test]
    fn oracle_examples() {
        let g = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 3).unwrap();
        let u = GridFunction::constant(g, 1.0);
        let stretch = LinearMap::new2([[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let target = DyadicGrid::new(2, &[1.0, 1.0], 1.0, 4).unwrap();
        let v = diffeo_oracle(&u, &stretch, &target).unwrap();
        for c in 0..target.cell_count() {
            let y = target.cell_center(c);
            assert_eq!(v.value(c), (y[1] < 1.0) as u8 as f64);
        }
        let shift = LinearMap::translation2([0.25, 0.0]);
        let w = diffeo_oracle(&u, &shift, &target).unwrap();
        for c in 0..target.cell_count() {
            let y = target.cell_center(c);
            assert_eq!(w.value(c), ((0.25..1.25).contains(&y[0]) && y[1] < 1.0) as u8 as f64);
        }
    }

    #[test]
    fn identity_convergence_is_stationary() {
        let u = square_indicator(4);
        let id = maps::identity_components(2);
        let t = pushforward_convergence(&u, &id, 2, &[4, 5, 6], u.grid(), 1.0, 1.0).unwrap();
        assert!(t.rows[1..].iter().all(|r| r.diff == Some(0.0)));
        assert!(t.cauchy);
    }
}
