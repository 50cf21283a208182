//! Boundary pairing `∫ u det D(f, g¹, …, g^{n−1})` for piecewise-affine test
//! maps and lower bounds for the fractional variation `V^α`.

pub mod kuhn;
pub mod pa_map;
pub mod suite;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::numeric::CompensatedSum;

pub use kuhn::{kuhn_simplices, KuhnSimplex};
pub use pa_map::PiecewiseAffineMap;
pub use suite::{standard_suite, Suite, SuiteConfig, TestMap};

/// Cells per parallel block; partial sums are combined in block order.
const BLOCK: usize = 4096;

/// Checks that `map` lives on the cube of `u` at the same or a finer depth.
pub(crate) fn check_refines(u: &GridFunction, map: &PiecewiseAffineMap) -> Result<()> {
    let (gu, gf) = (u.grid(), map.grid());
    if !gu.same_cube(gf) || gf.depth() < gu.depth() {
        return Err(Error::GridMismatch(format!(
            "map grid (depth {}) must refine the function grid (depth {}) on the same cube",
            gf.depth(),
            gu.depth()
        )));
    }
    Ok(())
}

/// Exact `∫ u det DF` for piecewise-constant `u` and piecewise-affine `F` with
/// `n` components; the first component plays the role of `f`.
pub fn pairing(u: &GridFunction, map: &PiecewiseAffineMap) -> Result<f64> {
    check_refines(u, map)?;
    let gf = *map.grid();
    let gu = *u.grid();
    if map.components() != gf.dim() {
        return Err(Error::InvalidParameter(format!(
            "pairing needs {} components, map has {}",
            gf.dim(),
            map.components()
        )));
    }
    let shift = gf.depth() - gu.depth();
    let cells = gf.cell_count();
    let partials: Vec<f64> = (0..cells.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = CompensatedSum::new();
            for cell in b * BLOCK..((b + 1) * BLOCK).min(cells) {
                let mut idx = gf.multi_index(cell);
                for slot in idx.iter_mut().take(gf.dim()) {
                    *slot >>= shift;
                }
                let w = u.value(gu.linear_index(&idx));
                if w != 0.0 {
                    acc.add(w * map.cell_det_integral(cell));
                }
            }
            acc.value()
        })
        .collect();
    Ok(crate::numeric::sum(partials))
}

/// Certified constants of a test map: `Lip^α(f)` and `Lip(g^i)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub id: String,
    pub pairing: f64,
    pub holder_f: f64,
    pub lipschitz_g: Vec<f64>,
    /// `osc(f)`, used for the mass estimate `|pairing| ≤ V(u) osc(f) ∏ Lip(g^i)`.
    pub oscillation_f: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VAlphaEstimate {
    pub alpha: f64,
    pub value: f64,
    pub witness: Option<Witness>,
    /// Every evaluated member, in suite order.
    pub witnesses: Vec<Witness>,
    /// Members skipped because their constant product vanished.
    pub skipped: Vec<String>,
}

/// Best `|pairing(u, F)| / (Lip^α(f) ∏ Lip(g^i))` over the suite: a lower
/// bound for `V^α(u)`.
pub fn valpha_lower(u: &GridFunction, alpha: f64, suite: &Suite) -> Result<VAlphaEstimate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidExponent(format!("α must lie in [0, 1], got {alpha}")));
    }
    let mut witnesses = Vec::new();
    let mut skipped = Vec::new();
    for m in &suite.members {
        let n = m.map.grid().dim();
        let holder_f = m.map.holder_bound(0, alpha);
        let lipschitz_g: Vec<f64> = (1..n).map(|c| m.map.lipschitz(c)).collect();
        let product = holder_f * lipschitz_g.iter().product::<f64>();
        if product == 0.0 {
            log::warn!("test map {} has a vanishing constant product; skipped", m.id);
            skipped.push(m.id.clone());
            continue;
        }
        let p = pairing(u, &m.map)?;
        witnesses.push(Witness {
            id: m.id.clone(),
            pairing: p,
            holder_f,
            oscillation_f: m.map.oscillation(0),
            lipschitz_g,
            value: p.abs() / product,
        });
    }
    let witness = witnesses
        .iter()
        .fold(None::<&Witness>, |best, w| match best {
            Some(b) if b.value >= w.value => Some(b),
            _ => Some(w),
        })
        .cloned();
    Ok(VAlphaEstimate {
        alpha,
        value: witness.as_ref().map_or(0.0, |w| w.value),
        witness,
        witnesses,
        skipped,
    })
}

/// `V(u) · osc(f) · ∏ Lip(g^i)`, an upper bound for `|pairing|`.
pub fn mass_estimate(variation: f64, w: &Witness) -> f64 {
    variation * w.oscillation_f * w.lipschitz_g.iter().product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DyadicGrid;
    use proptest::prelude::*;

    fn unit_square_indicator(depth: u32) -> GridFunction {
        let g = DyadicGrid::unit(2, depth).unwrap();
        GridFunction::from_sampler(g, |x| (x[0] > 0.0 && x[1] > 0.0) as u8 as f64).unwrap()
    }

    #[test]
    fn identity_gives_volume() {
        let u = unit_square_indicator(4);
        let id = PiecewiseAffineMap::identity(*u.grid());
        assert!((pairing(&u, &id).unwrap() - 1.0).abs() < 1e-14);
        assert!((pairing(&u, &id.swap_components(0, 1)).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn affine_map_gives_det_times_volume() {
        // closed form det(A)·L^n(Q) against the simplex sum
        let u = unit_square_indicator(5);
        let a = [[1.5, -0.25], [0.75, 2.0]];
        let det_a = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let f = PiecewiseAffineMap::from_fn(*u.grid(), 2, |x, o| {
            o[0] = a[0][0] * x[0] + a[0][1] * x[1] + 0.3;
            o[1] = a[1][0] * x[0] + a[1][1] * x[1] - 1.0;
        })
        .unwrap();
        assert!((pairing(&u, &f).unwrap() - det_a).abs() < 1e-13);
    }

    #[test]
    fn rejects_mismatched_grids() {
        let u = unit_square_indicator(4);
        let coarse = PiecewiseAffineMap::identity(DyadicGrid::unit(2, 3).unwrap());
        assert!(pairing(&u, &coarse).is_err());
        let other = PiecewiseAffineMap::identity(DyadicGrid::new(2, &[0.5, 0.0], 1.0, 4).unwrap());
        assert!(pairing(&u, &other).is_err());
        let fine = PiecewiseAffineMap::identity(DyadicGrid::unit(2, 6).unwrap());
        assert!((pairing(&u, &fine).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scaling_identity() {
        let g = DyadicGrid::unit(2, 4).unwrap();
        let u = GridFunction::from_sampler(g, |x| x[0] * x[0] - x[1] + 0.25).unwrap();
        for m in [2.0, 4.0, -2.0] {
            let small = u.rescale(m).unwrap();
            let f = PiecewiseAffineMap::from_fn(*small.grid(), 2, |x, o| {
                o[0] = (5.0 * x[0]).sin() + x[1];
                o[1] = x[0] * x[1] + (3.0 * x[1]).cos();
            })
            .unwrap();
            let lhs = pairing(&small, &f).unwrap();
            let rhs = pairing(&u, &f.precompose_scaling(m).unwrap()).unwrap();
            // sign(m)^n with n = 2
            assert!((lhs - rhs).abs() < 1e-13 * (1.0 + lhs.abs()), "m = {m}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn classical_chain_for_square() {
        let u = unit_square_indicator(5);
        let g = *u.grid();
        let clamped = PiecewiseAffineMap::from_fn(g, 2, |x, o| {
            o[0] = x[0].clamp(0.0, 1.0);
            o[1] = x[1];
        })
        .unwrap();
        let suite = Suite {
            members: vec![TestMap {
                id: "clamped-x".into(),
                map: clamped,
            }],
        };
        let est = valpha_lower(&u, 0.0, &suite).unwrap();
        let tv = u.total_variation();
        assert!((est.value - 1.0).abs() < 1e-12);
        // V⁰ ≤ V ≤ 2n V⁰ is consistent with the lower bound
        assert!(est.value <= tv && tv <= 4.0 * tv);
        assert!(est.value >= 0.5 * tv / 4.0);
    }

    #[test]
    fn zero_function_and_skips() {
        let g = DyadicGrid::unit(2, 3).unwrap();
        let u = GridFunction::zeros(g);
        let suite = standard_suite(&g, &SuiteConfig::default()).unwrap();
        assert_eq!(valpha_lower(&u, 0.5, &suite).unwrap().value, 0.0);

        let flat = Suite {
            members: vec![TestMap {
                id: "flat".into(),
                map: PiecewiseAffineMap::from_fn(g, 2, |x, o| {
                    o[0] = 1.0;
                    o[1] = x[1];
                })
                .unwrap(),
            }],
        };
        let est = valpha_lower(&unit_square_indicator(3), 0.5, &flat).unwrap();
        assert_eq!(est.skipped, vec!["flat".to_string()]);
        assert!(est.witness.is_none());
        assert!(valpha_lower(&u, 1.5, &flat).is_err());
    }

    fn arb_map(seed: u64) -> PiecewiseAffineMap {
        let g = DyadicGrid::unit(2, 3).unwrap();
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let values = (0..g.vertex_count() * 2).map(|_| next()).collect();
        PiecewiseAffineMap::new(g, 2, values).unwrap()
    }

    fn arb_u(seed: u64) -> GridFunction {
        let g = DyadicGrid::unit(2, 3).unwrap();
        GridFunction::from_sampler(g, |x| {
            ((x[0] * 7.1 + x[1] * 3.3 + seed as f64).sin() > 0.2) as u8 as f64
        })
        .unwrap()
    }

    proptest! {
        #[test]
        fn multilinear_in_first_slot(s1 in 0u64..1000, s2 in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let u = arb_u(s1);
            let (f, g) = (arb_map(s1), arb_map(s2));
            // replace slot 0 of f by a·f⁰ + b·g⁰, keep slot 1
            let mix = f.combine(a, &g, b).unwrap();
            let mixed = PiecewiseAffineMap::new(*f.grid(), 2,
                f.values().chunks(2).zip(mix.values().chunks(2)).flat_map(|(fv, mv)| [mv[0], fv[1]]).collect()).unwrap();
            let g_first = PiecewiseAffineMap::new(*f.grid(), 2,
                f.values().chunks(2).zip(g.values().chunks(2)).flat_map(|(fv, gv)| [gv[0], fv[1]]).collect()).unwrap();
            let lhs = pairing(&u, &mixed).unwrap();
            let rhs = a * pairing(&u, &f).unwrap() + b * pairing(&u, &g_first).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn constant_component_kills_pairing(s in 0u64..1000, c in -3.0f64..3.0, slot in 0usize..2) {
            let u = arb_u(s);
            let f = arb_map(s).map_component(slot, |_, _| c).unwrap();
            prop_assert!(pairing(&u, &f).unwrap().abs() < 1e-14);
        }

        #[test]
        fn estimate_monotone_homogeneous_and_bounded(s in 0u64..1000, c in -3.0f64..3.0) {
            let u = arb_u(s);
            let g = *u.grid();
            let cfg = SuiteConfig { seed: s, random_members: 4, ..SuiteConfig::default() };
            let suite = standard_suite(&g, &cfg).unwrap();
            let small = Suite { members: suite.members[..3].to_vec() };
            let full = valpha_lower(&u, 0.0, &suite).unwrap();
            let part = valpha_lower(&u, 0.0, &small).unwrap();
            prop_assert!(full.value >= part.value);
            let scaled = valpha_lower(&u.scaled(c), 0.0, &suite).unwrap();
            prop_assert!((scaled.value - c.abs() * full.value).abs() < 1e-12 * (1.0 + full.value));
            let tv = u.total_variation();
            prop_assert!(full.value <= tv + 1e-12);
            for w in &full.witnesses {
                prop_assert!(w.pairing.abs() <= mass_estimate(tv, w) + 1e-12);
            }
        }
    }
}
