//! Dyadic decomposition `u = Σ u_k` into differences of block averages,
//! rate fits, fractal-current certificates and the interpolation check.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction};
use crate::io;
use crate::numeric::{fit_line, slope_margin, LineFit};

/// One level `u_k` of a decomposition, stored on the depth-`k` grid.
#[derive(Clone, Debug)]
pub struct Level {
    pub k: u32,
    pub u: GridFunction,
    pub l1: f64,
    pub tv: f64,
}

#[derive(Clone, Debug)]
pub struct DecompositionLedger {
    /// Half-width of the cube the decomposition lives on.
    pub base_r: f64,
    /// Claimed fractional-variation exponent, if any.
    pub alpha: Option<f64>,
    pub levels: Vec<Level>,
    source: DyadicGrid,
}

/// Block means one level coarser.
fn coarsen(v: &GridFunction) -> GridFunction {
    let fine = v.grid();
    let coarse = fine.with_depth(fine.depth() - 1).expect("coarser grid is valid");
    let n = fine.dim();
    let children = 1usize << n;
    let vals = v.values();
    let values: Vec<f64> = (0..coarse.cell_count())
        .into_par_iter()
        .map(|c| {
            let idx = coarse.multi_index(c);
            let mut s = 0.0;
            for corner in 0..children {
                let mut f = [0; 3];
                for a in 0..n {
                    f[a] = 2 * idx[a] + ((corner >> a) & 1);
                }
                s += vals[fine.linear_index(&f)];
            }
            s / children as f64
        })
        .collect();
    GridFunction::new(coarse, values).expect("means of finite values are finite")
}

/// Decomposes `u` into `u_0 = v_0` and `u_k = v_k − v_{k−1}` (`1 ≤ k ≤ K`),
/// where `v_k` are the level-`k` block averages.
pub fn decompose(u: &GridFunction) -> DecompositionLedger {
    let g = *u.grid();
    let depth = g.depth();
    let mut pyramid = Vec::with_capacity(depth as usize + 1);
    pyramid.push(u.clone());
    for _ in 0..depth {
        let next = coarsen(pyramid.last().unwrap());
        pyramid.push(next);
    }
    pyramid.reverse();

    let levels = pyramid
        .par_iter()
        .enumerate()
        .map(|(k, v)| {
            let uk = if k == 0 {
                v.clone()
            } else {
                let prev = pyramid[k - 1].prolong(k as u32).expect("finer depth");
                v.combine(1.0, &prev, -1.0).expect("same grid")
            };
            Level {
                k: k as u32,
                l1: uk.lp_norm(1.0).expect("p = 1 is valid"),
                tv: uk.total_variation(),
                u: uk,
            }
        })
        .collect();

    DecompositionLedger {
        base_r: g.half_width(),
        alpha: None,
        levels,
        source: g,
    }
}

impl DecompositionLedger {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn source_grid(&self) -> &DyadicGrid {
        &self.source
    }

    pub fn depth(&self) -> u32 {
        self.source.depth()
    }

    /// `Σ_{k ≤ upto} u_k` on the source grid, summed in increasing `k`.
    pub fn partial_sum(&self, upto: u32) -> Result<GridFunction> {
        if upto > self.depth() {
            return Err(Error::DepthOutOfRange {
                level: upto,
                depth: self.depth(),
            });
        }
        let g = self.source;
        let mut acc = vec![0.0; g.cell_count()];
        for level in &self.levels[..=upto as usize] {
            let shift = g.depth() - level.k;
            let lg = level.u.grid();
            acc.par_iter_mut().enumerate().for_each(|(i, a)| {
                let mut idx = g.multi_index(i);
                for slot in idx.iter_mut().take(g.dim()) {
                    *slot >>= shift;
                }
                *a += level.u.value(lg.linear_index(&idx));
            });
        }
        GridFunction::new(g, acc)
    }

    /// Writes `k, l1, tv` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        io::write_table(
            path,
            &["k", "l1", "tv"],
            self.levels
                .iter()
                .map(|l| vec![l.k.to_string(), format!("{:?}", l.l1), format!("{:?}", l.tv)]),
        )
    }
}

/// Inclusive level window for fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub k_min: u32,
    pub k_max: u32,
}

impl Window {
    pub fn new(k_min: u32, k_max: u32) -> Self {
        Self { k_min, k_max }
    }

    pub fn contains(&self, k: u32) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateFit {
    pub window: Window,
    /// Levels used by the `l1` fit (zero levels skipped).
    pub l1_levels: Vec<u32>,
    pub tv_levels: Vec<u32>,
    /// Fit of `log2 ‖u_k‖_1` against `k`; the slope estimates `α − 1`.
    pub l1: LineFit,
    /// Fit of `log2 V(u_k)` against `k`; the slope estimates `α`.
    pub tv: LineFit,
}

impl RateFit {
    pub fn slope_l1(&self) -> f64 {
        self.l1.slope
    }

    pub fn slope_tv(&self) -> f64 {
        self.tv.slope
    }

    /// `2^{intercept}` of the `l1` fit.
    pub fn constant_l1(&self) -> f64 {
        self.l1.intercept.exp2()
    }

    pub fn constant_tv(&self) -> f64 {
        self.tv.intercept.exp2()
    }
}

fn log2_fit(points: &[(u32, f64)], what: &str) -> Result<(Vec<u32>, LineFit)> {
    let used: Vec<(u32, f64)> = points.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    if used.len() < 3 {
        return Err(Error::TooFewLevels(format!(
            "{what} fit needs at least 3 nonzero levels, got {}",
            used.len()
        )));
    }
    let pts: Vec<(f64, f64)> = used.iter().map(|&(k, v)| (k as f64, v.log2())).collect();
    Ok((used.iter().map(|p| p.0).collect(), fit_line(&pts)?))
}

/// Least-squares slopes of `log2 ‖u_k‖_1` and `log2 V(u_k)` against `k`.
pub fn rate_fit(ledger: &DecompositionLedger, window: Window) -> Result<RateFit> {
    let inside: Vec<&Level> = ledger.levels.iter().filter(|l| window.contains(l.k)).collect();
    let (l1_levels, l1) = log2_fit(&inside.iter().map(|l| (l.k, l.l1)).collect::<Vec<_>>(), "l1")?;
    let (tv_levels, tv) = log2_fit(&inside.iter().map(|l| (l.k, l.tv)).collect::<Vec<_>>(), "variation")?;
    Ok(RateFit {
        window,
        l1_levels,
        tv_levels,
        l1,
        tv,
    })
}

/// Masses of one term of a decomposition `T = Σ R_k + ∂S_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassRecord {
    pub k: i64,
    pub mass: f64,
    pub boundary_mass: f64,
}

/// Critical exponent derived from a pair of mass sequences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentBound {
    /// Smallest exponent for which both weighted series have summable fitted
    /// terms (margins included). Every exponent strictly above is admitted.
    pub critical: f64,
    /// `max(critical, lower end of the admissible interval)`.
    pub infimum: f64,
    /// False when `critical` reaches the upper end of the interval.
    pub in_range: bool,
    /// Fit of `log_base M` against `k`.
    pub mass_fit: LineFit,
    pub boundary_fit: LineFit,
    pub mass_margin: f64,
    pub boundary_margin: f64,
    pub mass_constant: f64,
    pub boundary_constant: f64,
    pub window: (i64, i64),
}

impl ExponentBound {
    pub fn admits(&self, exponent: f64) -> bool {
        exponent > self.critical
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FractalCertificate {
    pub n: usize,
    pub base: f64,
    /// From the `R_k` sequence; the interval is `[n − 1, n[`.
    pub delta: Option<ExponentBound>,
    /// From the `S_k` sequence; the interval is `[n, n + 1[`.
    pub gamma: Option<ExponentBound>,
}

impl FractalCertificate {
    pub fn admits_delta(&self, delta: f64) -> bool {
        self.delta.as_ref().is_some_and(|b| b.admits(delta))
    }

    pub fn admits_gamma(&self, gamma: f64) -> bool {
        self.gamma.as_ref().is_some_and(|b| b.admits(gamma))
    }
}

fn fit_log_base(records: &[(i64, f64)], base: f64, what: &str) -> Result<(LineFit, f64)> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.1 != 0.0)
        .map(|&(k, m)| (k as f64, m.ln() / base.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewLevels(format!(
            "{what} sequence needs at least 2 nonzero entries, got {}",
            pts.len()
        )));
    }
    let fit = fit_line(&pts)?;
    let span = pts.last().unwrap().0 - pts[0].0;
    let margin = slope_margin(&fit, span);
    Ok((fit, margin))
}

/// Bound for one sequence; `shift_mass` and `shift_boundary` are the
/// exponent offsets `e` in the weights `base^{k(e − exponent)}`.
fn exponent_bound(
    records: &[MassRecord],
    base: f64,
    shift_mass: f64,
    shift_boundary: f64,
    interval: (f64, f64),
) -> Result<ExponentBound> {
    if records.len() < 3 {
        return Err(Error::TooFewLevels(format!(
            "certificate needs at least 3 entries, got {}",
            records.len()
        )));
    }
    for r in records {
        for m in [r.mass, r.boundary_mass] {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::NonPositiveMass { k: r.k, mass: m });
            }
        }
    }
    let mass: Vec<(i64, f64)> = records.iter().map(|r| (r.k, r.mass)).collect();
    let bdry: Vec<(i64, f64)> = records.iter().map(|r| (r.k, r.boundary_mass)).collect();
    let (mass_fit, mass_margin) = fit_log_base(&mass, base, "mass")?;
    let (boundary_fit, boundary_margin) = fit_log_base(&bdry, base, "boundary mass")?;
    let critical =
        (shift_mass + mass_fit.slope + mass_margin).max(shift_boundary + boundary_fit.slope + boundary_margin);
    Ok(ExponentBound {
        critical,
        infimum: critical.max(interval.0),
        in_range: critical < interval.1,
        mass_constant: base.powf(mass_fit.intercept),
        boundary_constant: base.powf(boundary_fit.intercept),
        mass_fit,
        boundary_fit,
        mass_margin,
        boundary_margin,
        window: (
            records.iter().map(|r| r.k).min().unwrap(),
            records.iter().map(|r| r.k).max().unwrap(),
        ),
    })
}

/// Certificate for a decomposition of an `n`-current. The weighted series are
/// `Σ M(R_k) ρ^{k(n−δ)}`, `Σ M(∂R_k) ρ^{k(n−1−δ)}`, `Σ M(S_k) σ^{k(n+1−γ)}`
/// and `Σ M(∂S_k) σ^{k(n−γ)}`; one base is used for both sequences.
pub fn fractal_certificate(
    n: usize,
    base: f64,
    r_masses: Option<&[MassRecord]>,
    s_masses: Option<&[MassRecord]>,
) -> Result<FractalCertificate> {
    if !(base.is_finite() && base > 1.0) {
        return Err(Error::InvalidParameter(format!("base must exceed 1, got {base}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("current dimension must be ≥ 1".into()));
    }
    if r_masses.is_none() && s_masses.is_none() {
        return Err(Error::Empty("no mass sequence supplied".into()));
    }
    let nf = n as f64;
    let delta = r_masses
        .map(|r| exponent_bound(r, base, nf, nf - 1.0, (nf - 1.0, nf)))
        .transpose()?;
    let gamma = s_masses
        .map(|s| exponent_bound(s, base, nf + 1.0, nf, (nf, nf + 1.0)))
        .transpose()?;
    Ok(FractalCertificate { n, base, delta, gamma })
}

/// Sharp isoperimetric constant `C` in `‖u‖_{n/(n−1)} ≤ C·V(u)`; for `n = 1`
/// the sup-norm bound `‖u‖_∞ ≤ V(u)/2`.
pub fn sobolev_constant(n: usize) -> f64 {
    match n {
        1 => 0.5,
        2 => 1.0 / (2.0 * std::f64::consts::PI.sqrt()),
        _ => {
            let nf = n as f64;
            let ball = match n {
                3 => 4.0 * std::f64::consts::PI / 3.0,
                _ => std::f64::consts::PI.powf(nf / 2.0) / gamma_half_integer(n + 2),
            };
            1.0 / (nf * ball.powf(1.0 / nf))
        }
    }
}

/// `Γ(m/2)` for integer `m ≥ 1`.
fn gamma_half_integer(m: usize) -> f64 {
    match m {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (m as f64 / 2.0 - 1.0) * gamma_half_integer(m - 2),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationLevel {
    pub k: u32,
    pub l1: f64,
    pub tv: f64,
    /// Exact grid norm `‖u_k‖_q`.
    pub lq: f64,
    /// `‖u_k‖_1^θ (C·V(u_k))^{1−θ}`.
    pub bound: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub p: f64,
    /// `n/(n−1)`, infinite for `n = 1`.
    pub q: f64,
    pub theta: f64,
    /// True when `p > q`, so `θ < 0` and the bound is an extrapolation.
    pub extrapolated: bool,
    pub sobolev_constant: f64,
    pub levels: Vec<InterpolationLevel>,
    /// Fitted `log2` slope of the per-level bounds (nonzero levels, `k ≥ 1`).
    pub slope: Option<f64>,
    pub margin: Option<f64>,
    pub converged: bool,
}

/// Interpolates each level between `L^1` and `L^q`, `q = n/(n−1)`, using the
/// isoperimetric bound `‖u_k‖_q ≤ C·V(u_k)`. The series of bounds is declared
/// convergent when its fitted geometric rate is below 1 by more than the fit's
/// residual margin.
pub fn interpolation_lp_check(ledger: &DecompositionLedger, p: f64) -> Result<InterpolationReport> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("L^p needs p ≥ 1, got {p}")));
    }
    let n = ledger.source_grid().dim();
    let q = if n == 1 {
        f64::INFINITY
    } else {
        n as f64 / (n as f64 - 1.0)
    };
    let inv_q = 1.0 / q;
    let theta = if p.is_infinite() {
        -inv_q / (1.0 - inv_q)
    } else {
        (1.0 / p - inv_q) / (1.0 - inv_q)
    };
    let c = sobolev_constant(n);
    let mut partial = 0.0;
    let levels: Vec<InterpolationLevel> = ledger
        .levels
        .iter()
        .map(|l| {
            let bound = if l.l1 == 0.0 {
                0.0
            } else if theta == 1.0 {
                l.l1
            } else {
                l.l1.powf(theta) * (c * l.tv).powf(1.0 - theta)
            };
            partial += bound;
            InterpolationLevel {
                k: l.k,
                l1: l.l1,
                tv: l.tv,
                lq: l.u.lp_norm(q).expect("q ≥ 1"),
                bound,
                partial_sum: partial,
            }
        })
        .collect();

    let pts: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.k >= 1 && l.bound > 0.0)
        .map(|l| (l.k as f64, l.bound.log2()))
        .collect();
    let (slope, margin, converged) = if pts.len() >= 3 {
        let fit = fit_line(&pts)?;
        let margin = slope_margin(&fit, pts.last().unwrap().0 - pts[0].0);
        (Some(fit.slope), Some(margin), fit.slope < -margin)
    } else {
        // Finitely many nonzero levels: the series terminates.
        (None, None, true)
    };
    Ok(InterpolationReport {
        p,
        q,
        theta,
        extrapolated: theta < 0.0,
        sobolev_constant: c,
        levels,
        slope,
        margin,
        converged,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsoperimetricReport {
    pub volume: f64,
    pub variation_lower: f64,
    pub exponent: f64,
    pub ratio: f64,
}

/// Diagnostic ratio `L^n(B) / V_lower^{d/n}`.
pub fn isoperimetric_check(b: &GridFunction, alpha: f64, d: f64, variation_lower: f64) -> Result<IsoperimetricReport> {
    b.check_indicator()?;
    let n = b.grid().dim() as f64;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidExponent(format!("α must lie in [0, 1[, got {alpha}")));
    }
    if !(d > n - 1.0 + alpha && d <= n) {
        return Err(Error::InvalidExponent(format!(
            "d must lie in ]n − 1 + α, n] = ]{}, {n}], got {d}",
            n - 1.0 + alpha
        )));
    }
    if !(variation_lower.is_finite() && variation_lower >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variation lower bound must be finite and ≥ 0, got {variation_lower}"
        )));
    }
    let volume = b.lp_norm(1.0)?;
    let exponent = d / n;
    let ratio = if volume == 0.0 {
        0.0
    } else {
        volume / variation_lower.powf(exponent)
    };
    Ok(IsoperimetricReport {
        volume,
        variation_lower,
        exponent,
        ratio,
    })
}
