//! Hölder seminorm estimation and inf-convolution Lipschitz approximation.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction, MAX_DIM};

/// Pointwise real function on R^n.
pub type Sampler = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A sampler together with a claimed Hölder exponent `alpha ∈ ]0, 1]` and a
/// claimed global bound `bound ≥ 0` on its `alpha`-seminorm.
#[derive(Clone)]
pub struct HolderFunction {
    sampler: Sampler,
    alpha: f64,
    bound: f64,
}

impl fmt::Debug for HolderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HolderFunction")
            .field("alpha", &self.alpha)
            .field("bound", &self.bound)
            .finish_non_exhaustive()
    }
}

impl HolderFunction {
    pub fn new<F>(sampler: F, alpha: f64, bound: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_arc(Arc::new(sampler), alpha, bound)
    }

    pub fn from_arc(sampler: Sampler, alpha: f64, bound: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidExponent(format!(
                "Hölder exponent must lie in ]0, 1], got {alpha}"
            )));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "seminorm bound must be finite and ≥ 0, got {bound}"
            )));
        }
        Ok(Self { sampler, alpha, bound })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.sampler)(x)
    }
}

/// Sample sets with at most this many points are compared pairwise in full.
pub const FULL_PAIR_LIMIT: usize = 4096;

fn check_alpha_closed(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidExponent(format!(
            "exponent must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[inline]
fn quotient(va: f64, vb: f64, d: f64, alpha: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let num = (va - vb).abs();
    if alpha == 0.0 {
        num
    } else {
        num / d.powf(alpha)
    }
}

/// Lower bound for `Lip^alpha` from point samples. `points` holds `dim`
/// coordinates per sample. All pairs are compared when there are at most
/// [`FULL_PAIR_LIMIT`] samples; otherwise a strided subset of
/// `FULL_PAIR_LIMIT` samples is compared in full, plus every consecutive pair.
pub fn seminorm_lower(points: &[f64], dim: usize, values: &[f64], alpha: f64) -> Result<f64> {
    check_alpha_closed(alpha)?;
    if dim == 0 || points.len() != dim * values.len() {
        return Err(Error::InvalidParameter(
            "points and values have inconsistent lengths".into(),
        ));
    }
    let m = values.len();
    if m < 2 {
        return Err(Error::Empty("seminorm estimate needs at least 2 samples".into()));
    }
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let subset: Vec<usize> = if m <= FULL_PAIR_LIMIT {
        (0..m).collect()
    } else {
        let stride = m.div_ceil(FULL_PAIR_LIMIT);
        (0..m).step_by(stride).collect()
    };
    let full = subset
        .par_iter()
        .enumerate()
        .map(|(a, &i)| {
            subset[a + 1..].iter().fold(0.0f64, |best, &j| {
                best.max(quotient(values[i], values[j], dist(pt(i), pt(j)), alpha))
            })
        })
        .reduce(|| 0.0, f64::max);
    let consecutive = if m > FULL_PAIR_LIMIT {
        (0..m - 1)
            .into_par_iter()
            .map(|i| quotient(values[i], values[i + 1], dist(pt(i), pt(i + 1)), alpha))
            .reduce(|| 0.0, f64::max)
    } else {
        0.0
    };
    Ok(full.max(consecutive))
}

/// [`seminorm_lower`] over the cell centers of a grid function.
pub fn seminorm_lower_grid(u: &GridFunction, alpha: f64) -> Result<f64> {
    let g = u.grid();
    let n = g.dim();
    let mut pts = Vec::with_capacity(g.cell_count() * n);
    for i in 0..g.cell_count() {
        pts.extend_from_slice(&g.cell_center(i)[..n]);
    }
    seminorm_lower(&pts, n, u.values(), alpha)
}

/// Search lattice used by [`inf_convolution`]: anchored at the first cell
/// center of `out`, spacing `h·2^j`, the largest such value not above `ε/32`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchLattice {
    pub anchor: [f64; MAX_DIM],
    pub spacing: f64,
    /// True when every cell center of the output grid is a lattice point.
    pub contains_centers: bool,
}

impl SearchLattice {
    pub fn for_grid(out: &DyadicGrid, eps: f64) -> Self {
        let h = out.side();
        let target = eps / 32.0;
        let mut s = h;
        while s > target {
            s *= 0.5;
        }
        while 2.0 * s <= target {
            s *= 2.0;
        }
        let mut anchor = [0.0; MAX_DIM];
        for (a, slot) in anchor.iter_mut().enumerate().take(out.dim()) {
            *slot = out.lower(a) + 0.5 * h;
        }
        Self {
            anchor,
            spacing: s,
            contains_centers: s <= h,
        }
    }

    /// Worst-case excess of the discrete infimum over the continuous one,
    /// and the Lipschitz slack when query points are not lattice points.
    pub fn slack(&self, dim: usize, alpha: f64, bound: f64, eps: f64) -> f64 {
        if self.contains_centers {
            return 0.0;
        }
        let reach = self.spacing * (dim as f64).sqrt();
        bound * reach.powf(alpha) + bound * eps.powf(alpha - 1.0) * reach
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("ε must lie in ]0, 1], got {eps}")));
    }
    Ok(())
}

/// Minimum of `f(y) + λ|x − y|` over lattice points `y` in the closed ball
/// `B(x, ε)` and over `y = x`.
fn local_inf(f: &HolderFunction, x: &[f64], lat: &SearchLattice, lambda: f64, eps: f64) -> f64 {
    let n = x.len();
    let s = lat.spacing;
    let mut lo = [0i64; MAX_DIM];
    let mut hi = [0i64; MAX_DIM];
    for a in 0..n {
        lo[a] = ((x[a] - eps - lat.anchor[a]) / s).ceil() as i64;
        hi[a] = ((x[a] + eps - lat.anchor[a]) / s).floor() as i64;
    }
    let mut best = f.eval(x);
    let mut m = lo;
    let mut y = [0.0; MAX_DIM];
    'outer: loop {
        for a in 0..n {
            y[a] = lat.anchor[a] + s * m[a] as f64;
        }
        let d = dist(&y[..n], x);
        if d <= eps {
            let v = f.eval(&y[..n]) + lambda * d;
            if v < best {
                best = v;
            }
        }
        for a in 0..n {
            if m[a] < hi[a] {
                m[a] += 1;
                continue 'outer;
            }
            m[a] = lo[a];
        }
        break;
    }
    best
}

fn warn_if_bound_violated(f: &HolderFunction, out: &DyadicGrid) {
    if f.bound() > 0.0 {
        return;
    }
    let n = out.dim();
    let first = f.eval(&out.cell_center(0)[..n]);
    if (1..out.cell_count()).any(|i| f.eval(&out.cell_center(i)[..n]) != first) {
        log::warn!("seminorm bound H = 0 but the samples are not constant; the claimed bound is violated");
    }
}

/// Cell-center evaluation of `f_ε(x) = inf_y f(y) + H ε^{α−1} |x − y|`, with the
/// infimum taken over `B(x, ε)` on a [`SearchLattice`] plus `x` itself.
pub fn inf_convolution(f: &HolderFunction, eps: f64, out: &DyadicGrid) -> Result<GridFunction> {
    check_eps(eps)?;
    warn_if_bound_violated(f, out);
    let lambda = f.bound() * eps.powf(f.alpha() - 1.0);
    let lat = SearchLattice::for_grid(out, eps);
    let n = out.dim();
    let values: Vec<f64> = (0..out.cell_count())
        .into_par_iter()
        .map(|i| local_inf(f, &out.cell_center(i)[..n], &lat, lambda, eps))
        .collect();
    GridFunction::new(*out, values)
}

/// [`inf_convolution`] clamped to `[−S, S]`. `sup_bound` defaults to the
/// largest `|f|` over the cell centers of `out`.
pub fn clamp_approx(f: &HolderFunction, eps: f64, out: &DyadicGrid, sup_bound: Option<f64>) -> Result<GridFunction> {
    let fe = inf_convolution(f, eps, out)?;
    let n = out.dim();
    let s = match sup_bound {
        Some(s) if s.is_finite() && s >= 0.0 => s,
        Some(s) => {
            return Err(Error::InvalidParameter(format!(
                "sup bound must be finite and ≥ 0, got {s}"
            )))
        }
        None => (0..out.cell_count())
            .map(|i| f.eval(&out.cell_center(i)[..n]).abs())
            .fold(0.0, f64::max),
    };
    Ok(fe.map(|v| v.clamp(-s, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_samples(m: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let vs = xs.iter().map(|&x| f(x)).collect();
        (xs, vs)
    }

    /// Brute force over all pairs; independent of the production loop.
    fn brute_seminorm(xs: &[f64], vs: &[f64], alpha: f64) -> f64 {
        let mut best = 0.0f64;
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if i != j {
                    best = best.max((vs[i] - vs[j]).abs() / (xs[i] - xs[j]).abs().powf(alpha));
                }
            }
        }
        best
    }

    #[test]
    fn seminorm_constant_is_zero() {
        let (xs, vs) = line_samples(50, |_| 2.0);
        assert_eq!(seminorm_lower(&xs, 1, &vs, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn seminorm_power_function_below_one() {
        let alpha = 0.4;
        let (xs, vs) = line_samples(1001, |x| x.powf(alpha));
        let est = seminorm_lower(&xs, 1, &vs, alpha).unwrap();
        let brute = brute_seminorm(&xs, &vs, alpha);
        assert!((est - brute).abs() < 1e-12);
        assert!(est <= 1.0 + 1e-12 && est > 0.999);
    }

    #[test]
    fn seminorm_large_sample_is_lower_bound() {
        let alpha = 0.7;
        let (xs, vs) = line_samples(20_000, |x| x.powf(alpha));
        let est = seminorm_lower(&xs, 1, &vs, alpha).unwrap();
        assert!(est <= 1.0 + 1e-12 && est > 0.99);
    }

    #[test]
    fn seminorm_rejects_bad_alpha() {
        let (xs, vs) = line_samples(3, |x| x);
        assert!(seminorm_lower(&xs, 1, &vs, 1.5).is_err());
        assert!(seminorm_lower(&xs, 1, &vs, -0.1).is_err());
        assert!(seminorm_lower(&xs[..1], 1, &vs[..1], 0.5).is_err());
    }

    #[test]
    fn seminorm_grid_alpha_zero_is_oscillation() {
        let g = DyadicGrid::unit(2, 3).unwrap();
        let u = GridFunction::from_sampler(g, |x| x[0] + 2.0 * x[1]).unwrap();
        let osc = 3.0 * (1.0 - g.side() / 2.0) * 2.0;
        assert!((seminorm_lower_grid(&u, 0.0).unwrap() - osc).abs() < 1e-12);
    }

    #[test]
    fn inf_convolution_constant() {
        let f = HolderFunction::new(|_| 1.5, 0.5, 1.0).unwrap();
        let g = DyadicGrid::unit(2, 3).unwrap();
        let fe = inf_convolution(&f, 0.5, &g).unwrap();
        assert!(fe.values().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn inf_convolution_of_lipschitz_line_is_itself() {
        let f = HolderFunction::new(|x| x[0], 1.0, 1.0).unwrap();
        let g = DyadicGrid::unit(1, 6).unwrap();
        for eps in [1.0, 0.3, 0.01] {
            let fe = inf_convolution(&f, eps, &g).unwrap();
            let exact = GridFunction::from_sampler(g, |x| x[0]).unwrap();
            assert!(fe.max_abs_diff(&exact).unwrap() < 1e-12);
        }
    }

    #[test]
    fn inf_convolution_square_root_example() {
        // Oracle: brute-force minimization of |y|^{1/2} + |x − y| on a fine lattice.
        let oracle = |x: f64| {
            (0..=200_000)
                .map(|i| -1.0 + 2.0 * i as f64 / 200_000.0)
                .filter(|y| (y - x).abs() <= 1.0)
                .map(|y| y.abs().sqrt() + (x - y).abs())
                .fold(f64::INFINITY, f64::min)
        };
        assert_eq!(oracle(0.0), 0.0);
        assert!((oracle(1.0) - 1.0).abs() < 1e-12);

        let f = HolderFunction::new(|x| x[0].abs().sqrt(), 0.5, 1.0).unwrap();
        let g = DyadicGrid::new(1, &[0.5], 1.0, 1).unwrap();
        let fe = inf_convolution(&f, 1.0, &g).unwrap();
        assert_eq!(fe.values()[0], 0.0);
        assert!((fe.values()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamp_examples() {
        let f = HolderFunction::new(|x| x[0].abs().sqrt(), 0.5, 1.0).unwrap();
        let g = DyadicGrid::unit(1, 7).unwrap();
        let fe = inf_convolution(&f, 0.25, &g).unwrap();
        let clamped = clamp_approx(&f, 0.25, &g, None).unwrap();
        assert!(clamped.values().iter().all(|&v| v <= 1.0));
        assert_eq!(clamped, fe);

        let c = HolderFunction::new(|_| -0.75, 1.0, 2.0).unwrap();
        let out = clamp_approx(&c, 0.5, &g, None).unwrap();
        assert!(out.values().iter().all(|&v| v == -0.75));
        assert!(clamp_approx(&c, 0.5, &g, Some(f64::NAN)).is_err());
    }

    #[test]
    fn rejects_bad_eps_and_exponents() {
        let g = DyadicGrid::unit(1, 2).unwrap();
        let f = HolderFunction::new(|x| x[0], 1.0, 1.0).unwrap();
        assert!(inf_convolution(&f, 0.0, &g).is_err());
        assert!(inf_convolution(&f, 1.5, &g).is_err());
        assert!(HolderFunction::new(|x| x[0], 0.0, 1.0).is_err());
        assert!(HolderFunction::new(|x| x[0], 0.5, -1.0).is_err());
    }

    fn rough(seed: f64, amp: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone {
        move |x: &[f64]| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            amp * ((r + seed).abs().powf(0.5) + (3.0 * x[0] + seed).sin() * 0.25)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn inf_convolution_properties(seed in -1.0f64..1.0, eps in 0.05f64..1.0,
                                      dim in 1usize..=2, depth in 3u32..=5) {
            let alpha = 0.5;
            // |r^{1/2} − s^{1/2}| ≤ |r − s|^{1/2}; the sine term has seminorm ≤ 0.75·2^{1/2}
            let h_bound = 1.0 + 0.75 * 2f64.sqrt();
            let f = HolderFunction::new(rough(seed, 1.0), alpha, h_bound).unwrap();
            let g = DyadicGrid::unit(dim, depth).unwrap();
            let fe = inf_convolution(&f, eps, &g).unwrap();
            let fs = GridFunction::from_sampler(g, |x| f.eval(x)).unwrap();
            let lat = SearchLattice::for_grid(&g, eps);
            let slack = lat.slack(dim, alpha, h_bound, eps);

            // below f, within H ε^α
            for (a, b) in fe.values().iter().zip(fs.values()) {
                prop_assert!(*a <= *b + 1e-12);
                prop_assert!(*b - *a <= h_bound * eps.powf(alpha) + 1e-12);
            }
            // discrete Lipschitz bound between adjacent centers
            let lambda = h_bound * eps.powf(alpha - 1.0);
            let n = g.cells_per_axis();
            for i in 0..g.cell_count() {
                let idx = g.multi_index(i);
                for a in 0..dim {
                    if idx[a] + 1 < n {
                        let j = i + g.stride(a);
                        let d = (fe.value(i) - fe.value(j)).abs();
                        prop_assert!(d <= lambda * g.side() + 2.0 * slack + 1e-12);
                    }
                }
            }
            // seminorm of the approximation
            let est = seminorm_lower_grid(&fe, alpha).unwrap();
            prop_assert!(est <= 3.0 * h_bound + 2.0 * slack / g.side().powf(alpha) + 1e-9);
        }

        #[test]
        fn inf_convolution_is_monotone_comparison(seed in -1.0f64..1.0, shift in -0.3f64..0.3,
                                                  eps in 0.1f64..1.0) {
            let h_bound = 1.0 + 0.75 * 2f64.sqrt();
            let base = rough(seed, 1.0);
            let b2 = base.clone();
            // perturbation bounded by |shift| everywhere
            let f = HolderFunction::new(base, 0.5, h_bound).unwrap();
            // both inputs use the same (α, H) so the cones match
            let gg = HolderFunction::new(move |x: &[f64]| b2(x) + shift * (5.0 * x[0]).cos(), 0.5, h_bound).unwrap();
            let grid = DyadicGrid::unit(1, 6).unwrap();
            let fe = inf_convolution(&f, eps, &grid).unwrap();
            let ge = inf_convolution(&gg, eps, &grid).unwrap();
            prop_assert!(fe.max_abs_diff(&ge).unwrap() <= shift.abs() + 1e-12);
        }

        #[test]
        fn seminorm_homogeneous(c in -4.0f64..4.0, alpha in 0.0f64..=1.0) {
            let (xs, vs) = line_samples(64, |x| (7.0 * x).sin() + x * x);
            let cv: Vec<f64> = vs.iter().map(|v| c * v).collect();
            let a = seminorm_lower(&xs, 1, &vs, alpha).unwrap();
            let b = seminorm_lower(&xs, 1, &cv, alpha).unwrap();
            prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + b));
        }

        #[test]
        fn seminorm_never_exceeds_true_value(alpha in 0.05f64..=1.0, m in 2usize..300) {
            let (xs, vs) = line_samples(m, |x| x.powf(alpha));
            prop_assert!(seminorm_lower(&xs, 1, &vs, alpha).unwrap() <= 1.0 + 1e-12);
        }
    }
}
