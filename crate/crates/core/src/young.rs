//! Riemann–Stieltjes sums for Hölder pairs on intervals and on the circle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::holder::seminorm_lower;
use crate::numeric::CompensatedSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Knots `t_0 < … < t_N`; `N` increments.
    Interval,
    /// Knots `t_0 < … < t_{N−1}` on a circle parameterized by angle; the last
    /// increment wraps to `t_0`.
    Circle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedPath {
    pub domain: Domain,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl PartitionedPath {
    pub fn new(domain: Domain, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::Empty("a path needs at least 2 knots".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("knots must be strictly increasing".into()));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("knots and values must be finite".into()));
        }
        if domain == Domain::Circle && knots[knots.len() - 1] - knots[0] >= 2.0 * PI {
            return Err(Error::InvalidParameter("circle knots must span less than 2π".into()));
        }
        Ok(Self { domain, knots, values })
    }

    /// `n + 1` uniform knots on `[a, b]`.
    pub fn uniform_interval<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> Result<Self> {
        if n < 1 || !(a < b) {
            return Err(Error::InvalidParameter(format!(
                "need a < b and at least one increment, got [{a}, {b}] with {n}"
            )));
        }
        let h = (b - a) / n as f64;
        let knots: Vec<f64> = (0..=n).map(|i| if i == n { b } else { a + h * i as f64 }).collect();
        let values = knots.iter().map(|&t| f(t)).collect();
        Self::new(Domain::Interval, knots, values)
    }

    /// `n` uniform angles `2π i / n`.
    pub fn uniform_circle<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self> {
        let knots: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let values = knots.iter().map(|&t| f(t)).collect();
        Self::new(Domain::Circle, knots, values)
    }

    pub fn increments(&self) -> usize {
        match self.domain {
            Domain::Interval => self.knots.len() - 1,
            Domain::Circle => self.knots.len(),
        }
    }

    #[inline]
    fn next(&self, i: usize) -> usize {
        if i + 1 == self.knots.len() {
            0
        } else {
            i + 1
        }
    }

    fn shifted(&self, c: f64) -> Self {
        Self {
            domain: self.domain,
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v - c).collect(),
        }
    }
}

fn check_common(f: &PartitionedPath, g: &PartitionedPath) -> Result<()> {
    if f.domain != g.domain || f.knots != g.knots {
        return Err(Error::GridMismatch("paths must share domain and knots".into()));
    }
    Ok(())
}

/// Left-point sum `Σ f(t_i) (g(t_{i+1}) − g(t_i))`.
pub fn stieltjes(f: &PartitionedPath, g: &PartitionedPath) -> Result<f64> {
    check_common(f, g)?;
    let mut acc = CompensatedSum::new();
    for i in 0..f.increments() {
        let j = f.next(i);
        acc.add(f.values[i] * (g.values[j] - g.values[i]));
    }
    Ok(acc.value())
}

/// Right-point sum `Σ f(t_{i+1}) (g(t_{i+1}) − g(t_i))`.
pub fn stieltjes_right(f: &PartitionedPath, g: &PartitionedPath) -> Result<f64> {
    check_common(f, g)?;
    let mut acc = CompensatedSum::new();
    for i in 0..f.increments() {
        let j = f.next(i);
        acc.add(f.values[j] * (g.values[j] - g.values[i]));
    }
    Ok(acc.value())
}

/// Truncated sums `f_k(θ) = Σ_{j=1}^k 2^{−j(1−α)} cos(2^j θ)` and
/// `g_k(θ) = Σ_{j=1}^k 2^{−jα} sin(2^j θ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassPair {
    pub alpha: f64,
    pub k: usize,
}

impl WeierstrassPair {
    pub fn new(alpha: f64, k: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidExponent(format!("α must lie in ]0, 1[, got {alpha}")));
        }
        if k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(Self { alpha, k })
    }

    pub fn f(&self, theta: f64) -> f64 {
        weierstrass_terms(self.alpha, self.k, theta).0
    }

    pub fn g(&self, theta: f64) -> f64 {
        weierstrass_terms(self.alpha, self.k, theta).1
    }
}

/// `(f_k(θ), g_k(θ))`; see [`WeierstrassPair`].
pub fn weierstrass_terms(alpha: f64, k: usize, theta: f64) -> (f64, f64) {
    let (mut f, mut g) = (0.0, 0.0);
    for j in 1..=k {
        let freq = (1u64 << j) as f64;
        let (s, c) = (freq * theta).sin_cos();
        f += freq.powf(alpha - 1.0) * c;
        g += freq.powf(-alpha) * s;
    }
    (f, g)
}

pub fn weierstrass_pair(alpha: f64, k: usize) -> Result<WeierstrassPair> {
    WeierstrassPair::new(alpha, k)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleRow {
    pub k: usize,
    pub computed: f64,
    pub expected: f64,
    pub relative_error: f64,
}

/// `∫_{S¹} f_k dg_k` on `n` uniform knots for `k = 1..=k_max`, against `π k`.
pub fn circle_table(alpha: f64, k_max: usize, n: usize) -> Result<Vec<CircleRow>> {
    (1..=k_max)
        .map(|k| {
            let pair = WeierstrassPair::new(alpha, k)?;
            let f = PartitionedPath::uniform_circle(n, |t| pair.f(t))?;
            let g = PartitionedPath::uniform_circle(n, |t| pair.g(t))?;
            let computed = stieltjes(&f, &g)?;
            let expected = PI * k as f64;
            Ok(CircleRow {
                k,
                computed,
                expected,
                relative_error: (computed - expected).abs() / expected,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct YoungRatio {
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub r: f64,
    pub n: usize,
    /// Lower bounds for `Lip^α(f)` and `Lip^β(g)` from the `2n` samples.
    pub seminorm_f: f64,
    pub seminorm_g: f64,
    pub integral_n: f64,
    pub integral_2n: f64,
    pub ratio_n: f64,
    pub ratio_2n: f64,
    pub relative_change: f64,
}

/// `|∫_{x0−r}^{x0+r} (f − f(x0)) dg| / (r^{α+β} Lip^α(f) Lip^β(g))` on `n` and
/// `2n` uniform increments, with the seminorms estimated once from the finer
/// samples.
pub fn young_ratio<F, G>(f: F, g: G, alpha: f64, beta: f64, x0: f64, r: f64, n: usize) -> Result<YoungRatio>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n ≥ 2, got {n}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    for e in [alpha, beta] {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::InvalidExponent(format!("exponent must lie in [0, 1], got {e}")));
        }
    }
    if alpha + beta <= 1.0 {
        log::warn!("α + β = {} ≤ 1: Young's estimate does not apply", alpha + beta);
    }
    let (a, b) = (x0 - r, x0 + r);
    let f0 = f(x0);
    let fine_f = PartitionedPath::uniform_interval(a, b, 2 * n, &f)?;
    let fine_g = PartitionedPath::uniform_interval(a, b, 2 * n, &g)?;
    let sf = seminorm_lower(&fine_f.knots, 1, &fine_f.values, alpha)?;
    let sg = seminorm_lower(&fine_g.knots, 1, &fine_g.values, beta)?;
    if sf == 0.0 || sg == 0.0 {
        return Err(Error::Hypothesis(
            "a seminorm estimate vanishes; the ratio is undefined".into(),
        ));
    }
    let coarse_f = PartitionedPath::uniform_interval(a, b, n, &f)?;
    let coarse_g = PartitionedPath::uniform_interval(a, b, n, &g)?;
    let integral_n = stieltjes(&coarse_f.shifted(f0), &coarse_g)?;
    let integral_2n = stieltjes(&fine_f.shifted(f0), &fine_g)?;
    let scale = r.powf(alpha + beta) * sf * sg;
    let ratio_n = integral_n.abs() / scale;
    let ratio_2n = integral_2n.abs() / scale;
    Ok(YoungRatio {
        alpha,
        beta,
        x0,
        r,
        n,
        seminorm_f: sf,
        seminorm_g: sg,
        integral_n,
        integral_2n,
        ratio_n,
        ratio_2n,
        relative_change: (ratio_2n - ratio_n).abs() / ratio_n.abs().max(f64::MIN_POSITIVE),
    })
}

/// Lacunary pair with a unit base mode plus a tail:
/// `f(t) = cos t + c Σ_{j≥1} 2^{−jα} cos(2^j t)` and
/// `g(t) = sin t + c Σ_{j≥1} 2^{−jβ} sin(2^j t)`, truncated after `terms`
/// tail modes. `f` is `α`-Hölder and `g` is `β`-Hölder uniformly in `terms`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunaryPair {
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub terms: usize,
}

impl LacunaryPair {
    pub fn f(&self, t: f64) -> f64 {
        let mut v = t.cos();
        for j in 1..=self.terms {
            let w = (1u64 << j) as f64;
            v += self.amplitude * w.powf(-self.alpha) * (w * t).cos();
        }
        v
    }

    pub fn g(&self, t: f64) -> f64 {
        let mut v = t.sin();
        for j in 1..=self.terms {
            let w = (1u64 << j) as f64;
            v += self.amplitude * w.powf(-self.beta) * (w * t).sin();
        }
        v
    }
}
