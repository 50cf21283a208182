//! Named maps used by examples, the CLI and the acceptance checks.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::DyadicGrid;
use crate::holder::HolderFunction;
use crate::pushforward::Diffeomorphism;

/// Coordinate projections `x ↦ x_i`.
pub fn identity_components(n: usize) -> Vec<HolderFunction> {
    (0..n)
        .map(|i| HolderFunction::new(move |x: &[f64]| x[i], 1.0, 1.0).expect("valid exponent"))
        .collect()
}

/// `(x, y) ↦ (y, x)`.
pub fn swap_components() -> Vec<HolderFunction> {
    let mut c = identity_components(2);
    c.swap(0, 1);
    c
}

/// `(x, y) ↦ (x² − y², 2xy)`, Lipschitz with constant `2√2` on `[−1, 1]²`.
pub fn complex_square_components() -> Vec<HolderFunction> {
    let l = 2.0 * 2f64.sqrt();
    vec![
        HolderFunction::new(|x: &[f64]| x[0] * x[0] - x[1] * x[1], 1.0, l).expect("valid exponent"),
        HolderFunction::new(|x: &[f64]| 2.0 * x[0] * x[1], 1.0, l).expect("valid exponent"),
    ]
}

/// `Γ(θ) = Σ_{j=1}^{terms} 2^{−jα} (cos 2^j θ, sin 2^j θ)`.
pub fn lacunary_loop(alpha: f64, terms: usize, theta: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for j in 1..=terms {
        let w = (1u64 << j) as f64;
        let (s, c) = (w * theta).sin_cos();
        let amp = w.powf(-alpha);
        a += amp * c;
        b += amp * s;
    }
    (a, b)
}

/// The 2-D map `x ↦ ψ(x) Γ(θ(x))` on a square, where `θ` is the angle about
/// the center and `ψ` vanishes on the inner quarter (chessboard radius) and
/// is one on the outer half. Both components are `α`-Hölder; along the
/// boundary the image winds around small loops at every scale `2^{−jα}`.
pub fn winding_components(alpha: f64, terms: usize, cube: &DyadicGrid) -> Result<Vec<HolderFunction>> {
    if cube.dim() != 2 {
        return Err(Error::InvalidGrid("the winding map is 2-D".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidExponent(format!("α must lie in ]0, 1[, got {alpha}")));
    }
    let c = [cube.center()[0], cube.center()[1]];
    let r = cube.half_width();
    // Γ is α-Hölder in θ with constant below `gamma_bound`, |∇θ| ≤ 4/r where
    // ψ > 0, and ψ is (4/r)-Lipschitz with |Γ| ≤ sup_bound
    let gamma_bound = 2f64.powf(1.0 - alpha) / (2f64.powf(1.0 - alpha) - 1.0) + 2.0 / (1.0 - 2f64.powf(-alpha));
    let sup_bound: f64 = (1..=terms).map(|j| 2f64.powf(-(j as f64) * alpha)).sum();
    let diam = 2.0 * 2f64.sqrt() * r;
    let bound = 4.0 / r * sup_bound * diam.powf(1.0 - alpha) + gamma_bound * (4.0 / r).powf(alpha);
    let make = |slot: usize| {
        HolderFunction::new(
            move |x: &[f64]| {
                let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
                let rho = dx.abs().max(dy.abs()) / r;
                let psi = ((rho - 0.25) / 0.25).clamp(0.0, 1.0);
                if psi == 0.0 {
                    return 0.0;
                }
                let (a, b) = lacunary_loop(alpha, terms, dy.atan2(dx));
                psi * if slot == 0 { a } else { b }
            },
            alpha,
            bound,
        )
    };
    Ok(vec![make(0)?, make(1)?])
}

/// `x ↦ λ S₂(S₁(x))` with shears `S₁(x, y) = (x + a sin(b y), y)` and
/// `S₂(x, y) = (x, y + c sin(d x))`; `det Dφ = λ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearPair {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub scale: f64,
}

impl Default for ShearPair {
    fn default() -> Self {
        Self {
            a: 0.25,
            b: 2.0 * PI,
            c: 0.25,
            d: 2.0 * PI,
            scale: 1.0,
        }
    }
}

impl ShearPair {
    pub fn scaled(mut self, lambda: f64) -> Self {
        self.scale *= lambda;
        self
    }

    /// Upper bound for the Lipschitz constant of either component.
    pub fn lipschitz_bound(&self) -> f64 {
        let l1 = 1.0 + self.a * self.b;
        let l2 = 1.0 + self.c * self.d;
        self.scale.abs() * l1 * l2
    }
}

impl Diffeomorphism for ShearPair {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let u = x[0] + self.a * (self.b * x[1]).sin();
        let v = x[1] + self.c * (self.d * u).sin();
        out[0] = self.scale * u;
        out[1] = self.scale * v;
    }

    fn inverse(&self, y: &[f64], out: &mut [f64]) {
        let (u, v) = (y[0] / self.scale, y[1] / self.scale);
        let x1 = v - self.c * (self.d * u).sin();
        out[0] = u - self.a * (self.b * x1).sin();
        out[1] = x1;
    }

    fn jacobian_det(&self, _x: &[f64]) -> f64 {
        self.scale * self.scale
    }
}

/// `x ↦ M x + t` in 2-D.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearMap {
    m: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    t: [f64; 2],
}

impl LinearMap {
    pub fn new2(m: [[f64; 2]; 2]) -> Result<Self> {
        Self::affine2(m, [0.0, 0.0])
    }

    pub fn translation2(t: [f64; 2]) -> Self {
        Self::affine2([[1.0, 0.0], [0.0, 1.0]], t).expect("identity is invertible")
    }

    pub fn affine2(m: [[f64; 2]; 2], t: [f64; 2]) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::InvalidParameter("linear part must be invertible".into()));
        }
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        Ok(Self { m, inv, t })
    }
}

impl Diffeomorphism for LinearMap {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(2) {
            *o = self.m[i][0] * x[0] + self.m[i][1] * x[1] + self.t[i];
        }
    }

    fn inverse(&self, y: &[f64], out: &mut [f64]) {
        let z = [y[0] - self.t[0], y[1] - self.t[1]];
        for (i, o) in out.iter_mut().enumerate().take(2) {
            *o = self.inv[i][0] * z[0] + self.inv[i][1] * z[1];
        }
    }

    fn jacobian_det(&self, _x: &[f64]) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }
}

/// Components of a diffeomorphism as Lipschitz functions with bound `lip`.
pub fn diffeo_components<D: Diffeomorphism + 'static>(phi: Arc<D>, lip: f64) -> Vec<HolderFunction> {
    (0..phi.dim())
        .map(|i| {
            let phi = phi.clone();
            HolderFunction::new(
                move |x: &[f64]| {
                    let mut out = [0.0; 3];
                    phi.apply(x, &mut out[..phi.dim()]);
                    out[i]
                },
                1.0,
                lip,
            )
            .expect("valid exponent")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_inverse_and_det() {
        let s = ShearPair::default().scaled(1.5);
        let mut y = [0.0; 2];
        let mut x = [0.0; 2];
        for p in [[0.3, -0.7], [-1.0, 1.0], [0.0, 0.0]] {
            s.apply(&p, &mut y);
            s.inverse(&y, &mut x);
            assert!((x[0] - p[0]).abs() < 1e-14 && (x[1] - p[1]).abs() < 1e-14);
            // finite-difference Jacobian
            let e = 1e-6;
            let mut a = [0.0; 2];
            let mut b = [0.0; 2];
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut q = p;
                q[k] += e;
                s.apply(&q, &mut a);
                q[k] -= 2.0 * e;
                s.apply(&q, &mut b);
                jac[0][k] = (a[0] - b[0]) / (2.0 * e);
                jac[1][k] = (a[1] - b[1]) / (2.0 * e);
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            assert!((det - s.jacobian_det(&p)).abs() < 1e-6);
        }
    }

    #[test]
    fn winding_map_is_zero_inside_and_loops_on_boundary() {
        let cube = DyadicGrid::new(2, &[0.5, 0.5], 0.5, 0).unwrap();
        let w = winding_components(0.7, 10, &cube).unwrap();
        assert_eq!(w[0].eval(&[0.5, 0.55]), 0.0);
        let (a, b) = lacunary_loop(0.7, 10, 0.0);
        assert!((w[0].eval(&[1.0, 0.5]) - a).abs() < 1e-15);
        assert!((w[1].eval(&[1.0, 0.5]) - b).abs() < 1e-15);
        assert_eq!(w[0].alpha(), 0.7);
    }

    #[test]
    fn linear_map_roundtrip() {
        let m = LinearMap::affine2([[2.0, 1.0], [0.5, -1.0]], [0.1, 0.2]).unwrap();
        let mut y = [0.0; 2];
        let mut x = [0.0; 2];
        m.apply(&[0.3, 0.4], &mut y);
        m.inverse(&y, &mut x);
        assert!((x[0] - 0.3).abs() < 1e-15 && (x[1] - 0.4).abs() < 1e-15);
        assert!(LinearMap::new2([[1.0, 2.0], [2.0, 4.0]]).is_err());
    }
}
