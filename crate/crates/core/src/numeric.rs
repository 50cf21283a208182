//! Small numerical helpers shared across modules: compensated summation and
//! least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier compensated accumulator. Summation order is the caller's, so
/// results are bit-reproducible for a fixed input order.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(iter);
    acc.value()
}

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residuals `y_i - (intercept + slope * x_i)` in input order.
    pub residuals: Vec<f64>,
}

impl LineFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn rms_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (sum(self.residuals.iter().map(|r| r * r)) / self.residuals.len() as f64).sqrt()
    }
}

/// Fits a line through `(x, y)` pairs. Needs at least two distinct abscissae.
pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::TooFewLevels(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mean_x = sum(points.iter().map(|p| p.0)) / m;
    let mean_y = sum(points.iter().map(|p| p.1)) / m;
    let sxx = sum(points.iter().map(|p| (p.0 - mean_x).powi(2)));
    if sxx == 0.0 {
        return Err(Error::TooFewLevels("all abscissae coincide".into()));
    }
    let sxy = sum(points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)));
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals = points.iter().map(|&(x, y)| y - (intercept + slope * x)).collect();
    Ok(LineFit {
        slope,
        intercept,
        residuals,
    })
}

/// Slope uncertainty margin used for honest verdicts on finite data:
/// twice the largest residual spread over the abscissa span.
pub fn slope_margin(fit: &LineFit, span: f64) -> f64 {
    if span <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * fit.max_abs_residual() / span
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1.0e16];
        xs.extend(std::iter::repeat(1.0).take(1000));
        xs.push(-1.0e16);
        assert_eq!(sum(xs), 1000.0);
    }

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (0..5).map(|k| (k as f64, 3.0 - 0.5 * k as f64)).collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-14);
        assert!(fit.max_abs_residual() < 1e-14);
    }

    #[test]
    fn degenerate_fit_rejected() {
        assert!(fit_line(&[(1.0, 2.0)]).is_err());
        assert!(fit_line(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
    }
}
