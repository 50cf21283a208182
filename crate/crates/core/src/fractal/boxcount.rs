//! Box-counting dimension with dyadic boxes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DyadicGrid, GridFunction};
use crate::numeric::{fit_line, LineFit};

/// Inside cells (nonzero value) with a face neighbor outside or on the cube boundary.
pub fn boundary_cells(indicator: &GridFunction) -> Vec<usize> {
    let g = indicator.grid();
    let n = g.cells_per_axis();
    let v = indicator.values();
    (0..g.cell_count())
        .filter(|&i| {
            if v[i] == 0.0 {
                return false;
            }
            let idx = g.multi_index(i);
            (0..g.dim()).any(|a| {
                let s = g.stride(a);
                idx[a] == 0 || idx[a] == n - 1 || v[i - s] == 0.0 || v[i + s] == 0.0
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxCount {
    /// `(k, N_k)`: number of level-`k` dyadic boxes meeting the cell set.
    pub counts: Vec<(u32, usize)>,
    /// Fit of `log2 N_k` against `k`.
    pub fit: LineFit,
    pub dimension: f64,
}

/// Counts level-`k` boxes of `grid` that contain at least one of `cells`
/// for `k = k0..=k1` and fits the growth exponent.
pub fn box_counting(grid: &DyadicGrid, cells: &[usize], k0: u32, k1: u32) -> Result<BoxCount> {
    if cells.is_empty() {
        return Err(Error::Empty("boundary cell set is empty".into()));
    }
    if k1 < k0 || k1 - k0 < 2 {
        return Err(Error::TooFewLevels(format!(
            "box counting needs at least 3 scales, got {k0}..={k1}"
        )));
    }
    if k1 > grid.depth() {
        return Err(Error::DepthOutOfRange {
            level: k1,
            depth: grid.depth(),
        });
    }
    let mut counts = Vec::new();
    for k in k0..=k1 {
        let coarse = grid.with_depth(k)?;
        let shift = grid.depth() - k;
        let boxes: BTreeSet<usize> = cells
            .iter()
            .map(|&c| {
                let mut idx = grid.multi_index(c);
                for slot in idx.iter_mut().take(grid.dim()) {
                    *slot >>= shift;
                }
                coarse.linear_index(&idx)
            })
            .collect();
        counts.push((k, boxes.len()));
    }
    let pts: Vec<(f64, f64)> = counts.iter().map(|&(k, c)| (k as f64, (c as f64).log2())).collect();
    let fit = fit_line(&pts)?;
    Ok(BoxCount {
        counts,
        dimension: fit.slope,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point_has_dimension_zero() {
        let g = DyadicGrid::unit(2, 8).unwrap();
        let bc = box_counting(&g, &[g.linear_index(&[77, 140, 0])], 2, 8).unwrap();
        assert!(bc.dimension.abs() < 1e-12);
    }

    #[test]
    fn unit_segment_has_dimension_one() {
        // cells along y = 0.3 for x in [0, 1): brute-force count is 2^{k−1} boxes
        let g = DyadicGrid::unit(2, 9).unwrap();
        let cells: Vec<usize> = (0..g.cell_count())
            .filter(|&i| {
                let x = g.cell_center(i);
                x[0] >= 0.0 && x[0] < 1.0 && (x[1] - 0.3).abs() < g.side() / 2.0
            })
            .collect();
        let bc = box_counting(&g, &cells, 2, 8).unwrap();
        for &(k, c) in &bc.counts {
            assert_eq!(c, 1usize << (k - 1));
        }
        assert!((bc.dimension - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        let g = DyadicGrid::unit(2, 4).unwrap();
        assert!(box_counting(&g, &[], 1, 4).is_err());
        assert!(box_counting(&g, &[0], 1, 2).is_err());
        assert!(box_counting(&g, &[0], 2, 5).is_err());
    }

    #[test]
    fn boundary_of_square() {
        let g = DyadicGrid::unit(2, 4).unwrap();
        let u = GridFunction::from_sampler(g, |x| (x[0].abs() < 0.5 && x[1].abs() < 0.5) as u8 as f64).unwrap();
        // 8×8 inner block: its ring has 28 cells
        assert_eq!(boundary_cells(&u).len(), 28);
    }

    proptest! {
        #[test]
        fn translation_by_coarse_boxes_is_exact(sx in 0usize..4, sy in 0usize..4) {
            let g = DyadicGrid::unit(2, 8).unwrap();
            let disc: Vec<[usize; 2]> = (0..g.cell_count())
                .map(|i| g.multi_index(i))
                .filter(|i| {
                    let (x, y) = (i[0] as f64 - 60.0, i[1] as f64 - 60.0);
                    (x * x + y * y - 1600.0).abs() < 40.0
                })
                .map(|i| [i[0], i[1]])
                .collect();
            let cells = |dx: usize, dy: usize| -> Vec<usize> {
                disc.iter().map(|c| g.linear_index(&[c[0] + dx, c[1] + dy, 0])).collect()
            };
            let base = box_counting(&g, &cells(0, 0), 2, 6).unwrap();
            // shifts by multiples of the coarsest box (64 cells) keep counts
            let moved = box_counting(&g, &cells(64 * (sx % 2), 64 * (sy % 2)), 2, 6).unwrap();
            prop_assert_eq!(&base.counts, &moved.counts);
            // arbitrary shifts keep the slope approximately
            let nudged = box_counting(&g, &cells(sx * 5 + 1, sy * 7), 2, 6).unwrap();
            prop_assert!((nudged.dimension - base.dimension).abs() < 0.15);
        }
    }
}
