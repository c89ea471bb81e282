use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the truncation box `[-L, L)^d` with `n_box` nodes per
/// axis, plus the resolution `n_cell` of the periodic cell `[0,1)^d`.
///
/// Box nodes are `x_i = -L + i h` with `h = 2L / n_box`; the spacing must
/// be an integer multiple of the cell spacing so every box node lands on a
/// cell node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub l: f64,
    pub n_box: usize,
    pub n_cell: usize,
}

impl Grid {
    pub fn new(d: usize, l: f64, n_box: usize, n_cell: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::invalid("dimension", format!("d ∈ {{1,2}} required, got {d}")));
        }
        if n_box < 16 || !n_box.is_multiple_of(2) {
            return Err(Error::invalid(
                "grid.n_box",
                format!("must be even and >= 16, got {n_box}"),
            ));
        }
        if !(l >= 4.0) || !l.is_finite() {
            return Err(Error::invalid("grid.L", format!("must be >= 4, got {l}")));
        }
        if n_cell == 0 {
            return Err(Error::invalid("grid.n_cell", "must be positive"));
        }
        let g = Self { d, l, n_box, n_cell };
        let ratio = g.spacing() * n_cell as f64;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::invalid(
                "grid",
                format!(
                    "box spacing 2L/n_box = {} must be a positive integer multiple of the cell spacing 1/{n_cell} \
                     (L·n_cell/n_box = {} must be an integer times 1/2)",
                    g.spacing(),
                    l * n_cell as f64 / n_box as f64
                ),
            ));
        }
        Ok(g)
    }

    /// Smallest power-of-two box with box spacing equal to the cell spacing
    /// that contains `[-l_min, l_min]`.
    pub fn plan(d: usize, n_cell: usize, l_min: f64) -> Result<Self> {
        let need = (2.0 * l_min.max(4.0) * n_cell as f64).ceil() as usize;
        let n_box = need.next_power_of_two().max(16);
        Self::new(d, n_box as f64 / (2.0 * n_cell as f64), n_box, n_cell)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n_box as f64
    }

    /// Box spacing in units of the cell spacing.
    pub fn stride(&self) -> usize {
        (self.spacing() * self.n_cell as f64).round() as usize
    }

    /// Total number of box nodes.
    pub fn len(&self) -> usize {
        self.n_box.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.spacing()
    }

    /// Largest node coordinate along an axis, `L - h`.
    pub fn last(&self) -> f64 {
        self.coord(self.n_box - 1)
    }

    /// Per-axis indices of flat node `idx` (first axis fastest).
    pub fn axes(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            [idx % self.n_box, idx / self.n_box]
        }
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let a = self.axes(idx);
        if self.d == 1 {
            [self.coord(a[0]), 0.0]
        } else {
            [self.coord(a[0]), self.coord(a[1])]
        }
    }

    pub fn norm(&self, idx: usize) -> f64 {
        let p = self.point(idx);
        p[0].hypot(p[1])
    }

    /// Cell index along one axis of box node `i`.
    pub fn cell_axis(&self, i: usize) -> usize {
        let n = self.n_cell as i64;
        let offset = (self.l * self.n_cell as f64).round() as i64;
        (((i as i64) * self.stride() as i64 - offset).rem_euclid(n)) as usize
    }

    /// Flat cell index of flat box node `idx`.
    pub fn cell_index(&self, idx: usize) -> usize {
        let a = self.axes(idx);
        if self.d == 1 {
            self.cell_axis(a[0])
        } else {
            self.cell_axis(a[0]) + self.n_cell * self.cell_axis(a[1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commensurability_is_enforced() {
        assert!(Grid::new(1, 8.0, 256, 16).is_ok());
        assert!(Grid::new(1, 8.0, 128, 16).is_ok()); // stride 2
        let e = Grid::new(1, 8.0, 100, 16).unwrap_err();
        assert!(e.to_string().contains("integer times 1/2"));
    }

    #[test]
    fn rejects_small_or_odd_boxes() {
        assert!(Grid::new(1, 8.0, 14, 1).is_err());
        assert!(Grid::new(1, 8.0, 17, 1).is_err());
        assert!(Grid::new(1, 3.0, 96, 16).is_err());
    }

    #[test]
    fn box_nodes_map_onto_cell_nodes() {
        let g = Grid::new(1, 8.0, 128, 16).unwrap();
        for i in 0..g.n_box {
            let x = g.coord(i);
            let c = g.cell_axis(i) as f64 / 16.0;
            assert!(((x - c) - (x - c).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_covers_requested_radius() {
        let g = Grid::plan(1, 16, 4386.0).unwrap();
        assert!(g.l >= 4386.0);
        assert_eq!(g.spacing(), 1.0 / 16.0);
        assert!(g.n_box.is_power_of_two());
    }

    #[test]
    fn two_dimensional_indexing() {
        let g = Grid::new(2, 4.0, 16, 2).unwrap();
        assert_eq!(g.len(), 256);
        let p = g.point(17);
        assert_eq!(p, [g.coord(1), g.coord(1)]);
    }
}
