//! Dense grid assignment of a quantizer's cells, for plotting the dissection.

use anyhow::{ensure, Result};

use spq_core::quantizer::{CellId, ShiftPeriodicQuantizer};
use spq_core::Vector;

/// Assignment of one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionPoint {
    pub x: Vector,
    pub cell: CellId,
    pub residual: bool,
    /// Reconstruction point relative to the cell's lattice point.
    pub translation: Vector,
    /// `x − Q(x)`: where the point lands after its piece is translated into the target.
    pub image: Vector,
}

/// `points`ⁿ grid over the bounding box of the basic cell (cell centers, so the box edges
/// are never sampled). Zero points gives an empty grid.
pub fn partition_grid(q: &ShiftPeriodicQuantizer, points: usize) -> Result<Vec<PartitionPoint>> {
    let n = q.dim();
    ensure!(
        points.checked_pow(n as u32).is_some_and(|c| c <= 1 << 26),
        "grid of {points}^{n} points is too large"
    );
    if points == 0 {
        return Ok(Vec::new());
    }
    let (lo, hi) = q.basic_cell_region()?.bounding_box();
    let total = points.pow(n as u32);
    Ok((0..total)
        .map(|mut idx| {
            let x = Vector::from_fn(n, |i| {
                let k = idx % points;
                idx /= points;
                let (l, h) = (lo.as_slice()[i], hi.as_slice()[i]);
                l + (k as f64 + 0.5) / points as f64 * (h - l)
            });
            let r = q.quantize(&x);
            let base = q
                .lattice()
                .generator()
                .mul_vec(&Vector::from_fn(n, |i| r.cell.lattice.coords()[i] as f64));
            PartitionPoint {
                x,
                cell: r.cell,
                residual: r.residual,
                translation: r.q - base,
                image: x - r.q,
            }
        })
        .collect())
}
