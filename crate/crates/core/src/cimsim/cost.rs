use crate::cimsim::{ArraySpec, CellMapping};
use crate::error::Result;

/// Analytic footprint of storing `d`-dimensional vectors on a crossbar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlicingCost {
    /// Cells needed to hold one value.
    pub cells_per_value: usize,
    /// Row tiles per stored vector.
    pub tiles: usize,
    /// Shift-and-add accumulation steps per tile.
    pub accumulate_ops_per_tile: usize,
    /// Accumulation steps across all tiles.
    pub accumulate_ops: usize,
    /// Cells per stored vector (one polarity plane).
    pub total_cells: usize,
    /// Physical bitline columns per stored vector, counting both planes of
    /// every differential pair.
    pub columns_per_vector: usize,
}

/// Cost of `value_levels`-level values on `cell_levels`-level cells.
pub fn slicing_cost(value_levels: usize, cell_levels: usize, d: usize, spec: &ArraySpec) -> Result<SlicingCost> {
    let cells = CellMapping::for_levels(value_levels, cell_levels)?.cells_per_value();
    let tiles = spec.row_tiles(d);
    Ok(SlicingCost {
        cells_per_value: cells,
        tiles,
        accumulate_ops_per_tile: cells,
        accumulate_ops: tiles * cells,
        total_cells: d * cells,
        columns_per_vector: 2 * cells,
    })
}

/// INT4 values bit-sliced onto 1-bit cells.
pub fn int4_slicing_cost(d: usize, spec: &ArraySpec) -> SlicingCost {
    slicing_cost(16, 2, d, spec).expect("16 levels slice onto binary cells")
}

/// 2-bit values on native 2-bit multi-level cells.
pub fn two_bit_native_cost(d: usize, spec: &ArraySpec) -> SlicingCost {
    slicing_cost(4, 4, d, spec).expect("4 levels fit 4-level cells")
}
