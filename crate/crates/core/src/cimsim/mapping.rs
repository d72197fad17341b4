use crate::error::{Error, Result};

/// How one quantization code is laid out on device cells.
///
/// Every layout stores a signed value on a differential pair: the positive
/// cell holds the code's level and the negative cell its complement, so
/// `G⁺ - G⁻` is proportional to `2c - (K - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellMapping {
    /// One cell per value; code `c` is programmed at device level `c * stride`.
    Direct { stride: usize },
    /// The code is split into `digits` base-`device_levels` digits, one cell
    /// each, recombined digitally by shift-and-add.
    Sliced { digits: usize },
}

impl CellMapping {
    pub fn for_levels(code_levels: usize, device_levels: usize) -> Result<Self> {
        if code_levels < 2 || device_levels < 2 {
            return Err(Error::Parameter(format!(
                "need at least 2 code and device levels, got {code_levels} and {device_levels}"
            )));
        }
        if code_levels <= device_levels {
            let span = device_levels - 1;
            let stride = if span % (code_levels - 1) == 0 {
                span / (code_levels - 1)
            } else {
                1
            };
            return Ok(CellMapping::Direct { stride });
        }
        let mut digits = 1;
        let mut reach = device_levels;
        while reach < code_levels {
            reach = reach.saturating_mul(device_levels);
            digits += 1;
        }
        if reach != code_levels {
            return Err(Error::Parameter(format!(
                "{code_levels}-level codes cannot be sliced onto {device_levels}-level cells"
            )));
        }
        Ok(CellMapping::Sliced { digits })
    }

    pub fn cells_per_value(&self) -> usize {
        match *self {
            CellMapping::Direct { .. } => 1,
            CellMapping::Sliced { digits } => digits,
        }
    }

    /// Device levels programmed on the positive and negative cell of every
    /// slice (least significant first) for `code`.
    pub fn cell_levels(&self, code: usize, code_levels: usize, device_levels: usize) -> Vec<(usize, usize)> {
        match *self {
            CellMapping::Direct { stride } => {
                vec![(code * stride, (code_levels - 1 - code) * stride)]
            }
            CellMapping::Sliced { digits } => {
                let mut rest = code;
                (0..digits)
                    .map(|_| {
                        let d = rest % device_levels;
                        rest /= device_levels;
                        (d, device_levels - 1 - d)
                    })
                    .collect()
            }
        }
    }

    /// Shift-and-add weight of each slice.
    pub fn slice_weights(&self, device_levels: usize) -> Vec<f64> {
        match *self {
            CellMapping::Direct { .. } => vec![1.0],
            CellMapping::Sliced { digits } => (0..digits)
                .map(|i| (device_levels as f64).powi(i as i32))
                .collect(),
        }
    }
}
