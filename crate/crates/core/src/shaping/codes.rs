use crate::error::{Error, Result};

/// Row-major matrix of quantization codes in `0..levels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeMatrix {
    rows: usize,
    cols: usize,
    levels: usize,
    data: Vec<u8>,
}

impl CodeMatrix {
    pub fn new(rows: usize, cols: usize, levels: usize, data: Vec<u8>) -> Result<Self> {
        if !(2..=256).contains(&levels) {
            return Err(Error::Parameter(format!("code levels must be in 2..=256, got {levels}")));
        }
        if data.len() != rows * cols {
            return Err(Error::shape("CodeMatrix::new", rows * cols, data.len()));
        }
        if let Some(bad) = data.iter().find(|&&c| c as usize >= levels) {
            return Err(Error::Input(format!("code {bad} out of range for {levels} levels")));
        }
        Ok(Self {
            rows,
            cols,
            levels,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Occupancy count of every level.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.levels];
        for &c in &self.data {
            h[c as usize] += 1;
        }
        h
    }
}
