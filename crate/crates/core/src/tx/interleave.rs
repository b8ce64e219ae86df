//! Row-column block interleavers for coded bits and QAM symbols.

use crate::error::{Error, Result};
use crate::grid::FrameConfig;

/// Writes row by row into a `rows x cols` array and reads column by column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInterleaver {
    pub rows: usize,
    pub cols: usize,
}

impl BlockInterleaver {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Output position of input index `i`.
    pub fn forward_index(&self, i: usize) -> usize {
        let (r, c) = (i / self.cols, i % self.cols);
        c * self.rows + r
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.len());
        let mut out = input.to_vec();
        for (i, &x) in input.iter().enumerate() {
            out[self.forward_index(i)] = x;
        }
        out
    }

    pub fn deinterleave<T: Copy>(&self, input: &[T]) -> Vec<T> {
        debug_assert_eq!(input.len(), self.len());
        (0..input.len()).map(|i| input[self.forward_index(i)]).collect()
    }
}

fn bit_interleaver(len: usize, config: &FrameConfig) -> Result<BlockInterleaver> {
    let rows = config.bits_per_symbol();
    if len == 0 || len % rows != 0 {
        return Err(Error::LengthMismatch {
            expected: len.div_ceil(rows).max(1) * rows,
            actual: len,
        });
    }
    // A `modulation_order`-row array filled column by column and read row
    // by row; in this struct's row-major terms that is the transpose.
    Ok(BlockInterleaver {
        rows: len / rows,
        cols: rows,
    })
}

/// Interleaves a frame's coded bits through a `modulation_order`-row array
/// filled by column and read by row. Coded bits `modulation_order` apart
/// land on successive bit positions of the QAM label, so every codeword
/// sees each bit reliability class about equally.
pub fn bit_interleave<T: Copy>(bits: &[T], config: &FrameConfig) -> Result<Vec<T>> {
    Ok(bit_interleaver(bits.len(), config)?.interleave(bits))
}

pub fn bit_deinterleave<T: Copy>(bits: &[T], config: &FrameConfig) -> Result<Vec<T>> {
    Ok(bit_interleaver(bits.len(), config)?.deinterleave(bits))
}

fn symbol_interleaver(len: usize, config: &FrameConfig) -> Result<BlockInterleaver> {
    let il = BlockInterleaver {
        rows: config.block_distance,
        cols: config.n_data_subcarriers,
    };
    if len == 0 || len % il.len() != 0 {
        return Err(Error::LengthMismatch {
            expected: len.div_ceil(il.len()).max(1) * il.len(),
            actual: len,
        });
    }
    Ok(il)
}

/// Permutes symbols within each pilot period's data cells
/// (`block_distance` rows by `n_data_subcarriers` columns).
pub fn symbol_interleave<T: Copy>(symbols: &[T], config: &FrameConfig) -> Result<Vec<T>> {
    let il = symbol_interleaver(symbols.len(), config)?;
    Ok(symbols.chunks(il.len()).flat_map(|c| il.interleave(c)).collect())
}

pub fn symbol_deinterleave<T: Copy>(symbols: &[T], config: &FrameConfig) -> Result<Vec<T>> {
    let il = symbol_interleaver(symbols.len(), config)?;
    Ok(symbols.chunks(il.len()).flat_map(|c| il.deinterleave(c)).collect())
}
