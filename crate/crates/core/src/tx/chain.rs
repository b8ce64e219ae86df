use num_complex::Complex64;
use rayon::prelude::*;

use super::interleave::{bit_interleave, symbol_interleave};
use super::scramble::scramble_bits;
use super::transport::{bytes_to_bits, segment_payload, TransportBlock};
use crate::error::Result;
use crate::grid::{pilot_sequence, FrameConfig, PilotLayout, ResourceGrid};
use crate::ldpc::LdpcCode;
use crate::ofdm::OfdmEngine;
use crate::qam;
use crate::signal::BasebandSignal;

/// Coded bits and data-cell symbols of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCells {
    /// Codeword bits (information bits when uncoded), before filler and
    /// scrambling.
    pub coded_bits: Vec<u8>,
    /// Data cells in reading order, as placed on the grid.
    pub symbols: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub index: usize,
    pub block: TransportBlock,
    pub cells: FrameCells,
}

#[derive(Debug, Clone)]
pub struct TxOutput {
    pub signal: BasebandSignal,
    pub frames: Vec<TxFrame>,
    pub papr_db: f64,
    /// Mean power over the waveform relative to [`nominal_power`], in dB.
    pub power_error_db: f64,
}

/// Samples in a burst of `n_frames` frames plus the closing pilot symbol.
pub fn burst_len(n_frames: usize, config: &FrameConfig) -> usize {
    if n_frames == 0 {
        0
    } else {
        (n_frames * config.n_symbols_per_frame + 1) * config.symbol_len()
    }
}

/// Expected mean sample power of a frame: unit power on every occupied
/// subcarrier, orthonormal transform.
pub fn nominal_power(config: &FrameConfig) -> f64 {
    config.occupied_width() as f64 / config.fft_size as f64
}

/// Codes, scrambles, interleaves and maps one transport block.
pub fn encode_frame(block: &TransportBlock, config: &FrameConfig) -> Result<FrameCells> {
    let info = bytes_to_bits(&block.to_bytes());
    let coded_bits = if config.ldpc_rate.is_coded() {
        let code = LdpcCode::standard();
        let mut out = Vec::with_capacity(config.blocks_per_frame() * config.ldpc_rate.block_len());
        for chunk in info.chunks(crate::ldpc::INFO_LEN) {
            out.extend(code.encode(chunk)?.bits);
        }
        out
    } else {
        info
    };
    let symbols = map_coded_bits(&coded_bits, config)?;
    Ok(FrameCells { coded_bits, symbols })
}

/// Filler, scrambling, both interleavers and QAM mapping: the part of the
/// chain after the encoder, giving the frame's data cells in grid order.
pub fn map_coded_bits(coded_bits: &[u8], config: &FrameConfig) -> Result<Vec<Complex64>> {
    let mut frame_bits = coded_bits.to_vec();
    frame_bits.resize(config.bits_per_frame(), 0);
    scramble_bits(&mut frame_bits);
    let interleaved = bit_interleave(&frame_bits, config)?;
    let mapped = qam::qam_map(&interleaved, config.modulation())?;
    symbol_interleave(&mapped, config)
}

/// Full transmit chain from payload bytes to a baseband waveform, one
/// transport block per frame, frames back to back.
pub fn transmit(payload: &[u8], config: &FrameConfig) -> Result<TxOutput> {
    config.validate_link()?;
    let blocks = segment_payload(payload, config);
    let frames: Vec<TxFrame> = blocks
        .into_par_iter()
        .enumerate()
        .map(|(index, block)| {
            let cells = encode_frame(&block, config)?;
            Ok(TxFrame { index, block, cells })
        })
        .collect::<Result<_>>()?;

    let layout = PilotLayout::new(config);
    let pilots = pilot_sequence(&layout, config.pilot_seed);
    let engine = OfdmEngine::for_config(config);
    let mut samples = Vec::with_capacity(burst_len(frames.len(), config));
    let mut closing = None;
    for frame in &frames {
        let grid = ResourceGrid::fill(&layout, &pilots, &frame.cells.symbols)?;
        for s in 0..grid.n_symbols {
            engine.modulate_symbol(grid.symbol(s), &mut samples);
        }
        closing = Some(grid);
    }
    // One more block pilot so the last frame is bracketed like the others.
    if let Some(grid) = closing {
        engine.modulate_symbol(grid.symbol(0), &mut samples);
    }
    let signal = BasebandSignal::new(samples, config.baseband_rate);
    let papr_db = signal.papr_db();
    let power_error_db = 10.0 * (signal.mean_power() / nominal_power(config)).log10();
    Ok(TxOutput {
        signal,
        frames,
        papr_db,
        power_error_db,
    })
}
