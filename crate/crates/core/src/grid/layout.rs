use serde::{Deserialize, Serialize};

use super::config::FrameConfig;

/// Role of one resource element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellRole {
    Data,
    BlockPilot,
    CombPilot,
    Null,
}

/// Pilot and data placement for one frame.
///
/// Subcarrier lists hold FFT bin numbers and are ordered by signed
/// frequency, lowest first, so that index arithmetic along the list follows
/// the physical band. Bins `fft_size/2..` are negative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    pub fft_size: usize,
    pub n_symbols: usize,
    pub block_pilot_symbol_indices: Vec<usize>,
    pub comb_pilot_subcarrier_indices: Vec<usize>,
    pub data_subcarrier_indices: Vec<usize>,
    pub null_subcarrier_indices: Vec<usize>,
    /// Occupied band in frequency order (data and comb pilots).
    pub occupied: Vec<usize>,
    /// Positions within `occupied` that carry comb pilots.
    pub comb_positions: Vec<usize>,
    /// Positions within `occupied` that carry data.
    pub data_positions: Vec<usize>,
    period: usize,
    bin_roles: Vec<CellRole>,
}

/// Maps an FFT bin to its signed frequency index.
pub fn signed_bin(bin: usize, fft_size: usize) -> i64 {
    if bin < fft_size.div_ceil(2) {
        bin as i64
    } else {
        bin as i64 - fft_size as i64
    }
}

impl PilotLayout {
    /// Places the occupied band symmetrically around a nulled DC bin, marks
    /// every `comb_distance`-th occupied subcarrier (starting with the lowest)
    /// as a comb pilot, and makes symbols `0, D+1, 2(D+1), ...` block pilots.
    pub fn new(config: &FrameConfig) -> Self {
        let n = config.fft_size;
        let width = config.occupied_width();
        let below = width / 2;
        let above = width - below;
        let occupied: Vec<usize> = (0..below)
            .map(|j| n - below + j)
            .chain(1..=above)
            .collect();

        let comb_positions: Vec<usize> = (0..width).step_by(config.comb_distance).collect();
        let data_positions: Vec<usize> = (0..width)
            .filter(|j| j % config.comb_distance != 0)
            .collect();
        debug_assert_eq!(data_positions.len(), config.n_data_subcarriers);

        let mut is_occupied = vec![false; n];
        for &b in &occupied {
            is_occupied[b] = true;
        }
        let mut null: Vec<usize> = (0..n).filter(|&b| !is_occupied[b]).collect();
        null.sort_by_key(|&b| signed_bin(b, n));

        let mut bin_roles = vec![CellRole::Null; n];
        for &j in &comb_positions {
            bin_roles[occupied[j]] = CellRole::CombPilot;
        }
        for &j in &data_positions {
            bin_roles[occupied[j]] = CellRole::Data;
        }

        let period = config.pilot_period();
        PilotLayout {
            fft_size: n,
            n_symbols: config.n_symbols_per_frame,
            block_pilot_symbol_indices: (0..config.n_symbols_per_frame).step_by(period).collect(),
            comb_pilot_subcarrier_indices: comb_positions.iter().map(|&j| occupied[j]).collect(),
            data_subcarrier_indices: data_positions.iter().map(|&j| occupied[j]).collect(),
            null_subcarrier_indices: null,
            occupied,
            comb_positions,
            data_positions,
            period,
            bin_roles,
        }
    }

    pub fn pilot_period(&self) -> usize {
        self.period
    }

    /// Whether symbol `s` of a frame (or of a contiguous frame stream) is a
    /// block-pilot symbol.
    pub fn is_block_pilot(&self, symbol: usize) -> bool {
        symbol % self.period == 0
    }

    pub fn role(&self, symbol: usize, bin: usize) -> CellRole {
        match self.bin_roles[bin] {
            CellRole::Null => CellRole::Null,
            _ if self.is_block_pilot(symbol) => CellRole::BlockPilot,
            role => role,
        }
    }

    /// Signed frequency index of each occupied subcarrier.
    pub fn occupied_frequencies(&self) -> Vec<f64> {
        self.occupied
            .iter()
            .map(|&b| signed_bin(b, self.fft_size) as f64)
            .collect()
    }
}

/// Free function form of [`PilotLayout::new`].
pub fn layout_pilots(config: &FrameConfig) -> PilotLayout {
    PilotLayout::new(config)
}
