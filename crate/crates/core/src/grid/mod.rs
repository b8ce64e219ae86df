//! Frame geometry: configuration, pilot placement, pilot values and the
//! resource grid container.

pub mod config;
pub mod layout;
pub mod pilots;

use num_complex::Complex64;

pub use config::{build_frame_config, CodeRate, FrameConfig, Modulation};
pub use layout::{layout_pilots, signed_bin, CellRole, PilotLayout};
pub use pilots::{pilot_sequence, PilotSequence, Prbs15};

use crate::error::{Error, Result};

/// Complex cells indexed `(symbol, fft bin)` with a parallel role array.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub n_symbols: usize,
    pub fft_size: usize,
    pub symbols: Vec<Complex64>,
    pub roles: Vec<CellRole>,
}

impl ResourceGrid {
    pub fn zeros(n_symbols: usize, fft_size: usize) -> Self {
        ResourceGrid {
            n_symbols,
            fft_size,
            symbols: vec![Complex64::new(0.0, 0.0); n_symbols * fft_size],
            roles: vec![CellRole::Null; n_symbols * fft_size],
        }
    }

    /// Empty grid whose roles follow `layout` for symbols `0..n_symbols`
    /// (block pilots recur past the end of a single frame).
    pub fn with_layout(layout: &PilotLayout, n_symbols: usize) -> Self {
        let mut grid = Self::zeros(n_symbols, layout.fft_size);
        for s in 0..n_symbols {
            for b in 0..layout.fft_size {
                grid.roles[s * layout.fft_size + b] = layout.role(s, b);
            }
        }
        grid
    }

    pub fn symbol(&self, s: usize) -> &[Complex64] {
        &self.symbols[s * self.fft_size..(s + 1) * self.fft_size]
    }

    pub fn symbol_mut(&mut self, s: usize) -> &mut [Complex64] {
        &mut self.symbols[s * self.fft_size..(s + 1) * self.fft_size]
    }

    pub fn at(&self, s: usize, bin: usize) -> Complex64 {
        self.symbols[s * self.fft_size + bin]
    }

    /// Places data symbols (reading order: symbol-major, data subcarriers in
    /// frequency order) and pilots into a frame grid.
    pub fn fill(
        layout: &PilotLayout,
        pilots: &PilotSequence,
        data: &[Complex64],
    ) -> Result<Self> {
        let n_data_symbols = (0..layout.n_symbols)
            .filter(|&s| !layout.is_block_pilot(s))
            .count();
        let expected = n_data_symbols * layout.data_positions.len();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        let mut grid = Self::with_layout(layout, layout.n_symbols);
        let mut cells = data.iter();
        for s in 0..layout.n_symbols {
            let row = grid.symbol_mut(s);
            if layout.is_block_pilot(s) {
                for (&bin, &p) in layout.occupied.iter().zip(&pilots.block) {
                    row[bin] = p;
                }
            } else {
                for (&j, &p) in layout.comb_positions.iter().zip(&pilots.comb) {
                    row[layout.occupied[j]] = p;
                }
                for &j in &layout.data_positions {
                    row[layout.occupied[j]] = *cells.next().expect("length checked");
                }
            }
        }
        Ok(grid)
    }

    /// Data cells in reading order.
    pub fn data_cells(&self, layout: &PilotLayout) -> Vec<Complex64> {
        let mut out = Vec::new();
        for s in (0..self.n_symbols).filter(|&s| !layout.is_block_pilot(s)) {
            let row = self.symbol(s);
            out.extend(layout.data_positions.iter().map(|&j| row[layout.occupied[j]]));
        }
        out
    }

    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Result of the coherence-time rule of thumb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherenceTime {
    Seconds(f64),
    /// Stationary platform: the channel never decorrelates.
    Unbounded,
}

/// `T_c ≈ c / (v · f_c)`.
pub fn coherence_time(sound_speed: f64, platform_speed: f64, carrier: f64) -> Result<CoherenceTime> {
    if !(sound_speed > 0.0) {
        return Err(Error::invalid("sound_speed", "must be positive"));
    }
    if !(carrier > 0.0) {
        return Err(Error::invalid("carrier", "must be positive"));
    }
    if platform_speed == 0.0 {
        return Ok(CoherenceTime::Unbounded);
    }
    if !(platform_speed > 0.0) {
        return Err(Error::invalid("platform_speed", "must be non-negative"));
    }
    Ok(CoherenceTime::Seconds(sound_speed / (platform_speed * carrier)))
}
