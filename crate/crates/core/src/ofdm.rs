//! OFDM symbol assembly and disassembly with orthonormal transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FrameConfig, PilotLayout, PilotSequence, ResourceGrid};
use crate::signal::BasebandSignal;

/// Planned forward and inverse transforms of one size.
#[derive(Clone)]
pub struct OfdmEngine {
    n: usize,
    cp: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmEngine").field("n", &self.n).field("cp", &self.cp).finish()
    }
}

impl OfdmEngine {
    pub fn new(fft_size: usize, cp_len: usize) -> Self {
        let mut planner = FftPlanner::new();
        OfdmEngine {
            n: fft_size,
            cp: cp_len,
            fwd: planner.plan_fft_forward(fft_size),
            inv: planner.plan_fft_inverse(fft_size),
        }
    }

    pub fn for_config(config: &FrameConfig) -> Self {
        Self::new(config.fft_size, config.cp_len)
    }

    /// Appends `cp + n` time samples for one frequency-domain symbol.
    pub fn modulate_symbol(&self, freq: &[Complex64], out: &mut Vec<Complex64>) {
        let mut buf = freq.to_vec();
        self.inv.process(&mut buf);
        let norm = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= norm);
        out.extend_from_slice(&buf[self.n - self.cp..]);
        out.extend_from_slice(&buf);
    }

    /// Forward transform of `n` samples (CP already removed).
    pub fn demodulate_symbol(&self, time: &[Complex64]) -> Vec<Complex64> {
        let mut buf = time[..self.n].to_vec();
        self.fwd.process(&mut buf);
        let norm = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= norm);
        buf
    }

    pub fn modulate_grid(&self, grid: &ResourceGrid) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(grid.n_symbols * (self.n + self.cp));
        for s in 0..grid.n_symbols {
            self.modulate_symbol(grid.symbol(s), &mut out);
        }
        out
    }
}

/// Builds one frame grid from data symbols and pilots and converts it to
/// time samples: `n_symbols * (fft_size + cp_len)` samples.
pub fn ofdm_modulate(
    data_symbols: &[Complex64],
    pilots: &PilotSequence,
    config: &FrameConfig,
    layout: &PilotLayout,
) -> Result<BasebandSignal> {
    let grid = ResourceGrid::fill(layout, pilots, data_symbols)?;
    let engine = OfdmEngine::for_config(config);
    Ok(BasebandSignal::new(engine.modulate_grid(&grid), config.baseband_rate))
}

/// Strips the cyclic prefix of `n_symbols` symbols whose first sample
/// (start of CP) is at `start`, and transforms each.
pub fn ofdm_demodulate(
    bb: &[Complex64],
    config: &FrameConfig,
    start: usize,
    n_symbols: usize,
) -> Result<ResourceGrid> {
    let engine = OfdmEngine::for_config(config);
    demodulate_with(&engine, bb, start, n_symbols)
}

pub fn demodulate_with(
    engine: &OfdmEngine,
    bb: &[Complex64],
    start: usize,
    n_symbols: usize,
) -> Result<ResourceGrid> {
    let sym = engine.n + engine.cp;
    let needed = start + n_symbols * sym;
    if needed > bb.len() {
        return Err(Error::SignalTooShort {
            needed,
            available: bb.len(),
        });
    }
    let mut grid = ResourceGrid::zeros(n_symbols, engine.n);
    for s in 0..n_symbols {
        let at = start + s * sym + engine.cp;
        let freq = engine.demodulate_symbol(&bb[at..at + engine.n]);
        grid.symbol_mut(s).copy_from_slice(&freq);
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{pilot_sequence, CodeRate, Modulation};
    use crate::qam;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> FrameConfig {
        FrameConfig {
            fft_size: 64,
            cp_len: 16,
            block_distance: 3,
            comb_distance: 4,
            n_data_subcarriers: 36,
            n_symbols_per_frame: 8,
            ..FrameConfig::reference(Modulation::Qam64, CodeRate::Uncoded)
        }
    }

    fn random_frame(cfg: &FrameConfig, seed: u64) -> (PilotLayout, PilotSequence, Vec<Complex64>) {
        let layout = PilotLayout::new(cfg);
        let pilots = pilot_sequence(&layout, cfg.pilot_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cfg.data_cells_per_frame() * cfg.bits_per_symbol();
        let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        (layout, pilots, qam::qam_map(&bits, cfg.modulation()).unwrap())
    }

    #[test]
    fn single_subcarrier_is_complex_exponential() {
        let engine = OfdmEngine::new(64, 16);
        let k = 5;
        let mut freq = vec![Complex64::new(0.0, 0.0); 64];
        freq[k] = Complex64::new(1.0, 0.0);
        let mut out = Vec::new();
        engine.modulate_symbol(&freq, &mut out);
        assert_eq!(out.len(), 80);
        for (n, x) in out[16..].iter().enumerate() {
            let expected = Complex64::from_polar(
                1.0 / 8.0,
                2.0 * std::f64::consts::PI * (k * n) as f64 / 64.0,
            );
            assert!((x - expected).norm() < 1e-12);
        }
        for i in 0..16 {
            assert_eq!(out[i], out[64 + i]);
        }
    }

    #[test]
    fn parseval() {
        let cfg = small_config();
        let (layout, pilots, data) = random_frame(&cfg, 1);
        let grid = ResourceGrid::fill(&layout, &pilots, &data).unwrap();
        let engine = OfdmEngine::for_config(&cfg);
        let mut time_energy = 0.0;
        for s in 0..grid.n_symbols {
            let mut out = Vec::new();
            engine.modulate_symbol(grid.symbol(s), &mut out);
            time_energy += out[cfg.cp_len..].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        assert!((time_energy - grid.energy()).abs() / grid.energy() < 1e-9);
    }

    #[test]
    fn round_trip_over_ideal_channel() {
        let cfg = small_config();
        let (layout, pilots, data) = random_frame(&cfg, 2);
        let bb = ofdm_modulate(&data, &pilots, &cfg, &layout).unwrap();
        assert_eq!(bb.len(), cfg.n_symbols_per_frame * cfg.symbol_len());
        let rx = ofdm_demodulate(&bb.samples, &cfg, 0, cfg.n_symbols_per_frame).unwrap();
        let expected = ResourceGrid::fill(&layout, &pilots, &data).unwrap();
        let err: f64 = rx
            .symbols
            .iter()
            .zip(&expected.symbols)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!((err / expected.energy()).sqrt() < 1e-9);
        assert_eq!(rx.data_cells(&layout).len(), data.len());
    }

    #[test]
    fn early_window_inside_cp_is_pure_linear_phase() {
        let cfg = small_config();
        let (layout, pilots, data) = random_frame(&cfg, 3);
        let bb = ofdm_modulate(&data, &pilots, &cfg, &layout).unwrap();
        let tx = ResourceGrid::fill(&layout, &pilots, &data).unwrap();
        // Start 4 samples early: window still inside the CP.
        let mut padded = vec![Complex64::new(0.0, 0.0); 4];
        padded.extend_from_slice(&bb.samples);
        let rx = ofdm_demodulate(&padded, &cfg, 0, cfg.n_symbols_per_frame).unwrap();
        for s in 0..rx.n_symbols {
            for k in 0..cfg.fft_size {
                let a = rx.at(s, k);
                let b = tx.at(s, k);
                assert!((a.norm() - b.norm()).abs() < 1e-9);
                if b.norm() > 0.0 {
                    let signed = crate::grid::signed_bin(k, cfg.fft_size) as f64;
                    let rot = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * signed * 4.0 / 64.0);
                    assert!((a - b * rot).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn zeros_demodulate_to_zeros() {
        let cfg = small_config();
        let rx = ofdm_demodulate(&vec![Complex64::new(0.0, 0.0); 800], &cfg, 0, 10).unwrap();
        assert!(rx.symbols.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cell_count_and_bounds_are_checked() {
        let cfg = small_config();
        let (layout, pilots, data) = random_frame(&cfg, 4);
        assert!(ofdm_modulate(&data[1..], &pilots, &cfg, &layout).is_err());
        assert!(ofdm_demodulate(&vec![Complex64::new(0.0, 0.0); 100], &cfg, 0, 2).is_err());
    }
}
