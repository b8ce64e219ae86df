//! Maximal-ratio combining over receive elements.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::estimate::ChannelEstimate;
use crate::error::{Error, Result};
use crate::grid::{PilotLayout, PilotSequence, ResourceGrid};

/// Cells whose summed channel power falls below this are erased.
pub const ERASURE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// Each element weighted by its gain over its own noise variance.
    #[default]
    Weighted,
    /// Equal noise assumed on every element.
    Unweighted,
}

/// Equalized data cells in reading order with their post-combining noise
/// variance. Erased cells hold zero with infinite variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<Complex64>,
    pub noise_var: Vec<f64>,
}

impl Equalized {
    pub fn erased(&self) -> usize {
        self.noise_var.iter().filter(|v| v.is_infinite()).count()
    }
}

/// Combines the data cells of `grids[e]` using `estimates[e]`. A single
/// element reduces to zero forcing.
pub fn mrc_combine(
    grids: &[&ResourceGrid],
    estimates: &[&ChannelEstimate],
    layout: &PilotLayout,
    mode: CombineMode,
) -> Result<Equalized> {
    if grids.is_empty() {
        return Err(Error::EmptyInput);
    }
    if grids.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            expected: grids.len(),
            actual: estimates.len(),
        });
    }
    let n_symbols = grids[0].n_symbols;
    for (g, h) in grids.iter().zip(estimates) {
        if g.n_symbols != n_symbols || h.n_symbols != n_symbols || h.width != layout.occupied.len() {
            return Err(Error::LengthMismatch {
                expected: n_symbols,
                actual: g.n_symbols.min(h.n_symbols),
            });
        }
    }
    let data_syms: Vec<usize> = (0..n_symbols).filter(|&s| !layout.is_block_pilot(s)).collect();
    let cells = data_syms.len() * layout.data_positions.len();
    let mut symbols = Vec::with_capacity(cells);
    let mut noise_var = Vec::with_capacity(cells);
    for &s in &data_syms {
        for &j in &layout.data_positions {
            let (x, v) = combine_cell(grids, estimates, s, j, layout.occupied[j], mode);
            symbols.push(x);
            noise_var.push(v);
        }
    }
    Ok(Equalized { symbols, noise_var })
}

fn combine_cell(
    grids: &[&ResourceGrid],
    estimates: &[&ChannelEstimate],
    s: usize,
    j: usize,
    bin: usize,
    mode: CombineMode,
) -> (Complex64, f64) {
    const ERASED: (Complex64, f64) = (Complex64::new(0.0, 0.0), f64::INFINITY);
    if grids.len() == 1 {
        let (h, y, nv) = (estimates[0].at(s, j), grids[0].at(s, bin), estimates[0].noise_var);
        let p = h.norm_sqr();
        return if p < ERASURE_GUARD { ERASED } else { (y / h, nv / p) };
    }
    let (mut num, mut den, mut raw, mut spread) = (Complex64::new(0.0, 0.0), 0.0, 0.0, 0.0);
    for (g, est) in grids.iter().zip(estimates) {
        let h = est.at(s, j);
        let p = h.norm_sqr();
        raw += p;
        match mode {
            CombineMode::Weighted => {
                let w = 1.0 / est.noise_var;
                num += h.conj() * g.at(s, bin) * w;
                den += p * w;
            }
            CombineMode::Unweighted => {
                num += h.conj() * g.at(s, bin);
                den += p;
                spread += p * est.noise_var;
            }
        }
    }
    if raw < ERASURE_GUARD || den <= 0.0 {
        return ERASED;
    }
    let var = match mode {
        CombineMode::Weighted => 1.0 / den,
        CombineMode::Unweighted => spread / (den * den),
    };
    (num / den, var)
}

/// Measured post-combining error on the comb pilots of data symbols over
/// the variance the combiner predicts for the same cells. Above one when
/// interference the per-element model ignores (channel estimate error,
/// intersymbol interference correlated across elements) is present.
pub fn comb_error_ratio(
    grids: &[&ResourceGrid],
    estimates: &[&ChannelEstimate],
    layout: &PilotLayout,
    pilots: &PilotSequence,
    mode: CombineMode,
) -> f64 {
    let n_symbols = grids.first().map_or(0, |g| g.n_symbols);
    let (mut err, mut pred) = (0.0, 0.0);
    for s in (0..n_symbols).filter(|&s| !layout.is_block_pilot(s)) {
        for (&j, p) in layout.comb_positions.iter().zip(&pilots.comb) {
            let (x, v) = combine_cell(grids, estimates, s, j, layout.occupied[j], mode);
            if v.is_finite() {
                err += (x - p).norm_sqr();
                pred += v;
            }
        }
    }
    if pred > 0.0 && err.is_finite() {
        err / pred
    } else {
        1.0
    }
}

/// Single-element zero-forcing equalizer.
pub fn zero_force(grid: &ResourceGrid, estimate: &ChannelEstimate, layout: &PilotLayout) -> Result<Equalized> {
    mrc_combine(&[grid], &[estimate], layout, CombineMode::Weighted)
}
