//! Cyclic-prefix timing and frequency acquisition, and frame-start
//! detection from the block-pilot symbol.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pilot_sequence, FrameConfig, PilotLayout, PilotSequence};
use crate::ofdm::OfdmEngine;
use crate::signal::BasebandSignal;

/// Minimum normalized CP correlation accepted as an OFDM signal.
pub const DEFAULT_SYNC_THRESHOLD: f64 = 0.15;
/// Minimum block-pilot metric accepted as a frame start.
pub const DEFAULT_PILOT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncEstimate {
    /// First sample (start of cyclic prefix) of the frame's pilot symbol.
    pub coarse_sto: usize,
    pub coarse_cfo: f64,
    pub fine_sto: f64,
    pub fine_cfo: f64,
    /// Normalized CP correlation at the chosen timing, in `[0, 1]`.
    pub confidence: f64,
}

/// A detected frame start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSync {
    pub start: usize,
    pub cfo: f64,
    pub confidence: f64,
    pub pilot_metric: f64,
}

/// CP correlation `r(d) = sum_{n<cp} y[d+n] conj(y[d+n+N])` and the matching
/// energy `sum (|y[d+n]|² + |y[d+n+N]|²) / 2` for `d` in `d0..d0+count`,
/// accumulated into `corr` and `energy`.
fn accumulate_cp_metric(
    y: &[Complex64],
    n: usize,
    cp: usize,
    d0: usize,
    corr: &mut [Complex64],
    energy: &mut [f64],
) {
    let count = corr.len();
    let p = |i: usize| y[i] * y[i + n].conj();
    let q = |i: usize| 0.5 * (y[i].norm_sqr() + y[i + n].norm_sqr());
    let mut c: Complex64 = (d0..d0 + cp).map(p).sum();
    let mut e: f64 = (d0..d0 + cp).map(q).sum();
    for k in 0..count {
        corr[k] += c;
        energy[k] += e;
        if k + 1 < count {
            let d = d0 + k;
            c += p(d + cp) - p(d);
            e += q(d + cp) - q(d);
        }
    }
}

/// Folded CP metric: for each timing phase `theta` in `0..span`, sums
/// `r(base + theta + j*L)` over `slots` symbols and all elements.
fn folded_metric(
    elements: &[&[Complex64]],
    config: &FrameConfig,
    base: usize,
    span: usize,
    slots: usize,
) -> (Vec<Complex64>, Vec<f64>) {
    let (n, cp, l) = (config.fft_size, config.cp_len, config.symbol_len());
    let mut corr = vec![Complex64::new(0.0, 0.0); span];
    let mut energy = vec![0.0; span];
    for y in elements {
        for j in 0..slots {
            accumulate_cp_metric(y, n, cp, base + j * l, &mut corr, &mut energy);
        }
    }
    (corr, energy)
}

fn best_phase(corr: &[Complex64], energy: &[f64]) -> (usize, f64) {
    let (theta, _) = corr
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, c)| if c.norm() > bv { (i, c.norm()) } else { (bi, bv) });
    let rho = if energy[theta] > 0.0 {
        (corr[theta].norm() / energy[theta]).min(1.0)
    } else {
        0.0
    };
    (theta, rho)
}

fn cfo_from_corr(c: Complex64, config: &FrameConfig) -> f64 {
    -c.arg() / (2.0 * PI) * config.subcarrier_spacing()
}

/// Shared state for frame detection over one set of element signals.
pub struct FrameDetector<'a> {
    elements: Vec<&'a [Complex64]>,
    config: &'a FrameConfig,
    layout: PilotLayout,
    pilots: PilotSequence,
    engine: OfdmEngine,
    pub sync_threshold: f64,
    pub pilot_threshold: f64,
}

impl<'a> FrameDetector<'a> {
    pub fn new(elements: Vec<&'a [Complex64]>, config: &'a FrameConfig) -> Self {
        let layout = PilotLayout::new(config);
        let pilots = pilot_sequence(&layout, config.pilot_seed);
        FrameDetector {
            elements,
            config,
            layout,
            pilots,
            engine: OfdmEngine::for_config(config),
            sync_threshold: DEFAULT_SYNC_THRESHOLD,
            pilot_threshold: DEFAULT_PILOT_THRESHOLD,
        }
    }

    /// Samples available on every element.
    pub fn len(&self) -> usize {
        self.elements.iter().map(|e| e.len()).min().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Diagnostic for a signal in which no frame was found: the best CP
    /// correlation over the first frame window.
    pub fn failure(&self) -> Error {
        let slots = self.slots_from(0).clamp(1, self.config.n_symbols_per_frame + 1);
        let confidence = if self.slots_from(0) == 0 {
            0.0
        } else {
            let (corr, energy) = folded_metric(&self.elements, self.config, 0, self.config.symbol_len(), slots);
            best_phase(&corr, &energy).1
        };
        Error::SyncNotFound {
            confidence,
            threshold: self.sync_threshold,
        }
    }

    /// Number of whole symbol slots starting at `pos` whose CP metric can
    /// be evaluated at every timing phase.
    fn slots_from(&self, pos: usize) -> usize {
        let (n, cp, l) = (self.config.fft_size, self.config.cp_len, self.config.symbol_len());
        (self.len() + 1).saturating_sub(pos + cp + n) / l
    }

    /// Differential block-pilot metric of the symbol starting at `start`
    /// after removing `cfo`. Near 1 on a pilot symbol, near 0 on data.
    pub fn pilot_metric(&self, start: usize, cfo: f64) -> f64 {
        let (n, cp) = (self.config.fft_size, self.config.cp_len);
        if start + cp + n > self.len() {
            return 0.0;
        }
        let w = -2.0 * PI * cfo / self.config.baseband_rate;
        let (mut num, mut den) = (0.0, 0.0);
        for y in &self.elements {
            let at = start + cp;
            let time: Vec<Complex64> = (0..n)
                .map(|i| y[at + i] * Complex64::from_polar(1.0, w * (at + i) as f64))
                .collect();
            let freq = self.engine.demodulate_symbol(&time);
            let z: Vec<Complex64> = self
                .layout
                .occupied
                .iter()
                .zip(&self.pilots.block)
                .map(|(&b, p)| freq[b] * p.conj())
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..z.len() - 1 {
                acc += z[k] * z[k + 1].conj();
                den += z[k].norm() * z[k + 1].norm();
            }
            num += acc.norm();
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Searches forward from `from` for the next frame start.
    pub fn acquire(&self, from: usize) -> Option<FrameSync> {
        let l = self.config.symbol_len();
        let frame = self.config.n_symbols_per_frame * l;
        let mut pos = from;
        loop {
            let slots = self.slots_from(pos).min(self.config.n_symbols_per_frame + 1);
            if slots < 2 {
                return None;
            }
            let (corr, energy) = folded_metric(&self.elements, self.config, pos, l, slots);
            let (theta, rho) = best_phase(&corr, &energy);
            if rho >= self.sync_threshold {
                let cfo = cfo_from_corr(corr[theta], self.config);
                let metrics: Vec<(usize, f64)> = (0..slots)
                    .map(|j| pos + theta + j * l)
                    .map(|t| (t, self.pilot_metric(t, cfo)))
                    .collect();
                let best = metrics.iter().map(|m| m.1).fold(0.0, f64::max);
                // Earliest strong candidate: the window can hold two pilots.
                let accept = self.pilot_threshold.max(0.5 * best);
                if let Some(&(start, metric)) = metrics.iter().find(|m| m.1 >= accept) {
                    return Some(FrameSync {
                        start,
                        cfo,
                        confidence: rho,
                        pilot_metric: metric,
                    });
                }
            }
            pos += frame / 2;
        }
    }

    /// Re-times a frame expected at `expected`, searching ±cp/2 samples.
    pub fn track(&self, expected: usize) -> Option<FrameSync> {
        let l = self.config.symbol_len();
        let half = self.config.cp_len / 2;
        let base = expected.saturating_sub(half);
        let span = expected + half + 1 - base;
        let slots = self.config.n_symbols_per_frame;
        let last = base + span + (slots - 1) * l + self.config.cp_len + self.config.fft_size;
        if last > self.len() + 1 {
            return None;
        }
        let (corr, energy) = folded_metric(&self.elements, self.config, base, span, slots);
        let (theta, rho) = best_phase(&corr, &energy);
        let start = base + theta;
        let cfo = cfo_from_corr(corr[theta], self.config);
        let metric = self.pilot_metric(start, cfo);
        (rho >= self.sync_threshold && metric >= self.pilot_threshold).then_some(FrameSync {
            start,
            cfo,
            confidence: rho,
            pilot_metric: metric,
        })
    }
}

/// Coarse timing and frequency of the first frame in a single-element signal.
pub fn coarse_sync(bb: &BasebandSignal, config: &FrameConfig) -> Result<SyncEstimate> {
    coarse_sync_multi(&[bb.samples.as_slice()], config)
}

/// Coarse timing and frequency of the first frame, metrics summed over
/// elements.
pub fn coarse_sync_multi(elements: &[&[Complex64]], config: &FrameConfig) -> Result<SyncEstimate> {
    let available = elements.iter().map(|e| e.len()).min().unwrap_or(0);
    let needed = 2 * config.symbol_len();
    if available < needed {
        return Err(Error::SignalTooShort { needed, available });
    }
    let detector = FrameDetector::new(elements.to_vec(), config);
    match detector.acquire(0) {
        Some(s) => Ok(SyncEstimate {
            coarse_sto: s.start,
            coarse_cfo: s.cfo,
            fine_sto: 0.0,
            fine_cfo: 0.0,
            confidence: s.confidence,
        }),
        None => Err(detector.failure()),
    }
}
