//! Frame loop: detection, per-frame estimation, combining, demapping,
//! decoding and payload reassembly.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::combine::{comb_error_ratio, mrc_combine, zero_force, CombineMode, Equalized};
use super::estimate::{
    apply_fine_correction, estimate_channel, fine_cfo_estimate_multi, fine_sto_estimate, refine_channel,
    ChannelEstimate,
};
use super::window::{delay_profile, window_shift};
use super::sync::{FrameDetector, FrameSync, SyncEstimate, DEFAULT_PILOT_THRESHOLD, DEFAULT_SYNC_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::{pilot_sequence, FrameConfig, PilotLayout, PilotSequence, ResourceGrid};
use crate::ldpc::{LdpcCode, INFO_LEN};
use crate::metrics;
use crate::ofdm::{demodulate_with, OfdmEngine};
use crate::qam;
use crate::signal::BasebandSignal;
use crate::tx::interleave::{bit_deinterleave, symbol_deinterleave};
use crate::tx::scramble::descramble_llrs;
use crate::tx::transport::{bits_to_bytes, crc_check, TransportBlock};
use crate::tx::{encode_frame, map_coded_bits, FrameCells};

/// Default number of decision-directed re-estimation passes tried on a
/// frame that fails CRC.
pub const REFINE_PASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub combining: CombineMode,
    pub max_iterations: usize,
    pub sync_threshold: f64,
    pub pilot_threshold: f64,
    /// Decision-directed re-estimation passes allowed on a frame that fails
    /// CRC; 0 keeps the pilot-only estimate.
    pub refine_passes: usize,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            combining: CombineMode::Weighted,
            max_iterations: 50,
            sync_threshold: DEFAULT_SYNC_THRESHOLD,
            pilot_threshold: DEFAULT_PILOT_THRESHOLD,
            refine_passes: REFINE_PASSES,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be at least 1"));
        }
        for (name, v) in [("sync_threshold", self.sync_threshold), ("pilot_threshold", self.pilot_threshold)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Per-frame diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    /// Frame position counted from the first detected frame.
    pub position: usize,
    /// First sample of the frame on the receive timeline, after window
    /// placement.
    pub start: usize,
    /// Samples the FFT window was moved from the CP-correlation estimate.
    pub window_shift: i64,
    /// Sequence number of the decoded block, or inferred from position.
    pub sequence: u32,
    pub crc_ok: bool,
    pub sync: SyncEstimate,
    pub pilot_metric: f64,
    /// Whether the next frame's pilot bounded the channel interpolation.
    pub lookahead: bool,
    pub element_snr_db: Vec<f64>,
    pub evm: metrics::Evm,
    pub blocks: usize,
    pub blocks_converged: usize,
    pub mean_iterations: f64,
    pub erased_cells: usize,
    /// Factor applied to the combiner's noise variance after the comb-pilot
    /// check.
    pub noise_scale: f64,
    /// Decision-directed channel re-estimation passes kept for this frame.
    pub refinements: usize,
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub log: FrameLog,
    pub block: Option<TransportBlock>,
    /// Equalized data cells in grid reading order.
    pub symbols: Vec<Complex64>,
    pub noise_var: Vec<f64>,
    /// Transmitted cells re-encoded from a CRC-valid block, otherwise the
    /// nearest constellation points.
    pub reference: Vec<Complex64>,
    pub data_aided: bool,
    /// Hard decisions on the coded bits before decoding.
    pub hard_bits: Vec<u8>,
    /// Coded bits re-encoded from the decoder output.
    pub decoded_bits: Vec<u8>,
    /// Zero-forcing error energy of each element against `reference`.
    pub element_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub sequence: u32,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone)]
pub struct RxOutput {
    pub frames: Vec<FrameResult>,
    pub payload: Vec<u8>,
    pub gaps: Vec<Gap>,
}

impl RxOutput {
    pub fn crc_failures(&self) -> usize {
        self.frames.iter().filter(|f| !f.log.crc_ok).count()
    }
}

struct Context<'a> {
    config: &'a FrameConfig,
    rx: &'a ReceiverConfig,
    layout: PilotLayout,
    pilots: PilotSequence,
    engine: OfdmEngine,
}

/// Removes a carrier offset over `len` samples from `start`, phase
/// referenced to sample zero of the stream.
fn derotate(y: &[Complex64], start: usize, len: usize, cfo: f64, rate: f64) -> Vec<Complex64> {
    let w = -2.0 * PI * cfo / rate;
    y[start..start + len]
        .iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, w * (start + i) as f64))
        .collect()
}

fn slice(symbols: &[Complex64], modulation: crate::grid::Modulation) -> Vec<Complex64> {
    let bits = qam::hard_decisions(&qam::qam_demap(symbols, modulation, &[1.0]));
    qam::qam_map(&bits, modulation).expect("whole symbols")
}

impl Context<'_> {
    /// Moves the frame start so the delay profile seen in the leading pilot
    /// spills least past the guard interval. Returns the new start and
    /// whether the lookahead pilot still fits.
    fn place_window(&self, elements: &[&[Complex64]], sync: &FrameSync, lookahead: bool) -> (usize, bool) {
        let cfg = self.config;
        let (n, cp) = (cfg.fft_size, cfg.cp_len);
        let spectra: Vec<Vec<Complex64>> = elements
            .par_iter()
            .map(|y| {
                let t = derotate(y, sync.start + cp, n, sync.cfo, cfg.baseband_rate);
                self.engine.demodulate_symbol(&t)
            })
            .collect();
        let views: Vec<&[Complex64]> = spectra.iter().map(Vec::as_slice).collect();
        let shift = window_shift(&delay_profile(&views, &self.layout, &self.pilots), cp, cp);
        let available = elements.iter().map(|y| y.len()).min().unwrap_or(0);
        let l = cfg.symbol_len();
        let frame = cfg.n_symbols_per_frame * l;
        let start = sync.start as i64 + shift;
        if start < 0 {
            return (sync.start, lookahead);
        }
        let start = start as usize;
        if lookahead && start + frame + l <= available {
            (start, true)
        } else if start + frame <= available {
            (start, false)
        } else {
            (sync.start, lookahead)
        }
    }

    fn process(&self, elements: &[&[Complex64]], sync: FrameSync, lookahead: bool, position: usize) -> Result<FrameResult> {
        let cfg = self.config;
        let l = cfg.symbol_len();
        let (start, lookahead) = self.place_window(elements, &sync, lookahead);
        let n_grid = cfg.n_symbols_per_frame + usize::from(lookahead);
        let grids: Vec<ResourceGrid> = elements
            .par_iter()
            .map(|y| {
                let window = derotate(y, start, n_grid * l, sync.cfo, cfg.baseband_rate);
                demodulate_with(&self.engine, &window, 0, n_grid)
            })
            .collect::<Result<_>>()?;

        let refs: Vec<&ResourceGrid> = grids.iter().collect();
        let fine_cfo = fine_cfo_estimate_multi(&refs, &self.layout, &self.pilots, cfg)?;
        let corrected: Vec<(ResourceGrid, ChannelEstimate, f64)> = grids
            .par_iter()
            .map(|g| {
                let sto = fine_sto_estimate(g, &self.layout, &self.pilots, cfg)?;
                let c = apply_fine_correction(g, fine_cfo, sto, cfg);
                let est = estimate_channel(&c, &self.layout, &self.pilots, cfg)?;
                Ok((c, est, sto))
            })
            .collect::<Result<_>>()?;
        drop(grids);

        let mut corrected = corrected;
        let gs: Vec<&ResourceGrid> = corrected.iter().map(|c| &c.0).collect();
        let es: Vec<&ChannelEstimate> = corrected.iter().map(|c| &c.1).collect();
        let (mut eq, mut noise_scale) = self.combine(&gs, &es)?;
        let mut decoded = self.decode(&eq)?;
        let mut refinements = 0;
        while decoded.block.is_none() && refinements < self.rx.refine_passes && !decoded.cells.symbols.is_empty() {
            let reference = self.reference_grid(&decoded.cells.symbols, n_grid)?;
            let estimates: Vec<ChannelEstimate> = corrected
                .par_iter()
                .map(|(g, _, _)| refine_channel(g, &reference, &self.layout))
                .collect::<Result<_>>()?;
            let gs: Vec<&ResourceGrid> = corrected.iter().map(|c| &c.0).collect();
            let (cand_eq, cand_scale) = self.combine(&gs, &estimates.iter().collect::<Vec<_>>())?;
            let cand = self.decode(&cand_eq)?;
            // Wrong decisions make a worse reference; keep a pass only if
            // the decoder did better with it.
            if cand.block.is_none() && cand.converged <= decoded.converged {
                break;
            }
            for (c, e) in corrected.iter_mut().zip(estimates) {
                c.1 = e;
            }
            (eq, noise_scale, decoded) = (cand_eq, cand_scale, cand);
            refinements += 1;
        }
        let es: Vec<&ChannelEstimate> = corrected.iter().map(|c| &c.1).collect();

        let modulation = cfg.modulation();
        let (reference, data_aided) = match &decoded.block {
            Some(_) => (decoded.cells.symbols.clone(), true),
            None => (slice(&eq.symbols, modulation), false),
        };
        let element_error: Vec<f64> = corrected
            .par_iter()
            .map(|(g, est, _)| {
                let zf = zero_force(g, est, &self.layout)?;
                Ok(zf
                    .symbols
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum())
            })
            .collect::<Result<_>>()?;
        let evm = metrics::evm(&eq.symbols, &reference)?;
        let mean_sto = corrected.iter().map(|c| c.2).sum::<f64>() / corrected.len() as f64;

        let log = FrameLog {
            position,
            start,
            window_shift: start as i64 - sync.start as i64,
            sequence: decoded.block.as_ref().map_or(0, |b| b.sequence_number),
            crc_ok: decoded.block.is_some(),
            sync: SyncEstimate {
                coarse_sto: sync.start,
                coarse_cfo: sync.cfo,
                fine_sto: mean_sto,
                fine_cfo,
                confidence: sync.confidence,
            },
            pilot_metric: sync.pilot_metric,
            lookahead,
            element_snr_db: es.iter().map(|e| e.snr_db()).collect(),
            evm,
            blocks: cfg.blocks_per_frame(),
            blocks_converged: decoded.converged,
            mean_iterations: decoded.iterations as f64 / cfg.blocks_per_frame().max(1) as f64,
            erased_cells: eq.erased(),
            noise_scale,
            refinements,
        };
        Ok(FrameResult {
            log,
            block: decoded.block,
            symbols: eq.symbols,
            noise_var: eq.noise_var,
            reference,
            data_aided,
            hard_bits: decoded.hard_bits,
            decoded_bits: decoded.cells.coded_bits,
            element_error,
        })
    }

    /// Combines and widens the modelled noise by the comb-pilot check. Only
    /// ever widens: the check sees interference the per-element model leaves
    /// out.
    fn combine(&self, grids: &[&ResourceGrid], estimates: &[&ChannelEstimate]) -> Result<(Equalized, f64)> {
        let mut eq = mrc_combine(grids, estimates, &self.layout, self.rx.combining)?;
        let scale = comb_error_ratio(grids, estimates, &self.layout, &self.pilots, self.rx.combining).max(1.0);
        eq.noise_var.iter_mut().for_each(|v| *v *= scale);
        Ok((eq, scale))
    }

    /// Transmitted grid implied by `data` cells, with the lookahead pilot
    /// appended when the frame grid has one.
    fn reference_grid(&self, data: &[Complex64], n_grid: usize) -> Result<ResourceGrid> {
        let frame = ResourceGrid::fill(&self.layout, &self.pilots, data)?;
        let mut grid = ResourceGrid::with_layout(&self.layout, n_grid);
        let n = self.layout.fft_size;
        grid.symbols[..frame.symbols.len()].copy_from_slice(&frame.symbols);
        for s in frame.n_symbols..n_grid {
            grid.symbols.copy_within(0..n, s * n);
        }
        Ok(grid)
    }

    fn decode(&self, eq: &Equalized) -> Result<Decoded> {
        let cfg = self.config;
        let symbols = symbol_deinterleave(&eq.symbols, cfg)?;
        let noise = symbol_deinterleave(&eq.noise_var, cfg)?;
        let llrs = qam::qam_demap(&symbols, cfg.modulation(), &noise);
        let mut llrs = bit_deinterleave(&llrs, cfg)?;
        descramble_llrs(&mut llrs);
        let block_len = cfg.ldpc_rate.block_len();
        let coded = &llrs[..cfg.blocks_per_frame() * block_len];
        let hard_bits = qam::hard_decisions(coded);

        let (info, converged, iterations) = if cfg.ldpc_rate.is_coded() {
            let code = LdpcCode::standard();
            let outcomes: Vec<_> = coded
                .par_chunks(block_len)
                .map(|c| code.decode(c, self.rx.max_iterations))
                .collect::<Result<_>>()?;
            let info: Vec<u8> = outcomes.iter().flat_map(|o| o.info.iter().copied()).collect();
            let converged = outcomes.iter().filter(|o| o.converged).count();
            let iterations = outcomes.iter().map(|o| o.iterations).sum();
            (info, converged, iterations)
        } else {
            (hard_bits.clone(), cfg.blocks_per_frame(), 0)
        };
        debug_assert_eq!(info.len(), cfg.blocks_per_frame() * INFO_LEN);
        let bytes = bits_to_bytes(&info);
        let block = TransportBlock::from_bytes(&bytes).filter(crc_check);
        // Re-encode whatever the decoder produced as the pre-FEC reference.
        let cells = match &block {
            Some(b) => encode_frame(b, cfg)?,
            None => reencode_raw(&bytes, cfg).unwrap_or(FrameCells {
                coded_bits: hard_bits.clone(),
                symbols: Vec::new(),
            }),
        };
        Ok(Decoded {
            block,
            hard_bits,
            cells,
            converged,
            iterations,
        })
    }
}

struct Decoded {
    block: Option<TransportBlock>,
    hard_bits: Vec<u8>,
    cells: FrameCells,
    converged: usize,
    iterations: usize,
}

/// Coded bits of an arbitrary information byte string.
fn reencode_raw(bytes: &[u8], config: &FrameConfig) -> Option<FrameCells> {
    let info = crate::tx::transport::bytes_to_bits(bytes);
    let coded_bits = if config.ldpc_rate.is_coded() {
        let code = LdpcCode::standard();
        let mut out = Vec::with_capacity(config.blocks_per_frame() * config.ldpc_rate.block_len());
        for chunk in info.chunks(INFO_LEN) {
            out.extend(code.encode(chunk).ok()?.bits);
        }
        out
    } else {
        info
    };
    let symbols = map_coded_bits(&coded_bits, config).ok()?;
    Some(FrameCells { coded_bits, symbols })
}

/// Runs the receiver over time-aligned element signals.
pub fn receive(elements: &[BasebandSignal], config: &FrameConfig, rx: &ReceiverConfig) -> Result<RxOutput> {
    config.validate_link()?;
    rx.validate()?;
    let first = elements.first().ok_or(Error::EmptyInput)?;
    for e in elements {
        if e.rate != config.baseband_rate {
            return Err(Error::invalid(
                "baseband_rate",
                format!("signal at {} Hz, configuration expects {} Hz", e.rate, config.baseband_rate),
            ));
        }
    }
    let views: Vec<&[Complex64]> = elements.iter().map(|e| e.samples.as_slice()).collect();
    let l = config.symbol_len();
    let frame = config.n_symbols_per_frame * l;
    let available = views.iter().map(|v| v.len()).min().unwrap_or(first.len());
    if available < frame {
        return Err(Error::SignalTooShort {
            needed: frame,
            available,
        });
    }

    let mut detector = FrameDetector::new(views.clone(), config);
    detector.sync_threshold = rx.sync_threshold;
    detector.pilot_threshold = rx.pilot_threshold;
    let layout = PilotLayout::new(config);
    let pilots = pilot_sequence(&layout, config.pilot_seed);
    let ctx = Context {
        config,
        rx,
        layout,
        pilots,
        engine: OfdmEngine::for_config(config),
    };

    let mut sync = detector.acquire(0).ok_or_else(|| detector.failure())?;
    let origin = sync.start;
    let mut frames = Vec::new();
    loop {
        if sync.start + frame > available {
            break;
        }
        let next = sync.start + frame;
        let lookahead = next + l <= available && detector.pilot_metric(next, sync.cfo) >= rx.pilot_threshold;
        let position = ((sync.start - origin) as f64 / frame as f64).round() as usize;
        frames.push(ctx.process(&views, sync, lookahead, position)?);
        let half = config.cp_len / 2;
        let found = detector
            .track(next)
            .or_else(|| detector.acquire(next.saturating_sub(config.cp_len)));
        match found {
            Some(s) if s.start > sync.start + half => sync = s,
            _ => break,
        }
    }

    let (payload, gaps) = assemble(&mut frames, config.tb_capacity_bytes());
    Ok(RxOutput { frames, payload, gaps })
}

/// Places CRC-valid blocks by sequence number and zero-fills the rest.
/// Failed frames get a sequence number inferred from their position.
fn assemble(frames: &mut [FrameResult], capacity: usize) -> (Vec<u8>, Vec<Gap>) {
    let offset = frames
        .iter()
        .find_map(|f| f.block.as_ref().map(|b| b.sequence_number as i64 - f.log.position as i64))
        .unwrap_or(0);
    let mut good: BTreeMap<u32, &[u8]> = BTreeMap::new();
    let mut last = None;
    for f in frames.iter_mut() {
        if f.block.is_none() {
            f.log.sequence = (f.log.position as i64 + offset).max(0) as u32;
        }
        last = last.max(Some(f.log.sequence));
    }
    for f in frames.iter() {
        if let Some(b) = &f.block {
            good.entry(b.sequence_number).or_insert(&b.payload);
        }
    }
    let mut payload = Vec::new();
    let mut gaps = Vec::new();
    if let Some(last) = last {
        for seq in 0..=last {
            match good.get(&seq) {
                Some(p) => payload.extend_from_slice(p),
                None => {
                    gaps.push(Gap {
                        sequence: seq,
                        offset: payload.len() as u64,
                        length: capacity as u64,
                    });
                    payload.resize(payload.len() + capacity, 0);
                }
            }
        }
    }
    (payload, gaps)
}
