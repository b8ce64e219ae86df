//! EVM, bit error ratio and throughput figures, and constellation export.

use std::fmt;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrameConfig;

/// Reported in place of minus infinity for an error-free constellation.
pub const EVM_FLOOR_DB: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evm {
    pub avg_db: f64,
    pub peak_db: f64,
}

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (20.0 * ratio.log10()).max(EVM_FLOOR_DB)
    } else {
        EVM_FLOOR_DB
    }
}

/// Error vector magnitude against a reference, normalized to the RMS of the
/// reference. Average uses the RMS error, peak the largest error.
pub fn evm(equalized: &[Complex64], reference: &[Complex64]) -> Result<Evm> {
    if equalized.is_empty() {
        return Err(Error::EmptyInput);
    }
    if equalized.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: equalized.len(),
        });
    }
    let n = reference.len() as f64;
    let ref_rms = (reference.iter().map(|c| c.norm_sqr()).sum::<f64>() / n).sqrt();
    let (mut sum, mut peak) = (0.0, 0.0f64);
    for (y, x) in equalized.iter().zip(reference) {
        let e = (y - x).norm_sqr();
        sum += e;
        peak = peak.max(e);
    }
    Ok(Evm {
        avg_db: to_db((sum / n).sqrt() / ref_rms),
        peak_db: to_db(peak.sqrt() / ref_rms),
    })
}

/// Bit error count with the ratio, or an upper bound of `1/bits` when no
/// error was seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub errors: u64,
    pub bits: u64,
}

impl BerReport {
    pub fn ratio(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// `Some(1/bits)` when no error was observed.
    pub fn bound(&self) -> Option<f64> {
        (self.errors == 0 && self.bits > 0).then(|| 1.0 / self.bits as f64)
    }

    pub fn merge(self, other: BerReport) -> BerReport {
        BerReport {
            errors: self.errors + other.errors,
            bits: self.bits + other.bits,
        }
    }
}

impl fmt::Display for BerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bound() {
            Some(b) => write!(f, "< {b:.0e}"),
            None => write!(f, "{:.2e}", self.ratio()),
        }
    }
}

pub fn ber(rx_bits: &[u8], tx_bits: &[u8]) -> Result<BerReport> {
    if rx_bits.len() != tx_bits.len() {
        return Err(Error::LengthMismatch {
            expected: tx_bits.len(),
            actual: rx_bits.len(),
        });
    }
    let errors = rx_bits.iter().zip(tx_bits).filter(|(a, b)| (*a & 1) != (*b & 1)).count();
    Ok(BerReport {
        errors: errors as u64,
        bits: rx_bits.len() as u64,
    })
}

/// Bit errors between two byte strings, compared bit by bit.
pub fn byte_ber(rx: &[u8], tx: &[u8]) -> Result<BerReport> {
    if rx.len() != tx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    let errors: u32 = rx.iter().zip(tx).map(|(a, b)| (a ^ b).count_ones()).sum();
    Ok(BerReport {
        errors: errors as u64,
        bits: 8 * rx.len() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataRate {
    /// Coded bits per second on data cells, block-pilot symbols excluded.
    pub raw_mbps: f64,
    /// `raw_mbps` times the code rate.
    pub payload_mbps: f64,
    /// Transport-block payload after header, CRC, padding and filler bits.
    pub net_mbps: f64,
}

pub fn data_rate(config: &FrameConfig) -> DataRate {
    let raw = config.data_cell_rate() * config.bits_per_symbol() as f64;
    let frame_seconds = config.n_symbols_per_frame as f64 * config.symbol_duration();
    DataRate {
        raw_mbps: raw / 1e6,
        payload_mbps: raw * config.ldpc_rate.as_f64() / 1e6,
        net_mbps: config.tb_capacity_bytes() as f64 * 8.0 / frame_seconds / 1e6,
    }
}

/// Whole-run receiver figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub modulation: String,
    pub code_rate: String,
    pub n_rx_elements: usize,
    pub combining: String,
    /// EVM normalization reference.
    pub evm_reference: String,
    pub avg_evm_db: f64,
    pub peak_evm_db: f64,
    /// Per-element zero-forcing EVM, for comparison with the combined value.
    pub element_evm_db: Vec<f64>,
    pub ber_pre_fec: BerReport,
    pub ber_post_fec: Option<BerReport>,
    pub payload_rate_mbps: f64,
    pub raw_rate_mbps: f64,
    pub net_rate_mbps: f64,
    pub frames_total: usize,
    pub frames_crc_failed: usize,
    pub element_snr_db: Vec<f64>,
}

/// Writes symbols as `i,q` CSV rows and a JSON sidecar next to it
/// (`<path>.json`) holding `meta` and the EVM against `reference`.
pub fn constellation_export(
    symbols: &[Complex64],
    reference: Option<&[Complex64]>,
    meta: serde_json::Value,
    path: &Path,
) -> Result<()> {
    if symbols.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "i,q")?;
    for c in symbols {
        writeln!(w, "{},{}", c.re as f32, c.im as f32)?;
    }
    w.flush()?;
    let evm = reference.map(|r| evm(symbols, r)).transpose()?;
    let sidecar = serde_json::json!({
        "symbols": symbols.len(),
        "evm": evm,
        "meta": meta,
    });
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Parses a constellation CSV written by [`constellation_export`].
pub fn read_constellation(path: &Path) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .map(|line| {
            let (i, q) = line
                .split_once(',')
                .ok_or_else(|| Error::invalid("csv", format!("bad row `{line}`")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<f32>()
                    .map_err(|e| Error::invalid("csv", e.to_string()))
            };
            Ok(Complex64::new(parse(i)? as f64, parse(q)? as f64))
        })
        .collect()
}
