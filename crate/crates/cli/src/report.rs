//! Turns receiver output into the run report.

use aofm_core::grid::FrameConfig;
use aofm_core::metrics::{self, BerReport, MetricsReport};
use aofm_core::rx::{CombineMode, FrameLog, Gap, RxOutput};
use aofm_core::tx::TxOutput;
use aofm_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxReport {
    pub manifest_hash: String,
    pub metrics: MetricsReport,
    /// `transmitted` when the sent coded bits were known, otherwise
    /// `decoder` (hard decisions against the re-encoded decoder output).
    pub pre_fec_reference: String,
    pub gaps: Vec<Gap>,
    pub frames: Vec<FrameLog>,
}

fn power_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(metrics::EVM_FLOOR_DB)
    } else {
        metrics::EVM_FLOOR_DB
    }
}

/// Bit errors between a received and a sent payload; bytes missing on
/// either side count as eight errors each.
pub fn payload_ber(received: &[u8], sent: &[u8]) -> BerReport {
    let n = received.len().min(sent.len());
    let common = metrics::byte_ber(&received[..n], &sent[..n]).expect("equal lengths");
    let extra = 8 * received.len().abs_diff(sent.len()) as u64;
    BerReport {
        errors: common.errors + extra,
        bits: common.bits + extra,
    }
}

/// Aggregates per-frame results. `sent` gives the transmitted frames and
/// payload when known (loopback, sweeps).
pub fn metrics_report(
    out: &RxOutput,
    config: &FrameConfig,
    combining: CombineMode,
    sent: Option<(&TxOutput, &[u8])>,
) -> Result<MetricsReport> {
    let symbols: Vec<Complex64> = out.frames.iter().flat_map(|f| f.symbols.iter().copied()).collect();
    let reference: Vec<Complex64> = out.frames.iter().flat_map(|f| f.reference.iter().copied()).collect();
    let evm = metrics::evm(&symbols, &reference)?;

    let n_elements = out.frames.first().map_or(0, |f| f.element_error.len());
    let ref_energy: f64 = reference.iter().map(|c| c.norm_sqr()).sum();
    let element_evm_db = (0..n_elements)
        .map(|e| power_db(out.frames.iter().map(|f| f.element_error[e]).sum::<f64>() / ref_energy))
        .collect();
    let element_snr_db = (0..n_elements)
        .map(|e| {
            let mean = out
                .frames
                .iter()
                .map(|f| 10f64.powf(f.log.element_snr_db[e] / 10.0))
                .sum::<f64>()
                / out.frames.len() as f64;
            10.0 * mean.log10()
        })
        .collect();

    let mut pre = BerReport { errors: 0, bits: 0 };
    for f in &out.frames {
        let truth = match sent {
            Some((tx, _)) => match tx.frames.get(f.log.sequence as usize) {
                Some(t) => &t.cells.coded_bits,
                None => continue,
            },
            None => &f.decoded_bits,
        };
        if truth.len() == f.hard_bits.len() {
            pre = pre.merge(metrics::ber(&f.hard_bits, truth)?);
        }
    }
    let post = sent.map(|(_, payload)| payload_ber(&out.payload, payload));

    let rate = metrics::data_rate(config);
    Ok(MetricsReport {
        modulation: format!("{}-QAM", 1u32 << config.modulation_order),
        code_rate: config.ldpc_rate.to_string(),
        n_rx_elements: n_elements,
        combining: match combining {
            CombineMode::Weighted => "mrc-weighted".into(),
            CombineMode::Unweighted => "mrc-unweighted".into(),
        },
        evm_reference: "rms of transmitted symbols (data-aided when CRC passes)".into(),
        avg_evm_db: evm.avg_db,
        peak_evm_db: evm.peak_db,
        element_evm_db,
        ber_pre_fec: pre,
        ber_post_fec: post,
        payload_rate_mbps: rate.payload_mbps,
        raw_rate_mbps: rate.raw_mbps,
        net_rate_mbps: rate.net_mbps,
        frames_total: out.frames.len(),
        frames_crc_failed: out.crc_failures(),
        element_snr_db,
    })
}
