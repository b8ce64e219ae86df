//! Sweep campaigns: one full loopback per grid point, rows in grid order.

use std::path::Path;

use aofm_core::channel::{apply_channel, derive_seed, synthesize_channel, ChannelSpec};
use aofm_core::rx::receive;
use aofm_core::tx::transmit;
use aofm_core::Error as CoreError;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{channel_seed, point_config, sidecar};
use crate::config::{GridPoint, RunConfig};
use crate::error::{CliError, Result};
use crate::manifest::{RunManifest, Seeds};
use crate::report::metrics_report;

/// Stream tag for generated sweep payloads.
const PAYLOAD_STREAM: u64 = 0x7061_796c;

pub fn payload_seed(seed: u64) -> u64 {
    derive_seed(&[seed, PAYLOAD_STREAM])
}

pub fn random_payload(seed: u64, len: usize) -> Vec<u8> {
    let mut bytes = vec![0u8; len];
    ChaCha8Rng::seed_from_u64(payload_seed(seed)).fill_bytes(&mut bytes);
    bytes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub modulation: String,
    pub code_rate: String,
    pub n_rx_elements: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// `ok`, `sync_failed` or `error: ...`.
    pub status: String,
    pub avg_evm_db: Option<f64>,
    pub peak_evm_db: Option<f64>,
    pub mean_element_evm_db: Option<f64>,
    pub best_element_evm_db: Option<f64>,
    pub ber_pre_fec: Option<f64>,
    pub pre_fec_errors: Option<u64>,
    pub pre_fec_bits: Option<u64>,
    pub ber_post_fec: Option<f64>,
    pub post_fec_errors: Option<u64>,
    pub post_fec_bits: Option<u64>,
    pub payload_rate_mbps: f64,
    pub frames_total: Option<usize>,
    pub frames_crc_failed: Option<usize>,
}

fn run_point(base: &RunConfig, p: &GridPoint) -> Result<SweepRow> {
    let frame = point_config(&base.frame, p.modulation_order, p.coding, p.n_rx_elements)?;
    let bytes = base
        .sweep
        .as_ref()
        .and_then(|s| s.payload_bytes)
        .unwrap_or_else(|| frame.tb_capacity_bytes());
    let payload = random_payload(p.seed, bytes);
    let spec = ChannelSpec {
        snr_db: p.snr_db,
        ..base.channel.clone().unwrap_or_else(ChannelSpec::identity)
    };
    let mut row = SweepRow {
        status: "ok".into(),
        payload_rate_mbps: aofm_core::metrics::data_rate(&frame).payload_mbps,
        ..failed_row(p)
    };
    let tx = transmit(&payload, &frame)?;
    let model = synthesize_channel(&spec, p.n_rx_elements, channel_seed(p.seed), tx.signal.rate)?;
    let elements = apply_channel(&tx.signal, &model)?;
    let rx = match receive(&elements, &frame, &base.receiver) {
        Ok(rx) => rx,
        Err(CoreError::SyncNotFound { .. }) | Err(CoreError::SignalTooShort { .. }) => {
            row.status = "sync_failed".into();
            return Ok(row);
        }
        Err(e) => return Err(e.into()),
    };
    let m = metrics_report(&rx, &frame, base.receiver.combining, Some((&tx, &payload)))?;
    let n = m.element_evm_db.len() as f64;
    row.avg_evm_db = Some(m.avg_evm_db);
    row.peak_evm_db = Some(m.peak_evm_db);
    row.mean_element_evm_db = Some(m.element_evm_db.iter().sum::<f64>() / n);
    row.best_element_evm_db = m.element_evm_db.iter().copied().reduce(f64::min);
    row.ber_pre_fec = Some(m.ber_pre_fec.ratio());
    row.pre_fec_errors = Some(m.ber_pre_fec.errors);
    row.pre_fec_bits = Some(m.ber_pre_fec.bits);
    if let Some(post) = m.ber_post_fec {
        row.ber_post_fec = Some(post.ratio());
        row.post_fec_errors = Some(post.errors);
        row.post_fec_bits = Some(post.bits);
    }
    row.frames_total = Some(m.frames_total);
    row.frames_crc_failed = Some(m.frames_crc_failed);
    Ok(row)
}

/// Runs every grid point (concurrently) and writes the table as CSV to
/// `out` and as JSON to `<out>.json`.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing configuration key `sweep`".into()))?;
    let points = spec.grid(cfg)?;
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|p| {
            run_point(cfg, p).or_else(|e| match e {
                CliError::Config(_) => Err(e),
                other => Ok(SweepRow {
                    status: format!("error: {other}"),
                    ..failed_row(p)
                }),
            })
        })
        .collect::<Result<_>>()?;

    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::io(out, std::io::Error::other(e)))?;
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::io(out, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    let json = sidecar(out, ".json");
    std::fs::write(&json, serde_json::to_string_pretty(&rows).expect("rows serialize"))
        .map_err(|e| CliError::io(&json, e))?;

    let mut manifest = RunManifest::new(
        "sweep",
        cfg.snapshot(),
        Seeds {
            waveform: Some(payload_seed(cfg.seed)),
            channel: Some(channel_seed(cfg.seed)),
            ..Seeds::master(cfg.seed)
        },
    );
    manifest.outputs.push(out.to_path_buf());
    manifest.outputs.push(json);
    manifest.write()?;
    Ok(rows)
}

fn failed_row(p: &GridPoint) -> SweepRow {
    SweepRow {
        index: p.index,
        modulation: format!("{}-QAM", 1u32 << p.modulation_order),
        code_rate: p.coding.to_string(),
        n_rx_elements: p.n_rx_elements,
        snr_db: p.snr_db,
        seed: p.seed,
        status: String::new(),
        avg_evm_db: None,
        peak_evm_db: None,
        mean_element_evm_db: None,
        best_element_evm_db: None,
        ber_pre_fec: None,
        pre_fec_errors: None,
        pre_fec_bits: None,
        ber_post_fec: None,
        post_fec_errors: None,
        post_fec_bits: None,
        payload_rate_mbps: 0.0,
        frames_total: None,
        frames_crc_failed: None,
    }
}
