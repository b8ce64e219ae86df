//! The five subcommands. Each writes its outputs plus a manifest next to the
//! first output and returns a summary; exit-code policy is left to the
//! caller.

use std::path::{Path, PathBuf};

use aofm_core::channel::{apply_channel_detailed, derive_seed, synthesize_channel, ChannelModel, ChannelSpec};
use aofm_core::grid::FrameConfig;
use aofm_core::iq;
use aofm_core::metrics::{self, constellation_export, DataRate};
use aofm_core::rx::{receive, RxOutput};
use aofm_core::signal::BasebandSignal;
use aofm_core::tx::{transmit, TxOutput};
use aofm_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::manifest::{bytes_sha256, RunManifest, Seeds};
use crate::report::{metrics_report, RxReport};

/// Stream tag mixed into the master seed for the channel synthesizer.
const CHANNEL_STREAM: u64 = 0x6368_616e;

pub fn channel_seed(master: u64) -> u64 {
    derive_seed(&[master, CHANNEL_STREAM])
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value).expect("serializes").as_bytes())
}

/// Core errors raised while touching `path`: file-format problems keep the
/// I/O exit code, everything else is classified as usual.
fn at(path: &Path) -> impl Fn(CoreError) -> CliError + '_ {
    move |e| match e {
        CoreError::Io(_) | CoreError::BadHeader(_) | CoreError::Truncated { .. } | CoreError::EmptyInput => {
            CliError::io(path, e)
        }
        other => other.into(),
    }
}

pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxSummary {
    pub manifest_hash: String,
    pub payload_bytes: usize,
    pub payload_sha256: String,
    pub frames: usize,
    pub samples: usize,
    pub airtime_s: f64,
    pub papr_db: f64,
    pub power_error_db: f64,
    pub rate: DataRate,
}

pub fn cmd_tx(cfg: &RunConfig, input: &Path, out: &Path, report: Option<&Path>) -> Result<TxSummary> {
    let payload = read_file(input)?;
    let tx = transmit(&payload, &cfg.frame)?;
    iq::write_stream(out, &tx.signal).map_err(at(out))?;

    let mut manifest = RunManifest::new("tx", cfg.snapshot(), Seeds::master(cfg.seed));
    manifest.add_input(input)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.outputs.extend(report.map(Path::to_path_buf));
    let summary = TxSummary {
        manifest_hash: manifest.hash(),
        payload_bytes: payload.len(),
        payload_sha256: bytes_sha256(&payload),
        frames: tx.frames.len(),
        samples: tx.signal.len(),
        airtime_s: tx.signal.len() as f64 / tx.signal.rate,
        papr_db: tx.papr_db,
        power_error_db: tx.power_error_db,
        rate: metrics::data_rate(&cfg.frame),
    };
    if let Some(r) = report {
        write_json(r, &summary)?;
    }
    manifest.write()?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub manifest_hash: String,
    pub channels: usize,
    pub samples_per_channel: usize,
    pub channel_seed: u64,
    pub noise_var: Vec<f64>,
    pub signal_power: Vec<f64>,
}

fn impair(signal: &BasebandSignal, spec: &ChannelSpec, n_elements: usize, master: u64) -> Result<(ChannelModel, Vec<aofm_core::channel::ElementOutput>)> {
    let model = synthesize_channel(spec, n_elements, channel_seed(master), signal.rate)?;
    let outputs = apply_channel_detailed(signal, &model)?;
    Ok((model, outputs))
}

pub fn cmd_channel(cfg: &RunConfig, input: &Path, out: &Path, report: Option<&Path>) -> Result<ChannelSummary> {
    let spec = cfg.require_channel()?;
    let signal = iq::read_stream(input).map_err(at(input))?;
    let (model, outputs) = impair(&signal, spec, cfg.frame.n_rx_elements, cfg.seed)?;
    let channels: Vec<BasebandSignal> = outputs.iter().map(|o| o.signal.clone()).collect();
    iq::write_capture(out, &channels).map_err(at(out))?;

    let mut manifest = RunManifest::new(
        "channel",
        cfg.snapshot(),
        Seeds {
            channel: Some(channel_seed(cfg.seed)),
            noise: model.noise_seeds.clone(),
            ..Seeds::master(cfg.seed)
        },
    );
    manifest.add_input(input)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.outputs.extend(report.map(Path::to_path_buf));
    let summary = ChannelSummary {
        manifest_hash: manifest.hash(),
        channels: channels.len(),
        samples_per_channel: channels.first().map_or(0, BasebandSignal::len),
        channel_seed: channel_seed(cfg.seed),
        noise_var: outputs.iter().map(|o| o.noise_var).collect(),
        signal_power: outputs.iter().map(|o| o.signal_power).collect(),
    };
    if let Some(r) = report {
        write_json(r, &summary)?;
    }
    manifest.write()?;
    Ok(summary)
}

/// Writes the payload, gap map, report and constellation of a receive run.
fn finish_rx(
    cfg: &RunConfig,
    rx: &RxOutput,
    sent: Option<(&TxOutput, &[u8])>,
    mut manifest: RunManifest,
    out: &Path,
    report: Option<&Path>,
) -> Result<RxReport> {
    let gaps_path = sidecar(out, ".gaps.json");
    let constellation = report.filter(|_| !rx.frames.is_empty()).map(|r| sidecar(r, ".constellation.csv"));
    manifest.outputs.push(out.to_path_buf());
    manifest.outputs.push(gaps_path.clone());
    manifest.outputs.extend(report.map(Path::to_path_buf));
    if let Some(csv) = &constellation {
        manifest.outputs.push(csv.clone());
        manifest.outputs.push(metrics::sidecar_path(csv));
    }
    write_file(out, &rx.payload)?;
    write_json(&gaps_path, &rx.gaps)?;

    let rx_report = RxReport {
        manifest_hash: manifest.hash(),
        metrics: metrics_report(rx, &cfg.frame, cfg.receiver.combining, sent)?,
        pre_fec_reference: if sent.is_some() { "transmitted" } else { "decoder" }.into(),
        gaps: rx.gaps.clone(),
        frames: rx.frames.iter().map(|f| f.log.clone()).collect(),
    };
    if let Some(r) = report {
        write_json(r, &rx_report)?;
    }
    if let (Some(csv), Some(first)) = (&constellation, rx.frames.first()) {
        let meta = serde_json::json!({
            "manifest_hash": rx_report.manifest_hash,
            "frame": first.log.position,
            "modulation": rx_report.metrics.modulation,
            "data_aided": first.data_aided,
        });
        constellation_export(&first.symbols, Some(&first.reference), meta, csv).map_err(at(csv))?;
    }
    manifest.write()?;
    Ok(rx_report)
}

pub fn cmd_rx(cfg: &RunConfig, input: &Path, out: &Path, report: Option<&Path>) -> Result<RxReport> {
    let elements = iq::replay_capture(input).map_err(at(input))?;
    let rx = receive(&elements, &cfg.frame, &cfg.receiver)?;
    let mut manifest = RunManifest::new("rx", cfg.snapshot(), Seeds::master(cfg.seed));
    manifest.add_input(input)?;
    finish_rx(cfg, &rx, None, manifest, out, report)
}

/// Transmit, channel and receive in one process, with the same seeds as the
/// three separate commands.
pub fn cmd_loopback(cfg: &RunConfig, input: &Path, out: &Path, report: Option<&Path>) -> Result<RxReport> {
    let spec = cfg.require_channel()?;
    let payload = read_file(input)?;
    let tx = transmit(&payload, &cfg.frame)?;
    let (model, outputs) = impair(&tx.signal, spec, cfg.frame.n_rx_elements, cfg.seed)?;
    let elements: Vec<BasebandSignal> = outputs.into_iter().map(|o| o.signal).collect();
    let rx = receive(&elements, &cfg.frame, &cfg.receiver)?;
    let mut manifest = RunManifest::new(
        "loopback",
        cfg.snapshot(),
        Seeds {
            channel: Some(channel_seed(cfg.seed)),
            noise: model.noise_seeds,
            ..Seeds::master(cfg.seed)
        },
    );
    manifest.add_input(input)?;
    finish_rx(cfg, &rx, Some((&tx, &payload)), manifest, out, report)
}

/// Frame configuration with one grid point's overrides applied.
pub fn point_config(base: &FrameConfig, modulation_order: u32, coding: aofm_core::grid::CodeRate, n_rx: usize) -> Result<FrameConfig> {
    let cfg = FrameConfig {
        modulation_order,
        ldpc_rate: coding,
        n_rx_elements: n_rx,
        ..base.clone()
    };
    cfg.validate_link()?;
    Ok(cfg)
}
