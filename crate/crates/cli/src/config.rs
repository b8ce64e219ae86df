//! Run configuration: one JSON file with `frame`, `channel`, `receiver` and
//! `sweep` sections plus the master `seed`.

use std::path::Path;

use aofm_core::channel::ChannelSpec;
use aofm_core::grid::{CodeRate, FrameConfig, Modulation};
use aofm_core::rx::ReceiverConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

const SECTIONS: [&str; 5] = ["seed", "frame", "channel", "receiver", "sweep"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub frame: FrameConfig,
    pub channel: Option<ChannelSpec>,
    pub receiver: ReceiverConfig,
    pub sweep: Option<SweepSpec>,
}

/// Axes of a sweep campaign. Absent axes take the single value from the
/// rest of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Bits per QAM symbol, 6 or 8.
    #[serde(default)]
    pub modulation: Option<Vec<u32>>,
    #[serde(default)]
    pub coding: Option<Vec<CodeRate>>,
    #[serde(default)]
    pub n_rx_elements: Option<Vec<usize>>,
    #[serde(default)]
    pub snr_db: Option<Vec<f64>>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Random payload size per grid point; one frame's capacity when absent.
    #[serde(default)]
    pub payload_bytes: Option<usize>,
}

impl RunConfig {
    /// Parses a configuration file. `seed` overrides the file's `seed`; one
    /// of the two must be present.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, seed)
    }

    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self> {
        let root: Map<String, Value> = match serde_json::from_str(text) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(CliError::Config("top level must be a JSON object".into())),
            Err(e) => return Err(CliError::Config(format!("invalid JSON: {e}"))),
        };
        if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown configuration key `{k}`")));
        }
        let seed = match (seed, root.get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .as_u64()
                .ok_or_else(|| CliError::Config("invalid value for `seed`: expected an unsigned integer".into()))?,
            (None, None) => return Err(CliError::Config("missing configuration key `seed`".into())),
        };
        let frame = match root.get("frame") {
            Some(Value::Object(m)) => FrameConfig::from_params(m).map_err(|e| section("frame", e))?,
            Some(_) => return Err(CliError::Config("`frame` must be an object".into())),
            None => return Err(CliError::Config("missing configuration key `frame`".into())),
        };
        let channel = root
            .get("channel")
            .map(|v| {
                let spec: ChannelSpec = serde_json::from_value(v.clone()).map_err(|e| section("channel", e))?;
                spec.validate().map_err(|e| section("channel", e))?;
                Ok::<_, CliError>(spec)
            })
            .transpose()?;
        let receiver = match root.get("receiver") {
            Some(v) => {
                let r: ReceiverConfig = serde_json::from_value(v.clone()).map_err(|e| section("receiver", e))?;
                r.validate().map_err(|e| section("receiver", e))?;
                r
            }
            None => ReceiverConfig::default(),
        };
        let sweep = root
            .get("sweep")
            .map(|v| serde_json::from_value::<SweepSpec>(v.clone()).map_err(|e| section("sweep", e)))
            .transpose()?;
        Ok(RunConfig {
            seed,
            frame,
            channel,
            receiver,
            sweep,
        })
    }

    pub fn require_channel(&self) -> Result<&ChannelSpec> {
        self.channel
            .as_ref()
            .ok_or_else(|| CliError::Config("missing configuration key `channel`".into()))
    }

    pub fn snapshot(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn section(name: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{name}: {e}"))
}

/// One point of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    /// Bits per QAM symbol.
    pub modulation_order: u32,
    pub coding: CodeRate,
    pub n_rx_elements: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl SweepSpec {
    /// Cartesian product in axis order modulation, coding, elements, SNR,
    /// seed; the last axis varies fastest.
    pub fn grid(&self, base: &RunConfig) -> Result<Vec<GridPoint>> {
        fn axis<T: Clone>(name: &str, v: &Option<Vec<T>>, default: T) -> Result<Vec<T>> {
            match v {
                Some(v) if v.is_empty() => Err(CliError::Config(format!("sweep: axis `{name}` is empty"))),
                Some(v) => Ok(v.clone()),
                None => Ok(vec![default]),
            }
        }
        let modulations = axis("modulation", &self.modulation, base.frame.modulation_order)?
            .into_iter()
            .map(|m| Modulation::from_bits(m).map(|_| m).map_err(|e| section("sweep", e)))
            .collect::<Result<Vec<_>>>()?;
        let codings = axis("coding", &self.coding, base.frame.ldpc_rate)?;
        let elements = axis("n_rx_elements", &self.n_rx_elements, base.frame.n_rx_elements)?;
        if elements.contains(&0) {
            return Err(CliError::Config("sweep: `n_rx_elements` must be at least 1".into()));
        }
        let base_snr = base.channel.as_ref().and_then(|c| c.snr_db);
        let snrs: Vec<Option<f64>> = match &self.snr_db {
            Some(v) if v.is_empty() => return Err(CliError::Config("sweep: axis `snr_db` is empty".into())),
            Some(v) => v.iter().map(|&s| Some(s)).collect(),
            None => vec![base_snr],
        };
        let seeds = axis("seeds", &self.seeds, base.seed)?;
        if self.payload_bytes == Some(0) {
            return Err(CliError::Config("sweep: `payload_bytes` must be at least 1".into()));
        }
        let mut points = Vec::new();
        for &modulation_order in &modulations {
            for &coding in &codings {
                for &n_rx_elements in &elements {
                    for &snr_db in &snrs {
                        for &seed in &seeds {
                            points.push(GridPoint {
                                index: points.len(),
                                modulation_order,
                                coding,
                                n_rx_elements,
                                snr_db,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}
