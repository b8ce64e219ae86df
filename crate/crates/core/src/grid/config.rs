use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ldpc;

/// Channel code applied to each transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeRate {
    /// Quasi-cyclic LDPC, 1296 information bits in 1944 coded bits.
    TwoThirds,
    Uncoded,
}

impl CodeRate {
    pub fn as_f64(self) -> f64 {
        match self {
            CodeRate::TwoThirds => 2.0 / 3.0,
            CodeRate::Uncoded => 1.0,
        }
    }

    /// Coded bits occupied by one information block.
    pub fn block_len(self) -> usize {
        match self {
            CodeRate::TwoThirds => ldpc::CODEWORD_LEN,
            CodeRate::Uncoded => ldpc::INFO_LEN,
        }
    }

    pub fn is_coded(self) -> bool {
        matches!(self, CodeRate::TwoThirds)
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeRate::TwoThirds => f.write_str("2/3"),
            CodeRate::Uncoded => f.write_str("uncoded"),
        }
    }
}

impl std::str::FromStr for CodeRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "2/3" => Ok(CodeRate::TwoThirds),
            "uncoded" | "none" => Ok(CodeRate::Uncoded),
            other => Err(Error::invalid(
                "ldpc_rate",
                format!("unsupported code rate `{other}` (expected \"2/3\" or \"uncoded\")"),
            )),
        }
    }
}

impl Serialize for CodeRate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CodeRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Square Gray-mapped QAM order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qam64,
    Qam256,
}

impl Modulation {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            6 => Ok(Modulation::Qam64),
            8 => Ok(Modulation::Qam256),
            other => Err(Error::invalid(
                "modulation_order",
                format!("{other} bits per symbol; expected 6 (64-QAM) or 8 (256-QAM)"),
            )),
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    /// Amplitude levels per I/Q axis.
    pub fn levels(self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }
}

/// Frame geometry and link parameters shared by transmitter and receiver.
///
/// Constructed through [`FrameConfig::from_params`] or
/// [`FrameConfig::from_json`], both of which validate; the default is the
/// 64-QAM, rate-2/3 variant of the reference link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    /// Data symbols between consecutive block-pilot symbols.
    pub block_distance: usize,
    /// Comb-pilot spacing in occupied-subcarrier index.
    pub comb_distance: usize,
    pub n_data_subcarriers: usize,
    /// Bits per QAM symbol (6 or 8).
    pub modulation_order: u32,
    pub ldpc_rate: CodeRate,
    pub carrier_freq: f64,
    pub baseband_rate: f64,
    pub dac_rate: f64,
    pub adc_rate: f64,
    pub n_rx_elements: usize,
    pub n_symbols_per_frame: usize,
    /// Seed of the pilot shift register; both ends must agree.
    pub pilot_seed: u64,
}

pub(crate) const KEYS: [&str; 14] = [
    "fft_size",
    "cp_len",
    "block_distance",
    "comb_distance",
    "n_data_subcarriers",
    "modulation_order",
    "ldpc_rate",
    "carrier_freq",
    "baseband_rate",
    "dac_rate",
    "adc_rate",
    "n_rx_elements",
    "n_symbols_per_frame",
    "pilot_seed",
];

impl Default for FrameConfig {
    fn default() -> Self {
        Self::reference(Modulation::Qam64, CodeRate::TwoThirds)
    }
}

impl FrameConfig {
    /// The reference link: 4096-point FFT, 512-sample CP, pilots every 16
    /// data symbols and every 32 occupied subcarriers, 3072 data
    /// subcarriers, 3.75 MHz carrier, 2.5 MHz baseband, 16 receive elements.
    pub fn reference(modulation: Modulation, rate: CodeRate) -> Self {
        FrameConfig {
            fft_size: 4096,
            cp_len: 512,
            block_distance: 16,
            comb_distance: 32,
            n_data_subcarriers: 3072,
            modulation_order: modulation.bits_per_symbol() as u32,
            ldpc_rate: rate,
            carrier_freq: 3.75e6,
            baseband_rate: 2.5e6,
            dac_rate: 100e6,
            adc_rate: 120e6,
            n_rx_elements: 16,
            n_symbols_per_frame: 17,
            pilot_seed: 0,
        }
    }

    /// Builds a configuration from a key-value set, naming the offending
    /// key on any missing, unknown or invalid entry.
    pub fn from_params(raw: &Map<String, Value>) -> Result<Self> {
        if let Some(unknown) = raw.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::UnknownKey(unknown.clone()));
        }
        if let Some(missing) = KEYS.iter().find(|k| !raw.contains_key(**k)) {
            return Err(Error::MissingKey(missing.to_string()));
        }
        for key in KEYS {
            if key == "ldpc_rate" || key == "pilot_seed" {
                continue;
            }
            match raw[key].as_f64() {
                Some(v) if v > 0.0 && v.is_finite() => {}
                _ => return Err(Error::invalid(key, "must be a positive number")),
            }
        }
        let cfg: FrameConfig = serde_json::from_value(Value::Object(raw.clone()))
            .map_err(|e| Error::invalid("frame", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        match value {
            Value::Object(map) => Self::from_params(&map),
            _ => Err(Error::invalid("frame", "expected a JSON object")),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 4 {
            return Err(Error::invalid("fft_size", "must be at least 4"));
        }
        if self.cp_len == 0 || self.cp_len >= self.fft_size {
            return Err(Error::invalid(
                "cp_len",
                format!("{} must lie in 1..fft_size ({})", self.cp_len, self.fft_size),
            ));
        }
        Modulation::from_bits(self.modulation_order)?;
        if self.block_distance == 0 {
            return Err(Error::invalid("block_distance", "must be positive"));
        }
        if self.comb_distance < 2 {
            return Err(Error::invalid("comb_distance", "must be at least 2"));
        }
        if self.n_data_subcarriers == 0 {
            return Err(Error::invalid("n_data_subcarriers", "must be positive"));
        }
        if self.occupied_width() + 1 > self.fft_size {
            return Err(Error::invalid(
                "comb_distance",
                format!(
                    "{} data subcarriers with a comb pilot every {} need {} occupied \
                     subcarriers plus DC, more than fft_size {}",
                    self.n_data_subcarriers,
                    self.comb_distance,
                    self.occupied_width(),
                    self.fft_size
                ),
            ));
        }
        if self.n_rx_elements == 0 {
            return Err(Error::invalid("n_rx_elements", "must be positive"));
        }
        let period = self.pilot_period();
        if self.n_symbols_per_frame == 0 || self.n_symbols_per_frame % period != 0 {
            return Err(Error::invalid(
                "n_symbols_per_frame",
                format!("must be a positive multiple of the pilot period {period}"),
            ));
        }
        for (field, v) in [
            ("carrier_freq", self.carrier_freq),
            ("baseband_rate", self.baseband_rate),
            ("dac_rate", self.dac_rate),
            ("adc_rate", self.adc_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "must be a positive number"));
            }
        }
        Ok(())
    }

    /// Geometry checks plus the constraints of the transport framing: a frame
    /// must hold at least one information block and its pad length must fit
    /// the 16-bit length field.
    pub fn validate_link(&self) -> Result<()> {
        self.validate()?;
        if self.blocks_per_frame() == 0 {
            return Err(Error::invalid(
                "n_symbols_per_frame",
                "frame too small to carry one information block",
            ));
        }
        if self.tb_capacity_bytes() > u16::MAX as usize {
            return Err(Error::invalid(
                "n_symbols_per_frame",
                format!(
                    "frame payload of {} bytes overflows the 16-bit pad-length field",
                    self.tb_capacity_bytes()
                ),
            ));
        }
        Ok(())
    }

    pub fn modulation(&self) -> Modulation {
        Modulation::from_bits(self.modulation_order).expect("validated modulation order")
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation_order as usize
    }

    /// Hz between adjacent subcarriers.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.baseband_rate / self.fft_size as f64
    }

    /// Samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Seconds per OFDM symbol including the cyclic prefix.
    pub fn symbol_duration(&self) -> f64 {
        self.symbol_len() as f64 / self.baseband_rate
    }

    /// Symbols from one block pilot to the next.
    pub fn pilot_period(&self) -> usize {
        self.block_distance + 1
    }

    pub fn n_comb_pilots(&self) -> usize {
        self.n_data_subcarriers.div_ceil(self.comb_distance - 1)
    }

    /// Data plus comb-pilot subcarriers; DC and guards excluded.
    pub fn occupied_width(&self) -> usize {
        self.n_data_subcarriers + self.n_comb_pilots()
    }

    pub fn n_null_subcarriers(&self) -> usize {
        self.fft_size - self.occupied_width()
    }

    pub fn data_symbols_per_frame(&self) -> usize {
        self.n_symbols_per_frame / self.pilot_period() * self.block_distance
    }

    pub fn data_cells_per_frame(&self) -> usize {
        self.data_symbols_per_frame() * self.n_data_subcarriers
    }

    /// Coded bits carried by the data cells of one frame.
    pub fn bits_per_frame(&self) -> usize {
        self.data_cells_per_frame() * self.bits_per_symbol()
    }

    /// Information blocks (one codeword each when coded) per frame.
    pub fn blocks_per_frame(&self) -> usize {
        self.bits_per_frame() / self.ldpc_rate.block_len()
    }

    /// Bits left over after the last block, filled with scrambler output.
    pub fn filler_bits_per_frame(&self) -> usize {
        self.bits_per_frame() - self.blocks_per_frame() * self.ldpc_rate.block_len()
    }

    /// Payload bytes one transport block (one frame) can carry.
    pub fn tb_capacity_bytes(&self) -> usize {
        (self.blocks_per_frame() * ldpc::INFO_LEN / 8)
            .saturating_sub(crate::tx::transport::OVERHEAD_BYTES)
    }

    /// Data cells per second over an unbounded frame sequence.
    pub fn data_cell_rate(&self) -> f64 {
        self.n_data_subcarriers as f64 * self.block_distance as f64
            / self.pilot_period() as f64
            / self.symbol_duration()
    }
}

/// Free function form of [`FrameConfig::from_params`].
pub fn build_frame_config(raw: &Map<String, Value>) -> Result<FrameConfig> {
    FrameConfig::from_params(raw)
}
