//! Multichannel baseband channel simulator: exponential-profile multipath,
//! timing/frequency/clock offsets and per-element noise.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::SincInterpolator;
use crate::error::{Error, Result};
use crate::signal::BasebandSignal;

pub use crate::iq::{replay_capture, write_capture};

fn default_true() -> bool {
    true
}

/// Channel parameters, read from the `channel` section of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// RMS delay spread of the power-delay profile, seconds.
    pub delay_spread: f64,
    pub n_taps: usize,
    /// Tap spacing in seconds, rounded to whole samples. When absent the
    /// taps span roughly six RMS delay spreads.
    #[serde(default)]
    pub tap_spacing: Option<f64>,
    /// Exponential decay constant in seconds. When absent it is solved so
    /// the discrete profile has RMS spread `delay_spread`.
    #[serde(default)]
    pub power_profile: Option<f64>,
    #[serde(default)]
    pub per_element_seed: u64,
    /// Carrier frequency offset, Hz.
    #[serde(default)]
    pub cfo: f64,
    /// Timing offset in (fractional) samples; must be non-negative.
    #[serde(default)]
    pub sto: f64,
    /// Receiver sample-rate offset, parts per million.
    #[serde(default)]
    pub sro: f64,
    /// Per-element SNR after the channel; `None` means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Complex Gaussian taps when true, otherwise the deterministic square
    /// root of the profile (identical on every element).
    #[serde(default = "default_true")]
    pub rayleigh: bool,
}

impl ChannelSpec {
    /// Single unit tap, no impairments, no noise.
    pub fn identity() -> Self {
        ChannelSpec {
            delay_spread: 1e-9,
            n_taps: 1,
            tap_spacing: None,
            power_profile: None,
            per_element_seed: 0,
            cfo: 0.0,
            sto: 0.0,
            sro: 0.0,
            snr_db: None,
            rayleigh: false,
        }
    }

    /// Stand-in for a long-delay-spread tissue channel: 64 Rayleigh taps,
    /// 200 µs RMS. Not derived from a measured channel.
    pub fn multipath(snr_db: f64) -> Self {
        ChannelSpec {
            delay_spread: 200e-6,
            n_taps: 64,
            rayleigh: true,
            snr_db: Some(snr_db),
            ..Self::identity()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay_spread > 0.0 && self.delay_spread.is_finite()) {
            return Err(Error::invalid("delay_spread", "must be positive"));
        }
        if self.n_taps == 0 {
            return Err(Error::invalid("n_taps", "must be at least 1"));
        }
        if let Some(s) = self.tap_spacing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("tap_spacing", "must be positive"));
            }
        }
        if let Some(p) = self.power_profile {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid("power_profile", "must be positive"));
            }
        }
        if !self.cfo.is_finite() {
            return Err(Error::invalid("cfo", "must be finite"));
        }
        if !(self.sto >= 0.0 && self.sto.is_finite()) {
            return Err(Error::invalid("sto", "must be non-negative"));
        }
        if !(self.sro.is_finite() && self.sro.abs() < 1e5) {
            return Err(Error::invalid("sro", "must be finite and well below 1e5 ppm"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ChannelSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Realized channel for a set of receive elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub rate: f64,
    /// Tap delays in samples, shared by all elements.
    pub delays: Vec<usize>,
    /// `taps[e][i]` is element `e`'s coefficient at `delays[i]`.
    pub taps: Vec<Vec<Complex64>>,
    pub cfo: f64,
    pub sto: f64,
    pub sro_ppm: f64,
    pub snr_db: Option<f64>,
    pub noise_seeds: Vec<u64>,
}

impl ChannelModel {
    pub fn n_elements(&self) -> usize {
        self.taps.len()
    }

    /// Dense impulse response of one element.
    pub fn impulse_response(&self, element: usize) -> Vec<Complex64> {
        let len = self.delays.last().map_or(1, |d| d + 1);
        let mut h = vec![Complex64::new(0.0, 0.0); len];
        for (&d, &c) in self.delays.iter().zip(&self.taps[element]) {
            h[d] += c;
        }
        h
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Combines seed parts into one well-mixed seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix(acc ^ splitmix(p)))
}

fn rms_spread(delays: &[f64], power: &[f64]) -> f64 {
    let total: f64 = power.iter().sum();
    let mean: f64 = delays.iter().zip(power).map(|(d, p)| d * p).sum::<f64>() / total;
    let second: f64 = delays.iter().zip(power).map(|(d, p)| d * d * p).sum::<f64>() / total;
    (second - mean * mean).max(0.0).sqrt()
}

/// RMS delay spread (seconds) of a power-delay profile given in samples.
pub fn profile_rms_spread(delays: &[usize], power: &[f64], rate: f64) -> f64 {
    let d: Vec<f64> = delays.iter().map(|&x| x as f64 / rate).collect();
    rms_spread(&d, power)
}

fn exp_profile(delays: &[f64], decay: f64) -> Vec<f64> {
    delays.iter().map(|d| (-d / decay).exp()).collect()
}

/// Tap delays (samples) and mean tap powers (summing to 1).
pub fn power_delay_profile(spec: &ChannelSpec, rate: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    spec.validate()?;
    if spec.n_taps == 1 {
        return Ok((vec![0], vec![1.0]));
    }
    let spacing = match spec.tap_spacing {
        Some(s) => (s * rate).round().max(1.0) as usize,
        None => (6.0 * spec.delay_spread * rate / spec.n_taps as f64).round().max(1.0) as usize,
    };
    let delays: Vec<usize> = (0..spec.n_taps).map(|i| i * spacing).collect();
    let secs: Vec<f64> = delays.iter().map(|&d| d as f64 / rate).collect();
    let decay = match spec.power_profile {
        Some(p) => p,
        None => {
            let flat = rms_spread(&secs, &vec![1.0; secs.len()]);
            if spec.delay_spread >= flat {
                return Err(Error::invalid(
                    "delay_spread",
                    format!(
                        "{} s cannot be reached with {} taps spaced {} samples (max {flat} s)",
                        spec.delay_spread, spec.n_taps, spacing
                    ),
                ));
            }
            // rms_spread grows monotonically with the decay constant.
            let (mut lo, mut hi) = (1e-12, 1.0);
            while rms_spread(&secs, &exp_profile(&secs, hi)) < spec.delay_spread {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rms_spread(&secs, &exp_profile(&secs, mid)) < spec.delay_spread {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let mut power = exp_profile(&secs, decay);
    let total: f64 = power.iter().sum();
    power.iter_mut().for_each(|p| *p /= total);
    Ok((delays, power))
}

/// Draws per-element taps. Element `e` depends only on `(spec, master_seed,
/// e)`, so adding elements never changes existing ones.
pub fn synthesize_channel(
    spec: &ChannelSpec,
    n_elements: usize,
    master_seed: u64,
    rate: f64,
) -> Result<ChannelModel> {
    let (delays, power) = power_delay_profile(spec, rate)?;
    let taps = (0..n_elements)
        .map(|e| {
            let raw: Vec<Complex64> = if spec.rayleigh {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                    master_seed,
                    spec.per_element_seed,
                    e as u64,
                    0,
                ]));
                power
                    .iter()
                    .map(|p| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im) * (p / 2.0).sqrt()
                    })
                    .collect()
            } else {
                power.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect()
            };
            let energy: f64 = raw.iter().map(|c| c.norm_sqr()).sum();
            let norm = 1.0 / energy.sqrt();
            raw.into_iter().map(|c| c * norm).collect()
        })
        .collect();
    let noise_seeds = (0..n_elements)
        .map(|e| derive_seed(&[master_seed, spec.per_element_seed, e as u64, 1]))
        .collect();
    Ok(ChannelModel {
        rate,
        delays,
        taps,
        cfo: spec.cfo,
        sto: spec.sto,
        sro_ppm: spec.sro,
        snr_db: spec.snr_db,
        noise_seeds,
    })
}

/// One element's output plus the noise variance that was added.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementOutput {
    pub signal: BasebandSignal,
    pub noise_var: f64,
    pub signal_power: f64,
}

fn apply_element(tx: &BasebandSignal, model: &ChannelModel, e: usize, interp: &SincInterpolator) -> ElementOutput {
    let x = &tx.samples;
    let max_delay = *model.delays.last().unwrap_or(&0);
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + max_delay];
    for (&d, &h) in model.delays.iter().zip(&model.taps[e]) {
        for (out, &v) in y[d..d + x.len()].iter_mut().zip(x) {
            *out += v * h;
        }
    }
    if model.sto != 0.0 {
        y = interp.delay(&y, model.sto);
    }
    if model.cfo != 0.0 {
        let w = 2.0 * PI * model.cfo / model.rate;
        for (n, v) in y.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, w * n as f64);
        }
    }
    if model.sro_ppm != 0.0 {
        y = interp.resample(&y, model.sro_ppm * 1e-6);
    }
    let start = (model.sto.floor() as usize).min(y.len());
    let end = (start + x.len()).min(y.len());
    let signal_power = if end > start {
        y[start..end].iter().map(|c| c.norm_sqr()).sum::<f64>() / (end - start) as f64
    } else {
        0.0
    };
    let mut noise_var = 0.0;
    if let Some(snr) = model.snr_db {
        noise_var = signal_power / 10f64.powf(snr / 10.0);
        let sigma = (noise_var / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(model.noise_seeds[e]);
        for v in y.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re, im) * sigma;
        }
    }
    ElementOutput {
        signal: BasebandSignal::new(y, model.rate),
        noise_var,
        signal_power,
    }
}

/// Per-element outputs with noise bookkeeping, ordered by element.
pub fn apply_channel_detailed(tx: &BasebandSignal, model: &ChannelModel) -> Result<Vec<ElementOutput>> {
    if tx.is_empty() {
        return Err(Error::EmptyInput);
    }
    if (tx.rate - model.rate).abs() > 1e-9 * model.rate {
        return Err(Error::invalid(
            "rate",
            format!("signal at {} Hz, channel built for {} Hz", tx.rate, model.rate),
        ));
    }
    let interp = SincInterpolator::default();
    Ok((0..model.n_elements())
        .into_par_iter()
        .map(|e| apply_element(tx, model, e, &interp))
        .collect())
}

/// FIR, fractional delay, CFO rotation, resampling and AWGN, per element.
pub fn apply_channel(tx: &BasebandSignal, model: &ChannelModel) -> Result<Vec<BasebandSignal>> {
    Ok(apply_channel_detailed(tx, model)?
        .into_iter()
        .map(|o| o.signal)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrameConfig;
    use crate::tx::transmit;

    const RATE: f64 = 2.5e6;

    fn noise(n: usize, seed: u64) -> BasebandSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BasebandSignal::new(
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect(),
            RATE,
        )
    }

    fn ofdm_signal() -> BasebandSignal {
        transmit(&[7u8; 2000], &FrameConfig::default()).unwrap().signal
    }

    #[test]
    fn single_tap_has_unit_magnitude() {
        let spec = ChannelSpec {
            rayleigh: true,
            ..ChannelSpec::identity()
        };
        let model = synthesize_channel(&spec, 16, 5, RATE).unwrap();
        for taps in &model.taps {
            assert_eq!(taps.len(), 1);
            assert!((taps[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tap_energy_is_normalized() {
        let model = synthesize_channel(&ChannelSpec::multipath(20.0), 16, 1, RATE).unwrap();
        for taps in &model.taps {
            let e: f64 = taps.iter().map(|c| c.norm_sqr()).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_delay_spread() {
        let spec = ChannelSpec::multipath(20.0);
        let mut mean_power = vec![0.0; spec.n_taps];
        let mut delays = Vec::new();
        for seed in 0..1000 {
            let model = synthesize_channel(&spec, 1, seed, RATE).unwrap();
            for (m, c) in mean_power.iter_mut().zip(&model.taps[0]) {
                *m += c.norm_sqr();
            }
            delays = model.delays;
        }
        let rms = profile_rms_spread(&delays, &mean_power, RATE);
        assert!((rms - 200e-6).abs() / 200e-6 < 0.1, "rms {rms}");
    }

    #[test]
    fn same_seed_same_taps_and_prefix_stability() {
        let spec = ChannelSpec::multipath(10.0);
        let a = synthesize_channel(&spec, 4, 9, RATE).unwrap();
        let b = synthesize_channel(&spec, 4, 9, RATE).unwrap();
        assert_eq!(a, b);
        let c = synthesize_channel(&spec, 16, 9, RATE).unwrap();
        assert_eq!(a.taps[..], c.taps[..4]);
        assert_ne!(a.taps[0], a.taps[1]);
    }

    #[test]
    fn element_taps_are_nearly_uncorrelated() {
        let spec = ChannelSpec {
            n_taps: 64,
            ..ChannelSpec::multipath(20.0)
        };
        let (_, power) = power_delay_profile(&spec, RATE).unwrap();
        let mut total = 0.0;
        let mut count = 0;
        for seed in 0..20 {
            let model = synthesize_channel(&spec, 16, seed, RATE).unwrap();
            // Whiten by the mean profile so every tap counts equally.
            let w: Vec<Vec<Complex64>> = model
                .taps
                .iter()
                .map(|t| t.iter().zip(&power).map(|(c, p)| c / p.sqrt()).collect())
                .collect();
            for i in 0..16 {
                for j in i + 1..16 {
                    let dot: Complex64 = w[i].iter().zip(&w[j]).map(|(a, b)| a * b.conj()).sum();
                    let na: f64 = w[i].iter().map(|c| c.norm_sqr()).sum();
                    let nb: f64 = w[j].iter().map(|c| c.norm_sqr()).sum();
                    total += dot.norm() / (na * nb).sqrt();
                    count += 1;
                }
            }
        }
        let mean = total / count as f64;
        assert!(mean < 0.2, "mean |rho| {mean}");
    }

    #[test]
    fn identity_model_is_transparent() {
        let x = noise(5000, 1);
        let model = synthesize_channel(&ChannelSpec::identity(), 3, 0, RATE).unwrap();
        for y in apply_channel(&x, &model).unwrap() {
            assert_eq!(y.len(), x.len());
            for (a, b) in y.samples.iter().zip(&x.samples) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cfo_gives_constant_phase_increment() {
        let x = noise(2000, 2);
        let df = 610.3515625;
        let spec = ChannelSpec {
            cfo: df,
            ..ChannelSpec::identity()
        };
        let model = synthesize_channel(&spec, 1, 0, RATE).unwrap();
        let y = &apply_channel(&x, &model).unwrap()[0];
        let step = 2.0 * PI * df / RATE;
        for n in 1..x.len() {
            let a = y.samples[n] * x.samples[n].conj();
            let b = y.samples[n - 1] * x.samples[n - 1].conj();
            let d = (a * b.conj()).arg();
            assert!((d - step).abs() < 1e-9);
        }
    }

    #[test]
    fn measured_snr_matches_request() {
        let x = noise(1_000_000, 3);
        let spec = ChannelSpec {
            snr_db: Some(20.0),
            ..ChannelSpec::identity()
        };
        let noisy = synthesize_channel(&spec, 1, 4, RATE).unwrap();
        let clean = ChannelModel {
            snr_db: None,
            ..noisy.clone()
        };
        let y = &apply_channel(&x, &noisy).unwrap()[0];
        let s = &apply_channel(&x, &clean).unwrap()[0];
        let ps: f64 = s.mean_power();
        let pn: f64 = y.samples.iter().zip(&s.samples).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
            / y.len() as f64;
        let snr = 10.0 * (ps / pn).log10();
        assert!((snr - 20.0).abs() < 0.2, "snr {snr}");
    }

    #[test]
    fn noiseless_channel_is_linear() {
        let x = noise(3000, 5);
        let spec = ChannelSpec {
            snr_db: None,
            sto: 2.3,
            cfo: 40.0,
            sro: 20.0,
            ..ChannelSpec::multipath(0.0)
        };
        let model = synthesize_channel(&spec, 2, 6, RATE).unwrap();
        let a = Complex64::new(0.3, -1.7);
        let scaled = BasebandSignal::new(x.samples.iter().map(|v| v * a).collect(), RATE);
        let y1 = apply_channel(&x, &model).unwrap();
        let y2 = apply_channel(&scaled, &model).unwrap();
        for (u, v) in y1.iter().zip(&y2) {
            for (p, q) in u.samples.iter().zip(&v.samples) {
                assert!((p * a - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn flat_channel_preserves_energy_through_resampling() {
        let x = ofdm_signal();
        for (sto, sro) in [(0.37, 0.0), (0.0, 25.0), (12.6, -40.0)] {
            let spec = ChannelSpec {
                sto,
                sro,
                ..ChannelSpec::identity()
            };
            let model = synthesize_channel(&spec, 1, 0, RATE).unwrap();
            let y = &apply_channel(&x, &model).unwrap()[0];
            let ratio_db = 10.0 * (y.energy() / x.energy() / (1.0 + sro * 1e-6)).log10();
            assert!(ratio_db.abs() < 0.01, "sto {sto} sro {sro}: {ratio_db} dB");
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let x = noise(1000, 7);
        let spec = ChannelSpec::multipath(15.0);
        let m = synthesize_channel(&spec, 2, 11, RATE).unwrap();
        assert_eq!(apply_channel(&x, &m).unwrap(), apply_channel(&x, &m).unwrap());
        let other = synthesize_channel(&spec, 2, 12, RATE).unwrap();
        assert_ne!(apply_channel(&x, &m).unwrap(), apply_channel(&x, &other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        assert!(ChannelSpec { n_taps: 0, ..ChannelSpec::identity() }.validate().is_err());
        assert!(ChannelSpec { delay_spread: 0.0, ..ChannelSpec::identity() }.validate().is_err());
        assert!(ChannelSpec { snr_db: Some(f64::NAN), ..ChannelSpec::identity() }.validate().is_err());
        let empty = BasebandSignal::new(Vec::new(), RATE);
        let m = synthesize_channel(&ChannelSpec::identity(), 1, 0, RATE).unwrap();
        assert!(matches!(apply_channel(&empty, &m), Err(Error::EmptyInput)));
    }
}
