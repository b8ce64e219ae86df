//! Filter design, digital up/down conversion and band-limited interpolation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{BasebandSignal, PassbandSignal};

/// Half-length of the rate-change lowpass, in baseband samples. The filter
/// has `2 * CONVERTER_HALF_SPAN * factor + 1` taps, so each converter delays
/// its output by exactly `CONVERTER_HALF_SPAN` baseband samples.
pub const CONVERTER_HALF_SPAN: usize = 12;
/// Stopband attenuation targeted by the converter lowpass design.
pub const CONVERTER_ATTENUATION_DB: f64 = 70.0;

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser β for a stopband attenuation in dB.
pub fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

fn kaiser(pos: f64, half_width: f64, beta: f64) -> f64 {
    let r = pos / half_width;
    if r.abs() > 1.0 {
        0.0
    } else {
        bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc lowpass with unit DC gain. `cutoff` is in cycles
/// per sample; `taps` should be odd for an integer group delay.
pub fn lowpass(taps: usize, cutoff: f64, attenuation_db: f64) -> Vec<f64> {
    let beta = kaiser_beta(attenuation_db);
    let mid = (taps as f64 - 1.0) / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            2.0 * cutoff * sinc(2.0 * cutoff * t) * kaiser(t, mid + 1.0, beta)
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= dc);
    h
}

fn integer_ratio(high: f64, low: f64) -> Result<usize> {
    let ratio = high / low;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio {
        return Err(Error::NonIntegerRatio { ratio });
    }
    Ok(rounded as usize)
}

/// Lowpass used by both converters at `factor` times the baseband rate,
/// passband edge at half the baseband rate.
pub fn converter_filter(factor: usize) -> Vec<f64> {
    lowpass(
        2 * CONVERTER_HALF_SPAN * factor + 1,
        0.5 / factor as f64,
        CONVERTER_ATTENUATION_DB,
    )
}

/// Interpolates by `dac_rate / bb.rate` (polyphase) and mixes to the
/// carrier: `s[n] = Re{x[n] e^{j 2π f_c n / f_s}}`. The output holds
/// `(len + 2 * CONVERTER_HALF_SPAN) * factor` samples.
pub fn up_convert(bb: &BasebandSignal, carrier: f64, dac_rate: f64) -> Result<PassbandSignal> {
    let factor = integer_ratio(dac_rate, bb.rate)?;
    if dac_rate < 2.0 * (carrier + bb.rate / 2.0) {
        return Err(Error::invalid(
            "dac_rate",
            format!("{dac_rate} Hz aliases a carrier of {carrier} Hz"),
        ));
    }
    let h = converter_filter(factor);
    let taps_per_phase = h.len().div_ceil(factor);
    let out_len = (bb.len() + 2 * CONVERTER_HALF_SPAN) * factor;
    let w = 2.0 * PI * carrier / dac_rate;
    let gain = factor as f64;
    let x = &bb.samples;
    let samples = (0..out_len)
        .map(|n| {
            let phase = n % factor;
            let base = n / factor;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..taps_per_phase {
                let k = phase + j * factor;
                if k >= h.len() || j > base {
                    break;
                }
                if let Some(v) = x.get(base - j) {
                    acc += v * h[k];
                }
            }
            acc *= gain;
            let (s, c) = (w * n as f64).sin_cos();
            acc.re * c - acc.im * s
        })
        .collect();
    Ok(PassbandSignal {
        samples,
        rate: dac_rate,
        carrier,
    })
}

/// Mixes down with `e^{-j 2π f_c n / f_s}`, lowpass filters and decimates by
/// `pb.rate / baseband_rate`. Output sample `m` corresponds to passband
/// time `(m - CONVERTER_HALF_SPAN) * factor`.
pub fn down_convert(pb: &PassbandSignal, carrier: f64, baseband_rate: f64) -> Result<BasebandSignal> {
    let factor = integer_ratio(pb.rate, baseband_rate)?;
    let h = converter_filter(factor);
    let w = 2.0 * PI * carrier / pb.rate;
    let mixed: Vec<Complex64> = pb
        .samples
        .iter()
        .enumerate()
        .map(|(n, &s)| {
            let (sn, cn) = (w * n as f64).sin_cos();
            Complex64::new(2.0 * s * cn, -2.0 * s * sn)
        })
        .collect();
    let out_len = pb.samples.len().div_ceil(factor) + CONVERTER_HALF_SPAN;
    let samples = (0..out_len)
        .map(|m| {
            let centre = (m * factor) as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &hk) in h.iter().enumerate() {
                let idx = centre - k as isize;
                if idx >= 0 {
                    if let Some(v) = mixed.get(idx as usize) {
                        acc += v * hk;
                    }
                }
            }
            acc
        })
        .collect();
    Ok(BasebandSignal::new(samples, baseband_rate))
}

/// Tabulated Kaiser-windowed sinc for fractional-delay interpolation.
#[derive(Debug, Clone)]
pub struct SincInterpolator {
    half_width: usize,
    resolution: usize,
    table: Vec<f64>,
}

impl Default for SincInterpolator {
    fn default() -> Self {
        Self::new(48, 512, 10.0)
    }
}

impl SincInterpolator {
    pub fn new(half_width: usize, resolution: usize, beta: f64) -> Self {
        let n = half_width * resolution;
        let table = (0..=n + 1)
            .map(|i| {
                let t = i as f64 / resolution as f64;
                sinc(t) * kaiser(t, half_width as f64, beta)
            })
            .collect();
        SincInterpolator {
            half_width,
            resolution,
            table,
        }
    }

    fn kernel(&self, t: f64) -> f64 {
        let pos = t.abs() * self.resolution as f64;
        let i = pos as usize;
        if i >= self.half_width * self.resolution {
            return 0.0;
        }
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }

    /// Value of the band-limited continuation of `x` at fractional index `t`
    /// (zero outside the signal).
    pub fn at(&self, x: &[Complex64], t: f64) -> Complex64 {
        let centre = t.floor() as isize;
        let w = self.half_width as isize;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in centre - w + 1..=centre + w {
            if k < 0 || k as usize >= x.len() {
                continue;
            }
            acc += x[k as usize] * self.kernel(t - k as f64);
        }
        acc
    }

    /// Delays `x` by `delay` samples (non-negative). The integer part shifts,
    /// the fractional part interpolates; output length grows accordingly.
    pub fn delay(&self, x: &[Complex64], delay: f64) -> Vec<Complex64> {
        assert!(delay >= 0.0 && delay.is_finite());
        let whole = delay.floor() as usize;
        let frac = delay - whole as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); whole];
        if frac == 0.0 {
            out.extend_from_slice(x);
            return out;
        }
        // Fixed fractional shift: one FIR for all samples.
        let w = self.half_width as isize;
        let taps: Vec<(isize, f64)> = (-w..=w).map(|j| (j, self.kernel(frac + j as f64))).collect();
        let len = x.len() + self.half_width;
        out.extend((0..len).map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, hj) in &taps {
                let k = n as isize + j;
                if k >= 0 && (k as usize) < x.len() {
                    acc += x[k as usize] * hj;
                }
            }
            acc
        }));
        out
    }

    /// Resamples to `(1 + offset)` times the input rate: `y[n] = x(n / (1 + offset))`.
    pub fn resample(&self, x: &[Complex64], offset: f64) -> Vec<Complex64> {
        let ratio = 1.0 + offset;
        let len = (x.len() as f64 * ratio).floor() as usize;
        (0..len).map(|n| self.at(x, n as f64 / ratio)).collect()
    }
}
