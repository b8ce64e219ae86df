//! Square Gray-mapped QAM: mapper and max-log soft demapper.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Modulation;

/// LLR saturation applied by the demapper.
pub const LLR_CLAMP: f64 = 30.0;

/// Unit-average-power scale: 1/sqrt(2(L²-1)/3) for L levels per axis.
pub fn scale(modulation: Modulation) -> f64 {
    let l = modulation.levels() as f64;
    1.0 / (2.0 * (l * l - 1.0) / 3.0).sqrt()
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Unnormalized PAM amplitude (odd integer) for a Gray label on one axis.
fn axis_level(label: usize, levels: usize) -> f64 {
    2.0 * gray_to_binary(label) as f64 - (levels as f64 - 1.0)
}

/// Maps bits (MSB-first per symbol; first half on I, second half on Q).
pub fn qam_map(bits: &[u8], modulation: Modulation) -> Result<Vec<Complex64>> {
    let m = modulation.bits_per_symbol();
    if bits.len() % m != 0 {
        return Err(Error::LengthMismatch {
            expected: bits.len().div_ceil(m) * m,
            actual: bits.len(),
        });
    }
    let half = m / 2;
    let levels = modulation.levels();
    let s = scale(modulation);
    Ok(bits
        .chunks(m)
        .map(|c| {
            let to_label = |b: &[u8]| b.iter().fold(0usize, |acc, &x| (acc << 1) | (x & 1) as usize);
            Complex64::new(
                axis_level(to_label(&c[..half]), levels) * s,
                axis_level(to_label(&c[half..]), levels) * s,
            )
        })
        .collect())
}

/// All constellation points in label order.
pub fn constellation(modulation: Modulation) -> Vec<Complex64> {
    let m = modulation.bits_per_symbol();
    (0..1usize << m)
        .map(|label| {
            let bits: Vec<u8> = (0..m).rev().map(|i| ((label >> i) & 1) as u8).collect();
            qam_map(&bits, modulation).expect("one symbol")[0]
        })
        .collect()
}

/// Max-log LLRs for one axis: `(min_{b=1} d² - min_{b=0} d²) / noise_var`.
fn axis_llrs(y: f64, modulation: Modulation, inv_noise: f64, out: &mut Vec<f64>) {
    let half = modulation.bits_per_symbol() / 2;
    let levels = modulation.levels();
    let s = scale(modulation);
    for bit in (0..half).rev() {
        let mut d0 = f64::INFINITY;
        let mut d1 = f64::INFINITY;
        for label in 0..levels {
            let d = y - axis_level(label, levels) * s;
            let d2 = d * d;
            if (label >> bit) & 1 == 0 {
                d0 = d0.min(d2);
            } else {
                d1 = d1.min(d2);
            }
        }
        out.push(((d1 - d0) * inv_noise).clamp(-LLR_CLAMP, LLR_CLAMP));
    }
}

/// Soft demapper. `noise_var` is the complex noise variance per symbol
/// (one value, or one per symbol). Positive LLR favours bit 0.
pub fn qam_demap(symbols: &[Complex64], modulation: Modulation, noise_var: &[f64]) -> Vec<f64> {
    assert!(noise_var.len() == 1 || noise_var.len() == symbols.len());
    let mut out = Vec::with_capacity(symbols.len() * modulation.bits_per_symbol());
    for (i, y) in symbols.iter().enumerate() {
        let nv = if noise_var.len() == 1 { noise_var[0] } else { noise_var[i] };
        let inv = 1.0 / nv.max(f64::MIN_POSITIVE);
        axis_llrs(y.re, modulation, inv, &mut out);
        axis_llrs(y.im, modulation, inv, &mut out);
    }
    out
}

pub fn hard_decisions(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| u8::from(l < 0.0)).collect()
}
