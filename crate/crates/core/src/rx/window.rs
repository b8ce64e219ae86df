//! FFT window placement from the delay profile seen in a block pilot.
//!
//! CP correlation locks onto the centre of mass of the channel, which for a
//! long exponential tail leaves the strongest early paths spilling the next
//! symbol into the window. The profile measured on the pilot tells how far
//! the window can move so that the energy outside the guard interval is
//! smallest.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::{PilotLayout, PilotSequence};

/// Delay-profile bins below this multiple of the median are treated as noise.
pub const PROFILE_FLOOR: f64 = 4.0;

/// Power-delay profile of a block-pilot spectrum, summed over elements.
///
/// `spectra` holds one demodulated block-pilot symbol (all fft bins) per
/// element. Entry `n` of the result is the power at circular lag `n` relative
/// to the start of the FFT window. The occupied band is Hann tapered first.
pub fn delay_profile(spectra: &[&[Complex64]], layout: &PilotLayout, pilots: &PilotSequence) -> Vec<f64> {
    let n = layout.fft_size;
    let width = layout.occupied.len();
    let taper: Vec<f64> = (0..width)
        .map(|j| {
            let x = (j as f64 + 0.5) / width as f64;
            (std::f64::consts::PI * x).sin().powi(2)
        })
        .collect();
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut profile = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for spectrum in spectra {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (j, &bin) in layout.occupied.iter().enumerate() {
            buf[bin] = spectrum[bin] * pilots.block[j].conj() * taper[j];
        }
        ifft.process(&mut buf);
        for (p, v) in profile.iter_mut().zip(&buf) {
            *p += v.norm_sqr();
        }
    }
    profile
}

/// Circular lag `i` unwrapped into `[-early, n - early)`.
fn signed_lag(i: usize, n: usize, early: usize) -> i64 {
    if i < n - early {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Window shift in samples (positive = later) that minimises the
/// profile-weighted spill past the guard interval, searched over
/// `-max_shift..=max_shift`.
///
/// A path at lag `r` (relative to the current window start) lands inside
/// the cyclic prefix while `0 <= r - shift <= cp`; outside that range its
/// interference power grows roughly with the overhang. Lags are unwrapped
/// into `[-(cp + max_shift), n - cp - max_shift)`: long tails are more likely
/// than paths arriving well before the window.
pub fn window_shift(profile: &[f64], cp_len: usize, max_shift: usize) -> i64 {
    let n = profile.len();
    if n == 0 {
        return 0;
    }
    let mut sorted = profile.to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = PROFILE_FLOOR * sorted[n / 2];
    let paths: Vec<(i64, f64)> = profile
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > floor)
        .map(|(i, &p)| (signed_lag(i, n, (cp_len + max_shift).min(n)), p - floor))
        .collect();
    if paths.is_empty() {
        return 0;
    }
    let cp = cp_len as i64;
    let cost = |shift: i64| -> f64 {
        paths
            .iter()
            .map(|&(r, p)| {
                let rel = r - shift;
                let over = if rel < 0 {
                    -rel
                } else if rel > cp {
                    rel - cp
                } else {
                    0
                };
                p * over as f64
            })
            .sum()
    };
    let m = max_shift as i64;
    let mut best: (i64, f64) = (0, cost(0));
    for shift in -m..=m {
        let c = cost(shift);
        // Ties go to the smallest move.
        if c < best.1 - 1e-12 * best.1.abs() || (c <= best.1 && shift.abs() < best.0.abs()) {
            best = (shift, c);
        }
    }
    best.0
}
