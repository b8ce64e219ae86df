//! Pilot-based fine offset estimation, grid-domain correction and
//! least-squares channel estimation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{signed_bin, FrameConfig, PilotLayout, PilotSequence, ResourceGrid};

/// Lower bound on the noise variance estimate, relative to mean channel power.
pub const NOISE_FLOOR_REL: f64 = 1e-10;
/// Pilot magnitudes below this cannot be divided out.
pub const PILOT_GUARD: f64 = 1e-12;

/// Unwraps phase jumps larger than π in place.
pub fn unwrap(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        phases[i] = phases[i - 1] + d;
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Phase slope (radians per symbol) on each comb subcarrier with its
/// received pilot energy as weight.
pub fn comb_phase_slopes(
    grid: &ResourceGrid,
    layout: &PilotLayout,
    pilots: &PilotSequence,
) -> Result<Vec<(f64, f64)>> {
    if grid.n_symbols < 2 {
        return Err(Error::SignalTooShort {
            needed: 2,
            available: grid.n_symbols,
        });
    }
    let t: Vec<f64> = (0..grid.n_symbols).map(|s| s as f64).collect();
    Ok(layout
        .comb_pilot_subcarrier_indices
        .iter()
        .zip(&pilots.comb)
        .map(|(&bin, p)| {
            let z: Vec<Complex64> = (0..grid.n_symbols).map(|s| grid.at(s, bin) * p.conj()).collect();
            let mut phase: Vec<f64> = z.iter().map(|c| c.arg()).collect();
            unwrap(&mut phase);
            let weight: f64 = z.iter().map(|c| c.norm_sqr()).sum();
            (ls_slope(&t, &phase), weight)
        })
        .collect())
}

fn weighted_mean(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (v, w) in pairs {
        num += v * w;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Residual carrier offset in Hz from the comb-pilot phase drift. Slopes
/// are averaged with weights proportional to pilot energy.
pub fn fine_cfo_estimate(
    grid: &ResourceGrid,
    layout: &PilotLayout,
    pilots: &PilotSequence,
    config: &FrameConfig,
) -> Result<f64> {
    fine_cfo_estimate_multi(&[grid], layout, pilots, config)
}

/// As [`fine_cfo_estimate`], pooling comb subcarriers of several elements
/// that share one oscillator.
pub fn fine_cfo_estimate_multi(
    grids: &[&ResourceGrid],
    layout: &PilotLayout,
    pilots: &PilotSequence,
    config: &FrameConfig,
) -> Result<f64> {
    let mut all = Vec::new();
    for g in grids {
        all.extend(comb_phase_slopes(g, layout, pilots)?);
    }
    let beta = weighted_mean(all.into_iter());
    Ok(beta / (2.0 * PI * config.symbol_duration()))
}

/// Timing offset in samples from the block-pilot phase slope across
/// frequency, averaged over the block-pilot symbols in the grid.
pub fn fine_sto_estimate(
    grid: &ResourceGrid,
    layout: &PilotLayout,
    pilots: &PilotSequence,
    config: &FrameConfig,
) -> Result<f64> {
    let symbols: Vec<usize> = (0..grid.n_symbols).filter(|&s| layout.is_block_pilot(s)).collect();
    if symbols.is_empty() {
        return Err(Error::Estimation("no block-pilot symbol in grid".into()));
    }
    let freqs = layout.occupied_frequencies();
    let n = config.fft_size as f64;
    let total: f64 = symbols
        .iter()
        .map(|&s| {
            let mut phase: Vec<f64> = layout
                .occupied
                .iter()
                .zip(&pilots.block)
                .map(|(&b, p)| (grid.at(s, b) * p.conj()).arg())
                .collect();
            unwrap(&mut phase);
            -ls_slope(&freqs, &phase) * n / (2.0 * PI)
        })
        .sum();
    Ok(total / symbols.len() as f64)
}

/// Removes a linear phase in time (`cfo`, Hz) and in frequency (`sto`,
/// samples): `Y[s,k] e^{-j2π cfo s T} e^{+j2π k sto / N}`.
pub fn apply_fine_correction(grid: &ResourceGrid, fine_cfo: f64, fine_sto: f64, config: &FrameConfig) -> ResourceGrid {
    let mut out = grid.clone();
    let n = grid.fft_size;
    let t = config.symbol_duration();
    let freq_rot: Vec<Complex64> = (0..n)
        .map(|b| Complex64::from_polar(1.0, 2.0 * PI * signed_bin(b, n) as f64 * fine_sto / n as f64))
        .collect();
    for s in 0..grid.n_symbols {
        let time_rot = Complex64::from_polar(1.0, -2.0 * PI * fine_cfo * s as f64 * t);
        for (v, r) in out.symbol_mut(s).iter_mut().zip(&freq_rot) {
            *v *= r * time_rot;
        }
    }
    out
}

/// Channel estimate of one element over the occupied band.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub n_symbols: usize,
    /// Occupied subcarriers, in the order of `PilotLayout::occupied`.
    pub width: usize,
    /// `gains[s * width + j]` for symbol `s`, occupied position `j`.
    pub gains: Vec<Complex64>,
    pub noise_var: f64,
}

impl ChannelEstimate {
    pub fn at(&self, s: usize, j: usize) -> Complex64 {
        self.gains[s * self.width + j]
    }

    pub fn mean_gain_power(&self) -> f64 {
        self.gains.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.gains.len() as f64
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.mean_gain_power() / self.noise_var).log10()
    }
}

/// Interpolation weights for symbol `s`: (left pilot, right pilot, weight of
/// the right pilot). Symbols outside the pilot span hold the nearest one.
fn bracket(pilot_symbols: &[usize], s: usize) -> (usize, usize, f64) {
    let first = pilot_symbols[0];
    let last = *pilot_symbols.last().expect("non-empty");
    if s <= first {
        return (first, first, 0.0);
    }
    if s >= last {
        return (last, last, 0.0);
    }
    let i = pilot_symbols.partition_point(|&p| p <= s);
    let (a, b) = (pilot_symbols[i - 1], pilot_symbols[i]);
    (a, b, (s - a) as f64 / (b - a) as f64)
}

/// LS estimates at block pilots, linear interpolation in time between
/// them, and a noise variance from comb-pilot residuals.
pub fn estimate_channel(
    grid: &ResourceGrid,
    layout: &PilotLayout,
    pilots: &PilotSequence,
    _config: &FrameConfig,
) -> Result<ChannelEstimate> {
    let pilot_symbols: Vec<usize> = (0..grid.n_symbols).filter(|&s| layout.is_block_pilot(s)).collect();
    if pilot_symbols.is_empty() {
        return Err(Error::Estimation("no block-pilot symbol in grid".into()));
    }
    if pilots.block.iter().any(|p| p.norm() < PILOT_GUARD) {
        return Err(Error::Estimation("pilot magnitude below division guard".into()));
    }
    let width = layout.occupied.len();
    let ls: Vec<Vec<Complex64>> = pilot_symbols
        .iter()
        .map(|&s| {
            layout
                .occupied
                .iter()
                .zip(&pilots.block)
                .map(|(&b, p)| grid.at(s, b) / p)
                .collect()
        })
        .collect();
    let index_of = |s: usize| pilot_symbols.binary_search(&s).expect("pilot symbol");
    let mut gains = Vec::with_capacity(grid.n_symbols * width);
    for s in 0..grid.n_symbols {
        let (a, b, w) = bracket(&pilot_symbols, s);
        let (ha, hb) = (&ls[index_of(a)], &ls[index_of(b)]);
        gains.extend(ha.iter().zip(hb).map(|(x, y)| x * (1.0 - w) + y * w));
    }

    // Residual at comb pilots of data symbols. The estimate there carries
    // noise of its own: variance (1-w)² + w² times the cell noise.
    let (mut acc, mut count) = (0.0, 0usize);
    for s in (0..grid.n_symbols).filter(|&s| !layout.is_block_pilot(s)) {
        let (_, _, w) = bracket(&pilot_symbols, s);
        let inflation = 1.0 + (1.0 - w) * (1.0 - w) + w * w;
        for (&j, p) in layout.comb_positions.iter().zip(&pilots.comb) {
            let y = grid.at(s, layout.occupied[j]);
            let r = y - gains[s * width + j] * p;
            acc += r.norm_sqr() / inflation;
            count += 1;
        }
    }
    let mean_power = gains.iter().map(|c| c.norm_sqr()).sum::<f64>() / gains.len().max(1) as f64;
    let floor = (NOISE_FLOOR_REL * mean_power).max(f64::MIN_POSITIVE);
    let noise_var = if count > 0 { (acc / count as f64).max(floor) } else { floor };
    Ok(ChannelEstimate {
        n_symbols: grid.n_symbols,
        width,
        gains,
        noise_var,
    })
}

/// Re-estimates the channel using every cell of `reference` (the known or
/// decided transmitted grid) instead of the block pilots alone: for each
/// occupied subcarrier, a least-squares line in time through all symbols.
/// The noise variance comes from the residuals with two complex
/// parameters per subcarrier taken out.
pub fn refine_channel(grid: &ResourceGrid, reference: &ResourceGrid, layout: &PilotLayout) -> Result<ChannelEstimate> {
    if grid.n_symbols != reference.n_symbols || grid.fft_size != reference.fft_size {
        return Err(Error::LengthMismatch {
            expected: grid.n_symbols * grid.fft_size,
            actual: reference.n_symbols * reference.fft_size,
        });
    }
    let n = grid.n_symbols;
    if n < 2 {
        return Err(Error::SignalTooShort { needed: 2, available: n });
    }
    let width = layout.occupied.len();
    let centre = (n - 1) as f64 / 2.0;
    let mut gains = vec![Complex64::new(0.0, 0.0); n * width];
    let (mut acc, mut count) = (0.0, 0usize);
    for (j, &bin) in layout.occupied.iter().enumerate() {
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        let (mut q0, mut q1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for s in 0..n {
            let t = s as f64 - centre;
            let x = reference.at(s, bin);
            let xy = x.conj() * grid.at(s, bin);
            let e = x.norm_sqr();
            p0 += e;
            p1 += e * t;
            p2 += e * t * t;
            q0 += xy;
            q1 += xy * t;
        }
        let det = p0 * p2 - p1 * p1;
        if det <= PILOT_GUARD * p0.max(1.0) {
            return Err(Error::Estimation(format!("reference too weak on subcarrier {j}")));
        }
        let a = (q0 * p2 - q1 * p1) / det;
        let b = (q1 * p0 - q0 * p1) / det;
        for s in 0..n {
            let h = a + b * (s as f64 - centre);
            gains[s * width + j] = h;
            acc += (grid.at(s, bin) - h * reference.at(s, bin)).norm_sqr();
            count += 1;
        }
    }
    let dof = count.saturating_sub(2 * width).max(1);
    let mean_power = gains.iter().map(|c| c.norm_sqr()).sum::<f64>() / gains.len().max(1) as f64;
    let floor = (NOISE_FLOOR_REL * mean_power).max(f64::MIN_POSITIVE);
    Ok(ChannelEstimate {
        n_symbols: n,
        width,
        gains,
        noise_var: (acc / dof as f64).max(floor),
    })
}
