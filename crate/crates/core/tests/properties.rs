use aofm_core::grid::{pilot_sequence, FrameConfig, PilotLayout, PilotSequence, ResourceGrid};
use aofm_core::ofdm::{ofdm_demodulate, ofdm_modulate};
use aofm_core::qam::qam_map;
use aofm_core::rx::{
    apply_fine_correction, estimate_channel, fine_cfo_estimate, fine_sto_estimate, mrc_combine, zero_force,
    CombineMode,
};
use aofm_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Frame {
    cfg: FrameConfig,
    layout: PilotLayout,
    pilots: PilotSequence,
    data: Vec<Complex64>,
    grid: ResourceGrid,
}

fn frame(seed: u64) -> Frame {
    let cfg = FrameConfig::default();
    let layout = PilotLayout::new(&cfg);
    let pilots = pilot_sequence(&layout, cfg.pilot_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..cfg.data_cells_per_frame() * cfg.bits_per_symbol())
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let data = qam_map(&bits, cfg.modulation()).unwrap();
    let grid = ResourceGrid::fill(&layout, &pilots, &data).unwrap();
    Frame {
        cfg,
        layout,
        pilots,
        data,
        grid,
    }
}

/// RMS phase difference over the occupied cells.
fn rms_phase_error(a: &ResourceGrid, b: &ResourceGrid) -> f64 {
    let (sum, n) = a
        .symbols
        .iter()
        .zip(&b.symbols)
        .filter(|(_, y)| y.norm() > 1e-9)
        .fold((0.0, 0usize), |(s, n), (x, y)| (s + (x * y.conj()).arg().powi(2), n + 1));
    (sum / n as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integer_delay_is_recovered_exactly(seed in any::<u64>(), d in 0usize..256) {
        let f = frame(seed);
        let signal = ofdm_modulate(&f.data, &f.pilots, &f.cfg, &f.layout).unwrap().samples;
        let mut delayed = vec![Complex64::new(0.0, 0.0); d];
        delayed.extend_from_slice(&signal);
        let grid = ofdm_demodulate(&delayed, &f.cfg, 0, f.cfg.n_symbols_per_frame).unwrap();
        let est = fine_sto_estimate(&grid, &f.layout, &f.pilots, &f.cfg).unwrap();
        prop_assert!((est - d as f64).abs() < 1e-6, "d={} est={}", d, est);
    }

    #[test]
    fn correction_undoes_injected_offsets(seed in any::<u64>(), cfo in -200.0f64..200.0, sto in -8.0f64..8.0) {
        let f = frame(seed);
        let injected = apply_fine_correction(&f.grid, -cfo, -sto, &f.cfg);
        let est_cfo = fine_cfo_estimate(&injected, &f.layout, &f.pilots, &f.cfg).unwrap();
        let est_sto = fine_sto_estimate(&injected, &f.layout, &f.pilots, &f.cfg).unwrap();
        let restored = apply_fine_correction(&injected, est_cfo, est_sto, &f.cfg);
        prop_assert!(rms_phase_error(&restored, &f.grid) < 1e-3);
    }

    #[test]
    fn single_element_mrc_is_zero_forcing(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let g = Complex64::new(re, im);
        prop_assume!(g.norm() > 0.05);
        let f = frame(seed);
        let mut rx = f.grid.clone();
        rx.symbols.iter_mut().for_each(|c| *c *= g);
        let est = estimate_channel(&rx, &f.layout, &f.pilots, &f.cfg).unwrap();
        let eq = mrc_combine(&[&rx], &[&est], &f.layout, CombineMode::Weighted).unwrap();
        let zf = zero_force(&rx, &est, &f.layout).unwrap();
        prop_assert_eq!(eq.symbols.len(), f.data.len());
        let worst = eq.symbols.iter().zip(&f.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-9, "{}", worst);
        for mode in [CombineMode::Weighted, CombineMode::Unweighted] {
            let eq = mrc_combine(&[&rx], &[&est], &f.layout, mode).unwrap();
            prop_assert_eq!(&eq.symbols, &zf.symbols);
        }
    }
}
