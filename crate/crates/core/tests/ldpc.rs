use aofm_core::ldpc::{LdpcCode, CODEWORD_LEN, INFO_LEN, MAX_ITERATIONS};
use aofm_core::qam::LLR_CLAMP;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// BPSK (0 -> +1) over AWGN at `ebn0_db` for the rate-2/3 code; exact LLRs.
fn bpsk_llrs(codeword: &[u8], ebn0_db: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rate = INFO_LEN as f64 / CODEWORD_LEN as f64;
    let var = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
    codeword
        .iter()
        .map(|&b| {
            let x = if b == 0 { 1.0 } else { -1.0 };
            let n: f64 = StandardNormal.sample(rng);
            2.0 * (x + var.sqrt() * n) / var
        })
        .collect()
}

fn random_info(rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..INFO_LEN).map(|_| rng.random_range(0..2u8)).collect()
}

/// (bit errors, frame errors) over `frames` codewords.
fn run(ebn0_db: f64, frames: u64, seed: u64, clamp: bool) -> (usize, usize) {
    let code = LdpcCode::standard();
    (0..frames)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i));
            let info = random_info(&mut rng);
            let cw = code.encode(&info).unwrap().bits;
            let mut llrs = bpsk_llrs(&cw, ebn0_db, &mut rng);
            if clamp {
                llrs.iter_mut().for_each(|l| *l = l.clamp(-LLR_CLAMP, LLR_CLAMP));
            }
            let out = code.decode(&llrs, MAX_ITERATIONS).unwrap();
            let errors = out.info.iter().zip(&info).filter(|(a, b)| a != b).count();
            (errors, usize::from(errors > 0))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

#[test]
fn ber_below_1e5_at_4db() {
    // 772 codewords carry just over 10^6 information bits.
    let frames = 772;
    let (errors, _) = run(4.0, frames, 1, true);
    let bits = frames as usize * INFO_LEN;
    assert!(bits >= 1_000_000);
    let ber = errors as f64 / bits as f64;
    assert!(ber < 1e-5, "{errors} errors in {bits} bits");
}

#[test]
fn llr_clamp_has_no_measurable_effect() {
    for ebn0 in [2.0, 2.5, 3.0] {
        let (be_c, fe_c) = run(ebn0, 200, 7, true);
        let (be_u, fe_u) = run(ebn0, 200, 7, false);
        assert!(fe_c.abs_diff(fe_u) <= 1, "{ebn0} dB: frames {fe_c} vs {fe_u}");
        assert!(be_c.abs_diff(be_u) <= 50, "{ebn0} dB: bits {be_c} vs {be_u}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn converged_output_satisfies_every_check(seed in any::<u64>(), ebn0 in 0.0f64..4.0) {
        let code = LdpcCode::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let info = random_info(&mut rng);
        let cw = code.encode(&info).unwrap().bits;
        let out = code.decode(&bpsk_llrs(&cw, ebn0, &mut rng), MAX_ITERATIONS).unwrap();
        prop_assert_eq!(out.codeword.len(), CODEWORD_LEN);
        prop_assert_eq!(&out.codeword[..INFO_LEN], &out.info[..]);
        if out.converged {
            prop_assert!(code.syndrome(&out.codeword).iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn noiseless_round_trip(seed in any::<u64>(), scale in 0.5f64..40.0) {
        let code = LdpcCode::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let info = random_info(&mut rng);
        let cw = code.encode(&info).unwrap().bits;
        let llrs: Vec<f64> = cw.iter().map(|&b| if b == 0 { scale } else { -scale }).collect();
        let out = code.decode(&llrs, MAX_ITERATIONS).unwrap();
        prop_assert!(out.converged);
        prop_assert_eq!(out.info, info);
    }
}
