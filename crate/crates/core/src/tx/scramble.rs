//! Coded-bit whitening: every frame's bits (codewords and filler) are XORed
//! with the same PRBS15 stream, so padding and filler carry random-looking
//! symbols.

use crate::grid::Prbs15;

const SEED: u64 = 0x5A5A;

pub fn scramble_sequence(len: usize) -> Vec<u8> {
    Prbs15::new(SEED).take(len).collect()
}

pub fn scramble_bits(bits: &mut [u8]) {
    for (b, s) in bits.iter_mut().zip(Prbs15::new(SEED)) {
        *b ^= s;
    }
}

/// Receiver side: flips the sign of every LLR whose bit was inverted.
pub fn descramble_llrs(llrs: &mut [f64]) {
    for (l, s) in llrs.iter_mut().zip(Prbs15::new(SEED)) {
        if s == 1 {
            *l = -*l;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scrambling_twice_restores() {
        let mut bits: Vec<u8> = (0..5000).map(|i| (i % 3 == 0) as u8).collect();
        let orig = bits.clone();
        scramble_bits(&mut bits);
        assert_ne!(bits, orig);
        scramble_bits(&mut bits);
        assert_eq!(bits, orig);
    }

    #[test]
    fn llr_flip_matches_bit_flip() {
        let seq = scramble_sequence(100);
        let mut llrs = vec![1.0; 100];
        descramble_llrs(&mut llrs);
        for (l, s) in llrs.iter().zip(&seq) {
            assert_eq!(*l < 0.0, *s == 1);
        }
    }

    #[test]
    fn zero_filler_becomes_balanced() {
        let mut bits = vec![0u8; 30_000];
        scramble_bits(&mut bits);
        let ones = bits.iter().filter(|&&b| b == 1).count() as f64 / bits.len() as f64;
        assert!((ones - 0.5).abs() < 0.02);
    }
}
