//! Rate-2/3 quasi-cyclic LDPC code (n = 1944, k = 1296) with a systematic
//! encoder and a normalized min-sum decoder.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const CIRCULANT: usize = 81;
pub const BLOCK_ROWS: usize = 8;
pub const BLOCK_COLS: usize = 24;
pub const CODEWORD_LEN: usize = BLOCK_COLS * CIRCULANT;
pub const INFO_LEN: usize = (BLOCK_COLS - BLOCK_ROWS) * CIRCULANT;
pub const PARITY_LEN: usize = BLOCK_ROWS * CIRCULANT;

/// Min-sum normalization factor.
pub const NORMALIZATION: f64 = 0.75;
pub const MAX_ITERATIONS: usize = 50;

const BASE_MATRIX: &str = include_str!("../data/qc_r23_n1944_z81.txt");

const INFO_WORDS: usize = INFO_LEN.div_ceil(64);
const PARITY_WORDS: usize = PARITY_LEN.div_ceil(64);

/// Parses the base matrix data file into shift values (`None` = zero block).
pub fn base_matrix() -> Vec<Vec<Option<usize>>> {
    BASE_MATRIX
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| {
                    let v: i64 = t.parse().expect("integer base-matrix entry");
                    (v >= 0).then_some(v as usize)
                })
                .collect()
        })
        .collect()
}

/// Expanded parity-check structure plus the dense parity generator.
#[derive(Debug)]
pub struct LdpcCode {
    /// Variable indices of each check, in row order.
    check_vars: Vec<Vec<u32>>,
    /// Flattened edges (check-major) and their offsets.
    edge_var: Vec<u32>,
    row_ptr: Vec<usize>,
    /// Row `i` gives parity bit `i` as a GF(2) combination of info bits.
    parity_gen: Vec<[u64; INFO_WORDS]>,
}

/// Coded block: systematic information bits followed by parity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub info: Vec<u8>,
    /// Hard decisions on all coded bits after the last iteration.
    pub codeword: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

impl LdpcCode {
    /// The shared instance built from the bundled base matrix.
    pub fn standard() -> &'static LdpcCode {
        static CODE: OnceLock<LdpcCode> = OnceLock::new();
        CODE.get_or_init(|| LdpcCode::from_base(&base_matrix(), CIRCULANT))
    }

    fn from_base(base: &[Vec<Option<usize>>], z: usize) -> Self {
        assert_eq!(base.len(), BLOCK_ROWS);
        let mut check_vars = vec![Vec::new(); base.len() * z];
        for (bi, row) in base.iter().enumerate() {
            assert_eq!(row.len(), BLOCK_COLS);
            for (bj, shift) in row.iter().enumerate() {
                if let Some(s) = shift {
                    for r in 0..z {
                        check_vars[bi * z + r].push((bj * z + (r + s) % z) as u32);
                    }
                }
            }
        }
        for vars in &mut check_vars {
            vars.sort_unstable();
        }
        let mut row_ptr = vec![0];
        let mut edge_var = Vec::new();
        for vars in &check_vars {
            edge_var.extend_from_slice(vars);
            row_ptr.push(edge_var.len());
        }
        let parity_gen = parity_generator(&check_vars);
        LdpcCode {
            check_vars,
            edge_var,
            row_ptr,
            parity_gen,
        }
    }

    pub fn n_checks(&self) -> usize {
        self.check_vars.len()
    }

    pub fn check_vars(&self, check: usize) -> &[u32] {
        &self.check_vars[check]
    }

    /// H·c over GF(2); all zeros for a codeword.
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.check_vars
            .iter()
            .map(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (bits[v as usize] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == CODEWORD_LEN && self.syndrome(bits).iter().all(|&s| s == 0)
    }

    pub fn encode(&self, info: &[u8]) -> Result<Codeword> {
        if info.len() != INFO_LEN {
            return Err(Error::LengthMismatch {
                expected: INFO_LEN,
                actual: info.len(),
            });
        }
        let mut packed = [0u64; INFO_WORDS];
        for (i, &b) in info.iter().enumerate() {
            packed[i / 64] |= u64::from(b & 1) << (i % 64);
        }
        let mut bits = Vec::with_capacity(CODEWORD_LEN);
        bits.extend(info.iter().map(|b| b & 1));
        bits.extend(self.parity_gen.iter().map(|row| {
            let ones: u32 = row
                .iter()
                .zip(&packed)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            (ones & 1) as u8
        }));
        Ok(Codeword { bits })
    }

    /// Normalized min-sum with flooding schedule. LLR sign convention:
    /// positive favours bit 0. A bit whose posterior LLR is exactly zero is
    /// undecided and prevents convergence.
    pub fn decode(&self, llrs: &[f64], max_iterations: usize) -> Result<DecodeOutcome> {
        if llrs.len() != CODEWORD_LEN {
            return Err(Error::LengthMismatch {
                expected: CODEWORD_LEN,
                actual: llrs.len(),
            });
        }
        let mut messages = vec![0.0f64; self.edge_var.len()];
        let mut total = llrs.to_vec();
        let mut hard = vec![0u8; CODEWORD_LEN];
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iterations {
            iterations += 1;
            let mut next_total = llrs.to_vec();
            for c in 0..self.n_checks() {
                let edges = self.row_ptr[c]..self.row_ptr[c + 1];
                let mut min1 = f64::INFINITY;
                let mut min2 = f64::INFINITY;
                let mut min_edge = usize::MAX;
                let mut sign_neg = false;
                for e in edges.clone() {
                    let q = total[self.edge_var[e] as usize] - messages[e];
                    sign_neg ^= q < 0.0;
                    let a = q.abs();
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        min_edge = e;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for e in edges {
                    let v = self.edge_var[e] as usize;
                    let q = total[v] - messages[e];
                    let mag = if e == min_edge { min2 } else { min1 };
                    let neg = sign_neg ^ (q < 0.0);
                    let r = NORMALIZATION * if neg { -mag } else { mag };
                    messages[e] = r;
                    next_total[v] += r;
                }
            }
            total = next_total;
            let mut decided = true;
            for (h, &t) in hard.iter_mut().zip(&total) {
                *h = u8::from(t < 0.0);
                decided &= t != 0.0;
            }
            if decided && self.syndrome(&hard).iter().all(|&s| s == 0) {
                converged = true;
                break;
            }
        }
        Ok(DecodeOutcome {
            info: hard[..INFO_LEN].to_vec(),
            codeword: hard,
            converged,
            iterations,
        })
    }
}

/// Solves H_p · p = H_s · s for the parity part by Gauss-Jordan elimination,
/// returning H_p^-1 · H_s as packed rows.
fn parity_generator(check_vars: &[Vec<u32>]) -> Vec<[u64; INFO_WORDS]> {
    let m = check_vars.len();
    debug_assert_eq!(m, PARITY_LEN);
    // Augmented rows: [H_p | H_s]
    let mut hp: Vec<[u64; PARITY_WORDS]> = vec![[0; PARITY_WORDS]; m];
    let mut hs: Vec<[u64; INFO_WORDS]> = vec![[0; INFO_WORDS]; m];
    for (r, vars) in check_vars.iter().enumerate() {
        for &v in vars {
            let v = v as usize;
            if v < INFO_LEN {
                hs[r][v / 64] ^= 1 << (v % 64);
            } else {
                let p = v - INFO_LEN;
                hp[r][p / 64] ^= 1 << (p % 64);
            }
        }
    }
    for col in 0..m {
        let (w, bit) = (col / 64, 1u64 << (col % 64));
        let pivot = (col..m)
            .find(|&r| hp[r][w] & bit != 0)
            .expect("parity part of H is full rank");
        hp.swap(col, pivot);
        hs.swap(col, pivot);
        let (prow, srow) = (hp[col], hs[col]);
        for r in 0..m {
            if r != col && hp[r][w] & bit != 0 {
                for (a, b) in hp[r].iter_mut().zip(&prow) {
                    *a ^= b;
                }
                for (a, b) in hs[r].iter_mut().zip(&srow) {
                    *a ^= b;
                }
            }
        }
    }
    hs
}

pub fn ldpc_encode(info: &[u8]) -> Result<Codeword> {
    LdpcCode::standard().encode(info)
}

pub fn ldpc_decode(llrs: &[f64]) -> Result<DecodeOutcome> {
    LdpcCode::standard().decode(llrs, MAX_ITERATIONS)
}
