//! Transport blocks: payload segmentation, length field and CRC-32.

use crate::grid::FrameConfig;

/// Sequence number (4 bytes), pad length (2 bytes) and CRC (4 bytes).
pub const OVERHEAD_BYTES: usize = 10;
const HEADER_BYTES: usize = 6;

/// One frame's worth of payload.
///
/// Wire layout (big-endian): `sequence_number | pad_len | payload | pad_len
/// zero bytes | crc32`, where the CRC covers every preceding byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportBlock {
    pub sequence_number: u32,
    pub payload: Vec<u8>,
    pub pad_len: u16,
    pub crc: Option<u32>,
}

impl TransportBlock {
    pub fn new(sequence_number: u32, payload: Vec<u8>, pad_len: u16) -> Self {
        TransportBlock {
            sequence_number,
            payload,
            pad_len,
            crc: None,
        }
    }

    fn body(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.payload.len() + self.pad_len as usize);
        out.extend_from_slice(&self.sequence_number.to_be_bytes());
        out.extend_from_slice(&self.pad_len.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out.resize(out.len() + self.pad_len as usize, 0);
        out
    }

    pub fn compute_crc(&self) -> u32 {
        crc32(&self.body())
    }

    /// Serialized block, CRC included (computed if not yet attached).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body();
        let crc = self.crc.unwrap_or_else(|| self.compute_crc());
        out.extend_from_slice(&crc.to_be_bytes());
        out
    }

    /// Parses a received block. Returns `None` when the bytes cannot be a
    /// block of this size (pad length exceeding the body, or non-zero pad).
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < OVERHEAD_BYTES {
            return None;
        }
        let sequence_number = u32::from_be_bytes(bytes[0..4].try_into().ok()?);
        let pad_len = u16::from_be_bytes(bytes[4..6].try_into().ok()?);
        let crc_at = bytes.len() - 4;
        let body_len = crc_at - HEADER_BYTES;
        if pad_len as usize > body_len {
            return None;
        }
        let pad_at = HEADER_BYTES + body_len - pad_len as usize;
        if bytes[pad_at..crc_at].iter().any(|&b| b != 0) {
            return None;
        }
        let payload = bytes[HEADER_BYTES..pad_at].to_vec();
        let crc = u32::from_be_bytes(bytes[crc_at..].try_into().ok()?);
        Some(TransportBlock {
            sequence_number,
            payload,
            pad_len,
            crc: Some(crc),
        })
    }
}

/// CRC-32 (polynomial 0x04C11DB7, reflected, init and final XOR 0xFFFFFFFF).
pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn crc_attach(mut block: TransportBlock) -> TransportBlock {
    block.crc = Some(block.compute_crc());
    block
}

pub fn crc_check(block: &TransportBlock) -> bool {
    block.crc == Some(block.compute_crc())
}

/// Splits a payload into blocks of `config.tb_capacity_bytes()`, zero-padding
/// the last one. An empty payload yields a single fully padded block.
pub fn segment_payload(bytes: &[u8], config: &FrameConfig) -> Vec<TransportBlock> {
    let capacity = config.tb_capacity_bytes();
    assert!(capacity > 0, "frame carries no payload");
    if bytes.is_empty() {
        return vec![crc_attach(TransportBlock::new(0, Vec::new(), capacity as u16))];
    }
    bytes
        .chunks(capacity)
        .enumerate()
        .map(|(i, chunk)| {
            let pad = (capacity - chunk.len()) as u16;
            crc_attach(TransportBlock::new(i as u32, chunk.to_vec(), pad))
        })
        .collect()
}

/// Concatenates block payloads in sequence-number order.
pub fn reassemble(blocks: &[TransportBlock]) -> Vec<u8> {
    let mut sorted: Vec<&TransportBlock> = blocks.iter().collect();
    sorted.sort_by_key(|b| b.sequence_number);
    sorted.iter().flat_map(|b| b.payload.iter().copied()).collect()
}

/// Unpacks bytes MSB first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Packs bits MSB first; the bit count must be a multiple of 8.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    debug_assert_eq!(bits.len() % 8, 0);
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}
