//! Transmit chain.

pub mod chain;
pub mod interleave;
pub mod scramble;
pub mod transport;

pub use chain::{burst_len, encode_frame, map_coded_bits, nominal_power, transmit, FrameCells, TxFrame, TxOutput};
pub use interleave::{bit_deinterleave, bit_interleave, symbol_deinterleave, symbol_interleave};
pub use transport::{crc_attach, crc_check, segment_payload, TransportBlock};
