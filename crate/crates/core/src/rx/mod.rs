//! Receive chain: synchronization, fine estimation, channel estimation,
//! combining and decoding.

pub mod combine;
pub mod estimate;
pub mod receiver;
pub mod sync;
pub mod window;

pub use crate::dsp::down_convert;
pub use combine::{mrc_combine, zero_force, CombineMode, Equalized};
pub use estimate::{
    apply_fine_correction, estimate_channel, fine_cfo_estimate, fine_cfo_estimate_multi, fine_sto_estimate,
    ChannelEstimate,
};
pub use receiver::{receive, FrameLog, FrameResult, Gap, ReceiverConfig, RxOutput};
pub use sync::{coarse_sync, coarse_sync_multi, FrameDetector, FrameSync, SyncEstimate};
pub use window::{delay_profile, window_shift};
