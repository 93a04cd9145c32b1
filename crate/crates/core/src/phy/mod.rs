//! Superimposed transmit/receive chain.

pub mod rx;
pub mod tx;

pub use rx::{
    cancel_csi, cancel_data, despread, detect_data, initial_feature, lmmse_csi, lmmse_data, receive, ref8_baseline,
    reestimate_csi, Detector, InitialFeature, LinkParams,
};
pub use tx::{
    compress, demap_qpsk, hard_qpsk, modulate_qpsk, random_bits, spread, superimpose, CompressionMatrix,
    SpreadingMatrix,
};
