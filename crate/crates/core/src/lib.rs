//! Link-level simulator for LoS-sensing-assisted superimposed CSI feedback
//! on UAV mmWave uplinks.
//!
//! The crate covers the clustered channel generator ([`channel`]), the
//! superimposed transmit/receive chain ([`phy`]), a small neural-network
//! engine with the three receiver networks ([`nn`]), dataset generation,
//! training and online inference ([`pipeline`]), and the evaluation harness
//! ([`bench`]).

pub mod bench;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod phy;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
