//! Codec-agnostic film grain handling toolchain.
//!
//! The pipeline mirrors the grain-aware coding flow: a motion-compensated
//! temporal filter removes grain before encoding, an analyzer estimates a
//! frequency-filtering grain model from the original-minus-denoised
//! residual, the model travels as a bit-exact film grain characteristics
//! message, and a synthesizer regenerates grain on the reconstructed video.
//! An evaluation harness with a built-in proxy codec scores the chains
//! against each other.
//!
//! Modules:
//! - [`frame`]: planar 4:2:0 data model and raw YUV I/O
//! - [`denoise`]: motion-compensated temporal pre-filtering
//! - [`analysis`]: grain parameter estimation from residuals
//! - [`sei`]: film grain characteristics payload codec and sidecar framing
//! - [`synthesis`]: pattern database and per-block grain application
//! - [`metrics`], [`proxy`], [`pipeline`]: evaluation harness

pub mod analysis;
pub mod dct;
pub mod denoise;
pub mod error;
pub mod frame;
pub mod metrics;
pub mod num;
pub mod params;
pub mod pipeline;
pub mod prng;
pub mod proxy;
pub mod sei;
pub mod synthesis;

pub use error::{Error, Result};
