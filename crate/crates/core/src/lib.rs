//! Zero-shot voice conversion on a desk-scale budget.
//!
//! Content comes from frame-aligned phonetic posteriors gated by quantised
//! self-supervised features; timbre comes from a shuffled reference
//! spectrogram through a memory-augmented FiLM head and a cross-attention
//! fusion; a conditional flow-matching decoder integrates an
//! optimal-transport vector field from noise to the mel spectrogram.

pub mod cfm;
pub mod content;
pub mod dsp;
mod error;
pub mod numerics;
pub mod par;
pub mod pipeline;
pub mod timbre;

pub use error::{Error, Result};
