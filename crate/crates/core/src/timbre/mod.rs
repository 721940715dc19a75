//! Timbre path: the reference is cut, analysed and frame-shuffled, then read
//! twice: a memory-augmented self-attention stack pools it into a FiLM
//! condition, and cross-attention aligns it to the source content.

mod context;
mod embed;
mod memory;
mod reference;

pub use context::{cross_attention, ContextAwareFusion, CrossAttentionBlock};
pub use embed::{cosine, speaker_embed, SpeakerEmbedder};
pub use memory::{film_apply, MemoryAugment, SelfAttentionBlock, TimbreCondition};
pub use reference::{build_reference_timbre, reference_segment, SegmentSpec, TimbreSequence};
