//! End-to-end wiring: corpus synthesis, the trainable model, training,
//! checkpoints, conversion and evaluation.

mod classifier;
mod config;
mod convert;
mod corpus;
mod eval;
mod checkpoint;
mod model;
mod train;

pub use config::{
    full_scale, CfmConfig, EvalConfig, ModelConfig, RunConfig, RvqConfig, SeedConfig, TrainConfig,
};
pub use corpus::{
    format_labels, label_path, parse_labels, random_segments, render, synth_corpus, SyntheticCorpus,
    Utterance, VoiceProfile, DEFAULT_F0, FORMANTS, N_SYMBOLS, SAMPLE_RATE,
};
pub use classifier::{classifier_features, interior_labels, SymbolClassifier, BOUNDARY_MARGIN};
pub use model::{total_loss, ItemLoss, MelNorm, Model, TrainItem};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use train::{crop_segments, sample_item, smoothed, train, train_step, Split, StepStats, TrainReport, LOSS_LOG_HEADER};
pub use convert::{convert, segments_from_frames, Conversion, ConvertOptions, StageTimes};
pub use eval::{content_accuracy, evaluate, mel_l2, summarize, EvalReport, PairKind, PairResult};
