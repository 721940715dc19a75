//! Audio I/O, log-mel analysis, frame shuffling, Griffin–Lim inversion and
//! pitch estimation.

mod griffin_lim;
mod mel;
mod pitch;
mod stft;
mod wav;

pub use griffin_lim::{griffin_lim, griffin_lim_traced, mel_to_linear, nnls_frame, GriffinLimOutput};
pub use mel::{
    hz_to_mel, mel_spectrogram, mel_to_hz, shuffle_frames, shuffle_permutation, MelAnalyzer,
    MelConfig, MelFilterbank, MelSpectrogram,
};
pub use pitch::{estimate_f0, f0_track};
pub use stft::{bin_weight, Stft};
pub use wav::{decode_wav, encode_wav, i16_to_sample, load_wav, sample_to_i16, save_wav, Waveform};
