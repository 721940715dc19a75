use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Model;
use crate::cfm::{euler_sample, SamplerConfig};
use crate::content::Segment;
use crate::dsp::{griffin_lim, MelSpectrogram, Waveform};
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvertOptions {
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl ConvertOptions {
    pub fn from_model(model: &Model) -> Self {
        Self {
            sampler: model.config.cfm.sampler(),
            seed: model.config.eval.seed,
        }
    }
}

/// Wall-clock seconds spent in each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimes {
    /// Source analysis, content encoding, timbre and condition building.
    pub conditioning: f64,
    /// Euler integration of the vector field.
    pub sampling: f64,
    /// Griffin–Lim.
    pub vocoder: f64,
}

pub struct Conversion {
    pub waveform: Waveform,
    /// Predicted log-mel, one frame per source frame.
    pub mel: MelSpectrogram,
    pub times: StageTimes,
}

/// Frame-wise symbols turned into segments: each mel frame owns the
/// samples closest to its window centre.
pub fn segments_from_frames(symbols: &[usize], hop: usize, win: usize, len: usize) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (i, &s) in symbols.iter().enumerate() {
        let start = if i == 0 { 0 } else { (i * hop + win / 2 - hop / 2).min(len) };
        let end = if i + 1 == symbols.len() {
            len
        } else {
            ((i + 1) * hop + win / 2 - hop / 2).min(len)
        };
        match out.last_mut() {
            Some(last) if last.symbol == s => last.end = end,
            _ => out.push(Segment { symbol: s, start, end }),
        }
    }
    out.retain(|s| s.end > s.start);
    out
}

/// Content from `source`, timbre from `reference`. Without source labels
/// the oracle classifier labels the source frames.
pub fn convert(
    model: &Model,
    source: &Waveform,
    source_labels: Option<&[Segment]>,
    reference: &Waveform,
    opts: &ConvertOptions,
) -> Result<Conversion> {
    opts.sampler.validate()?;
    let t0 = Instant::now();
    let (src_mel, mel) = model.analyze(source)?;
    let labels = match source_labels {
        Some(l) => l.to_vec(),
        None => {
            let clf = model
                .classifier
                .as_ref()
                .ok_or_else(|| invalid("no source labels and the checkpoint has no classifier"))?;
            let c = &model.config.mel;
            segments_from_frames(&clf.classify(&src_mel.frames), c.hop_length, c.win_length, source.len())
        }
    };
    let ppg = model.ppg(&labels, source.len())?;
    let timbre = model.timbre(reference, opts.seed)?;
    let cond = model.condition_set(&mel, &ppg, &timbre)?;
    let t1 = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    let x = euler_sample(&model.unet, &model.store, Some(&cond), &opts.sampler, mel.shape(), &mut rng)?;
    let frames = model.mel_norm.denormalize(&x.transpose());
    let mel = MelSpectrogram {
        frames,
        config: model.config.mel.clone(),
    };
    let t2 = Instant::now();
    let waveform = griffin_lim(&mel, model.config.eval.griffin_lim_iters)?;
    let t3 = Instant::now();
    Ok(Conversion {
        waveform,
        mel,
        times: StageTimes {
            conditioning: (t1 - t0).as_secs_f64(),
            sampling: (t2 - t1).as_secs_f64(),
            vocoder: (t3 - t2).as_secs_f64(),
        },
    })
}
