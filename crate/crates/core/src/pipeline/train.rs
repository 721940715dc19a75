use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, SyntheticCorpus, TrainItem};
use crate::content::Segment;
use crate::error::{Error, Result};
use crate::numerics::{adam_step, AdamWConfig, Gradients, Graph};
use crate::par;

/// Utterance indices used for training and held out for evaluation: the
/// last `holdout` utterances of every speaker are held out.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
    /// Training utterances of each speaker.
    pub by_speaker: Vec<Vec<usize>>,
}

impl Split {
    pub fn new(corpus: &SyntheticCorpus, holdout: usize) -> Result<Self> {
        let mut split = Self {
            train: Vec::new(),
            holdout: Vec::new(),
            by_speaker: Vec::new(),
        };
        for s in 0..corpus.n_speakers() {
            let utts = corpus.speaker_utterances(s);
            if utts.len() < holdout + 2 {
                return Err(Error::Corpus(format!(
                    "speaker {s} has {} utterances; training needs two besides the {holdout} held out",
                    utts.len()
                )));
            }
            let cut = utts.len() - holdout;
            split.train.extend(&utts[..cut]);
            split.holdout.extend(&utts[cut..]);
            split.by_speaker.push(utts[..cut].to_vec());
        }
        Ok(split)
    }
}

/// Segments overlapping `[offset, offset + len)`, clipped and shifted to
/// start at zero.
pub fn crop_segments(segs: &[Segment], offset: usize, len: usize) -> Vec<Segment> {
    segs.iter()
        .filter(|s| s.end > offset && s.start < offset + len)
        .map(|s| Segment {
            symbol: s.symbol,
            start: s.start.max(offset) - offset,
            end: s.end.min(offset + len) - offset,
        })
        .collect()
}

/// Draws one example: a random aligned crop of a training utterance and a
/// reference from a different utterance of the same speaker.
pub fn sample_item(model: &Model, corpus: &SyntheticCorpus, split: &Split, rng: &mut ChaCha8Rng) -> Result<TrainItem> {
    let src = split.train[rng.random_range(0..split.train.len())];
    let u = &corpus.utterances[src];
    let align = model.config.crop_alignment();
    let avail = u.waveform.len() / align * align;
    let len = model.config.train.crop_samples.min(avail);
    if len < model.config.mel.win_length {
        return Err(Error::Corpus(format!("utterance {} is too short to crop", u.id)));
    }
    let offset = align * rng.random_range(0..=(u.waveform.len() - len) / align);
    let wav = u.waveform.slice(offset, len)?;
    let (_, mel) = model.analyze(&wav)?;
    let ppg = model.ppg(&crop_segments(&u.segments, offset, len), len)?;

    let others: Vec<usize> = split.by_speaker[u.speaker].iter().copied().filter(|&i| i != src).collect();
    let reference = &corpus.utterances[others[rng.random_range(0..others.len())]];
    let timbre = model.timbre(&reference.waveform, rng.random())?;
    Ok(TrainItem { mel, ppg, timbre })
}

/// Batch means of one optimisation step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub step: u64,
    pub total: f64,
    pub cfm: f64,
    pub vq: f64,
    /// Norm of the averaged gradient over the fusion parameters.
    pub fusion_grad_norm: f64,
}

impl StepStats {
    pub fn log_line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.step, self.total, self.cfm, self.vq)
    }
}

fn rng_for(seed: u64, step: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((step << 16) | lane);
    rng
}

const EMA_LANE: u64 = 0xffff;

/// One AdamW step on a fresh batch followed by the codebook EMA update.
/// Every random draw comes from a stream keyed by (seed, step, item), so a
/// resumed run reproduces the same batches.
pub fn train_step(model: &mut Model, corpus: &SyntheticCorpus, split: &Split) -> Result<StepStats> {
    let step = model.step;
    let seed = model.config.seeds.train;
    let b = model.config.train.batch_size;
    let m: &Model = model;
    let outs = par::try_map_range(b, |i| {
        let mut rng = rng_for(seed, step, i as u64);
        let item = sample_item(m, corpus, split, &mut rng)?;
        let mut g = Graph::new(&m.store);
        let l = m.item_loss(&mut g, &item, &mut rng)?;
        let grads = g.backward(l.total)?;
        let v = |x| g.value(x).data()[0];
        Ok::<_, Error>((grads, v(l.total), v(l.cfm), v(l.commit), l.quantized))
    })?;

    let scale = 1.0 / b as f64;
    let mut grads = Gradients::zeros_like(&model.store);
    let (mut total, mut cfm, mut vq) = (0.0, 0.0, 0.0);
    for (gr, t, c, q, _) in &outs {
        grads.add_scaled(gr, scale);
        total += t * scale;
        cfm += c * scale;
        vq += q * scale;
    }
    if !(total.is_finite() && cfm.is_finite() && vq.is_finite()) {
        return Err(Error::NonFiniteLoss { step, total, cfm, vq });
    }
    let fusion_grad_norm = grads
        .iter()
        .filter(|(id, _)| model.store.get(*id).name.starts_with("fusion."))
        .map(|(_, g)| g.sq_norm())
        .sum::<f64>()
        .sqrt();

    let tc = &model.config.train;
    if tc.grad_clip > 0.0 {
        let norm = grads.global_norm();
        if norm > tc.grad_clip {
            grads.scale(tc.grad_clip / norm);
        }
    }
    let cfg = AdamWConfig {
        lr: tc.lr_at(step),
        weight_decay: model.config.train.weight_decay,
        ..Default::default()
    };
    adam_step(&mut model.store, &grads, &mut model.adam, &cfg)?;
    if !model.config.rvq.frozen {
        let batch: Vec<_> = outs.iter().map(|o| &o.4).collect();
        let mut rng = rng_for(seed, step, EMA_LANE);
        let r = &model.config.rvq;
        model.rvq.ema_update(&batch, r.ema_decay, r.dead_threshold, &mut rng)?;
    }
    model.step += 1;
    Ok(StepStats {
        step,
        total,
        cfm,
        vq,
        fusion_grad_norm,
    })
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub stats: Vec<StepStats>,
}

impl TrainReport {
    /// Whether any step sent a nonzero gradient into the fusion module.
    pub fn fusion_grad_nonzero(&self) -> bool {
        self.stats.iter().any(|s| s.fusion_grad_norm > 0.0)
    }
}

pub const LOSS_LOG_HEADER: &str = "step\tL_total\tL_cfm\tL_vq";

/// Runs `steps` steps, appending one line per step to `log`. With
/// `checkpoint` set and a positive `checkpoint_every`, the model is saved
/// there periodically and after the last step.
pub fn train(
    model: &mut Model,
    corpus: &SyntheticCorpus,
    split: &Split,
    steps: u64,
    log: &mut dyn Write,
    checkpoint: Option<&Path>,
) -> Result<TrainReport> {
    let mut report = TrainReport::default();
    let every = model.config.train.checkpoint_every;
    for _ in 0..steps {
        let s = train_step(model, corpus, split)?;
        writeln!(log, "{}", s.log_line())?;
        report.stats.push(s);
        if let Some(path) = checkpoint {
            if every > 0 && model.step % every == 0 {
                super::save_checkpoint(model, path)?;
            }
        }
    }
    if let Some(path) = checkpoint {
        super::save_checkpoint(model, path)?;
    }
    log.flush()?;
    Ok(report)
}

/// Mean of `values` over consecutive windows of `window`.
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    values
        .chunks(window.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_clips_and_shifts() {
        let segs = [
            Segment { symbol: 0, start: 0, end: 100 },
            Segment { symbol: 1, start: 100, end: 250 },
            Segment { symbol: 2, start: 250, end: 400 },
        ];
        let c = crop_segments(&segs, 80, 200);
        assert_eq!(
            c,
            vec![
                Segment { symbol: 0, start: 0, end: 20 },
                Segment { symbol: 1, start: 20, end: 170 },
                Segment { symbol: 2, start: 170, end: 200 },
            ]
        );
    }

    #[test]
    fn smoothing_windows() {
        assert_eq!(smoothed(&[1.0, 3.0, 5.0, 7.0, 9.0], 2), vec![2.0, 6.0, 9.0]);
    }
}
