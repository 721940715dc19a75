use std::fmt::Write as _;

use super::{convert, interior_labels, ConvertOptions, Model, Split, SyntheticCorpus};
use crate::dsp::{estimate_f0, MelSpectrogram, Waveform};
use crate::error::{invalid, Result};
use crate::timbre::cosine;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    /// Source and reference from different speakers.
    Cross,
    /// The source utterance is its own reference.
    Reconstruction,
}

impl PairKind {
    fn as_str(self) -> &'static str {
        match self {
            PairKind::Cross => "cross",
            PairKind::Reconstruction => "recon",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairResult {
    pub kind: PairKind,
    pub source: String,
    pub reference: String,
    /// Embedding cosine of the converted audio with the reference audio.
    pub secs_target: f64,
    /// Embedding cosine of the converted audio with the source audio.
    pub secs_source: f64,
    /// Mean per-frame L2 distance between predicted and source log-mels.
    pub mel_l2: f64,
    pub f0_converted: f64,
    pub f0_reference: f64,
    pub f0_source: f64,
    /// Oracle accuracy on the predicted mel.
    pub content_acc: f64,
    /// Oracle accuracy on the re-analysed Griffin–Lim audio.
    pub content_acc_audio: f64,
    pub duration: f64,
    pub times: super::StageTimes,
}

impl PairResult {
    pub fn f0_ratio(&self) -> f64 {
        if self.f0_reference > 0.0 {
            self.f0_converted / self.f0_reference
        } else {
            0.0
        }
    }
}

/// Aggregates over the evaluation pairs. `secs_*`, `f0_ratio` and
/// `content_acc*` average the cross pairs; `mel_l2` and
/// `content_acc_recon` average the reconstruction pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub secs_proxy: f64,
    pub secs_source: f64,
    pub mel_l2: f64,
    pub mel_l2_cross: f64,
    pub f0_ratio: f64,
    pub content_acc: f64,
    pub content_acc_audio: f64,
    pub content_acc_recon: f64,
    /// Sampling seconds per second of audio.
    pub rtf_sampling: f64,
    pub rtf_vocoder: f64,
    pub rtf_total: f64,
    pub pairs: Vec<PairResult>,
}

/// Fraction of interior source frames whose symbol the oracle classifier
/// recovers from `mel`.
pub fn content_accuracy(model: &Model, mel: &MelSpectrogram, segments: &[crate::content::Segment]) -> Result<f64> {
    let clf = model.classifier.as_ref().ok_or_else(|| invalid("model has no symbol classifier"))?;
    let c = &model.config.mel;
    let labels = interior_labels(segments, mel.n_frames(), c.hop_length, c.win_length);
    let (acc, n) = clf.accuracy(&mel.frames, &labels);
    if n == 0 {
        return Err(invalid("no interior frames to score"));
    }
    Ok(acc)
}

/// Mean per-frame Euclidean distance over the common frames.
pub fn mel_l2(a: &MelSpectrogram, b: &MelSpectrogram) -> f64 {
    let n = a.n_frames().min(b.n_frames());
    if n == 0 {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            a.frames
                .row(i)
                .iter()
                .zip(b.frames.row(i))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / n as f64
}

/// Converts every held-out utterance to every other speaker (reference: the
/// target speaker's first training utterance) and onto itself. Speaker
/// similarity and pitch are measured on the output audio, content on both
/// the predicted mel and the audio.
pub fn evaluate(model: &Model, corpus: &SyntheticCorpus) -> Result<EvalReport> {
    let split = Split::new(corpus, model.config.train.holdout_per_speaker.max(1))?;
    let opts = ConvertOptions::from_model(model);
    let mut jobs = Vec::new();
    for &src in &split.holdout {
        let s = corpus.utterances[src].speaker;
        for t in (0..corpus.n_speakers()).filter(|&t| t != s) {
            jobs.push((PairKind::Cross, src, split.by_speaker[t][0]));
        }
        jobs.push((PairKind::Reconstruction, src, src));
    }
    if jobs.is_empty() {
        return Err(invalid("nothing to evaluate"));
    }
    let ev = &model.config.eval;
    let f0 = |w: &Waveform| estimate_f0(w, ev.f0_min, ev.f0_max);
    let mut pairs = Vec::with_capacity(jobs.len());
    for (kind, src, refi) in jobs {
        let (su, ru) = (&corpus.utterances[src], &corpus.utterances[refi]);
        let out = convert(model, &su.waveform, Some(&su.segments), &ru.waveform, &opts)?;
        let heard = model.analyzer.analyze(&out.waveform)?;
        let source_mel = model.analyzer.analyze(&su.waveform)?;
        let emb = |w: &Waveform| model.speaker.embed(&model.store, &model.analyzer, w);
        let e_out = emb(&out.waveform)?;
        pairs.push(PairResult {
            kind,
            source: su.id.clone(),
            reference: ru.id.clone(),
            secs_target: cosine(&e_out, &emb(&ru.waveform)?),
            secs_source: cosine(&e_out, &emb(&su.waveform)?),
            mel_l2: mel_l2(&out.mel, &source_mel),
            f0_converted: f0(&out.waveform)?,
            f0_reference: f0(&ru.waveform)?,
            f0_source: f0(&su.waveform)?,
            content_acc: content_accuracy(model, &out.mel, &su.segments)?,
            content_acc_audio: content_accuracy(model, &heard, &su.segments)?,
            duration: su.waveform.duration_secs(),
            times: out.times,
        });
    }
    Ok(summarize(pairs))
}

fn mean(vals: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = vals.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn summarize(pairs: Vec<PairResult>) -> EvalReport {
    let of = |k: PairKind| pairs.iter().filter(move |p| p.kind == k);
    let dur: f64 = pairs.iter().map(|p| p.duration).sum();
    let rtf = |f: &dyn Fn(&PairResult) -> f64| pairs.iter().map(f).sum::<f64>() / dur;
    EvalReport {
        secs_proxy: mean(of(PairKind::Cross).map(|p| p.secs_target)),
        secs_source: mean(of(PairKind::Cross).map(|p| p.secs_source)),
        mel_l2: mean(of(PairKind::Reconstruction).map(|p| p.mel_l2)),
        mel_l2_cross: mean(of(PairKind::Cross).map(|p| p.mel_l2)),
        f0_ratio: mean(of(PairKind::Cross).map(|p| p.f0_ratio())),
        content_acc: mean(of(PairKind::Cross).map(|p| p.content_acc)),
        content_acc_audio: mean(of(PairKind::Cross).map(|p| p.content_acc_audio)),
        content_acc_recon: mean(of(PairKind::Reconstruction).map(|p| p.content_acc)),
        rtf_sampling: rtf(&|p| p.times.sampling),
        rtf_vocoder: rtf(&|p| p.times.vocoder),
        rtf_total: rtf(&|p| p.times.conditioning + p.times.sampling + p.times.vocoder),
        pairs,
    }
}

impl EvalReport {
    /// Tab-separated text: `metric<TAB>value` lines, a blank line, then one
    /// row per pair under a header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        for (k, v) in [
            ("secs_proxy", self.secs_proxy),
            ("secs_source", self.secs_source),
            ("mel_l2", self.mel_l2),
            ("mel_l2_cross", self.mel_l2_cross),
            ("f0_ratio", self.f0_ratio),
            ("content_acc", self.content_acc),
            ("content_acc_audio", self.content_acc_audio),
            ("content_acc_recon", self.content_acc_recon),
            ("rtf_sampling", self.rtf_sampling),
            ("rtf_vocoder", self.rtf_vocoder),
            ("rtf_total", self.rtf_total),
        ] {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s.push_str("\nkind\tsource\treference\tsecs_target\tsecs_source\tmel_l2\tf0_converted\tf0_reference\tf0_source\tcontent_acc\tcontent_acc_audio\tduration\n");
        for p in &self.pairs {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                p.kind.as_str(),
                p.source,
                p.reference,
                p.secs_target,
                p.secs_source,
                p.mel_l2,
                p.f0_converted,
                p.f0_reference,
                p.f0_source,
                p.content_acc,
                p.content_acc_audio,
                p.duration
            );
        }
        s
    }
}
