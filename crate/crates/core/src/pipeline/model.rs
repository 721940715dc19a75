use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{interior_labels, RunConfig, SymbolClassifier, SyntheticCorpus};
use crate::cfm::{cfm_loss, ConditionSet, FieldCondition, UNet};
use crate::content::{
    frame_labels, ppg_provider, AdaptiveFusion, Codebook, ContentEncoder, QuantizedSequence, Rvq, Segment,
    SslProvider,
};
use crate::dsp::{MelAnalyzer, MelSpectrogram, Waveform};
use crate::error::{invalid, Error, Result};
use crate::numerics::{AdamState, Graph, Init, ParamStore, Tensor, Var};
use crate::timbre::{build_reference_timbre, ContextAwareFusion, MemoryAugment, SpeakerEmbedder, TimbreSequence};

/// Per-band statistics used to standardise log-mel frames.
#[derive(Clone, Debug, PartialEq)]
pub struct MelNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl MelNorm {
    pub fn identity(n_mels: usize) -> Self {
        Self {
            mean: vec![0.0; n_mels],
            std: vec![1.0; n_mels],
        }
    }

    pub fn fit(mels: &[&Tensor]) -> Result<Self> {
        let m = mels.first().map(|t| t.cols()).ok_or_else(|| invalid("no frames for mel statistics"))?;
        let n: usize = mels.iter().map(|t| t.rows()).sum();
        let mut mean = vec![0.0; m];
        for t in mels {
            for i in 0..t.rows() {
                mean.iter_mut().zip(t.row(i)).for_each(|(a, v)| *a += v / n as f64);
            }
        }
        let mut var = vec![0.0; m];
        for t in mels {
            for i in 0..t.rows() {
                for ((a, v), mu) in var.iter_mut().zip(t.row(i)).zip(&mean) {
                    *a += (v - mu) * (v - mu) / n as f64;
                }
            }
        }
        Ok(Self {
            mean,
            std: var.iter().map(|v| v.sqrt().max(1e-3)).collect(),
        })
    }

    /// `[T, M]` frames → standardised `[T, M]`.
    pub fn normalize(&self, frames: &Tensor) -> Tensor {
        self.map(frames, |v, mu, s| (v - mu) / s)
    }

    pub fn denormalize(&self, frames: &Tensor) -> Tensor {
        self.map(frames, |v, mu, s| v * s + mu)
    }

    fn map(&self, frames: &Tensor, f: impl Fn(f64, f64, f64) -> f64) -> Tensor {
        let (t, m) = frames.dims2();
        let mut data = Vec::with_capacity(t * m);
        for i in 0..t {
            data.extend(
                frames
                    .row(i)
                    .iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .map(|((v, mu), s)| f(*v, *mu, *s)),
            );
        }
        Tensor::from_parts(vec![t, m], data)
    }
}

/// `L_cfm + λ·L_vq`.
pub fn total_loss(g: &mut Graph, cfm: Var, commit: Var, lambda: f64) -> Result<Var> {
    let weighted = g.scale(commit, lambda)?;
    g.add(cfm, weighted)
}

/// Every component of the converter plus the training state.
pub struct Model {
    pub config: RunConfig,
    /// The text the config was parsed from, stored verbatim in checkpoints.
    pub config_text: String,
    pub store: ParamStore,
    pub content: ContentEncoder,
    pub rvq: Rvq,
    pub speaker: SpeakerEmbedder,
    pub memory: MemoryAugment,
    pub context: ContextAwareFusion,
    pub unet: UNet,
    pub mel_norm: MelNorm,
    pub classifier: Option<SymbolClassifier>,
    pub analyzer: MelAnalyzer,
    pub adam: AdamState,
    pub step: u64,
}

/// One training example after cropping and feature extraction.
#[derive(Clone, Debug)]
pub struct TrainItem {
    /// Standardised source mel, channel-major `[M, T]`.
    pub mel: Tensor,
    /// Posteriorgram `[T_p, S]`.
    pub ppg: Tensor,
    pub timbre: TimbreSequence,
}

pub struct ItemLoss {
    pub total: Var,
    pub cfm: Var,
    pub commit: Var,
    pub quantized: QuantizedSequence,
    pub dropped: bool,
}

impl Model {
    /// Builds freshly initialised modules from config text.
    pub fn new(config_text: &str) -> Result<Self> {
        let config = RunConfig::from_toml(config_text)?;
        let m = &config.model;
        let n_mels = config.mel.n_mels;
        let mut store = ParamStore::new();
        let ssl = SslProvider::new(&mut store, config.seeds.ssl, n_mels, m.ssl_dim);
        let speaker = SpeakerEmbedder::new(&mut store, config.seeds.speaker, n_mels, m.spk_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.init);
        let timbre_dim = n_mels + m.spk_dim;
        let unet_cfg = config.unet();
        let (fusion, memory, context, unet) = {
            let mut init = Init::new(&mut store, &mut rng);
            let fusion = AdaptiveFusion::new(&mut init, m.ssl_dim, m.fusion_hidden, m.n_symbols);
            let memory = MemoryAugment::new(
                &mut init,
                timbre_dim,
                m.memory_dim,
                m.memory_heads,
                m.norm_groups,
                m.memory_blocks,
                m.unet_hidden,
            );
            let context = ContextAwareFusion::new(
                &mut init,
                m.n_symbols,
                timbre_dim,
                m.context_dim,
                m.context_heads,
                m.context_blocks,
                m.context_ff,
            );
            let unet = UNet::new(&mut init, &unet_cfg);
            (fusion, memory, context, unet)
        };
        let rvq = Rvq::random(config.rvq.n_stages, config.rvq.codebook_size, m.ssl_dim, config.seeds.init)?;
        let adam = AdamState::new(&store);
        Ok(Self {
            analyzer: MelAnalyzer::new(&config.mel)?,
            mel_norm: MelNorm::identity(n_mels),
            content: ContentEncoder { ssl, fusion },
            config_text: config_text.to_string(),
            config,
            store,
            rvq,
            speaker,
            memory,
            context,
            unet,
            classifier: None,
            adam,
            step: 0,
        })
    }

    /// Corpus-dependent set-up before the first step: mel statistics from
    /// the training utterances, codebooks seeded with their SSL frames, and
    /// the oracle symbol classifier fitted on every utterance.
    pub fn prepare(&mut self, corpus: &SyntheticCorpus, train: &[usize]) -> Result<()> {
        let mels: Vec<MelSpectrogram> = crate::par::try_map_slice(&corpus.utterances, |u| self.analyzer.analyze(&u.waveform))?;
        let train_mels: Vec<&Tensor> = train.iter().map(|&i| &mels[i].frames).collect();
        self.mel_norm = MelNorm::fit(&train_mels)?;

        let feats: Vec<Tensor> = crate::par::try_map_slice(&train_mels, |m| {
            Ok::<_, Error>(self.content.ssl.provide(&self.store, &self.mel_norm.normalize(m), self.config.mel.frame_rate())?.frames)
        })?;
        let pool = Tensor::concat_rows(&feats.iter().collect::<Vec<_>>())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seeds.init ^ 0xc0de);
        let v = self.config.rvq.codebook_size;
        let d = pool.cols();
        let mut stages = Vec::with_capacity(self.rvq.stages.len());
        let mut residual = pool.clone();
        for _ in 0..self.rvq.stages.len() {
            let n = residual.rows();
            let picks: Vec<usize> = if n >= v {
                sample(&mut rng, n, v).into_vec()
            } else {
                (0..v).map(|k| k % n).collect()
            };
            let mut data = Vec::with_capacity(v * d);
            for (k, &p) in picks.iter().enumerate() {
                // repeated picks get a small offset so entries stay distinct
                let jitter = if k >= n { 1e-3 * (k / n) as f64 } else { 0.0 };
                data.extend(residual.row(p).iter().map(|x| x + jitter));
            }
            let book = Codebook::from_entries(Tensor::matrix(v, d, data)?)?;
            let q = Rvq::new(vec![book.clone()])?.quantize(&residual)?;
            residual = q.residuals[0].zip_map(&q.vectors, |a, b| a - b)?;
            stages.push(book);
        }
        self.rvq = Rvq::new(stages)?;

        let hop = self.config.mel.hop_length;
        let win = self.config.mel.win_length;
        let data: Vec<(&Tensor, usize, Vec<Option<usize>>)> = corpus
            .utterances
            .iter()
            .zip(&mels)
            .map(|(u, m)| (&m.frames, u.speaker, interior_labels(&u.segments, m.n_frames(), hop, win)))
            .collect();
        self.classifier = Some(SymbolClassifier::fit(&data, self.config.model.n_symbols, corpus.n_speakers())?);
        Ok(())
    }

    /// Timbre sequence from a reference waveform, with the mel part
    /// standardised and the embedding scaled to unit per-element variance.
    pub fn timbre(&self, reference: &Waveform, seed: u64) -> Result<TimbreSequence> {
        let raw = build_reference_timbre(
            reference,
            seed,
            self.config.reference,
            &self.analyzer,
            &self.speaker,
            &self.store,
        )?;
        let (t, d) = raw.frames.dims2();
        let m = raw.n_mels;
        let scale = (self.config.model.spk_dim as f64).sqrt();
        let mut data = Vec::with_capacity(t * d);
        for i in 0..t {
            let row = raw.frames.row(i);
            data.extend(row[..m].iter().zip(&self.mel_norm.mean).zip(&self.mel_norm.std).map(|((v, mu), s)| (v - mu) / s));
            data.extend(row[m..].iter().map(|v| v * scale));
        }
        Ok(TimbreSequence {
            frames: Tensor::matrix(t, d, data)?,
            n_mels: m,
        })
    }

    /// Label-smoothed posteriorgram at the PPG frame rate for a waveform of
    /// `len` samples.
    pub fn ppg(&self, segments: &[Segment], len: usize) -> Result<Tensor> {
        let hop = self.config.model.ppg_hop;
        let n = len / hop;
        if n == 0 {
            return Err(invalid(format!("{len} samples give no posteriorgram frames")));
        }
        let labels = frame_labels(segments, n, hop)?;
        let rate = self.config.mel.sample_rate as f64 / hop as f64;
        Ok(ppg_provider(&labels, self.config.model.n_symbols, self.config.model.ppg_eps, rate)?.frames)
    }

    /// Conditions for the vector field: fused sequence `[D_c, T]` plus FiLM
    /// parameters, and the content encoder's outputs for the loss.
    pub fn condition(
        &self,
        g: &mut Graph,
        mel: &Tensor,
        ppg: &Tensor,
        timbre: &TimbreSequence,
    ) -> Result<(FieldCondition, Var, QuantizedSequence)> {
        let t_mel = mel.cols();
        let mel_v = g.constant(mel.clone());
        let content = self.content.forward(g, &self.rvq, mel_v, ppg)?;
        let tv = g.constant(timbre.frames.transpose());
        let (gamma, beta, _) = self.memory.forward(g, tv)?;
        let (fused, _) = self.context.forward(g, content.content, tv, t_mel)?;
        Ok((FieldCondition { fused, gamma, beta }, content.commit, content.quantized))
    }

    /// `L_cfm + λ·L_vq` for one item.
    pub fn item_loss(&self, g: &mut Graph, item: &TrainItem, rng: &mut ChaCha8Rng) -> Result<ItemLoss> {
        let (cond, commit, quantized) = self.condition(g, &item.mel, &item.ppg, &item.timbre)?;
        let c = &self.config.cfm;
        let l = cfm_loss(g, &self.unet, &item.mel, Some(&cond), c.path(), c.p_drop, rng)?;
        let total = total_loss(g, l.loss, commit, self.config.rvq.lambda)?;
        Ok(ItemLoss {
            total,
            cfm: l.loss,
            commit,
            quantized,
            dropped: l.dropped,
        })
    }

    /// Conditions evaluated once for sampling.
    pub fn condition_set(&self, mel: &Tensor, ppg: &Tensor, timbre: &TimbreSequence) -> Result<ConditionSet> {
        let mut g = Graph::new(&self.store);
        let (c, _, _) = self.condition(&mut g, mel, ppg, timbre)?;
        Ok(ConditionSet {
            fused: g.value(c.fused).clone(),
            gamma: g.value(c.gamma).clone(),
            beta: g.value(c.beta).clone(),
            cond_active: true,
        })
    }

    /// Standardised channel-major mel of a waveform.
    pub fn analyze(&self, w: &Waveform) -> Result<(MelSpectrogram, Tensor)> {
        let mel = self.analyzer.analyze(w)?;
        let norm = self.mel_norm.normalize(&mel.frames).transpose();
        Ok((mel, norm))
    }
}
