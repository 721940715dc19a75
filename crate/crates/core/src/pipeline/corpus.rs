//! Synthetic multi-speaker corpus: vowel-like symbols rendered as harmonic
//! spectra of a formant-filtered pulse train, with exact sample alignment.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::content::Segment;
use crate::dsp::{load_wav, save_wav, Waveform};
use crate::error::{Error, Result};
use crate::par;

pub const N_SYMBOLS: usize = 12;
pub const SAMPLE_RATE: u32 = 16_000;

/// First three formants (Hz) of each symbol, shared by all speakers.
pub const FORMANTS: [[f64; 3]; N_SYMBOLS] = [
    [260.0, 750.0, 1450.0],
    [260.0, 1300.0, 2000.0],
    [260.0, 1900.0, 2600.0],
    [260.0, 2500.0, 3200.0],
    [520.0, 950.0, 1650.0],
    [520.0, 1500.0, 2200.0],
    [520.0, 2100.0, 2800.0],
    [520.0, 2700.0, 3400.0],
    [800.0, 1150.0, 1850.0],
    [800.0, 1700.0, 2400.0],
    [800.0, 2300.0, 3000.0],
    [720.0, 2900.0, 3500.0],
];
const BANDWIDTHS: [f64; 3] = [130.0, 170.0, 230.0];
const GAINS: [f64; 3] = [1.0, 0.6, 0.35];
/// f0 of the first four speakers.
pub const DEFAULT_F0: [f64; 4] = [110.0, 150.0, 200.0, 260.0];

const KEY_HOP: usize = 80;
const CROSSFADE: usize = 480;
const EDGE_FADE: usize = 240;
const TARGET_RMS: f64 = 0.08;
const HARMONIC_CEIL_HZ: f64 = 7600.0;

/// Per-speaker voice parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VoiceProfile {
    pub f0: f64,
    /// Multiplies every formant frequency (vocal-tract length).
    pub formant_scale: f64,
    /// Spectral slope exponent of the source.
    pub tilt: f64,
    pub vibrato_rate: f64,
    /// Relative vibrato depth.
    pub vibrato_depth: f64,
}

impl VoiceProfile {
    /// Speaker `i` of `n`: pitch and formant scale rise together so that
    /// speakers occupy disjoint points of the (f0, formant) plane.
    pub fn for_speaker(i: usize, n: usize) -> Self {
        let pos = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let f0 = if n <= DEFAULT_F0.len() {
            DEFAULT_F0[i]
        } else {
            100.0 * (280.0f64 / 100.0).powf(pos)
        };
        Self {
            f0,
            formant_scale: 0.95 + 0.10 * pos,
            tilt: if i % 2 == 0 { 0.8 } else { 1.2 },
            vibrato_rate: 5.0 + 0.5 * (i % 4) as f64,
            vibrato_depth: 0.01,
        }
    }

    /// Magnitude response of the vocal tract for `symbol` at `f` Hz.
    pub fn envelope(&self, symbol: usize, f: f64) -> f64 {
        let mut a = 0.01;
        for j in 0..3 {
            let fc = FORMANTS[symbol][j] * self.formant_scale;
            let x = (f - fc) / (BANDWIDTHS[j] / 2.0);
            a += GAINS[j] / (1.0 + x * x).sqrt();
        }
        a * (1.0 + f / 1000.0).powf(-self.tilt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: usize,
    pub segments: Vec<Segment>,
    pub waveform: Waveform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub speakers: Vec<VoiceProfile>,
    pub utterances: Vec<Utterance>,
}

/// Random symbol string, no symbol repeated back to back, with durations
/// of 100–220 ms until at least `min_secs` are covered.
pub fn random_segments(rng: &mut ChaCha8Rng, min_secs: f64, sample_rate: u32) -> Vec<Segment> {
    let sr = sample_rate as f64;
    let target = (min_secs * sr) as usize;
    let mut segs: Vec<Segment> = Vec::new();
    let mut pos = 0;
    let symbols: Vec<usize> = (0..N_SYMBOLS).collect();
    while pos < target {
        let prev = segs.last().map(|s| s.symbol);
        let symbol = loop {
            let s = *symbols.choose(rng).expect("symbols");
            if Some(s) != prev {
                break s;
            }
        };
        let len = (rng.random_range(0.10..0.22) * sr) as usize;
        segs.push(Segment {
            symbol,
            start: pos,
            end: pos + len,
        });
        pos += len;
    }
    segs
}

/// Mixing weights of the symbols around sample `n`: linear crossfades of
/// `CROSSFADE` samples centred on each boundary.
fn symbol_weights(segs: &[Segment], n: usize, j: usize) -> [(usize, f64); 2] {
    let s = segs[j];
    let half = CROSSFADE / 2;
    if j + 1 < segs.len() && n + half > s.end {
        let w = ((n + half - s.end) as f64 / CROSSFADE as f64).min(1.0) * 0.5;
        return [(s.symbol, 1.0 - w), (segs[j + 1].symbol, w)];
    }
    if j > 0 && n < s.start + half {
        let w = ((s.start + half - n) as f64 / CROSSFADE as f64).min(1.0) * 0.5;
        return [(s.symbol, 1.0 - w), (segs[j - 1].symbol, w)];
    }
    [(s.symbol, 1.0), (s.symbol, 0.0)]
}

/// Renders aligned segments for a voice; `rng` fixes the utterance-level
/// pitch offset, vibrato phase and harmonic phases.
pub fn render(
    voice: &VoiceProfile,
    segs: &[Segment],
    sample_rate: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Waveform> {
    let n = segs.last().map_or(0, |s| s.end);
    if n == 0 {
        return Err(Error::Corpus("nothing to render".into()));
    }
    let sr = sample_rate as f64;
    let offset = 1.0 + rng.random_range(-0.02..0.02);
    let vib_phase = rng.random_range(0.0..TAU);
    let f0_max = voice.f0 * offset * (1.0 + voice.vibrato_depth);
    let n_harm = ((HARMONIC_CEIL_HZ.min(sr / 2.0 - 200.0)) / f0_max).floor().max(1.0) as usize;
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.random_range(0.0..TAU)).collect();

    let f0_at = |i: usize| {
        let t = i as f64 / sr;
        voice.f0 * offset * (1.0 + voice.vibrato_depth * (TAU * voice.vibrato_rate * t + vib_phase).sin())
    };
    // harmonic amplitudes on a coarse grid, linearly interpolated
    let n_keys = n / KEY_HOP + 2;
    let mut keys = vec![0.0; n_keys * n_harm];
    let mut j = 0;
    for k in 0..n_keys {
        let at = (k * KEY_HOP).min(n - 1);
        while segs[j].end <= at {
            j += 1;
        }
        let f0 = f0_at(at);
        for (h, slot) in keys[k * n_harm..(k + 1) * n_harm].iter_mut().enumerate() {
            let f = (h + 1) as f64 * f0;
            *slot = symbol_weights(segs, at, j)
                .iter()
                .map(|&(s, w)| w * voice.envelope(s, f))
                .sum();
        }
    }

    let mut out = vec![0.0; n];
    let mut phase = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        phase += TAU * f0_at(i) / sr;
        let k = i / KEY_HOP;
        let frac = (i % KEY_HOP) as f64 / KEY_HOP as f64;
        let (a0, a1) = (&keys[k * n_harm..(k + 1) * n_harm], &keys[(k + 1) * n_harm..(k + 2) * n_harm]);
        let mut s = 0.0;
        for h in 0..n_harm {
            let a = a0[h] + frac * (a1[h] - a0[h]);
            s += a * ((h + 1) as f64 * phase + phases[h]).sin();
        }
        let edge = (i.min(n - 1 - i) as f64 / EDGE_FADE as f64).min(1.0);
        *o = s * 0.5 * (1.0 - (std::f64::consts::PI * edge).cos());
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= TARGET_RMS / rms);
    }
    Waveform::from_clamped(out, sample_rate)
}

/// Deterministic corpus of `n_utts` utterances for each of `n_speakers`.
pub fn synth_corpus(n_speakers: usize, n_utts: usize, seed: u64) -> Result<SyntheticCorpus> {
    if n_speakers < 2 {
        return Err(Error::Corpus("need at least two speakers".into()));
    }
    if n_utts == 0 {
        return Err(Error::Corpus("need at least one utterance per speaker".into()));
    }
    let speakers: Vec<VoiceProfile> = (0..n_speakers)
        .map(|i| VoiceProfile::for_speaker(i, n_speakers))
        .collect();
    let utterances = par::try_map_range(n_speakers * n_utts, |k| {
        let (s, u) = (k / n_utts, k % n_utts);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let secs = rng.random_range(2.4..3.4);
        let segments = random_segments(&mut rng, secs, SAMPLE_RATE);
        let waveform = render(&speakers[s], &segments, SAMPLE_RATE, &mut rng)?;
        Ok::<_, Error>(Utterance {
            id: format!("spk{s:02}_utt{u:03}"),
            speaker: s,
            segments,
            waveform,
        })
    })?;
    Ok(SyntheticCorpus {
        speakers,
        utterances,
    })
}

/// Alignment file: one `start<TAB>end<TAB>symbol` line per segment, sample
/// units.
pub fn format_labels(segs: &[Segment]) -> String {
    let mut s = String::new();
    for seg in segs {
        writeln!(s, "{}\t{}\t{}", seg.start, seg.end, seg.symbol).expect("string write");
    }
    s
}

pub fn parse_labels(text: &str) -> Result<Vec<Segment>> {
    let mut segs = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|_| Error::Corpus(format!("label line {}: bad field {x:?}", i + 1)))
        };
        if f.len() != 3 {
            return Err(Error::Corpus(format!("label line {}: expected 3 fields", i + 1)));
        }
        let seg = Segment {
            start: parse(f[0])?,
            end: parse(f[1])?,
            symbol: parse(f[2])?,
        };
        if seg.end <= seg.start || segs.last().is_some_and(|p: &Segment| p.end != seg.start) {
            return Err(Error::Corpus(format!("label line {}: segments must tile time", i + 1)));
        }
        segs.push(seg);
    }
    if segs.is_empty() {
        return Err(Error::Corpus("empty label file".into()));
    }
    Ok(segs)
}

/// Sidecar label path for a wav: same stem, `.lab` extension.
pub fn label_path(wav: &Path) -> std::path::PathBuf {
    wav.with_extension("lab")
}

impl SyntheticCorpus {
    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn speaker_utterances(&self, s: usize) -> Vec<usize> {
        (0..self.utterances.len())
            .filter(|&i| self.utterances[i].speaker == s)
            .collect()
    }

    /// Writes `speakers.tsv`, `corpus.tsv` and a wav plus `.lab` per
    /// utterance.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut spk = String::from("speaker\tf0\tformant_scale\ttilt\tvibrato_rate\tvibrato_depth\n");
        for (i, v) in self.speakers.iter().enumerate() {
            writeln!(
                spk,
                "{i}\t{}\t{}\t{}\t{}\t{}",
                v.f0, v.formant_scale, v.tilt, v.vibrato_rate, v.vibrato_depth
            )
            .expect("string write");
        }
        fs::write(dir.join("speakers.tsv"), spk)?;
        let mut manifest = String::from("id\tspeaker\n");
        for u in &self.utterances {
            writeln!(manifest, "{}\t{}", u.id, u.speaker).expect("string write");
            let wav = dir.join(format!("{}.wav", u.id));
            save_wav(&wav, &u.waveform)?;
            fs::write(label_path(&wav), format_labels(&u.segments))?;
        }
        fs::write(dir.join("corpus.tsv"), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name))
                .map_err(|e| Error::Corpus(format!("{}: {e}", dir.join(name).display())))
        };
        let mut speakers = Vec::new();
        for (i, line) in read("speakers.tsv")?.lines().skip(1).enumerate() {
            let f: Vec<f64> = line
                .split('\t')
                .skip(1)
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Corpus(format!("speakers.tsv line {}", i + 2)))?;
            if f.len() != 5 {
                return Err(Error::Corpus(format!("speakers.tsv line {}", i + 2)));
            }
            speakers.push(VoiceProfile {
                f0: f[0],
                formant_scale: f[1],
                tilt: f[2],
                vibrato_rate: f[3],
                vibrato_depth: f[4],
            });
        }
        let mut utterances = Vec::new();
        for (i, line) in read("corpus.tsv")?.lines().skip(1).enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let speaker = f
                .get(1)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&s| s < speakers.len())
                .ok_or_else(|| Error::Corpus(format!("corpus.tsv line {}", i + 2)))?;
            let id = f[0].to_string();
            let wav = dir.join(format!("{id}.wav"));
            let waveform = load_wav(&wav)?;
            let segments = parse_labels(&read(&format!("{id}.lab"))?)?;
            if segments.last().map(|s| s.end) != Some(waveform.len()) {
                return Err(Error::Corpus(format!("{id}: labels do not cover the audio")));
            }
            utterances.push(Utterance {
                id,
                speaker,
                segments,
                waveform,
            });
        }
        if speakers.len() < 2 || utterances.is_empty() {
            return Err(Error::Corpus(format!("{}: empty corpus", dir.display())));
        }
        Ok(Self {
            speakers,
            utterances,
        })
    }
}
