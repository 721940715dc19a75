use crate::error::{invalid, Result};
use crate::numerics::Tensor;

/// One aligned symbol, `[start, end)` in samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub symbol: usize,
    pub start: usize,
    pub end: usize,
}

/// Frame-level features, time-major `[T, D]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub frames: Tensor,
    pub frame_rate: f64,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }
}

/// Symbol under the centre sample of each `hop`-sample frame.
pub fn frame_labels(segments: &[Segment], n_frames: usize, hop: usize) -> Result<Vec<usize>> {
    if segments.is_empty() {
        return Err(invalid("empty label sequence"));
    }
    let mut out = Vec::with_capacity(n_frames);
    let mut j = 0;
    for i in 0..n_frames {
        let centre = i * hop + hop / 2;
        while j + 1 < segments.len() && segments[j].end <= centre {
            j += 1;
        }
        out.push(segments[j].symbol);
    }
    Ok(out)
}

/// Posteriorgram from ground-truth labels with label smoothing `eps`: the
/// true symbol gets `1 − eps`, the other `S − 1` share `eps` evenly.
pub fn ppg_provider(
    labels: &[usize],
    n_symbols: usize,
    eps: f64,
    frame_rate: f64,
) -> Result<FeatureSequence> {
    if labels.is_empty() {
        return Err(invalid("empty label sequence"));
    }
    if n_symbols < 2 {
        return Err(invalid("need at least two symbols"));
    }
    if !(0.0..0.5).contains(&eps) {
        return Err(invalid(format!("smoothing {eps} outside [0, 0.5)")));
    }
    if let Some(&s) = labels.iter().find(|&&s| s >= n_symbols) {
        return Err(invalid(format!("symbol {s} out of range for {n_symbols}")));
    }
    let off = eps / (n_symbols - 1) as f64;
    let mut data = vec![off; labels.len() * n_symbols];
    for (row, &s) in data.chunks_mut(n_symbols).zip(labels) {
        row[s] = 1.0 - eps;
    }
    Ok(FeatureSequence {
        frames: Tensor::matrix(labels.len(), n_symbols, data)?,
        frame_rate,
    })
}
