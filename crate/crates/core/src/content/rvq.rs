//! Residual vector quantisation with per-stage codebooks learned by
//! exponential moving averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::FeatureSequence;
use crate::error::{invalid, shape_err, Result};
use crate::numerics::{Graph, Tensor, Var};

/// Additive smoothing of the EMA counts.
pub const LAPLACE_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    /// `[V, D]`.
    pub entries: Tensor,
    pub ema_counts: Vec<f64>,
    /// `[V, D]`.
    pub ema_sums: Tensor,
}

impl Codebook {
    /// Entries as given, each starting with unit count.
    pub fn from_entries(entries: Tensor) -> Result<Self> {
        let (v, _) = entries.dims2();
        if v < 2 {
            return Err(invalid("a codebook needs at least two entries"));
        }
        Ok(Self {
            ema_counts: vec![1.0; v],
            ema_sums: entries.clone(),
            entries,
        })
    }

    pub fn random(v: usize, d: usize, std: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let data = (0..v * d).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::from_entries(Tensor::matrix(v, d, data)?)
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn dim(&self) -> usize {
        self.entries.cols()
    }

    /// Index of the entry closest to `x` in Euclidean distance; ties go to
    /// the lower index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.size() {
            let d: f64 = self
                .entries
                .row(k)
                .iter()
                .zip(x)
                .map(|(e, v)| (e - v) * (e - v))
                .sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }

    /// One EMA step from the vectors assigned this round:
    /// counts and sums decay by `decay` and absorb `(1 − decay)` of the new
    /// statistics; entries that received vectors are recomputed from the
    /// Laplace-smoothed counts; entries whose count fell below
    /// `dead_threshold` are reseeded from a random input vector.
    pub fn ema_update(
        &mut self,
        inputs: &Tensor,
        codes: &[usize],
        decay: f64,
        dead_threshold: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(invalid(format!("EMA decay {decay} outside (0, 1)")));
        }
        let (n, d) = inputs.dims2();
        if d != self.dim() || codes.len() != n {
            return Err(shape_err(format!(
                "EMA update with {n}x{d} inputs and {} codes for a {}x{} book",
                codes.len(),
                self.size(),
                self.dim()
            )));
        }
        let v = self.size();
        let mut counts = vec![0.0; v];
        let mut sums = vec![0.0; v * d];
        for (i, &k) in codes.iter().enumerate() {
            if k >= v {
                return Err(invalid(format!("code {k} out of range for {v} entries")));
            }
            counts[k] += 1.0;
            sums[k * d..(k + 1) * d]
                .iter_mut()
                .zip(inputs.row(i))
                .for_each(|(s, x)| *s += x);
        }
        for (c, new) in self.ema_counts.iter_mut().zip(&counts) {
            *c = decay * *c + (1.0 - decay) * new;
        }
        for (s, new) in self.ema_sums.data_mut().iter_mut().zip(&sums) {
            *s = decay * *s + (1.0 - decay) * new;
        }
        let total: f64 = self.ema_counts.iter().sum();
        for k in (0..v).filter(|&k| counts[k] > 0.0) {
            let smoothed = (self.ema_counts[k] + LAPLACE_EPS) / (total + v as f64 * LAPLACE_EPS) * total;
            let (sums, entries) = (&self.ema_sums, self.entries.data_mut());
            for j in 0..d {
                entries[k * d + j] = sums.at(k, j) / smoothed;
            }
        }
        if n > 0 {
            for k in 0..v {
                if self.ema_counts[k] < dead_threshold {
                    let src = inputs.row(rng.random_range(0..n)).to_vec();
                    self.entries.data_mut()[k * d..(k + 1) * d].copy_from_slice(&src);
                    self.ema_sums.data_mut()[k * d..(k + 1) * d].copy_from_slice(&src);
                    self.ema_counts[k] = 1.0;
                }
            }
        }
        Ok(())
    }
}

/// Codes and reconstructions of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedSequence {
    /// `codes[stage][frame]`.
    pub codes: Vec<Vec<usize>>,
    /// Sum over stages of the selected entries, `[T, D]`.
    pub vectors: Tensor,
    /// Reconstruction after each stage, `[T, D]` each; the last equals
    /// `vectors`.
    pub partials: Vec<Tensor>,
    /// Residual each stage quantised, `[T, D]` each; the first is the input.
    pub residuals: Vec<Tensor>,
}

impl QuantizedSequence {
    pub fn n_stages(&self) -> usize {
        self.codes.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rvq {
    pub stages: Vec<Codebook>,
}

impl Rvq {
    pub fn new(stages: Vec<Codebook>) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("RVQ needs at least one stage"));
        }
        let d = stages[0].dim();
        if stages.iter().any(|b| b.dim() != d) {
            return Err(shape_err("RVQ stages disagree on dimension"));
        }
        Ok(Self { stages })
    }

    pub fn random(n_stages: usize, v: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(
            (0..n_stages)
                .map(|_| Codebook::random(v, d, 1.0, &mut rng))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.stages[0].dim()
    }

    /// Stage-wise nearest-neighbour quantisation of time-major `[T, D]`
    /// frames.
    pub fn quantize(&self, x: &Tensor) -> Result<QuantizedSequence> {
        let (t, d) = x.dims2();
        if d != self.dim() {
            return Err(shape_err(format!("RVQ of dimension {} given {d}-dim frames", self.dim())));
        }
        let mut residual = x.clone();
        let mut recon = Tensor::zeros(vec![t, d]);
        let mut codes = Vec::with_capacity(self.stages.len());
        let mut partials = Vec::with_capacity(self.stages.len());
        let mut residuals = Vec::with_capacity(self.stages.len());
        for book in &self.stages {
            let stage: Vec<usize> = (0..t).map(|i| book.nearest(residual.row(i))).collect();
            residuals.push(residual.clone());
            for (i, &k) in stage.iter().enumerate() {
                let e = book.entries.row(k);
                recon.data_mut()[i * d..(i + 1) * d]
                    .iter_mut()
                    .zip(e)
                    .for_each(|(r, v)| *r += v);
                residual.data_mut()[i * d..(i + 1) * d]
                    .iter_mut()
                    .zip(e)
                    .for_each(|(r, v)| *r -= v);
            }
            partials.push(recon.clone());
            codes.push(stage);
        }
        Ok(QuantizedSequence {
            codes,
            vectors: recon,
            partials,
            residuals,
        })
    }

    pub fn quantize_features(&self, x: &FeatureSequence) -> Result<QuantizedSequence> {
        self.quantize(&x.frames)
    }

    /// EMA step for every stage from a batch of quantisations. Each stage
    /// learns from the residuals it was asked to quantise.
    pub fn ema_update(
        &mut self,
        batch: &[&QuantizedSequence],
        decay: f64,
        dead_threshold: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        for (s, book) in self.stages.iter_mut().enumerate() {
            let inputs: Vec<&Tensor> = batch.iter().map(|q| &q.residuals[s]).collect();
            let codes: Vec<usize> = batch.iter().flat_map(|q| q.codes[s].iter().copied()).collect();
            let stacked = Tensor::concat_rows(&inputs)?;
            book.ema_update(&stacked, &codes, decay, dead_threshold, rng)?;
        }
        Ok(())
    }
}

/// `Σ_i ‖x − x̂_i‖²` averaged over frames, with `x̂_i` the reconstruction
/// after stage `i`.
pub fn rvq_commit_loss(x: &FeatureSequence, q: &QuantizedSequence) -> Result<f64> {
    let t = x.len() as f64;
    let mut total = 0.0;
    for p in &q.partials {
        if p.shape() != x.frames.shape() {
            return Err(shape_err(format!("commit loss {:?} vs {:?}", x.frames.shape(), p.shape())));
        }
        total += x.frames.data().iter().zip(p.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / t)
}

/// Graph form of [`rvq_commit_loss`] on a channel-major `x: [D, T]`; the
/// reconstructions are constants, so gradient reaches `x` only.
pub fn commit_loss(g: &mut Graph, x: Var, q: &QuantizedSequence) -> Result<Var> {
    let (d, t) = g.value(x).dims2();
    let mut total: Option<Var> = None;
    for p in &q.partials {
        if p.shape() != [t, d] {
            return Err(shape_err(format!("commit loss [{d}x{t}] vs {:?}", p.shape())));
        }
        let c = g.constant(p.transpose());
        let diff = g.sub(x, c)?;
        let sq = g.mul(diff, diff)?;
        let s = g.sum(sq)?;
        total = Some(match total {
            Some(acc) => g.add(acc, s)?,
            None => s,
        });
    }
    let total = total.expect("at least one stage");
    g.scale(total, 1.0 / t as f64)
}
