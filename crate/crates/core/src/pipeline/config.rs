//! Run configuration, read from and written to TOML (plain `key = value`
//! lines grouped in sections). Every key has a default.

use serde::{Deserialize, Serialize};

use crate::cfm::{FlowPathParams, SamplerConfig, UNetConfig};
use crate::dsp::MelConfig;
use crate::error::{Error, Result};
use crate::timbre::SegmentSpec;

/// Sizes reported for the large-scale system; kept for reference, the
/// defaults below are a desk-scale reduction.
pub mod full_scale {
    pub const CODEBOOK_SIZE: usize = 8200;
    pub const CODEBOOK_DIM: usize = 1024;
    pub const RVQ_STAGES: usize = 1;
    pub const ATTENTION_HEADS: usize = 8;
    pub const ATTENTION_LAYERS: usize = 6;
    pub const ATTENTION_DIM: usize = 1024;
    pub const UNET_LAYERS: usize = 10;
    pub const UNET_RESNET_BLOCKS: usize = 3;
    pub const UNET_HIDDEN: usize = 1280;
    pub const BATCH_PER_DEVICE: usize = 16;
    pub const LEARNING_RATE: f64 = 1e-4;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_symbols: usize,
    /// Label smoothing of the posteriorgram.
    pub ppg_eps: f64,
    /// Posteriorgram hop in samples.
    pub ppg_hop: usize,
    pub ssl_dim: usize,
    pub fusion_hidden: usize,
    pub spk_dim: usize,
    pub memory_dim: usize,
    pub memory_heads: usize,
    pub memory_blocks: usize,
    pub context_dim: usize,
    pub context_heads: usize,
    pub context_blocks: usize,
    pub context_ff: usize,
    pub unet_hidden: usize,
    pub unet_levels: usize,
    pub unet_blocks: usize,
    pub time_dim: usize,
    pub norm_groups: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_symbols: 12,
            ppg_eps: 0.05,
            ppg_hop: 320,
            ssl_dim: 64,
            fusion_hidden: 64,
            spk_dim: 192,
            memory_dim: 128,
            memory_heads: 4,
            memory_blocks: 4,
            context_dim: 128,
            context_heads: 4,
            context_blocks: 2,
            context_ff: 256,
            unet_hidden: 128,
            unet_levels: 3,
            unet_blocks: 2,
            time_dim: 128,
            norm_groups: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RvqConfig {
    pub codebook_size: usize,
    pub n_stages: usize,
    /// Weight of the commitment term in the total loss.
    pub lambda: f64,
    pub ema_decay: f64,
    pub dead_threshold: f64,
    /// Keep the codebooks fixed after initialisation instead of EMA updates.
    pub frozen: bool,
}

impl Default for RvqConfig {
    fn default() -> Self {
        Self {
            codebook_size: 256,
            n_stages: 1,
            lambda: 0.01,
            ema_decay: 0.99,
            dead_threshold: 1e-3,
            frozen: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfmConfig {
    pub sigma_min: f64,
    pub p_drop: f64,
    pub n_steps: usize,
    pub cfg_gamma: f64,
}

impl Default for CfmConfig {
    fn default() -> Self {
        Self {
            sigma_min: 1e-4,
            p_drop: 0.2,
            n_steps: 10,
            cfg_gamma: 0.7,
        }
    }
}

impl CfmConfig {
    pub fn path(&self) -> FlowPathParams {
        FlowPathParams {
            sigma_min: self.sigma_min,
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            n_steps: self.n_steps,
            cfg_gamma: self.cfg_gamma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub weight_decay: f64,
    /// Source crop length in samples; a multiple of both hops.
    pub crop_samples: usize,
    /// Utterances per speaker held out of training for evaluation.
    pub holdout_per_speaker: usize,
    pub checkpoint_every: u64,
    /// Linear warm-up length in steps.
    pub warmup_steps: u64,
    /// Cosine decay from `lr` to `lr * final_lr_fraction` over `steps`;
    /// 1 keeps the rate constant.
    pub final_lr_fraction: f64,
    /// Global gradient-norm clip; 0 disables it.
    pub grad_clip: f64,
}

impl TrainConfig {
    /// Learning rate at optimizer step `step` (0-based).
    pub fn lr_at(&self, step: u64) -> f64 {
        let warm = if step < self.warmup_steps {
            (step + 1) as f64 / self.warmup_steps as f64
        } else {
            1.0
        };
        let progress = (step as f64 / self.steps.max(1) as f64).min(1.0);
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        let f = self.final_lr_fraction;
        self.lr * warm * (f + (1.0 - f) * cos)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 16,
            steps: 1000,
            weight_decay: 0.0,
            crop_samples: 20480,
            holdout_per_speaker: 1,
            checkpoint_every: 0,
            warmup_steps: 0,
            final_lr_fraction: 1.0,
            grad_clip: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub init: u64,
    pub ssl: u64,
    pub speaker: u64,
    pub train: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            init: 1,
            ssl: 2,
            speaker: 3,
            train: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub griffin_lim_iters: usize,
    pub f0_min: f64,
    pub f0_max: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            griffin_lim_iters: 60,
            f0_min: 60.0,
            f0_max: 400.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mel: MelConfig,
    pub model: ModelConfig,
    pub rvq: RvqConfig,
    pub cfm: CfmConfig,
    pub train: TrainConfig,
    pub reference: SegmentSpec,
    pub seeds: SeedConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    pub fn unet(&self) -> UNetConfig {
        UNetConfig {
            state_dim: self.mel.n_mels,
            cond_dim: self.model.context_dim,
            hidden: self.model.unet_hidden,
            levels: self.model.unet_levels,
            blocks_per_level: self.model.unet_blocks,
            groups: self.model.norm_groups,
            time_dim: self.model.time_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mel.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        let m = &self.model;
        let dims = [
            ("ssl_dim", m.ssl_dim),
            ("fusion_hidden", m.fusion_hidden),
            ("spk_dim", m.spk_dim),
            ("memory_dim", m.memory_dim),
            ("context_dim", m.context_dim),
            ("context_ff", m.context_ff),
            ("unet_hidden", m.unet_hidden),
            ("unet_levels", m.unet_levels),
            ("time_dim", m.time_dim),
            ("ppg_hop", m.ppg_hop),
            ("memory_heads", m.memory_heads),
            ("context_heads", m.context_heads),
            ("norm_groups", m.norm_groups),
        ];
        for (name, v) in dims {
            if v == 0 {
                return bad(format!("model.{name} must be positive"));
            }
        }
        if m.n_symbols < 2 {
            return bad("model.n_symbols must be at least 2".into());
        }
        if !(0.0..0.5).contains(&m.ppg_eps) {
            return bad(format!("model.ppg_eps {} outside [0, 0.5)", m.ppg_eps));
        }
        if m.memory_dim % m.memory_heads != 0 || m.context_dim % m.context_heads != 0 {
            return bad("attention dims must be divisible by their head counts".into());
        }
        if m.memory_dim % m.norm_groups != 0 || m.unet_hidden % m.norm_groups != 0 {
            return bad("memory_dim and unet_hidden must be divisible by norm_groups".into());
        }
        let r = &self.rvq;
        if r.codebook_size < 2 || r.n_stages == 0 {
            return bad("rvq needs codebook_size >= 2 and n_stages >= 1".into());
        }
        if !(r.lambda >= 0.0 && r.lambda.is_finite()) {
            return bad(format!("rvq.lambda {} must be >= 0", r.lambda));
        }
        if !(r.ema_decay > 0.0 && r.ema_decay < 1.0) {
            return bad(format!("rvq.ema_decay {} outside (0, 1)", r.ema_decay));
        }
        let c = &self.cfm;
        if !(c.sigma_min > 0.0 && c.sigma_min < 1.0) {
            return bad(format!("cfm.sigma_min {} outside (0, 1)", c.sigma_min));
        }
        if !(0.0..=1.0).contains(&c.p_drop) {
            return bad(format!("cfm.p_drop {} outside [0, 1]", c.p_drop));
        }
        c.sampler().validate().map_err(|e| Error::Config(e.to_string()))?;
        let t = &self.train;
        if !(t.lr > 0.0) || t.batch_size == 0 {
            return bad("train.lr and train.batch_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&t.final_lr_fraction) || !(t.grad_clip >= 0.0) {
            return bad("train.final_lr_fraction must lie in [0, 1] and train.grad_clip be >= 0".into());
        }
        let align = lcm(self.mel.hop_length, m.ppg_hop);
        if t.crop_samples < self.mel.win_length || t.crop_samples % align != 0 {
            return bad(format!(
                "train.crop_samples {} must be a multiple of {align} and at least one window",
                t.crop_samples
            ));
        }
        let s = &self.reference;
        if !(s.min_secs > 0.0 && s.min_secs <= s.max_secs) {
            return bad(format!("reference range [{}, {}] s is empty", s.min_secs, s.max_secs));
        }
        if self.eval.griffin_lim_iters == 0 || !(self.eval.f0_min < self.eval.f0_max) {
            return bad("eval needs griffin_lim_iters >= 1 and f0_min < f0_max".into());
        }
        Ok(())
    }

    /// Sample grid on which both the mel and posteriorgram frames start.
    pub fn crop_alignment(&self) -> usize {
        lcm(self.mel.hop_length, self.model.ppg_hop)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_warms_up_then_decays() {
        let t = TrainConfig {
            lr: 1.0,
            steps: 100,
            warmup_steps: 10,
            final_lr_fraction: 0.1,
            ..Default::default()
        };
        assert!((t.lr_at(0) - 0.1).abs() < 1e-3);
        assert!(t.lr_at(9) > t.lr_at(50) && t.lr_at(50) > t.lr_at(99));
        assert!((t.lr_at(100) - 0.1).abs() < 1e-12);
        let flat = TrainConfig::default();
        assert_eq!(flat.lr_at(0), flat.lr_at(999));
    }

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = c.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert_eq!(c.rvq.lambda, 0.01);
        assert_eq!(c.rvq.n_stages, 1);
        assert_eq!(c.cfm.sigma_min, 1e-4);
        assert_eq!(c.cfm.n_steps, 10);
        assert_eq!(c.cfm.cfg_gamma, 0.7);
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.crop_alignment(), 1280);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_toml("[rvq]\nlambda = 0.5\n[train]\nsteps = 7\n").unwrap();
        assert_eq!(c.rvq.lambda, 0.5);
        assert_eq!(c.train.steps, 7);
        assert_eq!(c.model, ModelConfig::default());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[rvq]\nlambda = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[train]\ncrop_samples = 1000\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\nx = 1\n").is_err());
        assert!(RunConfig::from_toml("[cfm]\nn_steps = 0\n").is_err());
    }
}
