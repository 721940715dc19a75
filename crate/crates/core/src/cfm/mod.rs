//! Optimal-transport conditional flow matching: straight noise-to-data
//! paths, the velocity regression loss, and a guided Euler sampler.

mod field;
mod loss;
mod mlp;
mod path;
mod sampler;
mod unet;

pub use field::{ConditionSet, FieldCondition, VectorField};
pub use loss::{cfm_loss, standard_normal, CfmLoss};
pub use mlp::MlpField;
pub use path::{cfg_combine, ot_path, ot_target, FlowPathParams};
pub use sampler::{euler_from, euler_sample, SamplerConfig};
pub use unet::{ResBlock, UNet, UNetConfig};
