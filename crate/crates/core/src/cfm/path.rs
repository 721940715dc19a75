use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPathParams {
    pub sigma_min: f64,
}

impl Default for FlowPathParams {
    fn default() -> Self {
        Self { sigma_min: 1e-4 }
    }
}

fn same(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!("path endpoints {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `φ_t = (1 − (1 − σ_min)·t)·x0 + t·x1`: noise `x0` at `t = 0`, data (plus
/// `σ_min·x0`) at `t = 1`.
pub fn ot_path(x0: &Tensor, x1: &Tensor, t: f64, p: FlowPathParams) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("path time {t} outside [0, 1]")));
    }
    same(x0, x1)?;
    let a = 1.0 - (1.0 - p.sigma_min) * t;
    x0.zip_map(x1, |u, v| a * u + t * v)
}

/// `u = x1 − (1 − σ_min)·x0`, the time derivative of [`ot_path`].
pub fn ot_target(x0: &Tensor, x1: &Tensor, p: FlowPathParams) -> Result<Tensor> {
    same(x0, x1)?;
    let c = 1.0 - p.sigma_min;
    x0.zip_map(x1, |u, v| v - c * u)
}

/// Guided velocity `(1 + γ)·v_cond − γ·v_uncond`.
pub fn cfg_combine(v_cond: &Tensor, v_uncond: &Tensor, gamma: f64) -> Result<Tensor> {
    if v_cond.shape() != v_uncond.shape() {
        return Err(shape_err(format!(
            "guidance {:?} vs {:?}",
            v_cond.shape(),
            v_uncond.shape()
        )));
    }
    if gamma == 0.0 {
        return Ok(v_cond.clone());
    }
    v_cond.zip_map(v_uncond, |c, u| (1.0 + gamma) * c - gamma * u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::matrix(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn boundaries_and_midpoint() {
        let x0 = t(&[0.3, -1.2]);
        let x1 = t(&[2.0, 4.0]);
        let p = FlowPathParams::default();
        assert_eq!(ot_path(&x0, &x1, 0.0, p).unwrap(), x0);
        let exact = FlowPathParams { sigma_min: 0.0 };
        assert_eq!(ot_path(&x0, &x1, 1.0, exact).unwrap(), x1);
        let mid = ot_path(&t(&[0.0, 0.0]), &x1, 0.5, exact).unwrap();
        assert_eq!(mid.data(), &[1.0, 2.0]);
        assert!(ot_path(&x0, &x1, 1.5, p).is_err());
        assert!(ot_path(&x0, &x1, -0.1, p).is_err());
    }

    #[test]
    fn target_special_cases() {
        let x1 = t(&[2.0, 4.0]);
        let p = FlowPathParams::default();
        assert_eq!(ot_target(&t(&[0.0, 0.0]), &x1, p).unwrap(), x1);
        let exact = FlowPathParams { sigma_min: 0.0 };
        assert!(ot_target(&x1, &x1, exact).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn guidance_hand_values() {
        let c = t(&[1.0]);
        let u = t(&[0.0]);
        assert_eq!(cfg_combine(&c, &u, 0.0).unwrap(), c);
        assert!((cfg_combine(&c, &u, 0.7).unwrap().data()[0] - 1.7).abs() < 1e-15);
        let same = t(&[0.25, -3.0]);
        assert_eq!(cfg_combine(&same, &same, 0.7).unwrap(), same);
    }
}
