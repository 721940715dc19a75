use crate::error::Result;
use crate::numerics::{Graph, Tensor, Var};

/// Condition vars for one call: fused sequence `[D_f, T]` and FiLM
/// `γ, β: [C, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct FieldCondition {
    pub fused: Var,
    pub gamma: Var,
    pub beta: Var,
}

/// Condition values computed once and re-bound into each sampling graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSet {
    pub fused: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    /// When false the net substitutes its learned null condition.
    pub cond_active: bool,
}

impl ConditionSet {
    pub fn bind(&self, g: &mut Graph) -> Option<FieldCondition> {
        self.cond_active.then(|| FieldCondition {
            fused: g.constant(self.fused.clone()),
            gamma: g.constant(self.gamma.clone()),
            beta: g.constant(self.beta.clone()),
        })
    }
}

/// A time-dependent vector field `v(x, t, h)` over channel-major states.
/// `cond = None` asks for the unconditional field.
pub trait VectorField: Sync {
    fn velocity(&self, g: &mut Graph, x: Var, t: f64, cond: Option<&FieldCondition>) -> Result<Var>;
}
