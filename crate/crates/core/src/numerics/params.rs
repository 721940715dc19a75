use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Tensor;
use crate::error::{invalid, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// Frozen parameters are read as constants and never receive gradients.
    pub requires_grad: bool,
}

/// Named, ordered parameter collection shared by every learned module.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, requires_grad: bool) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            requires_grad,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    /// Replaces a parameter value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(invalid(format!(
                "parameter {} has shape {:?}, got {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    /// Adds `delta` to one element in place (finite-difference probes).
    pub fn perturb(&mut self, id: ParamId, index: usize, delta: f64) {
        self.params[id.0].value.data_mut()[index] += delta;
    }

    pub(crate) fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn trainable(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.iter().filter(|(_, p)| p.requires_grad).map(|(id, _)| id)
    }

    pub fn frozen(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.iter().filter(|(_, p)| !p.requires_grad).map(|(id, _)| id)
    }

    pub fn num_trainable_values(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.requires_grad)
            .map(|p| p.value.len())
            .sum()
    }
}

/// Registers freshly initialised parameters under a dotted name prefix.
pub struct Init<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut ChaCha8Rng,
    prefix: String,
    trainable: bool,
}

impl<'a> Init<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
            trainable: true,
        }
    }

    /// Same store and rng, parameters registered as frozen.
    pub fn frozen(mut self) -> Self {
        self.trainable = false;
        self
    }

    pub fn scope(&mut self, name: &str) -> Init<'_> {
        let prefix = if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        };
        Init {
            store: self.store,
            rng: self.rng,
            prefix,
            trainable: self.trainable,
        }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn tensor(&mut self, name: &str, value: Tensor) -> ParamId {
        let n = self.full_name(name);
        self.store.add(n, value, self.trainable)
    }

    /// Normal initialisation with standard deviation `std`.
    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| std * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.tensor(name, Tensor::from_parts(shape.to_vec(), data))
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> ParamId {
        self.tensor(name, Tensor::full(shape.to_vec(), value))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }
}
