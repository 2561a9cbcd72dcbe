use rand::Rng;

use crate::diffcore::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An ordered list of named parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    groups: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn push(&mut self, name: String, group: &str, value: Tensor) -> usize {
        self.names.push(name);
        self.groups.push(group.to_owned());
        self.values.push(value);
        self.values.len() - 1
    }

    /// He-uniform weight, `U(-√(6/fan_in), √(6/fan_in))`.
    pub(crate) fn push_he<R: Rng>(
        &mut self,
        name: String,
        group: &str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> usize {
        let bound = (6.0 / fan_in as f64).sqrt();
        self.push(name, group, Tensor::uniform(shape, -bound, bound, rng))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Stage or component each parameter belongs to.
    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.values[i])
    }

    /// Total scalar count across the given group.
    pub fn count_in_group(&self, group: &str) -> usize {
        self.groups
            .iter()
            .zip(&self.values)
            .filter(|(g, _)| g.as_str() == group)
            .map(|(_, v)| v.numel())
            .sum()
    }

    /// Inserts every parameter into `g`, trainable or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<NodeId> {
        self.values
            .iter()
            .map(|v| {
                if trainable {
                    g.param(v.clone())
                } else {
                    g.input(v.clone())
                }
            })
            .collect()
    }

    /// Replaces all values by name, checking that names and shapes match.
    pub fn load(&mut self, lookup: impl Fn(&str) -> Option<Tensor>) -> Result<()> {
        for (name, slot) in self.names.iter().zip(self.values.iter_mut()) {
            let t = lookup(name)
                .ok_or_else(|| Error::Data(format!("checkpoint has no parameter '{name}'")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Data(format!(
                    "parameter '{name}' has shape {:?}, model expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        Ok(())
    }
}
