use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Dense row-major array of 64-bit floats with an optional gradient slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("dimensions must be positive, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor {
            shape,
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Tensor::new(shape, vec![0.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<f64>) -> Result<()> {
        if grad.len() != self.values.len() {
            return Err(Error::Shape(format!(
                "gradient of length {} for tensor of length {}",
                grad.len(),
                self.values.len()
            )));
        }
        self.grad = Some(grad);
        Ok(())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Number of rows of a 2-D tensor (or length of a 1-D one).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-D tensor; 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.grad.iter().flatten().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    tensor: Tensor,
    trainable: bool,
}

/// Named learnable parameters with per-parameter trainable flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateId(name));
        }
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.clone(), id);
        self.entries.push(Entry {
            name,
            tensor,
            trainable: true,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        self.entries[id.0].tensor.values()
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    /// Sets the trainable flag on every parameter whose name starts with `prefix`.
    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) {
        for e in &mut self.entries {
            if e.name.starts_with(prefix) {
                e.trainable = trainable;
            }
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor, bool)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (ParamId(i), e.name.as_str(), &e.tensor, e.trainable))
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    /// Copies accumulated gradients into the grad slots of trainable
    /// parameters. Frozen parameters have their slot cleared.
    pub fn apply_grads(&mut self, grads: &GradBuffer) {
        for (i, e) in self.entries.iter_mut().enumerate() {
            if !e.trainable {
                e.tensor.clear_grad();
                continue;
            }
            let g = match grads.slots.get(i).and_then(|s| s.as_ref()) {
                Some(g) => g.clone(),
                None => vec![0.0; e.tensor.len()],
            };
            e.tensor.grad = Some(g);
        }
    }

    pub fn clear_grads(&mut self) {
        for e in &mut self.entries {
            e.tensor.clear_grad();
        }
    }

    /// Flattened copy of every parameter value, in registration order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.tensor.values.clone()).collect()
    }
}

/// Gradient accumulator aligned with a [`ParamStore`]; slots are allocated
/// on first touch.
#[derive(Debug, Clone, Default)]
pub struct GradBuffer {
    lens: Vec<usize>,
    slots: Vec<Option<Vec<f64>>>,
}

impl GradBuffer {
    pub fn for_store(store: &ParamStore) -> Self {
        GradBuffer {
            lens: store.entries.iter().map(|e| e.tensor.len()).collect(),
            slots: vec![None; store.len()],
        }
    }

    pub fn slot(&mut self, id: ParamId) -> &mut [f64] {
        let len = self.lens[id.0];
        self.slots[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots.get(id.0).and_then(|s| s.as_deref())
    }

    /// Gradient for `id`, materialized as zeros when never touched.
    pub fn dense(&self, id: ParamId) -> Vec<f64> {
        self.get(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.lens[id.0]])
    }

    pub fn add_assign(&mut self, other: GradBuffer) {
        if self.lens.is_empty() {
            *self = other;
            return;
        }
        for (i, slot) in other.slots.into_iter().enumerate() {
            let Some(src) = slot else { continue };
            match &mut self.slots[i] {
                Some(dst) => dst.iter_mut().zip(&src).for_each(|(d, s)| *d += s),
                empty @ None => *empty = Some(src),
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for s in self.slots.iter_mut().flatten() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn touched(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| ParamId(i))
    }

    pub fn max_abs(&self, id: ParamId) -> f64 {
        self.get(id)
            .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(0.0)
    }
}
