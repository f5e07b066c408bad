use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{Array, Gradients, Scalar};
use crate::error::{Error, Result};

/// Process-unique identity of a parameter tensor. Forks get fresh keys.
pub type ParamKey = u64;

static NEXT_KEY: AtomicU64 = AtomicU64::new(1);

fn next_key() -> ParamKey {
    NEXT_KEY.fetch_add(1, Ordering::Relaxed)
}

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug)]
pub struct Parameter<T> {
    name: String,
    value: Arc<Array<T>>,
    pub grad: Array<T>,
    key: ParamKey,
    /// Excluded from gradient tracking and optimizer updates when false.
    pub trainable: bool,
    /// Whether decoupled weight decay applies (matrices yes, biases/gains no).
    pub decay: bool,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Array<T>) -> Self {
        let decay = value.shape().len() >= 2 && value.rows() > 1;
        Parameter {
            name: name.into(),
            grad: Array::zeros(value.shape().to_vec()),
            value: Arc::new(value),
            key: next_key(),
            trainable: true,
            decay,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn key(&self) -> ParamKey {
        self.key
    }

    pub fn value(&self) -> &Array<T> {
        &self.value
    }

    pub(crate) fn shared(&self) -> Arc<Array<T>> {
        Arc::clone(&self.value)
    }

    pub fn value_mut(&mut self) -> &mut Array<T> {
        Arc::make_mut(&mut self.value)
    }

    /// Replace the value; the shape must not change.
    pub fn set_value(&mut self, value: Array<T>) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::Shape {
                op: "Parameter::set_value",
                detail: format!("{}: {:?} -> {:?}", self.name, self.value.shape(), value.shape()),
            });
        }
        self.value = Arc::new(value);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::ZERO);
    }

    /// Copy converted to another element type, with a fresh key.
    pub fn cast<U: Scalar>(&self) -> Parameter<U> {
        Parameter {
            name: self.name.clone(),
            value: Arc::new(self.value.cast()),
            grad: Array::zeros(self.value.shape().to_vec()),
            key: next_key(),
            trainable: self.trainable,
            decay: self.decay,
        }
    }

    /// Independent copy with a fresh key and zeroed gradient.
    pub fn fork(&self) -> Self {
        Parameter {
            name: self.name.clone(),
            value: Arc::new((*self.value).clone()),
            grad: Array::zeros(self.value.shape().to_vec()),
            key: next_key(),
            trainable: self.trainable,
            decay: self.decay,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Ordered collection of parameters belonging to one module.
#[derive(Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new(), by_name: HashMap::new() }
    }

    /// Register a parameter. Names must be unique within the store.
    pub fn add(&mut self, name: impl Into<String>, value: Array<T>) -> ParamId {
        let p = Parameter::new(name, value);
        assert!(!self.by_name.contains_key(p.name()), "duplicate parameter name {}", p.name());
        let id = self.params.len();
        self.by_name.insert(p.name().to_string(), id);
        self.params.push(p);
        ParamId(id)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array<T> {
        self.params[id.0].value()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn num_elements(&self) -> usize {
        self.params.iter().map(|p| p.value().len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.params.iter_mut().for_each(|p| p.trainable = trainable);
    }

    /// Add `scale * g` for every parameter that has a gradient in `grads`.
    pub fn accumulate(&mut self, grads: &Gradients<T>, scale: T) {
        for p in &mut self.params {
            if let Some(g) = grads.param(p.key()) {
                for (a, &b) in p.grad.data_mut().iter_mut().zip(g.data()) {
                    *a += scale * b;
                }
            }
        }
    }

    /// Same layout converted to another element type, with fresh keys.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore { params: self.params.iter().map(Parameter::cast).collect(), by_name: self.by_name.clone() }
    }

    /// Deep copy with fresh keys.
    pub fn fork(&self) -> Self {
        ParamStore { params: self.params.iter().map(Parameter::fork).collect(), by_name: self.by_name.clone() }
    }

    pub fn grad_abs_sum(&self) -> f64 {
        self.params.iter().flat_map(|p| p.grad.data().iter()).map(|g| g.to_f64().abs()).sum()
    }

    /// Largest elementwise difference between two stores of identical layout.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.params
            .iter()
            .zip(&other.params)
            .map(|(a, b)| a.value().max_abs_diff(b.value()))
            .fold(0.0, f64::max)
    }

    /// Snapshot of all values, in registration order.
    pub fn snapshot(&self) -> Vec<Array<T>> {
        self.params.iter().map(|p| p.value().clone()).collect()
    }
}
