use super::{Array, ParamStore, ScheduleState, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Adam moments with decoupled weight decay.
    AdamW { beta1: f64, beta2: f64, eps: f64 },
    /// Plain gradient descent with decoupled weight decay.
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment buffers for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub first: Array<T>,
    pub second: Array<T>,
}

/// Optimizer over one or more parameter stores, updated together.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    /// `moments[store][param]`, created lazily on the first step.
    moments: Vec<Vec<Moments<T>>>,
    /// Number of completed steps (drives bias correction).
    pub steps: u64,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer { kind, moments: Vec::new(), steps: 0 }
    }

    pub fn adamw() -> Self {
        Self::new(OptimizerKind::default())
    }

    pub fn moments(&self) -> &[Vec<Moments<T>>] {
        &self.moments
    }

    pub fn set_moments(&mut self, moments: Vec<Vec<Moments<T>>>, steps: u64) {
        self.moments = moments;
        self.steps = steps;
    }

    fn ensure_moments(&mut self, stores: &[&mut ParamStore<T>]) {
        if self.moments.len() == stores.len() {
            return;
        }
        self.moments = stores
            .iter()
            .map(|s| {
                s.iter()
                    .map(|p| Moments {
                        first: Array::zeros(p.value().shape().to_vec()),
                        second: Array::zeros(p.value().shape().to_vec()),
                    })
                    .collect()
            })
            .collect();
    }

    /// One update of every trainable parameter from its accumulated gradient.
    ///
    /// Nothing is modified if any trainable gradient is non-finite.
    pub fn step(&mut self, stores: &mut [&mut ParamStore<T>], lr: f64, weight_decay: f64) -> Result<()> {
        for s in stores.iter() {
            for p in s.iter().filter(|p| p.trainable) {
                if !p.grad.all_finite() {
                    return Err(Error::NonFinite(format!("gradient of {}", p.name())));
                }
            }
        }
        self.ensure_moments(stores);
        self.steps += 1;
        let t = self.steps as i32;
        let lr_t = T::of(lr);
        let shrink = T::of(1.0 - lr * weight_decay);
        for (s, store) in stores.iter_mut().enumerate() {
            for (i, p) in store.iter_mut().enumerate() {
                if !p.trainable {
                    continue;
                }
                let decay = p.decay && weight_decay != 0.0;
                let grad = p.grad.clone();
                let value = p.value_mut();
                if decay {
                    value.scale_assign(shrink);
                }
                match self.kind {
                    OptimizerKind::Sgd => {
                        for (v, &g) in value.data_mut().iter_mut().zip(grad.data()) {
                            *v -= lr_t * g;
                        }
                    }
                    OptimizerKind::AdamW { beta1, beta2, eps } => {
                        let m = &mut self.moments[s][i];
                        let (b1, b2) = (T::of(beta1), T::of(beta2));
                        let c1 = T::of(1.0 / (1.0 - beta1.powi(t)));
                        let c2 = T::of(1.0 / (1.0 - beta2.powi(t)));
                        let e = T::of(eps);
                        let iter = value
                            .data_mut()
                            .iter_mut()
                            .zip(grad.data())
                            .zip(m.first.data_mut().iter_mut().zip(m.second.data_mut().iter_mut()));
                        for ((v, &g), (m1, m2)) in iter {
                            *m1 = b1 * *m1 + (T::ONE - b1) * g;
                            *m2 = b2 * *m2 + (T::ONE - b2) * g * g;
                            let mhat = *m1 * c1;
                            let vhat = *m2 * c2;
                            *v -= lr_t * mhat / (vhat.sqrt() + e);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Step with the learning rate and weight decay read from `schedule`,
    /// then advance the schedule.
    pub fn step_scheduled(&mut self, stores: &mut [&mut ParamStore<T>], schedule: &mut ScheduleState) -> Result<()> {
        self.step(stores, schedule.lr(), schedule.weight_decay())?;
        schedule.advance();
        Ok(())
    }
}
