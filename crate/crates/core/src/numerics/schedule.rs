use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Which scheduled quantity to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    LearningRate,
    Momentum,
    WeightDecay,
}

/// Step counter plus the endpoints of the learning-rate, EMA-momentum and
/// weight-decay schedules.
///
/// The learning rate warms up linearly from `lr_start` to `lr_peak`, then
/// follows a half cosine toward `lr_final` over a horizon of
/// `total_steps * scale_factor`, so training ends before reaching the floor.
/// Momentum and weight decay interpolate linearly so that step 0 uses the
/// start value and step `total_steps - 1` uses the final value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub step: u64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub lr_start: f64,
    pub lr_peak: f64,
    pub lr_final: f64,
    pub wd_start: f64,
    pub wd_final: f64,
    pub momentum_start: f64,
    pub momentum_final: f64,
    pub scale_factor: f64,
}

impl ScheduleState {
    /// Reference schedule endpoints: LR 2e-4 -> 3e-4 -> 1e-6, weight decay
    /// 0.04 -> 0.4, momentum 0.998 -> 1.0, horizon scale 1.25.
    pub fn reference(total_steps: u64, warmup_steps: u64) -> Self {
        ScheduleState {
            step: 0,
            warmup_steps,
            total_steps,
            lr_start: 2e-4,
            lr_peak: 3e-4,
            lr_final: 1e-6,
            wd_start: 0.04,
            wd_final: 0.4,
            momentum_start: 0.998,
            momentum_final: 1.0,
            scale_factor: 1.25,
        }
    }

    /// Same schedule at a different step.
    pub fn at(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    pub fn value(&self, kind: ScheduleKind) -> f64 {
        match kind {
            ScheduleKind::LearningRate => self.lr(),
            ScheduleKind::Momentum => self.momentum(),
            ScheduleKind::WeightDecay => self.weight_decay(),
        }
    }

    pub fn lr(&self) -> f64 {
        let step = self.step as f64;
        let warmup = self.warmup_steps as f64;
        if self.step < self.warmup_steps {
            return self.lr_start + (self.lr_peak - self.lr_start) * step / warmup;
        }
        let horizon = (self.total_steps as f64 * self.scale_factor - warmup).max(1.0);
        let progress = ((step - warmup) / horizon).min(1.0);
        let lr = self.lr_final + (self.lr_peak - self.lr_final) * 0.5 * (1.0 + (PI * progress).cos());
        lr.max(self.lr_final)
    }

    fn linear_progress(&self) -> f64 {
        if self.total_steps <= 1 {
            return 1.0;
        }
        (self.step as f64 / (self.total_steps - 1) as f64).min(1.0)
    }

    pub fn momentum(&self) -> f64 {
        self.momentum_start + (self.momentum_final - self.momentum_start) * self.linear_progress()
    }

    pub fn weight_decay(&self) -> f64 {
        self.wd_start + (self.wd_final - self.wd_start) * self.linear_progress()
    }

    pub fn advance(&mut self) {
        self.step += 1;
    }
}
