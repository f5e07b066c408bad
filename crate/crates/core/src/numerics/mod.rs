//! Dense arrays, reverse-mode differentiation, optimizer and schedules.

mod array;
mod dd;
mod gradcheck;
mod graph;
mod optim;
mod params;
mod schedule;

pub use array::Array;
pub use dd::Dd;
pub use gradcheck::{grad_check, grad_check_params, relative_error, GradCheckReport, Objective};
pub use graph::{Gradients, Graph, Var};
pub use optim::{Moments, Optimizer, OptimizerKind};
pub use params::{ParamId, ParamKey, ParamStore, Parameter};
pub use schedule::{ScheduleKind, ScheduleState};
pub use scalar::Scalar;

mod scalar;

/// Layer-norm epsilon used throughout the models.
pub const LAYER_NORM_EPS: f64 = 1e-6;
