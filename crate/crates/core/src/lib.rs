//! Closed-loop optimal control of multilevel quantum systems under Lindblad
//! decoherence.
//!
//! The numeric core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the `*64` aliases below fix it to double precision,
//! which is what the CLI and the reference reproductions use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod gaopt;
pub mod lindblad;
pub mod linalg;
pub mod perturb;
pub mod qsystem;
pub mod reproduce;
pub mod scalar;

pub use error::{Error, Result};
pub use field::{ControlField, FieldComponent, Spectrum};
pub use gaopt::{CooperationReport, CostParams, GaConfig, OptimizationRecord};
pub use lindblad::{DensityMatrix, PropagationConfig, Trajectory};
pub use perturb::{EffectiveCoupling, LadderSpec, ScaledStrengths};
pub use qsystem::{build_model, Decoherence, LevelSystem, Model, Superoperator};
pub use scalar::Real;

pub type LevelSystem64 = LevelSystem<f64>;
pub type ControlField64 = ControlField<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type Decoherence64 = Decoherence<f64>;
pub type Superoperator64 = Superoperator<f64>;
pub type PropagationConfig64 = PropagationConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type GaConfig64 = GaConfig<f64>;
pub type CostParams64 = CostParams<f64>;
pub type OptimizationRecord64 = OptimizationRecord<f64>;
pub type CooperationReport64 = CooperationReport<f64>;
pub type LadderSpec64 = LadderSpec<f64>;
pub type EffectiveCoupling64 = EffectiveCoupling<f64>;
pub type ScaledStrengths64 = ScaledStrengths<f64>;

pub type LevelSystem32 = LevelSystem<f32>;
pub type ControlField32 = ControlField<f32>;
pub type DensityMatrix32 = DensityMatrix<f32>;
pub type PropagationConfig32 = PropagationConfig<f32>;
