//! Performance models, schedules and configuration search for
//! disaggregated expert-parallel MoE inference.
//!
//! Attention (plus shared experts) runs on an attention group of GPUs, routed
//! experts on a disjoint expert group, linked by A2E/E2A transfers. An
//! iteration is split into `r_1` chunks of `m_a` samples per attention GPU,
//! and each chunk's expert work into `r_2` slices of `m_e` tokens per
//! expert. The crate models the resulting timeline and searches the
//! throughput-optimal `(m_a, r_1, r_2, order)`.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod error;
pub mod oracle;
pub mod perf_models;
pub mod pipeline;
pub mod scalar;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use perf_models::{
    derive_layer_models, fit_linear, FitReport, LayerCostModels, LinearCostModel, MeasurementSample, PrimitiveModels,
};
pub use pipeline::{
    get_max_r1, tokens_per_expert, validate_config, ClusterSpec, ConfigViolation, InstanceDoc, ModelSpec, Order,
    PipelineConfig,
};
pub use scalar::Scalar;
pub use schedule::{
    closed_form_asas, event_sim, non_overlapped_comm, stage_functions, throughput, verify_constraints, Schedule,
    SchedulePolicy, StageFunctions, Task, TaskId, TaskKind,
};
pub use solver::{convexity_check, pppipe_best, search, solve_r2, SolverOptions, SolverResult};

pub type LinearCostModelF64 = LinearCostModel<f64>;
pub type PrimitiveModelsF64 = PrimitiveModels<f64>;
pub type LayerCostModelsF64 = LayerCostModels<f64>;
pub type FitReportF64 = FitReport<f64>;
pub type PipelineConfigF64 = PipelineConfig<f64>;
pub type InstanceDocF64 = InstanceDoc<f64>;
pub type ScheduleF64 = Schedule<f64>;
pub type SolverResultF64 = SolverResult<f64>;

pub type LayerCostModelsF32 = LayerCostModels<f32>;
pub type ScheduleF32 = Schedule<f32>;
