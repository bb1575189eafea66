//! Timestamped schedules of one inference iteration.
//!
//! Two generators produce [`Schedule`]s: [`closed_form_asas`] evaluates the
//! ASAS timeline analytically chunk by chunk, and [`event_sim`] runs a
//! discrete-event list scheduler over the task graph for any order.

mod analytic;
mod event_sim;
mod metrics;
mod stage;
mod trace;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::perf_models::LayerCostModels;
use crate::pipeline::{ClusterSpec, ModelSpec, Order, PipelineConfig};
use crate::scalar::Scalar;

pub use analytic::{analytic_makespan, closed_form_asas, periodic_asas_starts};
pub use event_sim::{event_sim, event_sim_with, simulate_tasks};
pub use metrics::{non_overlapped_comm, throughput, tokens_per_iteration, utilization, Utilization};
pub use stage::{stage_functions, Durations, StageFunctions};
pub use trace::{export_trace, parse_trace, to_csv, TraceEvent, CSV_HEADER};
pub use verify::{verify_constraints, ConstraintViolation, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    Attention,
    SharedExpert,
    A2E,
    Expert,
    E2A,
}

impl TaskKind {
    pub fn resource(self) -> Resource {
        match self {
            TaskKind::Attention | TaskKind::SharedExpert => Resource::Ag,
            TaskKind::A2E => Resource::A2e,
            TaskKind::Expert => Resource::Eg,
            TaskKind::E2A => Resource::E2a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Attention => "Attention",
            TaskKind::SharedExpert => "SharedExpert",
            TaskKind::A2E => "A2E",
            TaskKind::Expert => "Expert",
            TaskKind::E2A => "E2A",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        Ok(match s {
            "Attention" => TaskKind::Attention,
            "SharedExpert" => TaskKind::SharedExpert,
            "A2E" => TaskKind::A2E,
            "Expert" => TaskKind::Expert,
            "E2A" => TaskKind::E2A,
            _ => return Err(crate::Error::InvalidArgument(format!("unknown task kind `{s}`"))),
        })
    }
}

/// The four mutually exclusive resources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resource {
    Ag,
    A2e,
    Eg,
    E2a,
}

impl Resource {
    pub const ALL: [Resource; 4] = [Resource::Ag, Resource::A2e, Resource::Eg, Resource::E2a];

    pub fn label(self) -> &'static str {
        match self {
            Resource::Ag => "AG",
            Resource::A2e => "A2E",
            Resource::Eg => "EG",
            Resource::E2a => "E2A",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

/// `(kind, layer, chunk, slice)`; slice is 0 for attention-group tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId {
    pub kind: TaskKind,
    pub layer: usize,
    pub chunk: usize,
    pub slice: usize,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{},{}]", self.kind.name(), self.layer, self.chunk, self.slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task<T> {
    pub id: TaskId,
    pub start: T,
    pub duration: T,
}

impl<T: Scalar> Task<T> {
    pub fn end(&self) -> T {
        self.start + self.duration
    }
}

/// How attention-group work is issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchedulePolicy {
    #[serde(rename = "ASAS")]
    Asas,
    #[serde(rename = "AASS")]
    Aass,
    /// Ping-pong baseline: shared expert fused into the attention task and
    /// A2E waits for the fused task.
    #[serde(rename = "PPPipe")]
    PpPipe,
}

impl SchedulePolicy {
    pub fn fused(self) -> bool {
        matches!(self, SchedulePolicy::PpPipe)
    }

    pub fn label(self) -> &'static str {
        match self {
            SchedulePolicy::Asas => "ASAS",
            SchedulePolicy::Aass => "AASS",
            SchedulePolicy::PpPipe => "PPPipe",
        }
    }
}

impl From<Order> for SchedulePolicy {
    fn from(o: Order) -> Self {
        match o {
            Order::Asas => SchedulePolicy::Asas,
            Order::Aass => SchedulePolicy::Aass,
        }
    }
}

impl fmt::Display for SchedulePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedForm,
    EventSim,
}

/// Timestamped tasks of one iteration and the inputs that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    pub tasks: Vec<Task<T>>,
    pub makespan: T,
    pub config: PipelineConfig<T>,
    pub policy: SchedulePolicy,
    pub provenance: Provenance,
    pub model: ModelSpec,
    pub cluster: ClusterSpec,
}

impl<T: Scalar> Schedule<T> {
    pub fn find(&self, id: TaskId) -> Option<&Task<T>> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Task starts keyed by id, for cross-generator comparison.
    pub fn start_map(&self) -> std::collections::BTreeMap<TaskId, T> {
        self.tasks.iter().map(|t| (t.id, t.start)).collect()
    }

    /// Sum of task durations on `r`.
    pub fn busy_time(&self, r: Resource) -> T {
        self.tasks
            .iter()
            .filter(|t| t.id.kind.resource() == r)
            .map(|t| t.duration)
            .sum()
    }

    pub(crate) fn durations(&self, lm: &LayerCostModels<T>) -> Durations<T> {
        Durations::new(lm, self.config.m_a, self.config.m_e)
    }
}

pub(crate) fn makespan_of<T: Scalar>(tasks: &[Task<T>]) -> T {
    tasks.iter().map(|t| t.end()).fold(T::zero(), crate::scalar::fmax)
}
