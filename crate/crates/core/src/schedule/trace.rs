//! Chrome trace-event and CSV renderings of a schedule.

use serde::{Deserialize, Serialize};

use super::{Schedule, Task, TaskId, TaskKind};
use crate::error::Result;
use crate::scalar::Scalar;

/// One complete (`ph: "X"`) trace event. `ts`/`dur` are microseconds;
/// `args` keeps the exact millisecond values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub name: String,
    pub ph: String,
    pub pid: String,
    pub tid: usize,
    pub ts: f64,
    pub dur: f64,
    pub args: TraceArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceArgs {
    pub kind: String,
    pub layer: usize,
    pub chunk: usize,
    pub slice: usize,
    pub start_ms: f64,
    pub dur_ms: f64,
}

impl TraceEvent {
    pub fn task(&self) -> Result<Task<f64>> {
        Ok(Task {
            id: TaskId {
                kind: self.args.kind.parse::<TaskKind>()?,
                layer: self.args.layer,
                chunk: self.args.chunk,
                slice: self.args.slice,
            },
            start: self.args.start_ms,
            duration: self.args.dur_ms,
        })
    }
}

fn by_start<T: Scalar>(s: &Schedule<T>) -> Vec<&Task<T>> {
    let mut tasks: Vec<&Task<T>> = s.tasks.iter().collect();
    tasks.sort_by(|a, b| {
        a.start
            .partial_cmp(&b.start)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.id.kind.resource().cmp(&b.id.kind.resource()))
            .then(a.id.cmp(&b.id))
    });
    tasks
}

/// Trace events ordered by start time.
pub fn export_trace<T: Scalar>(s: &Schedule<T>) -> Vec<TraceEvent> {
    by_start(s)
        .into_iter()
        .map(|t| {
            let (start, dur) = (t.start.as_f64(), t.duration.as_f64());
            TraceEvent {
                name: format!("{}[{},{},{}]", t.id.kind.name(), t.id.layer, t.id.chunk, t.id.slice),
                ph: "X".into(),
                pid: t.id.kind.resource().label().into(),
                tid: t.id.chunk,
                ts: start * 1000.0,
                dur: dur * 1000.0,
                args: TraceArgs {
                    kind: t.id.kind.name().into(),
                    layer: t.id.layer,
                    chunk: t.id.chunk,
                    slice: t.id.slice,
                    start_ms: start,
                    dur_ms: dur,
                },
            }
        })
        .collect()
}

pub fn parse_trace(json: &str) -> Result<Vec<TraceEvent>> {
    Ok(serde_json::from_str(json)?)
}

pub const CSV_HEADER: &str = "kind,layer,chunk,slice,start_ms,dur_ms";

pub fn to_csv<T: Scalar>(s: &Schedule<T>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in by_start(s) {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.id.kind.name(),
            t.id.layer,
            t.id.chunk,
            t.id.slice,
            t.start.as_f64(),
            t.duration.as_f64()
        ));
    }
    out
}
