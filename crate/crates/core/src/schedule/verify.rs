use std::collections::HashMap;
use std::fmt;

use super::{Resource, Schedule, Task, TaskId, TaskKind};
use crate::perf_models::LayerCostModels;
use crate::pipeline::conservation_violation;
use crate::scalar::Scalar;

/// Constraint families of an iteration schedule, numbered as the rules they
/// enforce. `Duration` and `Structure` guard the schedule's own bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Nothing else runs on the attention group during an attention task.
    AttentionExclusive = 1,
    /// Nothing else runs on the attention group during a shared-expert task.
    SharedExclusive = 2,
    A2eExclusive = 3,
    E2aExclusive = 4,
    ExpertExclusive = 5,
    /// Shared expert and A2E start after their attention ends.
    AfterAttention = 6,
    AfterA2e = 7,
    AfterExpert = 8,
    /// Next-layer attention waits for every E2A slice and the shared expert.
    NextLayerReady = 9,
    TokenConservation = 10,
    Duration = 11,
    Structure = 12,
}

impl Rule {
    pub fn number(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintViolation {
    pub rule: Rule,
    pub tasks: Vec<TaskId>,
    pub detail: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self.tasks.iter().map(|t| t.to_string()).collect();
        write!(
            f,
            "rule {} ({:?}) [{}]: {}",
            self.rule.number(),
            self.rule,
            ids.join(", "),
            self.detail
        )
    }
}

fn exclusive_rule(kind: TaskKind) -> Rule {
    match kind {
        TaskKind::Attention => Rule::AttentionExclusive,
        TaskKind::SharedExpert => Rule::SharedExclusive,
        TaskKind::A2E => Rule::A2eExclusive,
        TaskKind::E2A => Rule::E2aExclusive,
        TaskKind::Expert => Rule::ExpertExclusive,
    }
}

/// Checks resource exclusivity, precedence, durations and token
/// conservation. An empty result means the schedule is valid.
pub fn verify_constraints<T: Scalar>(s: &Schedule<T>, lm: &LayerCostModels<T>) -> Vec<ConstraintViolation> {
    let mut out = Vec::new();
    let tol = |x: T| T::slack(x);

    // Resource exclusivity.
    for r in Resource::ALL {
        let mut on_r: Vec<&Task<T>> = s.tasks.iter().filter(|t| t.id.kind.resource() == r).collect();
        on_r.sort_by(|a, b| {
            a.start
                .partial_cmp(&b.start)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.id.cmp(&b.id))
        });
        let mut holder: Option<&Task<T>> = None;
        for t in on_r {
            if let Some(h) = holder {
                if t.start < h.end() - tol(h.end()) && t.duration > T::zero() && h.duration > T::zero() {
                    out.push(ConstraintViolation {
                        rule: exclusive_rule(h.id.kind),
                        tasks: vec![h.id, t.id],
                        detail: format!("{} starts at {} before {} ends at {}", t.id, t.start, h.id, h.end()),
                    });
                }
                if t.end() > h.end() {
                    holder = Some(t);
                }
            } else {
                holder = Some(t);
            }
        }
    }

    let by_id: HashMap<TaskId, &Task<T>> = s.tasks.iter().map(|t| (t.id, t)).collect();
    let d = s.durations(lm);
    let fused = s.policy.fused();
    let shared = d.has_shared && !fused;
    let cfg = &s.config;
    let id = |kind, layer, chunk, slice| TaskId {
        kind,
        layer,
        chunk,
        slice,
    };
    let need = |tid: TaskId, out: &mut Vec<ConstraintViolation>| -> Option<&Task<T>> {
        let found = by_id.get(&tid).copied();
        if found.is_none() {
            out.push(ConstraintViolation {
                rule: Rule::Structure,
                tasks: vec![tid],
                detail: "task missing from schedule".into(),
            });
        }
        found
    };
    let after = |rule: Rule, before: &Task<T>, later: &Task<T>, out: &mut Vec<ConstraintViolation>| {
        if later.start < before.end() - tol(before.end()) {
            out.push(ConstraintViolation {
                rule,
                tasks: vec![before.id, later.id],
                detail: format!(
                    "{} starts at {} before {} completes at {}",
                    later.id,
                    later.start,
                    before.id,
                    before.end()
                ),
            });
        }
    };

    let expected_count = s.model.layers * cfg.r_1 * (1 + usize::from(shared) + 3 * cfg.r_2);
    if s.tasks.len() != expected_count || by_id.len() != s.tasks.len() {
        out.push(ConstraintViolation {
            rule: Rule::Structure,
            tasks: Vec::new(),
            detail: format!(
                "expected {expected_count} distinct tasks, found {} ({} distinct)",
                s.tasks.len(),
                by_id.len()
            ),
        });
    }

    for t in &s.tasks {
        let want = match t.id.kind {
            TaskKind::Attention if fused => d.attention + d.shared,
            TaskKind::Attention => d.attention,
            TaskKind::SharedExpert => d.shared,
            TaskKind::A2E | TaskKind::E2A => d.comm,
            TaskKind::Expert => d.expert,
        };
        if (t.duration - want).abs() > tol(want) {
            out.push(ConstraintViolation {
                rule: Rule::Duration,
                tasks: vec![t.id],
                detail: format!("duration {} differs from modeled {}", t.duration, want),
            });
        }
        if t.start < T::zero() || !t.start.is_finite() {
            out.push(ConstraintViolation {
                rule: Rule::Structure,
                tasks: vec![t.id],
                detail: format!("invalid start {}", t.start),
            });
        }
    }

    for layer in 0..s.model.layers {
        for i in 0..cfg.r_1 {
            let Some(att) = need(id(TaskKind::Attention, layer, i, 0), &mut out) else {
                continue;
            };
            let sh = if shared {
                let sh = need(id(TaskKind::SharedExpert, layer, i, 0), &mut out);
                if let Some(sh) = sh {
                    after(Rule::AfterAttention, att, sh, &mut out);
                }
                sh
            } else {
                None
            };
            let next = if layer + 1 < s.model.layers {
                by_id.get(&id(TaskKind::Attention, layer + 1, i, 0)).copied()
            } else {
                None
            };
            if let (Some(sh), Some(nx)) = (sh, next) {
                after(Rule::NextLayerReady, sh, nx, &mut out);
            }
            for j in 0..cfg.r_2 {
                let a2e = need(id(TaskKind::A2E, layer, i, j), &mut out);
                let ex = need(id(TaskKind::Expert, layer, i, j), &mut out);
                let e2a = need(id(TaskKind::E2A, layer, i, j), &mut out);
                if let Some(a2e) = a2e {
                    after(Rule::AfterAttention, att, a2e, &mut out);
                    if let Some(ex) = ex {
                        after(Rule::AfterA2e, a2e, ex, &mut out);
                    }
                }
                if let (Some(ex), Some(e2a)) = (ex, e2a) {
                    after(Rule::AfterExpert, ex, e2a, &mut out);
                }
                if let (Some(e2a), Some(nx)) = (e2a, next) {
                    after(Rule::NextLayerReady, e2a, nx, &mut out);
                }
            }
        }
    }

    if let Some(v) = conservation_violation(cfg, &s.model, &s.cluster) {
        out.push(ConstraintViolation {
            rule: Rule::TokenConservation,
            tasks: Vec::new(),
            detail: v.to_string(),
        });
    }
    out
}
