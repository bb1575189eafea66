//! Discrete-event list scheduler over the iteration task graph.
//!
//! Each resource owns a queue ordered by the policy's issue priority and
//! serves it in order: the head task starts as soon as the resource is idle
//! and all its predecessors have finished. Queues are never reordered, so
//! under AASS the attention group idles while the next attention is not
//! ready instead of pulling a shared-expert task forward.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{makespan_of, Durations, Provenance, Resource, Schedule, SchedulePolicy, Task, TaskId, TaskKind};
use crate::error::{Error, Result};
use crate::perf_models::LayerCostModels;
use crate::pipeline::{ensure_feasible, ClusterSpec, ModelSpec, PipelineConfig};
use crate::scalar::{fmax, Scalar};

struct Node<T> {
    id: TaskId,
    duration: T,
    preds: Vec<usize>,
    succs: Vec<usize>,
}

struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    fn add(&mut self, kind: TaskKind, layer: usize, chunk: usize, slice: usize, duration: T) -> usize {
        self.nodes.push(Node {
            id: TaskId {
                kind,
                layer,
                chunk,
                slice,
            },
            duration,
            preds: Vec::new(),
            succs: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize) {
        self.nodes[from].succs.push(to);
        self.nodes[to].preds.push(from);
    }

    /// Tasks and precedence edges of one iteration.
    fn build(layers: usize, r_1: usize, r_2: usize, d: &Durations<T>, policy: SchedulePolicy) -> Self {
        let mut g = Graph { nodes: Vec::new() };
        let fused = policy.fused();
        let shared = d.has_shared && !fused;
        let att_dur = if fused { d.attention + d.shared } else { d.attention };
        // Per chunk: tasks of the previous layer gating the next attention.
        let mut gate: Vec<Vec<usize>> = vec![Vec::new(); r_1];
        for t in 0..layers {
            for (i, gate_i) in gate.iter_mut().enumerate() {
                let att = g.add(TaskKind::Attention, t, i, 0, att_dur);
                for &p in gate_i.iter() {
                    g.edge(p, att);
                }
                gate_i.clear();
                if shared {
                    let s = g.add(TaskKind::SharedExpert, t, i, 0, d.shared);
                    g.edge(att, s);
                    gate_i.push(s);
                }
                for j in 0..r_2 {
                    let a2e = g.add(TaskKind::A2E, t, i, j, d.comm);
                    let ex = g.add(TaskKind::Expert, t, i, j, d.expert);
                    let e2a = g.add(TaskKind::E2A, t, i, j, d.comm);
                    g.edge(att, a2e);
                    g.edge(a2e, ex);
                    g.edge(ex, e2a);
                    gate_i.push(e2a);
                }
                if gate_i.is_empty() {
                    gate_i.push(att);
                }
            }
        }
        g
    }
}

type IssueKey = (usize, u8, usize, u8, usize);

fn issue_key(id: &TaskId, policy: SchedulePolicy) -> IssueKey {
    let kind_rank = match id.kind {
        TaskKind::SharedExpert => 1,
        _ => 0,
    };
    match (id.kind.resource(), policy) {
        (Resource::Ag, SchedulePolicy::Aass) => (id.layer, kind_rank, id.chunk, 0, 0),
        (Resource::Ag, _) => (id.layer, 0, id.chunk, kind_rank, 0),
        _ => (id.layer, 0, id.chunk, 0, id.slice),
    }
}

struct Completion<T> {
    time: T,
    seq: usize,
    task: usize,
}

impl<T: Scalar> PartialEq for Completion<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Completion<T> {}

impl<T: Scalar> PartialOrd for Completion<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Completion<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .partial_cmp(&other.time)
            .unwrap_or(Ordering::Equal)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Runs the list scheduler and returns tasks in graph order.
pub fn simulate_tasks<T: Scalar>(
    layers: usize,
    r_1: usize,
    r_2: usize,
    d: &Durations<T>,
    policy: SchedulePolicy,
) -> Result<Vec<Task<T>>> {
    let g = Graph::build(layers, r_1, r_2, d, policy);
    let n = g.nodes.len();

    let mut queues: [Vec<usize>; 4] = Default::default();
    for (k, node) in g.nodes.iter().enumerate() {
        queues[node.id.kind.resource().index()].push(k);
    }
    for q in queues.iter_mut() {
        q.sort_by_key(|&k| issue_key(&g.nodes[k].id, policy));
    }

    let mut pending: Vec<usize> = g.nodes.iter().map(|x| x.preds.len()).collect();
    let mut ready_at = vec![T::zero(); n];
    let mut start = vec![T::nan(); n];
    let mut head = [0usize; 4];
    let mut busy = [false; 4];
    let mut free_at = [T::zero(); 4];
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut done = 0usize;

    let mut dispatch = |r: usize,
                        busy: &mut [bool; 4],
                        head: &mut [usize; 4],
                        pending: &[usize],
                        ready_at: &[T],
                        start: &mut [T],
                        free_at: &[T; 4],
                        heap: &mut BinaryHeap<Reverse<Completion<T>>>| {
        if busy[r] || head[r] >= queues[r].len() {
            return;
        }
        let k = queues[r][head[r]];
        if pending[k] > 0 {
            return;
        }
        let s = fmax(ready_at[k], free_at[r]);
        start[k] = s;
        busy[r] = true;
        head[r] += 1;
        heap.push(Reverse(Completion {
            time: s + g.nodes[k].duration,
            seq,
            task: k,
        }));
        seq += 1;
    };

    for r in 0..4 {
        dispatch(
            r, &mut busy, &mut head, &pending, &ready_at, &mut start, &free_at, &mut heap,
        );
    }
    while let Some(Reverse(ev)) = heap.pop() {
        done += 1;
        let node = &g.nodes[ev.task];
        let r = node.id.kind.resource().index();
        busy[r] = false;
        free_at[r] = ev.time;
        for &s in &node.succs {
            pending[s] -= 1;
            ready_at[s] = fmax(ready_at[s], ev.time);
        }
        for r in 0..4 {
            dispatch(
                r, &mut busy, &mut head, &pending, &ready_at, &mut start, &free_at, &mut heap,
            );
        }
    }
    if done != n {
        return Err(Error::Stalled { unscheduled: n - done });
    }
    Ok(g.nodes
        .iter()
        .zip(start)
        .map(|(node, s)| Task {
            id: node.id,
            start: s,
            duration: node.duration,
        })
        .collect())
}

/// Simulates `cfg` under its own order.
pub fn event_sim<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    cfg: &PipelineConfig<T>,
    lm: &LayerCostModels<T>,
) -> Result<Schedule<T>> {
    event_sim_with(model, cluster, cfg, lm, cfg.order.into())
}

/// Simulates `cfg` under an explicit policy, e.g. the fused baseline.
pub fn event_sim_with<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    cfg: &PipelineConfig<T>,
    lm: &LayerCostModels<T>,
    policy: SchedulePolicy,
) -> Result<Schedule<T>> {
    ensure_feasible(cfg, model, cluster)?;
    let d = Durations::new(lm, cfg.m_a, cfg.m_e);
    let tasks = simulate_tasks(model.layers, cfg.r_1, cfg.r_2, &d, policy)?;
    Ok(Schedule {
        makespan: makespan_of(&tasks),
        tasks,
        config: *cfg,
        policy,
        provenance: Provenance::EventSim,
        model: *model,
        cluster: *cluster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(a: f64, s: f64, e: f64, c: f64) -> Durations<f64> {
        Durations {
            attention: a,
            shared: s,
            expert: e,
            comm: c,
            has_shared: s > 0.0,
        }
    }

    fn ms(tasks: &[Task<f64>]) -> f64 {
        makespan_of(tasks)
    }

    #[test]
    fn sequential_chain() {
        let tasks = simulate_tasks(1, 1, 1, &d(2.0, 1.0, 3.0, 1.0), SchedulePolicy::Asas).unwrap();
        assert_eq!(tasks.len(), 5);
        assert_eq!(ms(&tasks), 2.0 + 1.0 + 3.0 + 1.0);
    }

    #[test]
    fn shared_tasks_omitted_without_shared_expert() {
        let tasks = simulate_tasks(2, 2, 2, &d(1.0, 0.0, 1.0, 1.0), SchedulePolicy::Asas).unwrap();
        assert!(tasks.iter().all(|t| t.id.kind != TaskKind::SharedExpert));
        assert_eq!(tasks.len(), 2 * 2 * (1 + 3 * 2));
    }

    #[test]
    fn fused_baseline_delays_transfer() {
        let tasks = simulate_tasks(1, 1, 1, &d(2.0, 3.0, 1.0, 1.0), SchedulePolicy::PpPipe).unwrap();
        let a2e = tasks.iter().find(|t| t.id.kind == TaskKind::A2E).unwrap();
        assert_eq!(a2e.start, 5.0);
        assert_eq!(ms(&tasks), 8.0);
    }

    #[test]
    fn orders_coincide_with_one_chunk() {
        let dd = d(1.3, 0.4, 0.9, 0.6);
        let a = simulate_tasks(3, 1, 2, &dd, SchedulePolicy::Asas).unwrap();
        let b = simulate_tasks(3, 1, 2, &dd, SchedulePolicy::Aass).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aass_attention_group_order() {
        let tasks = simulate_tasks(1, 3, 1, &d(1.0, 1.0, 0.1, 0.1), SchedulePolicy::Aass).unwrap();
        let mut ag: Vec<_> = tasks.iter().filter(|t| t.id.kind.resource() == Resource::Ag).collect();
        ag.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        let kinds: Vec<_> = ag.iter().map(|t| t.id.kind).collect();
        use TaskKind::*;
        assert_eq!(
            kinds,
            [
                Attention,
                Attention,
                Attention,
                SharedExpert,
                SharedExpert,
                SharedExpert
            ]
        );
    }
}
