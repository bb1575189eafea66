//! Analytic timeline evaluation.
//!
//! Every resource serves its tasks in issue order, so each chunk's expert
//! side (A2E, expert FFN, E2A over `r_2` slices) has closed-form start times
//! given the chunk's release time and the instants at which the three
//! downstream resources become free:
//!
//! ```text
//! b        = max(release, a2e_free)
//! a2e[j]   = b + j*c
//! exp[j]   = max(b + c + j*Y,        eg_free + j*e)
//! e2a[j]   = max(b + c + e + j*Y,    eg_free + e + j*Y,    e2a_free + j*c)
//! ```
//!
//! with `c` the transfer time, `e` the expert time and `Y = max(c, e)`.
//! Layer 0 of an ASAS schedule reduces to `a2e = t_a + i*max(X, r_2*c) + j*c`,
//! `exp = t_a + c + i*F + j*Y` and `e2a = exp + e`. Later layers chain
//! through the attention-ready times `max(e2a_end, shared_end)` of the
//! previous layer.

use super::{makespan_of, Durations, Provenance, Schedule, SchedulePolicy, StageFunctions, Task, TaskId, TaskKind};
use crate::error::{Error, Result};
use crate::perf_models::LayerCostModels;
use crate::pipeline::{ensure_feasible, ModelSpec, Order, PipelineConfig};
use crate::scalar::{fmax, Scalar};
use crate::ClusterSpec;

trait Sink<T> {
    const ACTIVE: bool;
    fn push(&mut self, kind: TaskKind, layer: usize, chunk: usize, slice: usize, start: T, dur: T);
}

struct Discard;

impl<T> Sink<T> for Discard {
    const ACTIVE: bool = false;
    #[inline]
    fn push(&mut self, _: TaskKind, _: usize, _: usize, _: usize, _: T, _: T) {}
}

impl<T: Scalar> Sink<T> for Vec<Task<T>> {
    const ACTIVE: bool = true;
    fn push(&mut self, kind: TaskKind, layer: usize, chunk: usize, slice: usize, start: T, dur: T) {
        Task::push_into(self, kind, layer, chunk, slice, start, dur);
    }
}

impl<T: Scalar> Task<T> {
    fn push_into(
        v: &mut Vec<Task<T>>,
        kind: TaskKind,
        layer: usize,
        chunk: usize,
        slice: usize,
        start: T,
        duration: T,
    ) {
        v.push(Task {
            id: TaskId {
                kind,
                layer,
                chunk,
                slice,
            },
            start,
            duration,
        });
    }
}

struct ExpertSide<T> {
    a2e_free: T,
    eg_free: T,
    e2a_free: T,
}

impl<T: Scalar> ExpertSide<T> {
    /// Schedules one chunk released at `release`; returns its last E2A end.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn chunk<S: Sink<T>>(
        &mut self,
        sink: &mut S,
        d: &Durations<T>,
        y: T,
        r_2: usize,
        layer: usize,
        chunk: usize,
        release: T,
    ) -> T {
        let (c, e) = (d.comm, d.expert);
        let b = fmax(release, self.a2e_free);
        let eg0 = self.eg_free;
        let out0 = self.e2a_free;
        if S::ACTIVE {
            for j in 0..r_2 {
                let jf = T::of(j);
                sink.push(TaskKind::A2E, layer, chunk, j, b + jf * c, c);
                let ex = fmax(b + c + jf * y, eg0 + jf * e);
                sink.push(TaskKind::Expert, layer, chunk, j, ex, e);
                let z = fmax(fmax(b + c + e + jf * y, eg0 + e + jf * y), out0 + jf * c);
                sink.push(TaskKind::E2A, layer, chunk, j, z, c);
            }
        }
        let last = T::of(r_2 - 1);
        self.a2e_free = b + T::of(r_2) * c;
        self.eg_free = fmax(b + c + last * y, eg0 + last * e) + e;
        self.e2a_free = fmax(fmax(b + c + e + last * y, eg0 + e + last * y), out0 + last * c) + c;
        self.e2a_free
    }
}

fn run<T: Scalar, S: Sink<T>>(
    sink: &mut S,
    layers: usize,
    r_1: usize,
    r_2: usize,
    d: &Durations<T>,
    policy: SchedulePolicy,
) -> T {
    let y = fmax(d.expert, d.comm);
    let (a, s) = (d.attention, d.shared);
    let fused = policy.fused();
    let shared_task = d.has_shared && !fused;
    let mut side = ExpertSide {
        a2e_free: T::zero(),
        eg_free: T::zero(),
        e2a_free: T::zero(),
    };
    let mut ag_free = T::zero();
    // Instant each chunk's next-layer attention becomes ready.
    let mut ready = vec![T::zero(); r_1];
    let mut e2a_end = vec![T::zero(); r_1];
    let mut prev = Snapshot::default();

    for t in 0..layers {
        match policy {
            SchedulePolicy::Asas | SchedulePolicy::PpPipe => {
                for (i, slot) in ready.iter_mut().enumerate() {
                    let start = fmax(ag_free, *slot);
                    let (release, ag_end) = if fused {
                        sink.push(TaskKind::Attention, t, i, 0, start, a + s);
                        let end = start + (a + s);
                        (end, end)
                    } else {
                        sink.push(TaskKind::Attention, t, i, 0, start, a);
                        let a_end = start + a;
                        if shared_task {
                            sink.push(TaskKind::SharedExpert, t, i, 0, a_end, s);
                            (a_end, a_end + s)
                        } else {
                            (a_end, a_end)
                        }
                    };
                    ag_free = ag_end;
                    let back = side.chunk(sink, d, y, r_2, t, i, release);
                    *slot = fmax(back, ag_end);
                }
            }
            SchedulePolicy::Aass => {
                for i in 0..r_1 {
                    let start = fmax(ag_free, ready[i]);
                    sink.push(TaskKind::Attention, t, i, 0, start, a);
                    ag_free = start + a;
                    e2a_end[i] = side.chunk(sink, d, y, r_2, t, i, ag_free);
                }
                for (i, slot) in ready.iter_mut().enumerate() {
                    if shared_task {
                        sink.push(TaskKind::SharedExpert, t, i, 0, ag_free, s);
                        ag_free = ag_free + s;
                    }
                    *slot = fmax(e2a_end[i], ag_free);
                }
            }
        }
        // Once a whole layer shifts the state uniformly, every later layer
        // repeats that shift, so the remaining layers can be skipped.
        if !S::ACTIVE && t + 1 < layers {
            if let Some(delta) = prev.uniform_shift(ag_free, &side, &ready) {
                let rest = T::of(layers - 1 - t) * delta;
                return fmax(ag_free, side.e2a_free) + rest;
            }
            prev.record(ag_free, &side, &ready);
        }
    }
    fmax(ag_free, side.e2a_free)
}

/// Layer-boundary state of the recurrence.
struct Snapshot<T> {
    frees: Option<[T; 4]>,
    ready: Vec<T>,
}

impl<T> Default for Snapshot<T> {
    fn default() -> Self {
        Self {
            frees: None,
            ready: Vec::new(),
        }
    }
}

impl<T: Scalar> Snapshot<T> {
    fn frees(ag_free: T, side: &ExpertSide<T>) -> [T; 4] {
        [ag_free, side.a2e_free, side.eg_free, side.e2a_free]
    }

    fn record(&mut self, ag_free: T, side: &ExpertSide<T>, ready: &[T]) {
        self.frees = Some(Self::frees(ag_free, side));
        self.ready.clear();
        self.ready.extend_from_slice(ready);
    }

    /// The common shift from the recorded state, if every component moved
    /// by the same amount up to rounding.
    fn uniform_shift(&self, ag_free: T, side: &ExpertSide<T>, ready: &[T]) -> Option<T> {
        let before = self.frees?;
        let now = Self::frees(ag_free, side);
        let delta = now[0] - before[0];
        let same = |x: T, p: T| ((x - p) - delta).abs() <= T::slack(x);
        let ok = now.iter().zip(&before).all(|(&x, &p)| same(x, p))
            && ready.iter().zip(&self.ready).all(|(&x, &p)| same(x, p));
        ok.then_some(delta)
    }
}

/// Makespan of the in-order timeline without materializing tasks.
///
/// Runs in `O(layers * r_1)` for every policy, and stops early once the
/// per-layer state settles into a constant shift.
pub fn analytic_makespan<T: Scalar>(
    layers: usize,
    r_1: usize,
    r_2: usize,
    d: &Durations<T>,
    policy: SchedulePolicy,
) -> T {
    if layers == 0 || r_1 == 0 || r_2 == 0 {
        return T::zero();
    }
    run(&mut Discard, layers, r_1, r_2, d, policy)
}

/// ASAS schedule from the per-chunk closed forms.
pub fn closed_form_asas<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    cfg: &PipelineConfig<T>,
    lm: &LayerCostModels<T>,
) -> Result<Schedule<T>> {
    if cfg.order != Order::Asas {
        return Err(Error::InvalidArgument(format!(
            "closed form exists only for ASAS, got {}",
            cfg.order
        )));
    }
    ensure_feasible(cfg, model, cluster)?;
    let d = Durations::new(lm, cfg.m_a, cfg.m_e);
    let mut tasks = Vec::with_capacity(model.layers * cfg.r_1 * (2 + 3 * cfg.r_2));
    run(&mut tasks, model.layers, cfg.r_1, cfg.r_2, &d, SchedulePolicy::Asas);
    Ok(Schedule {
        makespan: makespan_of(&tasks),
        tasks,
        config: *cfg,
        policy: SchedulePolicy::Asas,
        provenance: Provenance::ClosedForm,
        model: *model,
        cluster: *cluster,
    })
}

/// Periodic ASAS timestamps: the layer-0 expressions shifted by a constant
/// `max(G, r_1 * F)` per layer.
///
/// This is the simplified timeline whose makespan the search objective
/// approximates. It coincides with the exact timeline when attention and
/// shared expert bound the chunk period (`X >= r_2 * Y`) and the layer
/// round trip does not exceed the attention-group time (`G <= r_1 * X`),
/// but it is not a valid schedule in general.
pub fn periodic_asas_starts<T: Scalar>(layers: usize, r_1: usize, r_2: usize, d: &Durations<T>) -> Vec<Task<T>> {
    let sf = StageFunctions::from_durations(d, r_2);
    let offset = fmax(sf.g, T::of(r_1) * sf.f);
    let (a, c, e) = (d.attention, d.comm, d.expert);
    let mut out = Vec::new();
    for t in 0..layers {
        let base = T::of(t) * offset;
        for i in 0..r_1 {
            let fi = T::of(i);
            Task::push_into(&mut out, TaskKind::Attention, t, i, 0, base + fi * sf.x, a);
            if d.has_shared {
                Task::push_into(
                    &mut out,
                    TaskKind::SharedExpert,
                    t,
                    i,
                    0,
                    base + fi * sf.x + a,
                    d.shared,
                );
            }
            for j in 0..r_2 {
                let fj = T::of(j);
                Task::push_into(&mut out, TaskKind::A2E, t, i, j, base + a + fi * sf.f + fj * c, c);
                Task::push_into(
                    &mut out,
                    TaskKind::Expert,
                    t,
                    i,
                    j,
                    base + a + c + fi * sf.f + fj * sf.y,
                    e,
                );
                Task::push_into(
                    &mut out,
                    TaskKind::E2A,
                    t,
                    i,
                    j,
                    base + a + c + e + fi * sf.f + fj * sf.y,
                    c,
                );
            }
        }
    }
    out
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

    #[test]
    fn single_chunk_single_layer() {
        let dd = d(2.0, 5.0, 3.0, 1.0);
        let ms = analytic_makespan(1, 1, 1, &dd, SchedulePolicy::Asas);
        assert_eq!(ms, f64::max(2.0 + 5.0, 2.0 + 1.0 + 3.0 + 1.0));
        let dd = d(2.0, 1.0, 3.0, 1.0);
        assert_eq!(analytic_makespan(1, 1, 1, &dd, SchedulePolicy::Asas), 7.0);
    }

    #[test]
    fn layer_offset_example() {
        // t_a = t_s = t_e = t_a2e = 1, r_1 = 2, r_2 = 1: offset max(G, 2F) = 4.
        let dd = d(1.0, 1.0, 1.0, 1.0);
        let mut tasks = Vec::new();
        run(&mut tasks, 2, 2, 1, &dd, SchedulePolicy::Asas);
        let start = |k, t, i| {
            tasks
                .iter()
                .find(|x: &&Task<f64>| x.id.kind == k && x.id.layer == t && x.id.chunk == i)
                .unwrap()
                .start
        };
        for i in 0..2 {
            assert_eq!(start(TaskKind::Attention, 1, i) - start(TaskKind::Attention, 0, i), 4.0);
            assert_eq!(start(TaskKind::E2A, 1, i) - start(TaskKind::E2A, 0, i), 4.0);
        }
        let periodic = periodic_asas_starts(2, 2, 1, &dd);
        for p in &periodic {
            let exact = tasks.iter().find(|x| x.id == p.id).unwrap();
            assert_eq!(exact.start, p.start, "{}", p.id);
        }
    }

    #[test]
    fn layer_zero_matches_stage_formulas() {
        let dd = d(1.5, 0.5, 0.7, 0.4);
        let (r_1, r_2) = (3, 3);
        let sf = StageFunctions::from_durations(&dd, r_2);
        let mut tasks = Vec::new();
        run(&mut tasks, 1, r_1, r_2, &dd, SchedulePolicy::Asas);
        for t in &tasks {
            let (i, j) = (t.id.chunk as f64, t.id.slice as f64);
            let want = match t.id.kind {
                TaskKind::Attention => i * sf.x,
                TaskKind::SharedExpert => i * sf.x + dd.attention,
                TaskKind::A2E => dd.attention + i * sf.x.max(r_2 as f64 * dd.comm) + j * dd.comm,
                TaskKind::Expert => dd.attention + dd.comm + i * sf.f + j * sf.y,
                TaskKind::E2A => dd.attention + dd.comm + dd.expert + i * sf.f + j * sf.y,
            };
            assert!((t.start - want).abs() < 1e-12, "{}: {} vs {}", t.id, t.start, want);
        }
    }

    #[test]
    fn aass_equals_asas_with_one_chunk() {
        let dd = d(1.0, 2.0, 0.5, 0.8);
        for layers in 1..4 {
            assert_eq!(
                analytic_makespan(layers, 1, 3, &dd, SchedulePolicy::Asas),
                analytic_makespan(layers, 1, 3, &dd, SchedulePolicy::Aass)
            );
        }
    }
}
