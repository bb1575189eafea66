//! Configuration search over `(m_a, r_1, r_2, order)`.
//!
//! Only the memory-Pareto pairs `(m_a, floor(cap / m_a))` are visited: for a
//! fixed `r_1` throughput grows with `m_a`, and for a fixed `m_a` it does not
//! shrink as `r_1` grows, so every other pair is dominated. For each pair the
//! slice count `r_2` is searched per order, and candidates are scored with the
//! analytic in-order timeline (identical to the event simulator's).

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::perf_models::LayerCostModels;
use crate::pipeline::{get_max_r1, tokens_per_expert, ClusterSpec, ModelSpec, Order, PipelineConfig};
use crate::scalar::{fmax, Scalar};
use crate::schedule::{analytic_makespan, tokens_per_iteration, Durations, SchedulePolicy, StageFunctions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    /// Upper bound on `r_2` on top of the `m_e >= 1` bound.
    pub r2_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { r2_cap: 64 }
    }
}

/// Largest `r_2` keeping `m_e >= 1`, clamped to `[1, cap]`.
pub fn r2_max(model: &ModelSpec, cluster: &ClusterSpec, m_a: usize, cap: usize) -> usize {
    let tokens = m_a * cluster.ag * model.top_k * model.seq_len;
    (tokens / model.num_experts).min(cap).max(1)
}

/// Memory-Pareto `(m_a, r_1)` pairs in the order the search visits them.
pub fn pareto_candidates(mem_capacity: usize) -> Vec<(usize, usize)> {
    let cluster = ClusterSpec {
        total_gpus: 2,
        ag: 1,
        eg: 1,
        mem_capacity,
    };
    let mut out = Vec::new();
    let mut prev = 0;
    for m_a in (1..=mem_capacity).rev() {
        let r_1 = get_max_r1(m_a, &cluster);
        if r_1 == 0 || r_1 == prev {
            continue;
        }
        out.push((m_a, r_1));
        prev = r_1;
    }
    out
}

/// Simplified-objective denominator:
/// `(T-1)·max(G, r_1·F) + max(X, G) + (r_2-1)·Y + (r_1-1)·F`.
pub fn objective_denominator<T: Scalar>(sf: &StageFunctions<T>, layers: usize, r_1: usize, r_2: usize) -> T {
    let r1 = T::of(r_1);
    T::of(layers.saturating_sub(1)) * fmax(sf.g, r1 * sf.f)
        + fmax(sf.x, sf.g)
        + (T::of(r_2) - T::one()) * sf.y
        + (r1 - T::one()) * sf.f
}

/// Smallest change between consecutive slopes of `values[k] = f(k + 1)`
/// viewed as a function of `1 / r_2`, scaled by the slope magnitude.
/// Nonnegative (up to rounding) exactly when the samples are convex in `1/r_2`.
pub fn inverse_convexity_gap<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    if n < 3 {
        return T::zero();
    }
    // Ascending in u = 1/r_2: r_2 = n, n-1, ..., 1.
    let u = |k: usize| T::one() / T::of(n - k);
    let v = |k: usize| values[n - 1 - k];
    let slopes: Vec<T> = (0..n - 1).map(|k| (v(k + 1) - v(k)) / (u(k + 1) - u(k))).collect();
    let mut gap = T::infinity();
    for w in slopes.windows(2) {
        let scale = w[0].abs().max(w[1].abs()).max(T::one());
        gap = gap.min((w[1] - w[0]) / scale);
    }
    gap
}

/// Scores configurations with the analytic timeline.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a, T> {
    pub model: &'a ModelSpec,
    pub cluster: &'a ClusterSpec,
    pub lm: &'a LayerCostModels<T>,
}

impl<'a, T: Scalar> Evaluator<'a, T> {
    pub fn new(model: &'a ModelSpec, cluster: &'a ClusterSpec, lm: &'a LayerCostModels<T>) -> Self {
        Self { model, cluster, lm }
    }

    pub fn m_e(&self, m_a: usize, r_2: usize) -> T {
        tokens_per_expert(self.model, self.cluster, m_a, r_2)
    }

    pub fn makespan(&self, m_a: usize, r_1: usize, r_2: usize, policy: SchedulePolicy) -> T {
        let d = Durations::new(self.lm, m_a, self.m_e(m_a, r_2));
        analytic_makespan(self.model.layers, r_1, r_2, &d, policy)
    }

    pub fn throughput_for(&self, m_a: usize, r_1: usize, makespan: T) -> T {
        tokens_per_iteration::<T>(self.model, self.cluster, r_1, m_a) * T::lit(1000.0) / makespan
    }

    pub fn throughput(&self, m_a: usize, r_1: usize, r_2: usize, policy: SchedulePolicy) -> T {
        self.throughput_for(m_a, r_1, self.makespan(m_a, r_1, r_2, policy))
    }

    /// Simplified-objective denominator for ASAS at `(m_a, r_1, r_2)`.
    pub fn objective(&self, m_a: usize, r_1: usize, r_2: usize) -> T {
        let d = Durations::new(self.lm, m_a, self.m_e(m_a, r_2));
        objective_denominator(&StageFunctions::from_durations(&d, r_2), self.model.layers, r_1, r_2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R2Choice<T> {
    pub r_2: usize,
    pub m_e: T,
    pub makespan: T,
    pub throughput: T,
    /// Timeline evaluations spent.
    pub evaluations: usize,
}

struct Memo<'e, 'a, T> {
    ev: &'e Evaluator<'a, T>,
    m_a: usize,
    r_1: usize,
    policy: SchedulePolicy,
    cache: Vec<Option<T>>,
    evaluations: usize,
}

impl<T: Scalar> Memo<'_, '_, T> {
    fn get(&mut self, r_2: usize) -> T {
        if let Some(v) = self.cache[r_2] {
            return v;
        }
        let v = self.ev.makespan(self.m_a, self.r_1, r_2, self.policy);
        self.cache[r_2] = Some(v);
        self.evaluations += 1;
        v
    }
}

fn choose<T: Scalar>(
    ev: &Evaluator<'_, T>,
    m_a: usize,
    r_1: usize,
    best: (usize, T),
    evaluations: usize,
) -> R2Choice<T> {
    R2Choice {
        r_2: best.0,
        m_e: ev.m_e(m_a, best.0),
        makespan: best.1,
        throughput: ev.throughput_for(m_a, r_1, best.1),
        evaluations,
    }
}

/// Best `r_2` for `(m_a, r_1)` under `policy`.
///
/// ASAS uses integer ternary search on the makespan, which is unimodal in
/// `r_2` whenever it is convex in `1/r_2`, then checks the surviving window,
/// its neighbours and `r_2 = 1`. AASS has no such guarantee and is scanned.
/// The fused baseline is pinned to `r_2 = 1`.
pub fn solve_r2_with<T: Scalar>(
    ev: &Evaluator<'_, T>,
    m_a: usize,
    r_1: usize,
    policy: SchedulePolicy,
    opts: &SolverOptions,
) -> R2Choice<T> {
    let hi_bound = match policy {
        SchedulePolicy::PpPipe => 1,
        _ => r2_max(ev.model, ev.cluster, m_a, opts.r2_cap),
    };
    let mut memo = Memo {
        ev,
        m_a,
        r_1,
        policy,
        cache: vec![None; hi_bound + 2],
        evaluations: 0,
    };
    let mut best = (1usize, memo.get(1));
    let consider = |r: usize, memo: &mut Memo<'_, '_, T>, best: &mut (usize, T)| {
        if r == 0 || r > hi_bound {
            return;
        }
        let v = memo.get(r);
        if v < best.1 || (v == best.1 && r < best.0) {
            *best = (r, v);
        }
    };

    match policy {
        SchedulePolicy::Asas => {
            let (mut lo, mut hi) = (1usize, hi_bound);
            while hi - lo > 2 {
                let third = (hi - lo) / 3;
                let (m1, m2) = (lo + third, hi - third);
                let (f1, f2) = (memo.get(m1), memo.get(m2));
                if f1 < f2 {
                    hi = m2 - 1;
                } else if f1 > f2 {
                    lo = m1 + 1;
                } else {
                    lo = m1;
                    hi = m2;
                }
            }
            for r in lo.saturating_sub(1)..=hi + 1 {
                consider(r, &mut memo, &mut best);
            }
        }
        SchedulePolicy::Aass | SchedulePolicy::PpPipe => {
            for r in 1..=hi_bound {
                consider(r, &mut memo, &mut best);
            }
        }
    }
    let evaluations = memo.evaluations;
    choose(ev, m_a, r_1, best, evaluations)
}

pub fn solve_r2<T: Scalar>(
    m_a: usize,
    r_1: usize,
    order: Order,
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    opts: &SolverOptions,
) -> R2Choice<T> {
    solve_r2_with(&Evaluator::new(model, cluster, lm), m_a, r_1, order.into(), opts)
}

/// Discrete convexity check in `1/r_2` of the ASAS makespan for every
/// Pareto pair. When it holds the ternary search is exact.
pub fn convexity_check<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    opts: &SolverOptions,
) -> bool {
    let ev = Evaluator::new(model, cluster, lm);
    pareto_candidates(cluster.mem_capacity).into_iter().all(|(m_a, r_1)| {
        let hi = r2_max(model, cluster, m_a, opts.r2_cap);
        let v: Vec<T> = (1..=hi)
            .map(|r| ev.makespan(m_a, r_1, r, SchedulePolicy::Asas))
            .collect();
        inverse_convexity_gap(&v) >= -T::lit(1e-9)
    })
}

/// One evaluated `(m_a, r_1, order)` candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct AuditRow<T> {
    pub m_a: usize,
    pub r_1: usize,
    pub order: SchedulePolicy,
    pub r_2: usize,
    pub m_e: T,
    pub makespan_ms: T,
    pub throughput_tps: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverResult<T> {
    pub best: PipelineConfig<T>,
    /// Schedule family of `best`; `PPPipe` for the baseline search.
    pub policy: SchedulePolicy,
    #[serde(rename = "predicted_throughput_tps")]
    pub predicted_throughput: T,
    pub predicted_makespan_ms: T,
    pub candidates_evaluated: usize,
    #[serde(rename = "solve_time_ms")]
    pub solve_time: f64,
    pub audit: Vec<AuditRow<T>>,
}

impl<T: Scalar> SolverResult<T> {
    /// Distinct `(m_a, r_1)` pairs in visiting order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for row in &self.audit {
            if out.last() != Some(&(row.m_a, row.r_1)) {
                out.push((row.m_a, row.r_1));
            }
        }
        out
    }
}

fn run_search<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    opts: &SolverOptions,
    policies: &[SchedulePolicy],
) -> Result<SolverResult<T>> {
    let clock = Instant::now();
    if cluster.mem_capacity < 1 {
        return Err(Error::NoFeasibleConfig(format!(
            "mem_capacity {} admits no micro-batch",
            cluster.mem_capacity
        )));
    }
    let ev = Evaluator::new(model, cluster, lm);
    let mut audit = Vec::new();
    let mut best: Option<usize> = None;
    for (m_a, r_1) in pareto_candidates(cluster.mem_capacity) {
        for &policy in policies {
            let c = solve_r2_with(&ev, m_a, r_1, policy, opts);
            audit.push(AuditRow {
                m_a,
                r_1,
                order: policy,
                r_2: c.r_2,
                m_e: c.m_e,
                makespan_ms: c.makespan,
                throughput_tps: c.throughput,
            });
            // Strict improvement keeps the earlier row on ties: larger m_a,
            // then larger r_1, then ASAS.
            let idx = audit.len() - 1;
            if best.is_none_or(|b| c.throughput > audit[b].throughput_tps) {
                best = Some(idx);
            }
        }
    }
    let row = audit[best.expect("at least one Pareto pair")];
    let order = match row.order {
        SchedulePolicy::Aass => Order::Aass,
        _ => Order::Asas,
    };
    Ok(SolverResult {
        best: PipelineConfig {
            r_1: row.r_1,
            m_a: row.m_a,
            r_2: row.r_2,
            m_e: row.m_e,
            order,
        },
        policy: row.order,
        predicted_throughput: row.throughput_tps,
        predicted_makespan_ms: row.makespan_ms,
        candidates_evaluated: audit.len(),
        solve_time: clock.elapsed().as_secs_f64() * 1000.0,
        audit,
    })
}

/// Searches both orders over the Pareto pairs.
pub fn search<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    opts: &SolverOptions,
) -> Result<SolverResult<T>> {
    run_search(model, cluster, lm, opts, &[SchedulePolicy::Asas, SchedulePolicy::Aass])
}

/// Same search restricted to the fused ping-pong baseline with `r_2 = 1`.
pub fn pppipe_best<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    opts: &SolverOptions,
) -> Result<SolverResult<T>> {
    run_search(model, cluster, lm, opts, &[SchedulePolicy::PpPipe])
}
