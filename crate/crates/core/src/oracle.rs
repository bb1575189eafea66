//! Brute-force ground truth for the solver and the analytic timeline.
//!
//! Every configuration is scored with the event simulator only, so nothing
//! here shares a formula with [`crate::solver`] or the closed forms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perf_models::{derive_layer_models, LayerCostModels, LinearCostModel, PrimitiveModels};
use crate::pipeline::{ClusterSpec, ModelSpec, Order, PipelineConfig};
use crate::scalar::Scalar;
use crate::schedule::{event_sim, throughput, Schedule, SchedulePolicy};
use crate::solver::{AuditRow, SolverResult};

/// Largest enumeration the oracle accepts.
pub const MAX_POINTS: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_m_a: usize,
    pub max_r_1: usize,
    pub max_r_2: usize,
    pub orders: Vec<Order>,
}

impl SearchBounds {
    pub fn new(max_m_a: usize, max_r_1: usize, max_r_2: usize, orders: &[Order]) -> Result<Self> {
        if max_m_a == 0 || max_r_1 == 0 || max_r_2 == 0 || orders.is_empty() {
            return Err(Error::InvalidArgument("search bounds must all be >= 1".into()));
        }
        Ok(Self {
            max_m_a,
            max_r_1,
            max_r_2,
            orders: orders.to_vec(),
        })
    }
}

/// One enumerated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct EnumerationRow<T> {
    pub m_a: usize,
    pub r_1: usize,
    pub r_2: usize,
    pub order: Order,
    pub m_e: T,
    pub makespan_ms: T,
    pub throughput_tps: T,
}

pub const TABLE_HEADER: &str = "m_a,r_1,r_2,order,m_e,makespan_ms,throughput_tps";

pub fn table_csv<T: Scalar>(rows: &[EnumerationRow<T>]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.m_a, r.r_1, r.r_2, r.order, r.m_e, r.makespan_ms, r.throughput_tps
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    pub result: SolverResult<T>,
    pub table: Vec<EnumerationRow<T>>,
}

/// Largest `r_2` with `m_e >= 1` (at least 1), without any cap.
fn r2_limit(model: &ModelSpec, cluster: &ClusterSpec, m_a: usize) -> usize {
    (m_a * cluster.ag * model.top_k * model.seq_len / model.num_experts).max(1)
}

fn feasible_points(model: &ModelSpec, cluster: &ClusterSpec, b: &SearchBounds) -> Vec<(usize, usize, usize, Order)> {
    let mut out = Vec::new();
    for m_a in (1..=b.max_m_a).rev() {
        let r1_hi = b.max_r_1.min(cluster.mem_capacity / m_a);
        for r_1 in (1..=r1_hi).rev() {
            let r2_hi = b.max_r_2.min(r2_limit(model, cluster, m_a));
            for &order in &b.orders {
                for r_2 in 1..=r2_hi {
                    out.push((m_a, r_1, r_2, order));
                }
            }
        }
    }
    out
}

/// Exhaustively simulates every feasible configuration within `bounds`.
///
/// Ties resolve like the solver: larger `m_a`, larger `r_1`, ASAS, smaller `r_2`.
pub fn brute_force_search<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    bounds: &SearchBounds,
) -> Result<OracleResult<T>> {
    let estimate =
        bounds.max_m_a as u128 * bounds.max_r_1 as u128 * bounds.max_r_2 as u128 * bounds.orders.len() as u128;
    if estimate > MAX_POINTS {
        return Err(Error::SearchTooLarge {
            estimate,
            limit: MAX_POINTS,
        });
    }
    let clock = std::time::Instant::now();
    let mut points = feasible_points(model, cluster, bounds);
    // Solver tie order: ASAS before AASS within a pair.
    points.sort_by_key(|&(m_a, r_1, r_2, o)| (std::cmp::Reverse(m_a), std::cmp::Reverse(r_1), o, r_2));
    if points.is_empty() {
        return Err(Error::NoFeasibleConfig(
            "no configuration satisfies the memory cap within the bounds".into(),
        ));
    }
    let mut table = Vec::with_capacity(points.len());
    let mut best: Option<usize> = None;
    for (m_a, r_1, r_2, order) in points {
        let cfg = PipelineConfig::conserving(model, cluster, r_1, m_a, r_2, order);
        let s = event_sim(model, cluster, &cfg, lm)?;
        let tps = throughput(model, cluster, &cfg, s.makespan)?;
        table.push(EnumerationRow {
            m_a,
            r_1,
            r_2,
            order,
            m_e: cfg.m_e,
            makespan_ms: s.makespan,
            throughput_tps: tps,
        });
        if best.is_none_or(|b| tps > table[b].throughput_tps) {
            best = Some(table.len() - 1);
        }
    }
    let row = table[best.expect("nonempty")];
    let audit = table
        .iter()
        .map(|r| AuditRow {
            m_a: r.m_a,
            r_1: r.r_1,
            order: r.order.into(),
            r_2: r.r_2,
            m_e: r.m_e,
            makespan_ms: r.makespan_ms,
            throughput_tps: r.throughput_tps,
        })
        .collect();
    Ok(OracleResult {
        result: SolverResult {
            best: PipelineConfig {
                r_1: row.r_1,
                m_a: row.m_a,
                r_2: row.r_2,
                m_e: row.m_e,
                order: row.order,
            },
            policy: SchedulePolicy::from(row.order),
            predicted_throughput: row.throughput_tps,
            predicted_makespan_ms: row.makespan_ms,
            candidates_evaluated: table.len(),
            solve_time: clock.elapsed().as_secs_f64() * 1000.0,
            audit,
        },
        table,
    })
}

/// Simulates one enumerated point again, e.g. to audit its constraints.
pub fn simulate_row<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModels<T>,
    row: &EnumerationRow<T>,
) -> Result<Schedule<T>> {
    let cfg = PipelineConfig::conserving(model, cluster, row.r_1, row.m_a, row.r_2, row.order);
    event_sim(model, cluster, &cfg, lm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance<T> {
    pub model: ModelSpec,
    pub cluster: ClusterSpec,
    pub layer_models: LayerCostModels<T>,
}

fn pick<R: Rng, V: Copy>(rng: &mut R, xs: &[V]) -> V {
    xs[rng.gen_range(0..xs.len())]
}

/// Deterministic instance with DeepSeek/Qwen-like shapes and desk-scale
/// depth and memory. Intercepts lie in `[0.01, 1]` ms; each slope is drawn
/// log-uniformly so that the variable part at the reference workload spans
/// `[0.01, 100]` ms, which puts the transfer/expert ratio on both sides of 1.
pub fn random_instance<T: Scalar>(seed: u64) -> RandomInstance<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_experts = pick(&mut rng, &[64usize, 128, 160]);
    let n_shared = pick(&mut rng, &[0usize, 1, 2]);
    let model = ModelSpec {
        num_experts,
        layers: rng.gen_range(1..=6),
        embed_dim: pick(&mut rng, &[2048usize, 4096, 5120]),
        expert_hidden: pick(&mut rng, &[768usize, 1408, 1536]),
        top_k: pick(&mut rng, &[2usize, 4, 6, 8]),
        n_shared,
        seq_len: pick(&mut rng, &[256usize, 512, 1024, 2048, 4096]),
        heads: pick(&mut rng, &[16usize, 32, 64, 128]),
        d_k: pick(&mut rng, &[64usize, 128, 192]),
        d_v: pick(&mut rng, &[64usize, 128]),
    };
    let total = pick(&mut rng, &[4usize, 8]);
    let ag = rng.gen_range(1..total);
    let cluster = ClusterSpec {
        total_gpus: total,
        ag,
        eg: total - ag,
        mem_capacity: rng.gen_range(1..=16),
    };

    // Tokens per expert for one sample per attention GPU and r_2 = 1.
    let ref_tokens = (ag * model.top_k * model.seq_len) as f64 / num_experts as f64;
    let mut draw = |per_unit: f64| {
        let alpha = rng.gen_range(0.01..=1.0);
        let variable = 10f64.powf(rng.gen_range(-2.0..=2.0));
        LinearCostModel::new(T::lit(alpha), T::lit(variable / per_unit)).expect("nonnegative draw")
    };
    let t_a = draw(1.0);
    let t_s = draw(1.0);
    let t_e = draw(ref_tokens);
    let t_a2e = draw(ref_tokens);
    RandomInstance {
        model,
        cluster,
        layer_models: LayerCostModels {
            t_a,
            t_s: if n_shared == 0 { LinearCostModel::zero() } else { t_s },
            t_e,
            t_a2e,
        },
    }
}

/// Calibrated primitives of an 8-GPU node: one GEMM and one attention
/// model, and transfer models for the `(ag, eg)` splits 1/7, 2/6 and 4/4.
pub fn reference_primitives<T: Scalar>() -> PrimitiveModels<T> {
    let m = |a: f64, b: f64| LinearCostModel::new(T::lit(a), T::lit(b)).expect("nonnegative constants");
    PrimitiveModels::new(m(0.17, 8.59e-11), m(0.15, 1.54e-11))
        .with_comm(1, 7, m(0.10, 9.61e-7))
        .with_comm(2, 6, m(0.01, 1.28e-6))
        .with_comm(4, 4, m(0.37, 2.55e-6))
}

/// DeepSeek-V2-like architecture (two shared experts, MLA-sized heads).
pub fn deepseek_like(layers: usize, seq_len: usize) -> ModelSpec {
    ModelSpec {
        num_experts: 160,
        layers,
        embed_dim: 5120,
        expert_hidden: 1536,
        top_k: 6,
        n_shared: 2,
        seq_len,
        heads: 128,
        d_k: 192,
        d_v: 128,
    }
}

/// Qwen-MoE-like architecture without shared experts.
pub fn qwen_like(layers: usize, seq_len: usize) -> ModelSpec {
    ModelSpec {
        num_experts: 128,
        layers,
        embed_dim: 4096,
        expert_hidden: 1536,
        top_k: 8,
        n_shared: 0,
        seq_len,
        heads: 64,
        d_k: 128,
        d_v: 128,
    }
}

/// Deterministic instance whose layer models come from
/// [`reference_primitives`] rather than random coefficients.
pub fn calibrated_instance<T: Scalar>(seed: u64) -> RandomInstance<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = rng.gen_range(1..=8);
    let seq_len = pick(&mut rng, &[256usize, 512, 1024, 2048, 4096, 8192]);
    let model = if rng.gen_bool(0.5) {
        deepseek_like(layers, seq_len)
    } else {
        qwen_like(layers, seq_len)
    };
    let ag = pick(&mut rng, &[1usize, 2, 4]);
    let cluster = ClusterSpec {
        total_gpus: 8,
        ag,
        eg: 8 - ag,
        mem_capacity: rng.gen_range(1..=32),
    };
    let layer_models =
        derive_layer_models(&model, &cluster, &reference_primitives()).expect("every split is calibrated");
    RandomInstance {
        model,
        cluster,
        layer_models,
    }
}
