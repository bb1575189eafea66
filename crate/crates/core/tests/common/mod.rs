#![allow(dead_code)]

use depsched::oracle::random_instance;
use depsched::{ClusterSpec, LayerCostModels, LinearCostModel, ModelSpec, Order, PipelineConfig};

pub fn lin(alpha: f64, beta: f64) -> LinearCostModel<f64> {
    LinearCostModel::new(alpha, beta).unwrap()
}

/// Workload-independent durations.
pub fn fixed_costs(a: f64, s: f64, e: f64, c: f64) -> LayerCostModels<f64> {
    LayerCostModels {
        t_a: lin(a, 0.0),
        t_s: if s == 0.0 { LinearCostModel::zero() } else { lin(s, 0.0) },
        t_e: lin(e, 0.0),
        t_a2e: lin(c, 0.0),
    }
}

pub fn toy_model(layers: usize) -> ModelSpec {
    ModelSpec {
        num_experts: 8,
        layers,
        embed_dim: 16,
        expert_hidden: 32,
        top_k: 2,
        n_shared: 1,
        seq_len: 64,
        heads: 4,
        d_k: 8,
        d_v: 8,
    }
}

pub fn toy_cluster(mem_capacity: usize) -> ClusterSpec {
    ClusterSpec::new(2, 2, mem_capacity).unwrap()
}

/// A random instance with a feasible `(m_a, r_1, r_2)` drawn from `seed`
/// within `r_1 <= 4`, `r_2 <= 4`, `T <= 6`.
pub fn random_case(seed: u64, order: Order) -> (depsched::oracle::RandomInstance<f64>, PipelineConfig<f64>) {
    let mut inst = random_instance::<f64>(seed);
    let r_1 = 1 + (seed as usize % 4);
    let r_2 = 1 + ((seed as usize / 4) % 4);
    let m_a = 1 + ((seed as usize / 16) % 3);
    inst.cluster.mem_capacity = inst.cluster.mem_capacity.max(r_1 * m_a);
    let cfg = PipelineConfig::conserving(&inst.model, &inst.cluster, r_1, m_a, r_2, order);
    (inst, cfg)
}
