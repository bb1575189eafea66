use serde::Serialize;

use super::{Resource, Schedule};
use crate::error::{Error, Result};
use crate::pipeline::{ClusterSpec, ModelSpec, PipelineConfig};
use crate::scalar::Scalar;

/// Tokens per second: `r_1 * m_a * ag` samples of `S` tokens per makespan.
pub fn throughput<T: Scalar>(
    model: &ModelSpec,
    cluster: &ClusterSpec,
    cfg: &PipelineConfig<T>,
    makespan_ms: T,
) -> Result<T> {
    if !makespan_ms.is_finite() || makespan_ms <= T::zero() {
        return Err(Error::InvalidArgument(format!(
            "makespan must be finite and > 0, got {makespan_ms}"
        )));
    }
    Ok(tokens_per_iteration::<T>(model, cluster, cfg.r_1, cfg.m_a) * T::lit(1000.0) / makespan_ms)
}

pub fn tokens_per_iteration<T: Scalar>(model: &ModelSpec, cluster: &ClusterSpec, r_1: usize, m_a: usize) -> T {
    T::of(r_1) * T::of(m_a) * T::of(cluster.ag) * T::of(model.seq_len)
}

fn merged<T: Scalar>(s: &Schedule<T>, rs: &[Resource]) -> Vec<(T, T)> {
    let mut iv: Vec<(T, T)> = s
        .tasks
        .iter()
        .filter(|t| rs.contains(&t.id.kind.resource()) && t.duration > T::zero())
        .map(|t| (t.start, t.end()))
        .collect();
    iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<(T, T)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn measure<T: Scalar>(iv: &[(T, T)]) -> T {
    iv.iter().map(|&(a, b)| b - a).sum()
}

fn overlap<T: Scalar>(x: &[(T, T)], y: &[(T, T)]) -> T {
    let (mut i, mut j, mut acc) = (0, 0, T::zero());
    while i < x.len() && j < y.len() {
        let lo = x[i].0.max(y[j].0);
        let hi = x[i].1.min(y[j].1);
        if hi > lo {
            acc = acc + (hi - lo);
        }
        if x[i].1 < y[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc
}

/// Time during which a transfer is in flight while both compute groups idle.
pub fn non_overlapped_comm<T: Scalar>(s: &Schedule<T>) -> T {
    let comm = merged(s, &[Resource::A2e, Resource::E2a]);
    let compute = merged(s, &[Resource::Ag, Resource::Eg]);
    (measure(&comm) - overlap(&comm, &compute)).max(T::zero())
}

/// Busy fraction of each resource over the makespan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Utilization {
    pub ag: f64,
    pub a2e: f64,
    pub eg: f64,
    pub e2a: f64,
}

pub fn utilization<T: Scalar>(s: &Schedule<T>) -> Utilization {
    let f = |r| {
        if s.makespan > T::zero() {
            (s.busy_time(r) / s.makespan).as_f64().min(1.0)
        } else {
            0.0
        }
    };
    Utilization {
        ag: f(Resource::Ag),
        a2e: f(Resource::A2e),
        eg: f(Resource::Eg),
        e2a: f(Resource::E2a),
    }
}
