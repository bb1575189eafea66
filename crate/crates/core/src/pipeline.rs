//! Cluster, architecture and pipeline-configuration schema plus the
//! feasibility rules tying them together.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// GPU partition into an attention group and an expert group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    #[serde(rename = "p")]
    pub total_gpus: usize,
    pub ag: usize,
    pub eg: usize,
    /// Largest admissible `r_1 * m_a` per attention GPU.
    pub mem_capacity: usize,
}

impl ClusterSpec {
    pub fn new(ag: usize, eg: usize, mem_capacity: usize) -> Result<Self> {
        let c = Self {
            total_gpus: ag + eg,
            ag,
            eg,
            mem_capacity,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ag == 0 || self.eg == 0 {
            return Err(Error::InvalidSpec(format!(
                "ag and eg must be >= 1 (ag={}, eg={})",
                self.ag, self.eg
            )));
        }
        if self.ag + self.eg != self.total_gpus {
            return Err(Error::InvalidSpec(format!(
                "ag + eg must equal p ({} + {} != {})",
                self.ag, self.eg, self.total_gpus
            )));
        }
        Ok(())
    }
}

/// MoE architecture shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "e")]
    pub num_experts: usize,
    #[serde(rename = "t")]
    pub layers: usize,
    #[serde(rename = "m")]
    pub embed_dim: usize,
    #[serde(rename = "h")]
    pub expert_hidden: usize,
    pub top_k: usize,
    pub n_shared: usize,
    #[serde(rename = "s")]
    pub seq_len: usize,
    #[serde(rename = "n_h")]
    pub heads: usize,
    pub d_k: usize,
    pub d_v: usize,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("e", self.num_experts),
            ("t", self.layers),
            ("m", self.embed_dim),
            ("h", self.expert_hidden),
            ("top_k", self.top_k),
            ("s", self.seq_len),
            ("n_h", self.heads),
            ("d_k", self.d_k),
            ("d_v", self.d_v),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidSpec(format!("model.{name} must be >= 1")));
            }
        }
        if self.top_k > self.num_experts {
            return Err(Error::InvalidSpec(format!(
                "top_k ({}) exceeds expert count ({})",
                self.top_k, self.num_experts
            )));
        }
        Ok(())
    }
}

/// Issue order of attention and shared-expert tasks on the attention group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Order {
    /// Attention and shared expert alternate chunk by chunk.
    #[serde(rename = "ASAS")]
    Asas,
    /// All attention chunks of a layer, then all shared-expert chunks.
    #[serde(rename = "AASS")]
    Aass,
}

impl Order {
    pub const ALL: [Order; 2] = [Order::Asas, Order::Aass];
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::Asas => "ASAS",
            Order::Aass => "AASS",
        })
    }
}

impl std::str::FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ASAS" => Ok(Order::Asas),
            "AASS" => Ok(Order::Aass),
            _ => Err(Error::InvalidArgument(format!("unknown order `{s}`"))),
        }
    }
}

/// Decision variables of one pipeline configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PipelineConfig<T> {
    pub r_1: usize,
    pub m_a: usize,
    pub r_2: usize,
    pub m_e: T,
    pub order: Order,
}

impl<T: Scalar> PipelineConfig<T> {
    /// Builds a configuration with `m_e` implied by token conservation.
    pub fn conserving(
        model: &ModelSpec,
        cluster: &ClusterSpec,
        r_1: usize,
        m_a: usize,
        r_2: usize,
        order: Order,
    ) -> Self {
        Self {
            r_1,
            m_a,
            r_2,
            m_e: tokens_per_expert(model, cluster, m_a, r_2),
            order,
        }
    }
}

/// Tokens each expert receives per fine-grained slice.
pub fn tokens_per_expert<T: Scalar>(model: &ModelSpec, cluster: &ClusterSpec, m_a: usize, r_2: usize) -> T {
    T::of(m_a) * T::of(cluster.ag) * T::of(model.top_k) * T::of(model.seq_len) / (T::of(r_2) * T::of(model.num_experts))
}

/// Largest `r_1` admitted by the memory cap; 0 means `m_a` alone is too big.
pub fn get_max_r1(m_a: usize, cluster: &ClusterSpec) -> usize {
    if m_a == 0 {
        return 0;
    }
    cluster.mem_capacity / m_a
}

/// A broken feasibility rule, with the offending values.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    ZeroDegree {
        field: &'static str,
    },
    Memory {
        r_1: usize,
        m_a: usize,
        mem_capacity: usize,
    },
    TokenConservation {
        lhs: f64,
        rhs: f64,
    },
    NonPositiveTokens {
        m_e: f64,
    },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroDegree { field } => write!(f, "{field} must be >= 1"),
            Self::Memory { r_1, m_a, mem_capacity } => write!(
                f,
                "memory rule r_1*m_a <= mem_capacity violated: {r_1}*{m_a} = {} > {mem_capacity}",
                r_1 * m_a
            ),
            Self::TokenConservation { lhs, rhs } => write!(
                f,
                "token conservation m_e*r_2*E = m_a*ag*top_k*S violated: {lhs} != {rhs}"
            ),
            Self::NonPositiveTokens { m_e } => write!(f, "m_e must be finite and > 0, got {m_e}"),
        }
    }
}

/// Every violated rule; empty means the configuration is feasible.
pub fn validate_config<T: Scalar>(
    cfg: &PipelineConfig<T>,
    model: &ModelSpec,
    cluster: &ClusterSpec,
) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    for (field, v) in [("r_1", cfg.r_1), ("m_a", cfg.m_a), ("r_2", cfg.r_2)] {
        if v == 0 {
            out.push(ConfigViolation::ZeroDegree { field });
        }
    }
    if cfg.r_1.saturating_mul(cfg.m_a) > cluster.mem_capacity {
        out.push(ConfigViolation::Memory {
            r_1: cfg.r_1,
            m_a: cfg.m_a,
            mem_capacity: cluster.mem_capacity,
        });
    }
    if !cfg.m_e.is_finite() || cfg.m_e <= T::zero() {
        out.push(ConfigViolation::NonPositiveTokens { m_e: cfg.m_e.as_f64() });
    } else if let Some(v) = conservation_violation(cfg, model, cluster) {
        out.push(v);
    }
    out
}

pub(crate) fn conservation_violation<T: Scalar>(
    cfg: &PipelineConfig<T>,
    model: &ModelSpec,
    cluster: &ClusterSpec,
) -> Option<ConfigViolation> {
    let lhs = cfg.m_e * T::of(cfg.r_2) * T::of(model.num_experts);
    let rhs = T::of(cfg.m_a) * T::of(cluster.ag) * T::of(model.top_k) * T::of(model.seq_len);
    let tol = T::lit(1e-9).max(T::lit(16.0) * T::epsilon());
    if (lhs - rhs).abs() > tol * lhs.abs().max(rhs.abs()) {
        Some(ConfigViolation::TokenConservation {
            lhs: lhs.as_f64(),
            rhs: rhs.as_f64(),
        })
    } else {
        None
    }
}

/// Errors with every violation when `cfg` is infeasible.
pub fn ensure_feasible<T: Scalar>(cfg: &PipelineConfig<T>, model: &ModelSpec, cluster: &ClusterSpec) -> Result<()> {
    let v = validate_config(cfg, model, cluster);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Infeasible(v))
    }
}

/// The single JSON document carrying cluster, model and (optionally) a
/// pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InstanceDoc<T> {
    pub cluster: ClusterSpec,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineConfig<T>>,
}

impl<T: Scalar> InstanceDoc<T> {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        self.model.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(e: usize, top_k: usize, s: usize) -> ModelSpec {
        ModelSpec {
            num_experts: e,
            layers: 2,
            embed_dim: 1024,
            expert_hidden: 512,
            top_k,
            n_shared: 1,
            seq_len: s,
            heads: 8,
            d_k: 64,
            d_v: 64,
        }
    }

    #[test]
    fn tokens_per_expert_examples() {
        let m = model(64, 2, 2048);
        let c = ClusterSpec::new(4, 4, 16).unwrap();
        assert_eq!(tokens_per_expert::<f64>(&m, &c, 1, 1), 256.0);
        assert_eq!(tokens_per_expert::<f64>(&m, &c, 1, 2), 128.0);

        let unit = model(32, 1, 32);
        let c1 = ClusterSpec::new(1, 3, 4).unwrap();
        assert_eq!(tokens_per_expert::<f64>(&unit, &c1, 1, 1), 1.0);
    }

    #[test]
    fn max_r1_examples() {
        let c = ClusterSpec::new(2, 2, 16).unwrap();
        assert_eq!(get_max_r1(4, &c), 4);
        assert_eq!(get_max_r1(5, &c), 3);
        assert_eq!(get_max_r1(17, &c), 0);
    }

    #[test]
    fn validate_examples() {
        let m = model(64, 2, 2048);
        let c = ClusterSpec::new(4, 4, 16).unwrap();
        let ok = PipelineConfig::<f64>::conserving(&m, &c, 2, 4, 2, Order::Asas);
        assert!(validate_config(&ok, &m, &c).is_empty());

        let mem = PipelineConfig::<f64>::conserving(&m, &c, 5, 4, 2, Order::Asas);
        let v = validate_config(&mem, &m, &c);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("memory rule"));

        let mut bad = ok;
        bad.m_e *= 1.0 + 1e-6;
        let v = validate_config(&bad, &m, &c);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], ConfigViolation::TokenConservation { .. }));
        assert!(v[0].to_string().contains("token conservation"));
    }

    #[test]
    fn cluster_invariants() {
        assert!(ClusterSpec::new(0, 4, 8).is_err());
        let bad = ClusterSpec {
            total_gpus: 9,
            ag: 4,
            eg: 4,
            mem_capacity: 8,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn instance_doc_field_names() {
        let json = r#"{
            "cluster": {"p": 8, "ag": 2, "eg": 6, "mem_capacity": 16},
            "model": {"e": 64, "t": 4, "m": 2048, "h": 1408, "top_k": 6, "n_shared": 2,
                      "s": 1024, "n_h": 16, "d_k": 128, "d_v": 128},
            "pipeline": {"r_1": 2, "m_a": 4, "r_2": 2, "m_e": 384.0, "order": "AASS"}
        }"#;
        let doc: InstanceDoc<f64> = serde_json::from_str(json).unwrap();
        doc.validate().unwrap();
        let p = doc.pipeline.unwrap();
        assert_eq!(p.order, Order::Aass);
        assert!(validate_config(&p, &doc.model, &doc.cluster).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conservation_round_trip(m_a in 1usize..512, r_2 in 1usize..128, ag in 1usize..16,
                                       top_k in 1usize..8, s in 1usize..8192, e in 8usize..256) {
                let m = model(e, top_k.min(e), s);
                let c = ClusterSpec::new(ag, 4, 1).unwrap();
                let m_e: f64 = tokens_per_expert(&m, &c, m_a, r_2);
                let back = m_e * r_2 as f64 * e as f64 / (ag as f64 * m.top_k as f64 * s as f64);
                prop_assert!((back - m_a as f64).abs() <= 1e-9 * m_a as f64);
            }

            #[test]
            fn max_r1_non_increasing(cap in 0usize..10_000, m_a in 1usize..200) {
                let c = ClusterSpec::new(1, 1, cap).unwrap();
                prop_assert!(get_max_r1(m_a + 1, &c) <= get_max_r1(m_a, &c));
            }
        }
    }
}
