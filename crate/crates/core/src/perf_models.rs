//! Affine (α–β) cost primitives, least-squares calibration, and their
//! composition into per-layer cost models.
//!
//! All times are milliseconds. Workload units depend on the primitive:
//! FLOPs for GEMM, `n_h·B·S²·(d_k+d_v)` for attention, and elements moved
//! per device for A2E/E2A communication.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ClusterSpec, ModelSpec};
use crate::scalar::Scalar;

/// `time = alpha + beta * workload`, both coefficients nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLinear<T>", bound = "T: Scalar")]
pub struct LinearCostModel<T> {
    alpha: T,
    beta: T,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawLinear<T> {
    alpha: T,
    beta: T,
}

impl<T: Scalar> TryFrom<RawLinear<T>> for LinearCostModel<T> {
    type Error = Error;

    fn try_from(raw: RawLinear<T>) -> Result<Self> {
        Self::new(raw.alpha, raw.beta)
    }
}

impl<T: Scalar> LinearCostModel<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !alpha.is_finite() || alpha < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if !beta.is_finite() || beta < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn zero() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::zero(),
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn is_zero(&self) -> bool {
        self.alpha == T::zero() && self.beta == T::zero()
    }

    /// Checked evaluation; rejects negative or non-finite workloads.
    pub fn eval(&self, workload: T) -> Result<T> {
        if !workload.is_finite() || workload < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "workload must be finite and >= 0, got {workload}"
            )));
        }
        Ok(self.at(workload))
    }

    /// Unchecked evaluation for internal hot paths.
    #[inline]
    pub fn at(&self, workload: T) -> T {
        self.alpha + self.beta * workload
    }
}

/// Calibrated primitive models: one GEMM model, one attention model and one
/// communication model per `(ag, eg)` split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PrimitiveModels<T> {
    pub gemm: LinearCostModel<T>,
    pub attn: LinearCostModel<T>,
    #[serde(with = "comm_entries")]
    pub comm: BTreeMap<GroupSplit, LinearCostModel<T>>,
}

/// An `(ag, eg)` pair keying a communication model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupSplit {
    pub ag: usize,
    pub eg: usize,
}

impl<T: Scalar> PrimitiveModels<T> {
    pub fn new(gemm: LinearCostModel<T>, attn: LinearCostModel<T>) -> Self {
        Self {
            gemm,
            attn,
            comm: BTreeMap::new(),
        }
    }

    pub fn with_comm(mut self, ag: usize, eg: usize, model: LinearCostModel<T>) -> Self {
        self.comm.insert(GroupSplit { ag, eg }, model);
        self
    }

    pub fn comm_for(&self, ag: usize, eg: usize) -> Result<&LinearCostModel<T>> {
        self.comm
            .get(&GroupSplit { ag, eg })
            .ok_or(Error::MissingCommModel { ag, eg })
    }
}

mod comm_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(bound = "T: Scalar")]
    struct Entry<T> {
        ag: usize,
        eg: usize,
        alpha: T,
        beta: T,
    }

    pub fn serialize<S: Serializer, T: Scalar>(
        map: &BTreeMap<GroupSplit, LinearCostModel<T>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<Entry<T>> = map
            .iter()
            .map(|(k, m)| Entry {
                ag: k.ag,
                eg: k.eg,
                alpha: m.alpha(),
                beta: m.beta(),
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Scalar>(
        d: D,
    ) -> std::result::Result<BTreeMap<GroupSplit, LinearCostModel<T>>, D::Error> {
        let entries = Vec::<Entry<T>>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for e in entries {
            let model = LinearCostModel::new(e.alpha, e.beta).map_err(serde::de::Error::custom)?;
            let key = GroupSplit { ag: e.ag, eg: e.eg };
            if map.insert(key, model).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate communication model for ag={}, eg={}",
                    e.ag, e.eg
                )));
            }
        }
        Ok(map)
    }
}

/// One micro-benchmark observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSample<T> {
    pub workload: T,
    pub time: T,
}

impl<T: Scalar> MeasurementSample<T> {
    pub fn new(workload: T, time: T) -> Result<Self> {
        if !workload.is_finite() || workload < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "sample workload must be finite and >= 0, got {workload}"
            )));
        }
        if !time.is_finite() || time <= T::zero() {
            return Err(Error::InvalidArgument(format!(
                "sample time must be finite and > 0, got {time}"
            )));
        }
        Ok(Self { workload, time })
    }
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport<T> {
    pub model: LinearCostModel<T>,
    pub r_squared: T,
    pub sample_count: usize,
    /// Set when a negative fitted coefficient was clamped to zero.
    pub clamped: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct FitReportDoc<T> {
    alpha: T,
    beta: T,
    r_squared: T,
    clamped: bool,
}

impl<T: Scalar> Serialize for FitReport<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FitReportDoc {
            alpha: self.model.alpha(),
            beta: self.model.beta(),
            r_squared: self.r_squared,
            clamped: self.clamped,
        }
        .serialize(s)
    }
}

/// Ordinary least squares of `time` on `workload`.
///
/// Negative coefficients are clamped to zero and flagged; the reported R² is
/// that of the returned (possibly clamped) model.
pub fn fit_linear<T: Scalar>(samples: &[MeasurementSample<T>]) -> Result<FitReport<T>> {
    if samples.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let n = T::of(samples.len());
    let mean_x = samples.iter().map(|s| s.workload).sum::<T>() / n;
    let mean_y = samples.iter().map(|s| s.time).sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for s in samples {
        let dx = s.workload - mean_x;
        let dy = s.time - mean_y;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx <= T::zero() {
        return Err(Error::DegenerateFit("all samples share one workload value".into()));
    }

    let mut beta = sxy / sxx;
    let mut alpha = mean_y - beta * mean_x;
    let mut clamped = false;
    if beta < T::zero() {
        // Flat line through the mean is the best nonnegative-slope fit.
        beta = T::zero();
        alpha = mean_y;
        clamped = true;
    }
    if alpha < T::zero() {
        // Refit through the origin.
        let sx2 = samples.iter().map(|s| s.workload * s.workload).sum::<T>();
        let sxy0 = samples.iter().map(|s| s.workload * s.time).sum::<T>();
        alpha = T::zero();
        beta = (sxy0 / sx2).max(T::zero());
        clamped = true;
    }
    let model = LinearCostModel::new(alpha, beta)?;

    let ss_res = samples
        .iter()
        .map(|s| {
            let r = s.time - model.at(s.workload);
            r * r
        })
        .sum::<T>();
    let r_squared = if ss_res <= T::lit(64.0) * T::epsilon() * T::epsilon() * syy.max(mean_y * mean_y * n) {
        T::one()
    } else if syy == T::zero() {
        T::neg_infinity()
    } else {
        T::one() - ss_res / syy
    };

    Ok(FitReport {
        model,
        r_squared,
        sample_count: samples.len(),
        clamped,
    })
}

#[derive(Deserialize)]
struct CsvRow {
    workload: f64,
    time_ms: f64,
}

/// Reads `workload,time_ms` samples. `label` names the source in errors.
pub fn read_samples_csv<T: Scalar, R: Read>(reader: R, label: &str) -> Result<Vec<MeasurementSample<T>>> {
    let parse_err = |message: String| Error::Parse {
        path: label.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err("empty file, expected header `workload,time_ms`".into()));
    }
    if headers.iter().collect::<Vec<_>>() != ["workload", "time_ms"] {
        return Err(parse_err(format!(
            "line 1: expected header `workload,time_ms`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(format!("line {line}: {e}"))
        })?;
        let line = samples.len() + 2;
        let sample = MeasurementSample::new(
            T::from_f64(row.workload).unwrap_or_else(T::nan),
            T::from_f64(row.time_ms).unwrap_or_else(T::nan),
        )
        .map_err(|e| parse_err(format!("line {line}: {e}")))?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(parse_err("no samples after header".into()));
    }
    Ok(samples)
}

pub fn read_samples_file<T: Scalar>(path: &Path) -> Result<Vec<MeasurementSample<T>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_samples_csv(file, &path.display().to_string())
}

/// Per-layer affine models: attention and shared expert in `m_a`, expert
/// FFN and A2E in `m_e`. E2A reuses the A2E model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LayerCostModels<T> {
    pub t_a: LinearCostModel<T>,
    pub t_s: LinearCostModel<T>,
    pub t_e: LinearCostModel<T>,
    pub t_a2e: LinearCostModel<T>,
}

impl<T: Scalar> LayerCostModels<T> {
    #[inline]
    pub fn t_e2a(&self) -> &LinearCostModel<T> {
        &self.t_a2e
    }
}

/// Composes primitive models into per-layer models for `arch` on `cluster`.
pub fn derive_layer_models<T: Scalar>(
    arch: &ModelSpec,
    cluster: &ClusterSpec,
    prim: &PrimitiveModels<T>,
) -> Result<LayerCostModels<T>> {
    let comm = prim.comm_for(cluster.ag, cluster.eg)?;
    let (gm, at) = (&prim.gemm, &prim.attn);
    let s = T::of(arch.seq_len);
    let m = T::of(arch.embed_dim);
    let h = T::of(arch.expert_hidden);
    let n_h = T::of(arch.heads);
    let d_k = T::of(arch.d_k);
    let d_v = T::of(arch.d_v);
    let two = T::lit(2.0);
    let three = T::lit(3.0);

    let t_a = LinearCostModel::new(
        T::lit(4.0) * gm.alpha() + at.alpha(),
        gm.beta() * (two * s * m * n_h * d_k + two * s * m * n_h * d_v) + at.beta() * s * s * n_h * (d_k + d_v),
    )?;
    let t_s = if arch.n_shared == 0 {
        LinearCostModel::zero()
    } else {
        let ns = T::of(arch.n_shared);
        LinearCostModel::new(three * ns * gm.alpha(), three * ns * gm.beta() * s * m * h)?
    };
    let experts_per_device = T::of(arch.num_experts) / T::of(cluster.eg);
    let t_e = LinearCostModel::new(experts_per_device * gm.alpha(), experts_per_device * gm.beta() * m * h)?;
    let t_a2e = LinearCostModel::new(comm.alpha(), comm.beta() * experts_per_device * m)?;
    Ok(LayerCostModels { t_a, t_s, t_e, t_a2e })
}
