//! Input loading, scalar overrides and all-or-nothing output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use depsched::{derive_layer_models, InstanceDocF64, LayerCostModelsF64, PrimitiveModelsF64};
use serde::Serialize;
use serde_json::Value;
use tempfile::NamedTempFile;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Calibrate,
    Solve,
    Simulate,
    Sweep,
    Validate,
}

/// What a run read and wrote.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.to_path_buf());
        self
    }

    /// Fails on the first input that is not a readable file.
    pub fn check_inputs(&self) -> Result<(), CliError> {
        for p in &self.inputs {
            if !p.is_file() {
                return Err(CliError::invalid(format!("{}: no such file", p.display())));
            }
        }
        Ok(())
    }
}

/// Scalar fields that may be overridden per invocation.
#[derive(Debug, Clone, Copy, Default, Args)]
pub struct Overrides {
    /// Replace the model's sequence length.
    #[arg(long)]
    pub seq_len: Option<usize>,
    /// Replace the cluster's memory capacity (max r_1 * m_a).
    #[arg(long)]
    pub mem_cap: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, doc: &mut InstanceDocF64) {
        if let Some(s) = self.seq_len {
            doc.model.seq_len = s;
        }
        if let Some(m) = self.mem_cap {
            doc.cluster.mem_capacity = m;
        }
    }

    pub fn any(&self) -> bool {
        self.seq_len.is_some() || self.mem_cap.is_some()
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn parse_err(path: &Path) -> impl Fn(serde_json::Error) -> CliError + '_ {
    move |e| CliError::invalid(format!("{}: {e}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(parse_err(path))
}

/// Reads an instance document and applies the overrides before validating.
pub fn load_instance(path: &Path, ov: &Overrides) -> Result<InstanceDocF64, CliError> {
    let mut doc: InstanceDocF64 = serde_json::from_str(&read_text(path)?).map_err(parse_err(path))?;
    ov.apply(&mut doc);
    doc.validate()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    Ok(doc)
}

/// Per-layer models from either a per-layer file (`t_a`, `t_s`, ...) or a
/// primitive file (`gemm`, `attn`, `comm`), derived for `doc`.
pub fn load_models(path: &Path, doc: &InstanceDocF64) -> Result<LayerCostModelsF64, CliError> {
    let v = read_json(path)?;
    if v.get("t_a").is_some() {
        return serde_json::from_value(v).map_err(parse_err(path));
    }
    if v.get("gemm").is_some() {
        let prim: PrimitiveModelsF64 = serde_json::from_value(v).map_err(parse_err(path))?;
        return derive_layer_models(&doc.model, &doc.cluster, &prim)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())));
    }
    Err(CliError::invalid(format!(
        "{}: expected per-layer models (t_a, t_s, t_e, t_a2e) or primitive models (gemm, attn, comm)",
        path.display()
    )))
}

/// Every `alpha`/`beta` coefficient in a models document that is negative
/// or not a finite number, as `path = value`.
pub fn coefficient_violations(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    walk(v, String::new(), &mut out);
    out
}

fn walk(v: &Value, at: String, out: &mut Vec<String>) {
    let join = |k: &str| {
        if at.is_empty() {
            k.to_string()
        } else {
            format!("{at}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                if k == "alpha" || k == "beta" {
                    match x.as_f64() {
                        Some(f) if f.is_finite() && f >= 0.0 => {}
                        _ => out.push(format!("{} = {x}", join(k))),
                    }
                } else {
                    walk(x, join(k), out);
                }
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                walk(x, format!("{at}[{i}]"), out);
            }
        }
        _ => {}
    }
}

/// Writes every file to a temporary sibling first and renames them only
/// once all writes succeeded.
pub fn write_all(files: Vec<(PathBuf, Vec<u8>)>) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let io = |e: std::io::Error| CliError::invalid(format!("{}: {e}", path.display()));
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&bytes).map_err(io)?;
        tmp.flush().map_err(io)?;
        staged.push((path, tmp));
    }
    for (path, tmp) in staged {
        tmp.persist(&path)
            .map_err(|e| CliError::invalid(format!("{}: {}", path.display(), e.error)))?;
    }
    Ok(())
}

pub fn to_json<S: Serialize>(x: &S) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(x).expect("serializable report");
    s.push('\n');
    s.into_bytes()
}
