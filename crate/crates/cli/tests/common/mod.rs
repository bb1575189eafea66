#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn depsched(args: &[&str], cwd: &Path) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_depsched"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

pub fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    write(dir, name, &serde_json::to_string_pretty(v).unwrap())
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// DeepSeek-like instance on an 8-GPU node with a 2/6 split.
pub fn instance() -> Value {
    json!({
        "cluster": {"p": 8, "ag": 2, "eg": 6, "mem_capacity": 16},
        "model": {"e": 160, "t": 4, "m": 5120, "h": 1536, "top_k": 6, "n_shared": 2,
                  "s": 2048, "n_h": 128, "d_k": 192, "d_v": 128}
    })
}

pub fn primitives() -> Value {
    json!({
        "gemm": {"alpha": 0.17, "beta": 8.59e-11},
        "attn": {"alpha": 0.15, "beta": 1.54e-11},
        "comm": [
            {"ag": 1, "eg": 7, "alpha": 0.10, "beta": 9.61e-7},
            {"ag": 2, "eg": 6, "alpha": 0.01, "beta": 1.28e-6},
            {"ag": 4, "eg": 4, "alpha": 0.37, "beta": 2.55e-6}
        ]
    })
}

/// Small instance whose transfers dwarf the compute.
pub fn comm_bound() -> (Value, Value) {
    let inst = json!({
        "cluster": {"p": 2, "ag": 1, "eg": 1, "mem_capacity": 8},
        "model": {"e": 8, "t": 2, "m": 64, "h": 64, "top_k": 2, "n_shared": 0,
                  "s": 64, "n_h": 4, "d_k": 16, "d_v": 16}
    });
    let lm = json!({
        "t_a": {"alpha": 0.1, "beta": 1.0},
        "t_s": {"alpha": 0.0, "beta": 0.0},
        "t_e": {"alpha": 0.01, "beta": 0.001},
        "t_a2e": {"alpha": 0.01, "beta": 0.5}
    });
    (inst, lm)
}

/// Instance and primitive-model files in a fresh directory.
pub fn setup() -> (TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_json(dir.path(), "instance.json", &instance());
    let models = write_json(dir.path(), "models.json", &primitives());
    (dir, inst, models)
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
