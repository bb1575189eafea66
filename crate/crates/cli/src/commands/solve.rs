use std::path::PathBuf;

use clap::Args;
use depsched::schedule::{analytic_makespan, tokens_per_iteration, Durations};
use depsched::{pppipe_best, search, ClusterSpec, LayerCostModelsF64, ModelSpec, SolverOptions, SolverResultF64};
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::io::{self, Command, Overrides, RunManifest};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance JSON with `cluster`, `model` and an optional `pipeline`.
    #[arg(long)]
    config: PathBuf,
    /// Primitive or per-layer cost models JSON.
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Upper bound on the slice count r_2.
    #[arg(long, default_value_t = 64)]
    r2_cap: usize,
    /// Also report times with m_e rounded up to an integer.
    #[arg(long)]
    integer_me: bool,
    /// Keep `solve_time_ms` in the output file. Off by default so that
    /// repeated runs produce identical bytes.
    #[arg(long)]
    timing: bool,
}

/// Times recomputed at `ceil(m_e)`; tokens no longer balance exactly.
#[derive(Debug, Serialize)]
struct Rounded {
    m_e: f64,
    makespan_ms: f64,
    throughput_tps: f64,
    approximate: bool,
}

#[derive(Debug, Serialize)]
struct RoundedPair {
    search: Rounded,
    pppipe: Rounded,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    model: ModelSpec,
    cluster: ClusterSpec,
    search: Value,
    pppipe: Value,
    speedup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    integer_me: Option<RoundedPair>,
}

fn rounded(model: &ModelSpec, cluster: &ClusterSpec, lm: &LayerCostModelsF64, r: &SolverResultF64) -> Rounded {
    let b = &r.best;
    let m_e = b.m_e.ceil();
    let d = Durations::new(lm, b.m_a, m_e);
    let makespan = analytic_makespan(model.layers, b.r_1, b.r_2, &d, r.policy);
    Rounded {
        m_e,
        makespan_ms: makespan,
        throughput_tps: tokens_per_iteration::<f64>(model, cluster, b.r_1, b.m_a) * 1000.0 / makespan,
        approximate: true,
    }
}

fn result_json(r: &SolverResultF64, timing: bool) -> Value {
    let mut v = serde_json::to_value(r).expect("serializable result");
    if !timing {
        if let Value::Object(map) = &mut v {
            map.remove("solve_time_ms");
        }
    }
    v
}

pub fn run(args: &SolveArgs) -> Result<RunManifest, CliError> {
    let manifest = RunManifest::new(Command::Solve)
        .input(&args.config)
        .input(&args.models)
        .output(&args.out);
    manifest.check_inputs()?;
    if args.r2_cap == 0 {
        return Err(CliError::invalid("--r2-cap must be >= 1"));
    }
    let doc = io::load_instance(&args.config, &args.overrides)?;
    let lm = io::load_models(&args.models, &doc)?;
    let (model, cluster) = (doc.model, doc.cluster);

    let opts = SolverOptions { r2_cap: args.r2_cap };
    let found = search(&model, &cluster, &lm, &opts)?;
    let base = pppipe_best(&model, &cluster, &lm, &opts)?;
    let speedup = found.predicted_throughput / base.predicted_throughput;

    let report = SolveReport {
        model,
        cluster,
        search: result_json(&found, args.timing),
        pppipe: result_json(&base, args.timing),
        speedup,
        integer_me: args.integer_me.then(|| RoundedPair {
            search: rounded(&model, &cluster, &lm, &found),
            pppipe: rounded(&model, &cluster, &lm, &base),
        }),
    };
    io::write_all(vec![(args.out.clone(), io::to_json(&report))])?;

    println!(
        "{:<8} {:>5} {:>5} {:>5} {:>7} {:>12} {:>14} {:>16}",
        "run", "m_a", "r_1", "r_2", "order", "m_e", "makespan_ms", "throughput_tps"
    );
    for (name, r) in [("search", &found), ("PPPipe", &base)] {
        let b = &r.best;
        println!(
            "{:<8} {:>5} {:>5} {:>5} {:>7} {:>12.4} {:>14.4} {:>16.2}",
            name,
            b.m_a,
            b.r_1,
            b.r_2,
            r.policy.label(),
            b.m_e,
            r.predicted_makespan_ms,
            r.predicted_throughput
        );
    }
    println!("speedup {speedup:.4}x");
    if let Some(p) = &report.integer_me {
        println!(
            "integer m_e (approximate): search m_e={} {:.2} tok/s, PPPipe m_e={} {:.2} tok/s",
            p.search.m_e, p.search.throughput_tps, p.pppipe.m_e, p.pppipe.throughput_tps
        );
    }
    println!(
        "candidates_evaluated {} + {} baseline, solve_time_ms {:.3}",
        found.candidates_evaluated,
        base.candidates_evaluated,
        found.solve_time + base.solve_time
    );
    Ok(manifest)
}
