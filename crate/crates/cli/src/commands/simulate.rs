use std::path::PathBuf;

use clap::{Args, ValueEnum};
use depsched::schedule::{event_sim_with, export_trace, to_csv, utilization};
use depsched::{
    non_overlapped_comm, throughput, verify_constraints, InstanceDocF64, Order, PipelineConfigF64, SchedulePolicy,
};

use crate::error::CliError;
use crate::io::{self, Command, Overrides, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Asas,
    Aass,
    /// Fused ping-pong baseline.
    Pppipe,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Instance JSON; its `pipeline` section is the default configuration.
    #[arg(long)]
    config: PathBuf,
    /// Primitive or per-layer cost models JSON.
    #[arg(long)]
    models: PathBuf,
    /// Chrome trace-event JSON output.
    #[arg(long)]
    trace: PathBuf,
    /// Optional flat CSV of the same tasks.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    r1: Option<usize>,
    #[arg(long)]
    ma: Option<usize>,
    #[arg(long)]
    r2: Option<usize>,
    #[arg(long, value_enum)]
    order: Option<PolicyArg>,
    #[command(flatten)]
    overrides: Overrides,
}

/// The configuration to simulate. Overriding `m_a`, `r_2` or the sequence
/// length re-derives `m_e` from token conservation; otherwise the file's
/// `m_e` is kept as written and checked.
fn pipeline(args: &SimulateArgs, doc: &InstanceDocF64) -> Result<(PipelineConfigF64, SchedulePolicy), CliError> {
    let order = match args.order {
        Some(PolicyArg::Aass) => Some(Order::Aass),
        Some(PolicyArg::Asas) => Some(Order::Asas),
        _ => None,
    };
    let cfg = match doc.pipeline {
        Some(p) => {
            let mut c = p;
            c.r_1 = args.r1.unwrap_or(c.r_1);
            c.m_a = args.ma.unwrap_or(c.m_a);
            c.r_2 = args.r2.unwrap_or(c.r_2);
            c.order = order.unwrap_or(c.order);
            if args.ma.is_some() || args.r2.is_some() || args.overrides.seq_len.is_some() {
                c = PipelineConfigF64::conserving(&doc.model, &doc.cluster, c.r_1, c.m_a, c.r_2, c.order);
            }
            c
        }
        None => match (args.r1, args.ma, args.r2) {
            (Some(r_1), Some(m_a), Some(r_2)) => {
                PipelineConfigF64::conserving(&doc.model, &doc.cluster, r_1, m_a, r_2, order.unwrap_or(Order::Asas))
            }
            _ => {
                return Err(CliError::invalid(format!(
                    "{}: no pipeline section; pass --r1, --ma and --r2",
                    args.config.display()
                )))
            }
        },
    };
    let policy = match args.order {
        Some(PolicyArg::Pppipe) => SchedulePolicy::PpPipe,
        _ => cfg.order.into(),
    };
    Ok((cfg, policy))
}

pub fn run(args: &SimulateArgs) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new(Command::Simulate)
        .input(&args.config)
        .input(&args.models)
        .output(&args.trace);
    if let Some(c) = &args.csv {
        manifest = manifest.output(c);
    }
    manifest.check_inputs()?;
    let doc = io::load_instance(&args.config, &args.overrides)?;
    let lm = io::load_models(&args.models, &doc)?;
    let (cfg, policy) = pipeline(args, &doc)?;

    let s = event_sim_with(&doc.model, &doc.cluster, &cfg, &lm, policy)?;
    let violations = verify_constraints(&s, &lm);
    if !violations.is_empty() {
        let mut msg = format!("schedule violates {} constraints:", violations.len());
        for v in &violations {
            msg.push_str(&format!("\n  - {v}"));
        }
        return Err(CliError::Validation(msg));
    }
    let tps = throughput(&doc.model, &doc.cluster, &cfg, s.makespan)?;
    let exposed = non_overlapped_comm(&s);
    let util = utilization(&s);

    let mut files = vec![(args.trace.clone(), io::to_json(&export_trace(&s)))];
    if let Some(c) = &args.csv {
        files.push((c.clone(), to_csv(&s).into_bytes()));
    }
    io::write_all(files)?;

    println!(
        "config       m_a={} r_1={} r_2={} m_e={} policy={}",
        cfg.m_a, cfg.r_1, cfg.r_2, cfg.m_e, policy
    );
    println!("tasks        {}", s.tasks.len());
    println!("makespan_ms  {:.6}", s.makespan);
    println!("throughput   {tps:.3} tok/s");
    println!("non_overlapped_comm_ms {exposed:.6}");
    println!(
        "utilization  AG {:.4}  A2E {:.4}  EG {:.4}  E2A {:.4}",
        util.ag, util.a2e, util.eg, util.e2a
    );
    println!("constraints  OK");
    Ok(manifest)
}
