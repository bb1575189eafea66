use std::path::PathBuf;

use clap::Args;
use depsched::perf_models::read_samples_file;
use depsched::{fit_linear, FitReportF64, PrimitiveModelsF64};

use crate::error::CliError;
use crate::io::{self, Command, RunManifest};

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// GEMM samples, `workload,time_ms` with workload in FLOPs.
    #[arg(long)]
    gemm: PathBuf,
    /// Attention-kernel samples.
    #[arg(long)]
    attn: PathBuf,
    /// Transfer samples for one group split, as `AG,EG=path`. Repeatable.
    #[arg(long, value_parser = parse_comm)]
    comm: Vec<CommSamples>,
    /// Output directory for the fit reports and `primitives.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CommSamples {
    ag: usize,
    eg: usize,
    path: PathBuf,
}

fn parse_comm(s: &str) -> Result<CommSamples, String> {
    let (split, path) = s.split_once('=').ok_or("expected AG,EG=path")?;
    let (ag, eg) = split.split_once(',').ok_or("expected AG,EG=path")?;
    let num = |x: &str| {
        x.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or(format!("`{x}` is not a positive integer"))
    };
    Ok(CommSamples {
        ag: num(ag)?,
        eg: num(eg)?,
        path: PathBuf::from(path),
    })
}

pub fn run(args: &CalibrateArgs) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new(Command::Calibrate).input(&args.gemm).input(&args.attn);
    for c in &args.comm {
        manifest = manifest.input(&c.path);
    }
    manifest.check_inputs()?;

    let fit = |path: &PathBuf| -> Result<FitReportF64, CliError> {
        let samples = read_samples_file::<f64>(path)?;
        fit_linear(&samples).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
    };
    let mut fits = vec![
        ("gemm".to_string(), fit(&args.gemm)?),
        ("attn".to_string(), fit(&args.attn)?),
    ];
    let mut prim = PrimitiveModelsF64::new(fits[0].1.model, fits[1].1.model);
    for c in &args.comm {
        if prim.comm_for(c.ag, c.eg).is_ok() {
            return Err(CliError::invalid(format!(
                "communication samples for ag={}, eg={} given twice",
                c.ag, c.eg
            )));
        }
        let report = fit(&c.path)?;
        prim = prim.with_comm(c.ag, c.eg, report.model);
        fits.push((format!("comm_ag{}_eg{}", c.ag, c.eg), report));
    }

    if args.out.exists() && !args.out.is_dir() {
        return Err(CliError::invalid(format!("{}: not a directory", args.out.display())));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::invalid(format!("{}: {e}", args.out.display())))?;
    let mut files = Vec::new();
    for (name, report) in &fits {
        files.push((args.out.join(format!("{name}.json")), io::to_json(report)));
    }
    files.push((args.out.join("primitives.json"), io::to_json(&prim)));
    for (p, _) in &files {
        manifest = manifest.output(p);
    }
    io::write_all(files)?;

    println!(
        "{:<16} {:>12} {:>14} {:>10} {:>8} {:>8}",
        "primitive", "alpha_ms", "beta_ms", "r_squared", "samples", "clamped"
    );
    for (name, r) in &fits {
        println!(
            "{:<16} {:>12.6} {:>14.6e} {:>10.6} {:>8} {:>8}",
            name,
            r.model.alpha(),
            r.model.beta(),
            r.r_squared,
            r.sample_count,
            if r.clamped { "yes" } else { "no" }
        );
    }
    println!("wrote {} files to {}", fits.len() + 1, args.out.display());
    Ok(manifest)
}
