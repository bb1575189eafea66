use std::path::PathBuf;

use clap::Args;
use depsched::oracle::{table_csv, EnumerationRow, MAX_POINTS};
use depsched::solver::{solve_r2_with, Evaluator};
use depsched::{ClusterSpec, LayerCostModelsF64, ModelSpec, Order, SolverOptions};
use serde::Deserialize;

use crate::error::CliError;
use crate::io::{self, Command, Overrides, RunManifest};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Instance JSON with `cluster` and `model`.
    #[arg(long)]
    config: PathBuf,
    /// Primitive or per-layer cost models JSON.
    #[arg(long)]
    models: PathBuf,
    /// Grid JSON. Each of `m_a`, `r_1`, `r_2` is a list of values or
    /// `{"from", "to", "step"}`; `order` is a list. Absent axes are optimized.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Upper bound on r_2 when it is optimized.
    #[arg(long, default_value_t = 64)]
    r2_cap: usize,
    /// Refuse grids whose estimated evaluation count exceeds this.
    #[arg(long, default_value_t = MAX_POINTS as u64)]
    max_points: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Axis {
    List(Vec<usize>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeSpec {
    from: usize,
    to: Option<usize>,
    #[serde(default = "one")]
    step: usize,
}

fn one() -> usize {
    1
}

impl Axis {
    /// `None` when the axis has no upper end.
    fn len(&self) -> Option<u128> {
        match self {
            Axis::List(v) => Some(v.len() as u128),
            Axis::Range(r) => {
                let to = r.to?;
                Some(if to < r.from {
                    0
                } else {
                    ((to - r.from) / r.step) as u128 + 1
                })
            }
        }
    }

    fn values(&self) -> Vec<usize> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Range(r) => (r.from..=r.to.unwrap_or(r.from)).step_by(r.step).collect(),
        }
    }

    fn check(&self, name: &str) -> Result<(), String> {
        match self {
            Axis::List(v) if v.contains(&0) => Err(format!("axis `{name}` contains 0")),
            Axis::Range(r) if r.from == 0 || r.step == 0 => Err(format!("axis `{name}` needs from >= 1 and step >= 1")),
            _ => Ok(()),
        }
    }
}

/// Fixed values per variable; `None` leaves the variable to the optimizer.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    m_a: Option<Axis>,
    r_1: Option<Axis>,
    r_2: Option<Axis>,
    order: Option<Vec<Order>>,
}

impl Grid {
    fn axes(&self) -> [(&'static str, Option<&Axis>); 3] {
        [
            ("m_a", self.m_a.as_ref()),
            ("r_1", self.r_1.as_ref()),
            ("r_2", self.r_2.as_ref()),
        ]
    }

    /// Upper estimate of timeline evaluations: fixed axes contribute their
    /// length, optimized ones the size of their search range.
    fn estimate(&self, mem: usize, r2_cap: usize) -> Result<u128, CliError> {
        let mut n: u128 = 1;
        for ((name, axis), free) in self.axes().into_iter().zip([mem, mem, r2_cap]) {
            let k = match axis {
                Some(a) => a.len().ok_or_else(|| {
                    CliError::invalid(format!(
                        "grid axis `{name}` is unbounded (no `to`); estimated size is infinite"
                    ))
                })?,
                None => free.max(1) as u128,
            };
            n = n.saturating_mul(k);
        }
        Ok(n.saturating_mul(self.order.as_ref().map_or(2, |o| o.len()) as u128))
    }
}

fn fixed(axis: Option<&Axis>) -> Vec<Option<usize>> {
    axis.map_or(vec![None], |a| a.values().into_iter().map(Some).collect())
}

struct Sweep<'a> {
    ev: Evaluator<'a, f64>,
    mem: usize,
    opts: SolverOptions,
}

impl Sweep<'_> {
    /// Best row over the free variables, or `None` when no point with these
    /// fixed values fits in memory.
    fn best(
        &self,
        m_a: Option<usize>,
        r_1: Option<usize>,
        r_2: Option<usize>,
        order: Option<Order>,
    ) -> Option<EnumerationRow<f64>> {
        let mem = self.mem;
        let pairs: Vec<(usize, usize)> = match (m_a, r_1) {
            (Some(a), Some(r)) => vec![(a, r)],
            (Some(a), None) => (1..=mem / a).map(|r| (a, r)).collect(),
            (None, Some(r)) => (1..=mem / r).map(|a| (a, r)).collect(),
            (None, None) => (1..=mem).flat_map(|a| (1..=mem / a).map(move |r| (a, r))).collect(),
        };
        let orders = order.map_or(Order::ALL.to_vec(), |o| vec![o]);
        let mut best: Option<EnumerationRow<f64>> = None;
        for (a, r) in pairs.into_iter().filter(|&(a, r)| a.saturating_mul(r) <= mem) {
            for &o in &orders {
                let (r2, makespan) = match r_2 {
                    Some(x) => (x, self.ev.makespan(a, r, x, o.into())),
                    None => {
                        let c = solve_r2_with(&self.ev, a, r, o.into(), &self.opts);
                        (c.r_2, c.makespan)
                    }
                };
                let tps = self.ev.throughput_for(a, r, makespan);
                if best.is_none_or(|b| tps > b.throughput_tps) {
                    best = Some(EnumerationRow {
                        m_a: a,
                        r_1: r,
                        r_2: r2,
                        order: o,
                        m_e: self.ev.m_e(a, r2),
                        makespan_ms: makespan,
                        throughput_tps: tps,
                    });
                }
            }
        }
        best
    }
}

/// Rows of the sweep and the number of fixed combinations that did not fit.
fn evaluate(
    grid: &Grid,
    model: &ModelSpec,
    cluster: &ClusterSpec,
    lm: &LayerCostModelsF64,
    opts: SolverOptions,
) -> (Vec<EnumerationRow<f64>>, usize) {
    let sweep = Sweep {
        ev: Evaluator::new(model, cluster, lm),
        mem: cluster.mem_capacity,
        opts,
    };
    let orders: Vec<Option<Order>> = grid
        .order
        .as_ref()
        .map_or(vec![None], |o| o.iter().copied().map(Some).collect());
    let (mut rows, mut skipped) = (Vec::new(), 0);
    for m_a in fixed(grid.m_a.as_ref()) {
        for r_1 in fixed(grid.r_1.as_ref()) {
            for r_2 in fixed(grid.r_2.as_ref()) {
                for &o in &orders {
                    match sweep.best(m_a, r_1, r_2, o) {
                        Some(row) => rows.push(row),
                        None => skipped += 1,
                    }
                }
            }
        }
    }
    (rows, skipped)
}

pub fn run(args: &SweepArgs) -> Result<RunManifest, CliError> {
    let manifest = RunManifest::new(Command::Sweep)
        .input(&args.config)
        .input(&args.models)
        .input(&args.grid)
        .output(&args.out);
    manifest.check_inputs()?;
    if args.r2_cap == 0 {
        return Err(CliError::invalid("--r2-cap must be >= 1"));
    }
    let doc = io::load_instance(&args.config, &args.overrides)?;
    let lm = io::load_models(&args.models, &doc)?;
    let grid: Grid = serde_json::from_value(io::read_json(&args.grid)?).map_err(|e| {
        CliError::invalid(format!(
            "{}: {e} (axes are lists of integers or {{\"from\", \"to\", \"step\"}})",
            args.grid.display()
        ))
    })?;
    for (name, axis) in grid.axes() {
        if let Some(a) = axis {
            a.check(name)
                .map_err(|m| CliError::invalid(format!("{}: {m}", args.grid.display())))?;
        }
    }
    let estimate = grid.estimate(doc.cluster.mem_capacity, args.r2_cap)?;
    if estimate > args.max_points as u128 {
        return Err(CliError::invalid(format!(
            "grid needs an estimated {estimate} evaluations, above the limit of {}",
            args.max_points
        )));
    }

    let opts = SolverOptions { r2_cap: args.r2_cap };
    let (rows, skipped) = evaluate(&grid, &doc.model, &doc.cluster, &lm, opts);
    io::write_all(vec![(args.out.clone(), table_csv(&rows).into_bytes())])?;

    println!(
        "{:>5} {:>5} {:>5} {:>6} {:>12} {:>14} {:>16}",
        "m_a", "r_1", "r_2", "order", "m_e", "makespan_ms", "throughput_tps"
    );
    const SHOWN: usize = 40;
    for r in rows.iter().take(SHOWN) {
        println!(
            "{:>5} {:>5} {:>5} {:>6} {:>12.4} {:>14.4} {:>16.2}",
            r.m_a, r.r_1, r.r_2, r.order, r.m_e, r.makespan_ms, r.throughput_tps
        );
    }
    if rows.len() > SHOWN {
        println!("... {} more rows in {}", rows.len() - SHOWN, args.out.display());
    }
    println!(
        "{} rows, {skipped} combinations over the memory capacity skipped",
        rows.len()
    );
    Ok(manifest)
}
