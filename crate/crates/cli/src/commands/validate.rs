use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use depsched::oracle::{brute_force_search, calibrated_instance, random_instance, SearchBounds};
use depsched::schedule::event_sim_with;
use depsched::{
    closed_form_asas, convexity_check, pppipe_best, search, verify_constraints, ClusterSpec, LayerCostModelsF64,
    ModelSpec, Order, PipelineConfigF64, SchedulePolicy, SolverOptions,
};
use serde::Serialize;

use crate::error::CliError;
use crate::io::{self, Command, Overrides, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    m_a: usize,
    r_1: usize,
    r_2: usize,
}

impl FromStr for Bounds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<usize> = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<Result<_, _>>()?;
        match v[..] {
            [m_a, r_1, r_2] if m_a > 0 && r_1 > 0 && r_2 > 0 => Ok(Bounds { m_a, r_1, r_2 }),
            _ => Err("expected three positive integers M_A,R_1,R_2".into()),
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Instance to check. Without it a built-in suite of random and
    /// calibrated instances runs.
    #[arg(long, requires = "models")]
    config: Option<PathBuf>,
    /// Cost models for `--config`.
    #[arg(long, requires = "config")]
    models: Option<PathBuf>,
    /// Brute-force bounds as `M_A,R_1,R_2`.
    #[arg(long, default_value = "16,8,16")]
    bounds: Bounds,
    /// Suite instances per family.
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// First suite seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSON copy of the report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Keep `solve_time_ms` in the JSON report.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    overrides: Overrides,
}

struct Instance {
    label: String,
    model: ModelSpec,
    cluster: ClusterSpec,
    lm: LayerCostModelsF64,
}

#[derive(Debug, Clone, Serialize)]
struct Property {
    name: &'static str,
    pass: bool,
    /// Worst observed value, in the property's own unit.
    #[serde(skip_serializing_if = "Option::is_none")]
    worst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_at: Option<String>,
    detail: String,
}

#[derive(Debug, Serialize)]
struct Report {
    instances: Vec<String>,
    properties: Vec<Property>,
    candidates_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve_time_ms: Option<f64>,
}

/// Tracks the extreme of one quantity and where it occurred.
struct Worst {
    value: Option<f64>,
    at: Option<String>,
    larger_is_worse: bool,
}

impl Worst {
    fn new(larger_is_worse: bool) -> Self {
        Self {
            value: None,
            at: None,
            larger_is_worse,
        }
    }

    fn see(&mut self, v: f64, at: &str) {
        let worse = match self.value {
            None => true,
            Some(w) => (v > w) == self.larger_is_worse && v != w,
        };
        if worse {
            self.value = Some(v);
            self.at = Some(at.to_string());
        }
    }
}

const EQUIV_TOL: f64 = 1e-9;

struct Checker {
    bounds: Bounds,
    coefficients: Vec<String>,
    equiv: Worst,
    schedules: usize,
    violations: Vec<String>,
    ratio: Worst,
    inexact: Vec<String>,
    convex: usize,
    speedup: Worst,
    candidates: usize,
    solve_ms: f64,
}

impl Checker {
    fn new(bounds: Bounds) -> Self {
        Self {
            bounds,
            coefficients: Vec::new(),
            equiv: Worst::new(true),
            schedules: 0,
            violations: Vec::new(),
            ratio: Worst::new(false),
            inexact: Vec::new(),
            convex: 0,
            speedup: Worst::new(false),
            candidates: 0,
            solve_ms: 0.0,
        }
    }

    fn check(&mut self, inst: &Instance) -> Result<(), CliError> {
        let (model, cluster, lm, at) = (&inst.model, &inst.cluster, &inst.lm, inst.label.as_str());
        let lm_json = serde_json::to_value(lm).expect("serializable models");
        for v in io::coefficient_violations(&lm_json) {
            self.coefficients.push(format!("{at}: {v}"));
        }

        let opts = SolverOptions::default();
        let found = search(model, cluster, lm, &opts)?;
        let base = pppipe_best(model, cluster, lm, &opts)?;
        self.candidates += found.candidates_evaluated + base.candidates_evaluated;
        self.solve_ms += found.solve_time + base.solve_time;
        self.speedup
            .see(found.predicted_throughput / base.predicted_throughput, at);

        let mut configs: Vec<(PipelineConfigF64, SchedulePolicy)> = found
            .audit
            .iter()
            .map(|r| {
                let order = if r.order == SchedulePolicy::Aass {
                    Order::Aass
                } else {
                    Order::Asas
                };
                (
                    PipelineConfigF64::conserving(model, cluster, r.r_1, r.m_a, r.r_2, order),
                    r.order,
                )
            })
            .collect();
        configs.push((base.best, SchedulePolicy::PpPipe));
        for (cfg, policy) in configs {
            let sim = event_sim_with(model, cluster, &cfg, lm, policy)?;
            self.schedules += 1;
            for v in verify_constraints(&sim, lm) {
                self.violations.push(format!("{at}: {v}"));
            }
            if policy == SchedulePolicy::Asas {
                let cf = closed_form_asas(model, cluster, &cfg, lm)?;
                let cs = cf.start_map();
                let mut diff = (cf.makespan - sim.makespan).abs();
                for t in &sim.tasks {
                    let s = cs.get(&t.id).copied().unwrap_or(f64::INFINITY);
                    diff = diff.max((s - t.start).abs());
                }
                self.equiv.see(diff / sim.makespan.max(1.0), at);
            }
        }

        // Cap memory so every pair the solver visits lies inside the bounds.
        let b = self.bounds;
        let capped = ClusterSpec {
            mem_capacity: cluster.mem_capacity.min(b.m_a).min(b.r_1),
            ..*cluster
        };
        let opts = SolverOptions { r2_cap: b.r_2 };
        let found = search(model, &capped, lm, &opts)?;
        let oracle = brute_force_search(
            model,
            &capped,
            lm,
            &SearchBounds::new(b.m_a, b.r_1, b.r_2, &Order::ALL)?,
        )?;
        let ratio = found.predicted_throughput / oracle.result.predicted_throughput;
        self.ratio.see(ratio, at);
        if convexity_check(model, &capped, lm, &opts) {
            self.convex += 1;
            if (ratio - 1.0).abs() > 1e-9 {
                self.inexact.push(format!("{at}: ratio {ratio}"));
            }
        }
        Ok(())
    }

    fn properties(&self) -> Vec<Property> {
        let first = |v: &[String]| v.first().cloned();
        vec![
            Property {
                name: "cost-model coefficients alpha >= 0 and beta >= 0",
                pass: self.coefficients.is_empty(),
                worst: None,
                worst_at: first(&self.coefficients),
                detail: format!("{} negative or non-finite coefficients", self.coefficients.len()),
            },
            Property {
                name: "closed form matches event simulation",
                pass: self.equiv.value.is_none_or(|v| v <= EQUIV_TOL),
                worst: self.equiv.value,
                worst_at: self.equiv.at.clone(),
                detail: format!("max start deviation relative to makespan, tolerance {EQUIV_TOL:e}"),
            },
            Property {
                name: "schedule constraints hold",
                pass: self.violations.is_empty(),
                worst: Some(self.violations.len() as f64),
                worst_at: first(&self.violations),
                detail: format!("{} violations in {} schedules", self.violations.len(), self.schedules),
            },
            Property {
                name: "solver within 1% of brute force",
                pass: self.ratio.value.is_none_or(|v| v >= 0.99) && self.inexact.is_empty(),
                worst: self.ratio.value,
                worst_at: self.inexact.first().cloned().or_else(|| self.ratio.at.clone()),
                detail: format!(
                    "min throughput ratio; exact on {} convex instances, {} inexact",
                    self.convex,
                    self.inexact.len()
                ),
            },
            Property {
                name: "solver dominates PPPipe",
                pass: self.speedup.value.is_none_or(|v| v >= 1.0 - 1e-12),
                worst: self.speedup.value,
                worst_at: self.speedup.at.clone(),
                detail: "min speedup".into(),
            },
        ]
    }
}

fn suite(first: u64, n: usize) -> Vec<Instance> {
    let mut out = Vec::with_capacity(2 * n);
    for seed in first..first + n as u64 {
        let r = random_instance::<f64>(seed);
        out.push(Instance {
            label: format!("random {seed}"),
            model: r.model,
            cluster: r.cluster,
            lm: r.layer_models,
        });
    }
    for seed in first..first + n as u64 {
        let r = calibrated_instance::<f64>(seed);
        out.push(Instance {
            label: format!("calibrated {seed}"),
            model: r.model,
            cluster: r.cluster,
            lm: r.layer_models,
        });
    }
    out
}

fn print_table(props: &[Property]) {
    println!("{:<50} {:<6} {:>14}  detail", "property", "status", "worst");
    for p in props {
        let worst = p.worst.map_or("-".to_string(), |w| format!("{w:.6e}"));
        println!(
            "{:<50} {:<6} {:>14}  {}",
            p.name,
            if p.pass { "PASS" } else { "FAIL" },
            worst,
            p.detail
        );
        if let Some(at) = &p.worst_at {
            if !p.pass || p.worst.is_some() {
                println!("{:<50} {:<6} {:>14}  at {at}", "", "", "");
            }
        }
    }
}

pub fn run(args: &ValidateArgs) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::new(Command::Validate);
    if let (Some(c), Some(m)) = (&args.config, &args.models) {
        manifest = manifest.input(c).input(m);
    } else {
        manifest.seed = Some(args.seed);
    }
    if let Some(r) = &args.report {
        manifest = manifest.output(r);
    }
    manifest.check_inputs()?;

    let mut checker = Checker::new(args.bounds);
    let instances = match (&args.config, &args.models) {
        (Some(c), Some(m)) => {
            let doc = io::load_instance(c, &args.overrides)?;
            // Coefficients are checked on the raw document so that a bad
            // value is reported by name instead of as a parse error.
            let bad = io::coefficient_violations(&io::read_json(m)?);
            if !bad.is_empty() {
                checker
                    .coefficients
                    .extend(bad.into_iter().map(|v| format!("{}: {v}", m.display())));
                Vec::new()
            } else {
                vec![Instance {
                    label: c.display().to_string(),
                    model: doc.model,
                    cluster: doc.cluster,
                    lm: io::load_models(m, &doc)?,
                }]
            }
        }
        _ => {
            if args.overrides.any() {
                return Err(CliError::invalid("--seq-len and --mem-cap need --config"));
            }
            suite(args.seed, args.instances)
        }
    };
    for inst in &instances {
        checker.check(inst)?;
    }

    let props = checker.properties();
    let report = Report {
        instances: instances.iter().map(|i| i.label.clone()).collect(),
        properties: props.clone(),
        candidates_evaluated: checker.candidates,
        solve_time_ms: args.timing.then_some(checker.solve_ms),
    };
    if let Some(r) = &args.report {
        io::write_all(vec![(r.clone(), io::to_json(&report))])?;
    }

    println!("instances {}", instances.len());
    print_table(&props);
    println!(
        "candidates_evaluated {}, solve_time_ms {:.3}",
        checker.candidates, checker.solve_ms
    );
    let failed: Vec<&str> = props.iter().filter(|p| !p.pass).map(|p| p.name).collect();
    if !failed.is_empty() {
        let mut msg = format!("{} properties failed:", failed.len());
        for p in props.iter().filter(|p| !p.pass) {
            msg.push_str(&format!("\n  - {}", p.name));
            if let Some(at) = &p.worst_at {
                msg.push_str(&format!(" ({at})"));
            }
        }
        return Err(CliError::Validation(msg));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_parse() {
        assert_eq!(
            "16,8,16".parse::<Bounds>().unwrap(),
            Bounds {
                m_a: 16,
                r_1: 8,
                r_2: 16
            }
        );
        assert!("16,8".parse::<Bounds>().is_err());
        assert!("16,0,4".parse::<Bounds>().is_err());
        assert!("a,1,1".parse::<Bounds>().is_err());
    }

    #[test]
    fn worst_tracks_direction() {
        let mut w = Worst::new(false);
        w.see(1.0, "a");
        w.see(0.5, "b");
        w.see(0.7, "c");
        assert_eq!((w.value, w.at.as_deref()), (Some(0.5), Some("b")));
    }

    #[test]
    fn small_suite_passes() {
        let mut c = Checker::new(Bounds { m_a: 8, r_1: 4, r_2: 8 });
        for inst in suite(0, 2) {
            c.check(&inst).unwrap();
        }
        assert!(c.properties().iter().all(|p| p.pass));
        assert!(c.candidates > 0);
    }
}
