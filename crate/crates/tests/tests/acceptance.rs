//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use depsched::oracle::{
    brute_force_search, calibrated_instance, deepseek_like, qwen_like, random_instance, reference_primitives,
    SearchBounds,
};
use depsched::schedule::{event_sim_with, non_overlapped_comm, verify_constraints, SchedulePolicy};
use depsched::solver::{inverse_convexity_gap, pareto_candidates, r2_max, solve_r2_with, Evaluator};
use depsched::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Instance `seed` with a feasible `(m_a, r_1, r_2)` inside `r_1, r_2 <= 4`.
fn sized_case(seed: u64) -> (oracle::RandomInstance<f64>, usize, usize, usize) {
    let mut inst = random_instance::<f64>(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (r_1, r_2, m_a) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
    inst.cluster.mem_capacity = inst.cluster.mem_capacity.max(r_1 * m_a);
    (inst, m_a, r_1, r_2)
}

fn closed_form_matches_simulation() -> Outcome {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    for seed in 0..500 {
        let (inst, m_a, r_1, r_2) = sized_case(seed);
        let (m, c, lm) = (&inst.model, &inst.cluster, &inst.layer_models);
        let cfg = PipelineConfig::conserving(m, c, r_1, m_a, r_2, Order::Asas);
        let cf = closed_form_asas(m, c, &cfg, lm).unwrap();
        let es = event_sim(m, c, &cfg, lm).unwrap();
        let starts = es.start_map();
        if starts.len() != cf.tasks.len() {
            mismatched += 1;
            continue;
        }
        for t in &cf.tasks {
            match starts.get(&t.id) {
                Some(&s) => worst = worst.max((s - t.start).abs()),
                None => mismatched += 1,
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        mismatched == 0 && worst <= 1e-9 && secs < 10.0,
        format!("500 instances, max |start diff| = {worst:.2e} ms (tol 1e-9), {secs:.2} s (limit 10 s)"),
    )
}

fn schedules_satisfy_constraints() -> Outcome {
    let mut checked = 0;
    let mut violations = 0;
    for seed in 0..500 {
        let (inst, m_a, r_1, r_2) = sized_case(seed);
        let (m, c, lm) = (&inst.model, &inst.cluster, &inst.layer_models);
        let asas = PipelineConfig::conserving(m, c, r_1, m_a, r_2, Order::Asas);
        let aass = PipelineConfig {
            order: Order::Aass,
            ..asas
        };
        let schedules = [
            closed_form_asas(m, c, &asas, lm).unwrap(),
            event_sim(m, c, &asas, lm).unwrap(),
            event_sim(m, c, &aass, lm).unwrap(),
        ];
        for s in &schedules {
            violations += verify_constraints(s, lm).len();
            checked += 1;
        }
    }
    outcome(violations == 0, format!("{checked} schedules, {violations} violations"))
}

fn solver_near_optimal() -> Outcome {
    let clock = Instant::now();
    let opts = SolverOptions { r2_cap: 16 };
    let bounds = SearchBounds::new(16, 8, 16, &Order::ALL).unwrap();
    let (mut worst, mut below, mut inexact, mut convex) = (f64::INFINITY, 0, 0, 0);
    for seed in 0..200 {
        let mut inst = random_instance::<f64>(seed);
        // Keep the solver's Pareto pairs inside the enumeration bounds.
        inst.cluster.mem_capacity = inst.cluster.mem_capacity.min(8);
        let (m, c, lm) = (&inst.model, &inst.cluster, &inst.layer_models);
        let s = search(m, c, lm, &opts).unwrap();
        let b = brute_force_search(m, c, lm, &bounds).unwrap();
        let ratio = s.predicted_throughput / b.result.predicted_throughput;
        worst = worst.min(ratio);
        if !(0.99..=1.0 + 1e-9).contains(&ratio) {
            below += 1;
        }
        if convexity_check(m, c, lm, &opts) {
            convex += 1;
            if (ratio - 1.0).abs() > 1e-9 {
                inexact += 1;
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        below == 0 && inexact == 0 && secs < 60.0,
        format!(
            "200 instances, min solver/brute-force = {worst:.6} (>= 0.99), {convex} convex instances with {inexact} inexact, {secs:.2} s (limit 60 s)"
        ),
    )
}

fn solver_speed() -> Outcome {
    let model = deepseek_like(64, 1024);
    let cluster = ClusterSpec::new(2, 6, 4096).unwrap();
    let lm = derive_layer_models(&model, &cluster, &reference_primitives::<f64>()).unwrap();
    let clock = Instant::now();
    let r = search(&model, &cluster, &lm, &SolverOptions::default()).unwrap();
    let ms = clock.elapsed().as_secs_f64() * 1000.0;
    outcome(
        ms < 1000.0,
        format!(
            "mem_capacity 4096, T 64: {ms:.1} ms over {} candidates (limit 1000 ms)",
            r.candidates_evaluated
        ),
    )
}

fn best_over_orders(ev: &Evaluator<'_, f64>, m_a: usize, r_1: usize) -> f64 {
    [SchedulePolicy::Asas, SchedulePolicy::Aass]
        .iter()
        .map(|&p| solve_r2_with(ev, m_a, r_1, p, &SolverOptions::default()).throughput)
        .fold(0.0, f64::max)
}

fn monotone_in_m_a() -> Outcome {
    let mut failed = 0;
    for seed in 0..100 {
        let mut inst = random_instance::<f64>(seed);
        inst.cluster.mem_capacity = 16;
        let ev = Evaluator::new(&inst.model, &inst.cluster, &inst.layer_models);
        let ok = (1..=4).all(|r_1| {
            let tps: Vec<f64> = (1..=16 / r_1).map(|m_a| best_over_orders(&ev, m_a, r_1)).collect();
            tps.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
        });
        failed += usize::from(!ok);
    }
    outcome(
        failed == 0,
        format!("100 instances, r_1 in 1..=4, {failed} non-monotone"),
    )
}

fn monotone_in_r_1() -> Outcome {
    let mut failed = 0;
    for seed in 0..100 {
        let mut inst = random_instance::<f64>(seed);
        inst.cluster.mem_capacity = 16;
        let (m, c) = (&inst.model, &inst.cluster);
        let ev = Evaluator::new(m, c, &inst.layer_models);
        let ok = (1..=4).all(|m_a| {
            (1..=r2_max(m, c, m_a, 8)).all(|r_2| {
                let tps: Vec<f64> = (1..=16 / m_a)
                    .map(|r_1| ev.throughput(m_a, r_1, r_2, SchedulePolicy::Asas))
                    .collect();
                tps.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12))
            })
        });
        failed += usize::from(!ok);
    }
    outcome(
        failed == 0,
        format!("100 instances, m_a in 1..=4, r_2 <= 8, {failed} non-monotone"),
    )
}

fn denominator_convex_in_inverse_r2() -> Outcome {
    let (mut failed, mut worst) = (0, f64::INFINITY);
    for seed in 0..100 {
        let inst = random_instance::<f64>(seed);
        let (m, c) = (&inst.model, &inst.cluster);
        let ev = Evaluator::new(m, c, &inst.layer_models);
        let mut ok = true;
        for (m_a, r_1) in pareto_candidates(c.mem_capacity) {
            let v: Vec<f64> = (1..=r2_max(m, c, m_a, 64)).map(|r| ev.objective(m_a, r_1, r)).collect();
            let gap = inverse_convexity_gap(&v);
            worst = worst.min(gap);
            ok &= gap >= -1e-9;
        }
        failed += usize::from(!ok);
    }
    outcome(
        failed == 0,
        format!("100 instances, min scaled second difference = {worst:.3e} (>= -1e-9), {failed} failing"),
    )
}

/// Latency-bound instance: transfers ten times their base rate under a
/// memory cap that leaves only one or two chunks to overlap them.
fn comm_bound_instance(base: ModelSpec, ag: usize, mem: usize) -> (ModelSpec, ClusterSpec, LayerCostModels<f64>) {
    let cluster = ClusterSpec::new(ag, 8 - ag, mem).unwrap();
    let ref_tokens = (ag * base.top_k * base.seq_len) as f64 / base.num_experts as f64;
    let lin = |a: f64, b: f64| LinearCostModel::new(a, b).unwrap();
    let t_s = if base.n_shared > 0 {
        lin(0.1, 0.5)
    } else {
        LinearCostModel::zero()
    };
    let base_rate = 0.1 / ref_tokens;
    let lm = LayerCostModels {
        t_a: lin(0.1, 1.0),
        t_s,
        t_e: lin(0.1, 0.5 / ref_tokens),
        t_a2e: lin(0.02, 10.0 * base_rate),
    };
    (base, cluster, lm)
}

fn dominates_baseline() -> Outcome {
    let opts = SolverOptions::default();
    let mut lost = 0;
    for seed in 0..200 {
        let inst = random_instance::<f64>(seed);
        let (m, c, lm) = (&inst.model, &inst.cluster, &inst.layer_models);
        let f = search(m, c, lm, &opts).unwrap();
        let p = pppipe_best(m, c, lm, &opts).unwrap();
        lost += usize::from(f.predicted_throughput < p.predicted_throughput * (1.0 - 1e-12));
    }
    let mut min_speedup = f64::INFINITY;
    let mut cases = 0;
    for base in [deepseek_like(1, 1024), qwen_like(1, 1024)] {
        for layers in [1, 4, 16, 64] {
            for ag in [1, 2, 4] {
                for mem in [1, 2] {
                    let (m, c, lm) = comm_bound_instance(ModelSpec { layers, ..base }, ag, mem);
                    let f = search(&m, &c, &lm, &opts).unwrap();
                    let p = pppipe_best(&m, &c, &lm, &opts).unwrap();
                    min_speedup = min_speedup.min(f.predicted_throughput / p.predicted_throughput);
                    cases += 1;
                }
            }
        }
    }
    outcome(
        lost == 0 && min_speedup > 1.1,
        format!(
            "200 instances, {lost} below baseline; {cases} communication-bound instances, min speedup {min_speedup:.3}x (> 1.1x)"
        ),
    )
}

fn exposed_communication_ordering() -> Outcome {
    let opts = SolverOptions::default();
    let mut failed = 0;
    let (mut naive_sum, mut pp_sum, mut fd_sum) = (0.0, 0.0, 0.0);
    for seed in 0..50 {
        let inst = calibrated_instance::<f64>(seed);
        let (m, c, lm) = (&inst.model, &inst.cluster, &inst.layer_models);
        let naive_cfg = PipelineConfig::conserving(m, c, 1, c.mem_capacity, 1, Order::Asas);
        let naive = event_sim_with(m, c, &naive_cfg, lm, SchedulePolicy::PpPipe).unwrap();
        let p = pppipe_best(m, c, lm, &opts).unwrap();
        let pp = event_sim_with(m, c, &p.best, lm, SchedulePolicy::PpPipe).unwrap();
        let f = search(m, c, lm, &opts).unwrap();
        let fd = event_sim_with(m, c, &f.best, lm, f.policy).unwrap();
        let (a, b, d) = (
            non_overlapped_comm(&naive),
            non_overlapped_comm(&pp),
            non_overlapped_comm(&fd),
        );
        let tol = 1e-9 * a.max(1.0);
        failed += usize::from(!(a + tol >= b && b + tol >= d));
        naive_sum += a;
        pp_sum += b;
        fd_sum += d;
    }
    outcome(
        failed == 0,
        format!(
            "50 calibrated instances, {failed} out of order; mean exposed ms naive {:.2} >= baseline {:.2} >= searched {:.2}",
            naive_sum / 50.0,
            pp_sum / 50.0,
            fd_sum / 50.0
        ),
    )
}

fn calibration_fidelity() -> Outcome {
    let (alpha, beta) = (0.17, 8.59e-11);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    // GEMM sizes from 10^8 to 10^10 FLOPs, 30 trials per size.
    let samples: Vec<_> = (0..25)
        .flat_map(|k| std::iter::repeat_n(10f64.powf(8.0 + 2.0 * k as f64 / 24.0), 30))
        .map(|w| {
            let noise = 1.0 + rng.gen_range(-0.02..=0.02);
            MeasurementSample::new(w, (alpha + beta * w) * noise).unwrap()
        })
        .collect();
    let rep = fit_linear(&samples).unwrap();
    let ea = (rep.model.alpha() - alpha).abs() / alpha;
    let eb = (rep.model.beta() - beta).abs() / beta;
    outcome(
        ea <= 0.05 && eb <= 0.05 && rep.r_squared > 0.99,
        format!(
            "alpha err {:.2}%, beta err {:.2}% (<= 5%), R^2 = {:.6} (> 0.99)",
            ea * 100.0,
            eb * 100.0,
            rep.r_squared
        ),
    )
}

fn pareto_set_enumeration() -> Outcome {
    let mut expected: Vec<(usize, usize)> = Vec::new();
    for m_a in (1..=16).rev() {
        let r_1 = 16 / m_a;
        if expected.iter().all(|&(_, r)| r != r_1) {
            expected.push((m_a, r_1));
        }
    }
    let mut inst = random_instance::<f64>(0);
    inst.cluster.mem_capacity = 16;
    let r = search(
        &inst.model,
        &inst.cluster,
        &inst.layer_models,
        &SolverOptions::default(),
    )
    .unwrap();
    let visited = r.pairs();
    outcome(
        pareto_candidates(16) == expected && visited == expected,
        format!("solver pairs {visited:?}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("closed form equals event simulation", closed_form_matches_simulation),
        (
            "generated schedules satisfy all constraints",
            schedules_satisfy_constraints,
        ),
        ("search within 1% of brute force", solver_near_optimal),
        ("search under 1 s at scale", solver_speed),
        ("throughput non-decreasing in m_a", monotone_in_m_a),
        ("throughput non-decreasing in r_1", monotone_in_r_1),
        ("objective convex in 1/r_2", denominator_convex_in_inverse_r2),
        ("search dominates ping-pong baseline", dominates_baseline),
        ("exposed communication ordering", exposed_communication_ordering),
        ("calibration fidelity", calibration_fidelity),
        ("Pareto pair enumeration", pareto_set_enumeration),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {:>2} {}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
        failures += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
