//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use pacsynth::engine::{StunConfig, StunEngine};
use pacsynth::guarantee::{comparison_family, replay_with_g, Phase, StoppingFunction, TraceRow};
use pacsynth::harness::{self, cmd_eval, cmd_run, cmd_sample, cmd_trace_shrinkage, verify_instance, Mode, RunOptions};
use pacsynth::{sample_complexity, Error, GuaranteeParams, HypothesisSize, SynthesisEngine, Task};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    println!("{} {name}: {} ({:.1}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, start.elapsed().as_secs_f64());
    o.pass
}

fn load_dir(sub: &str) -> Vec<Task> {
    harness::suite_files(&common::tasks_dir(sub)).unwrap().iter().map(|p| Task::load(p).unwrap()).collect()
}

/// Traces collected by the run-based checks, audited for monotonicity and
/// the termination envelope.
#[derive(Default)]
struct Traces {
    runs: Vec<(String, usize, Vec<TraceRow>)>,
    shrinkage: Vec<(String, Vec<Vec<HypothesisSize>>)>,
}

fn sample_complexity_exact() -> Outcome {
    let size = HypothesisSize::from(18u32);
    let start = Instant::now();
    let m = sample_complexity(&size, 0.05, 0.02).unwrap();
    let took = start.elapsed();
    Outcome {
        pass: m == 137 && took < Duration::from_millis(1),
        detail: format!("m(18, 0.05, 0.02) = {m} in {:.1}µs", took.as_secs_f64() * 1e6),
    }
}

fn counting_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let (mut checked, mut nested, mut bad) = (0usize, 0usize, Vec::new());
    let (mut by_size, mut programs) = ([0usize; 6], 0u128);
    let deadline = Instant::now() + Duration::from_secs(300);
    while checked < 240 && Instant::now() < deadline {
        let size = 1 + (checked % 5);
        let nesting = checked % 2;
        let Some(inst) = common::random_instance(&mut rng, size, nesting, 2_000_000) else { continue };
        match verify_instance(&inst) {
            Ok(lines) => {
                if !lines.is_empty() {
                    bad.push(format!("instance {checked}: {}", lines[0]));
                }
            }
            Err(e) => bad.push(format!("instance {checked}: {e}")),
        }
        nested += inst.max_nesting;
        by_size[inst.max_size] += 1;
        programs += pacsynth::brute::BruteConfig::new(
            inst.components.clone(),
            inst.output,
            inst.max_size,
            inst.max_nesting,
            Vec::new(),
        )
        .estimate();
        checked += 1;
    }
    Outcome {
        pass: checked >= 200 && bad.is_empty(),
        detail: format!(
            "{checked} instances ({nested} with a conditional, max sizes 1..5: {:?}, {programs} programs), {} discrepancies{}",
            &by_size[1..],
            bad.len(),
            bad.first().map(|b| format!("; first: {b}")).unwrap_or_default()
        ),
    }
}

fn monotone(traces: &Traces) -> Outcome {
    let mut violations = Vec::new();
    let mut rows = 0usize;
    for (name, _, trace) in &traces.runs {
        for w in trace.windows(2) {
            rows += 1;
            let (a, b) = (&w[0], &w[1]);
            if a.tier != b.tier {
                continue;
            }
            if b.size_upper > a.size_upper || b.threshold > a.threshold {
                violations.push(format!("{name} tier {} iteration {}", b.tier, b.iteration));
            }
        }
    }
    for (name, cols) in &traces.shrinkage {
        for w in cols.windows(2) {
            rows += 1;
            if w[0].iter().zip(&w[1]).any(|(a, b)| b > a) {
                violations.push(format!("{name} shrinkage"));
            }
        }
    }
    Outcome {
        pass: rows > 0 && violations.is_empty(),
        detail: format!(
            "{} run traces, {} shrinkage traces, {rows} steps, {} violations",
            traces.runs.len(),
            traces.shrinkage.len(),
            violations.len()
        ),
    }
}

fn envelope(traces: &Traces) -> Outcome {
    let (mut phases, mut violations) = (0usize, Vec::new());
    for (name, k, trace) in &traces.runs {
        let mut tiers: Vec<usize> = trace.iter().map(|r| r.tier).collect();
        tiers.dedup();
        for tier in tiers {
            let rows: Vec<&TraceRow> = trace.iter().filter(|r| r.tier == tier).collect();
            if !rows.iter().any(|r| r.phase == Phase::Validation) {
                // the space emptied during sampling; the loop did not run out
                continue;
            }
            let n0 = rows[0].threshold;
            let last = rows.iter().rev().find(|r| r.phase == Phase::Sampling).unwrap();
            let (s, n) = (last.samples_seen as i64, last.threshold);
            phases += 1;
            if !(n < s && s <= n0 + *k as i64) {
                violations.push(format!("{name} tier {tier}: n={n} s={s} n0={n0}"));
            }
        }
    }
    Outcome {
        pass: phases > 0 && violations.is_empty(),
        detail: format!("{phases} sampling phases, {} violations", violations.len()),
    }
}

fn statistical(traces: &mut Traces) -> Outcome {
    let tasks = load_dir("finite");
    let (eps, delta, trials) = (0.2, 0.1, 300usize);
    let mut parts = Vec::new();
    let mut pass = tasks.len() >= 3;
    for task in &tasks {
        if task.sampler.finite_support(harness::FINITE_DOMAIN_LIMIT).is_none() {
            pass = false;
            parts.push(format!("{}: not finite", task.name()));
            continue;
        }
        let mut bad = 0usize;
        for t in 0..trials {
            let opts =
                RunOptions { epsilon: Some(eps), delta: Some(delta), seed: 7_000 + t as u64, ..RunOptions::default() };
            let r = cmd_run(task, &opts).unwrap();
            let exact = r.held_out.as_ref().map(|h| h.exact).unwrap_or(true);
            assert!(exact, "finite task evaluated by sampling");
            if r.held_out.as_ref().is_none_or(|h| h.error > eps) {
                bad += 1;
            }
            traces.runs.push((task.name().into(), r.step_k, r.trace));
        }
        let frac = bad as f64 / trials as f64;
        pass &= frac <= delta + 0.04;
        parts.push(format!("{} {bad}/{trials}", task.name()));
    }
    Outcome { pass, detail: format!("error > {eps} in: {} (limit {:.2})", parts.join(", "), delta + 0.04) }
}

fn p3_bound() -> Outcome {
    let params = GuaranteeParams::new(0.05, 0.02, 20).unwrap();
    let applies = params.optimality_applies();
    let tasks: Vec<Task> = load_dir("desk")
        .into_iter()
        .filter(|t| matches!(&t.target, pacsynth::oracle::TargetKind::Dsl(e) if e.conditions() == 0))
        .collect();
    let (mut sequences, mut violations, mut worst) = (0usize, Vec::new(), 0.0f64);
    let mut seed = 0u64;
    while sequences < 20 && !tasks.is_empty() {
        let task = &tasks[sequences % tasks.len()];
        seed += 1;
        let mut engine = StunEngine::new(task.components.clone(), task.output_sort, StunConfig::new(4, 0)).unwrap();
        engine.update_hypothesis(&[]).unwrap();
        let initial = engine.compute_size();
        let owned = comparison_family(&params, &initial);
        let default = params.default_g();
        let mut family: Vec<&dyn StoppingFunction> = owned.iter().map(|b| b.as_ref()).collect();
        family.push(&default);
        let mut len = 1024usize;
        let totals = loop {
            let seq = cmd_sample(task, seed, len).unwrap();
            match replay_with_g(&seq, &mut engine, &params, &family) {
                Ok(t) => break t,
                Err(Error::OracleExhausted { .. }) => len *= 2,
                Err(e) => panic!("{e}"),
            }
        };
        let def = totals.last().unwrap().total_samples;
        let min = totals.iter().map(|t| t.total_samples).min().unwrap();
        worst = worst.max(def as f64 / min.max(1) as f64);
        if def > 2 * min {
            violations.push(format!("{} seed {seed}: {def} > 2 x {min}", task.name()));
        }
        sequences += 1;
    }
    Outcome {
        pass: applies && sequences >= 20 && violations.is_empty(),
        detail: format!(
            "{sequences} sequences, {} stopping functions, worst ratio {worst:.2}, {} violations",
            13 + 1,
            violations.len()
        ),
    }
}

fn overfitting(traces: &mut Traces) -> Outcome {
    let dir = common::tasks_dir("desk");
    let tasks = load_dir("desk");
    let conditional = tasks
        .iter()
        .filter(|t| matches!(&t.target, pacsynth::oracle::TargetKind::Dsl(e) if e.conditions() > 0))
        .count();
    let report =
        cmd_eval(&dir, 3, Some(4), &RunOptions { epsilon: Some(0.05), delta: Some(0.02), ..RunOptions::default() })
            .unwrap();
    for row in &report.rows {
        if let Some(r) = &row.report {
            if r.mode == Mode::Synguar {
                traces.runs.push((row.task.clone(), r.step_k, r.trace.clone()));
            }
        }
    }
    let s = report.summary_for(Mode::Synguar).unwrap();
    let b = report.summary_for(Mode::Baseline).unwrap();
    let sf = s.correct_rows as f64 / s.rows.max(1) as f64;
    let bf = b.correct_rows as f64 / b.rows.max(1) as f64;
    Outcome {
        pass: tasks.len() >= 8 && conditional >= 3 && sf >= 0.9 && bf < 0.5,
        detail: format!(
            "{} tasks ({conditional} conditional): guaranteed {}/{} correct, baseline(4) {}/{} correct",
            tasks.len(),
            s.correct_rows,
            s.rows,
            b.correct_rows,
            b.rows
        ),
    }
}

fn determinism() -> Outcome {
    let mut same = 0usize;
    let mut total = 0usize;
    let tmp = tempfile::tempdir().unwrap();
    for task in load_dir("desk").iter().take(4) {
        for seed in [3u64, 11] {
            let opts = RunOptions { seed, ..RunOptions::default() };
            let mut bytes = Vec::new();
            for i in 0..2 {
                let dir = tmp.path().join(format!("{}-{seed}-{i}", task.name()));
                cmd_run(task, &opts).unwrap().write(&dir).unwrap();
                bytes.push((
                    std::fs::read(dir.join("report.json")).unwrap(),
                    std::fs::read(dir.join("trace.csv")).unwrap(),
                ));
            }
            total += 1;
            same += usize::from(bytes[0] == bytes[1]);
        }
    }
    let dir = common::tasks_dir("desk");
    let opts = RunOptions { seed: 5, ..RunOptions::default() };
    let a = serde_json::to_string(&cmd_eval(&dir, 1, Some(4), &opts).unwrap()).unwrap();
    let b = serde_json::to_string(&cmd_eval(&dir, 1, Some(4), &opts).unwrap()).unwrap();
    total += 1;
    same += usize::from(a == b);
    Outcome { pass: same == total, detail: format!("{same}/{total} report pairs byte-identical") }
}

fn tier_cost(traces: &mut Traces) -> Outcome {
    let (mut checked, mut bad) = (0usize, Vec::new());
    for task in load_dir("desk") {
        let opts = RunOptions::default();
        let r = cmd_run(&task, &opts).unwrap();
        let written_h0 = matches!(&task.target, pacsynth::oracle::TargetKind::Dsl(e) if e.conditions() == 0);
        let shrink = cmd_trace_shrinkage(&task, &opts, 60).unwrap();
        traces.shrinkage.push((task.name().into(), shrink.into_iter().map(|r| r.sizes).collect()));
        if !(written_h0 || r.tier == Some(0)) {
            continue;
        }
        let examples = cmd_sample(&task, opts.seed, r.total_samples).unwrap();
        let mut engine =
            StunEngine::new(task.components.clone(), task.output_sort, StunConfig::new(opts.max_size(&task), 1))
                .unwrap();
        engine.update_hypothesis(&examples).unwrap();
        let sizes = engine.tier_sizes();
        let d = r.delta / 3.0;
        let m0 = sample_complexity(&sizes[0], r.epsilon, d).unwrap();
        let m1 = sample_complexity(&sizes[1], r.epsilon, d).unwrap();
        checked += 1;
        if m1 <= m0 {
            bad.push(format!("{}: m(H1) {m1} <= m(H0) {m0}", task.name()));
        }
        println!("  {}: |H0| = {}, |H1| = {}, m(H0) = {m0}, m(H1) = {m1}", task.name(), sizes[0], sizes[1]);
    }
    Outcome { pass: checked > 0 && bad.is_empty(), detail: format!("{checked} tasks in H0, {} violations", bad.len()) }
}

fn main() {
    let mut traces = Traces::default();
    let mut ok = true;
    ok &= check("sample-complexity exactness", sample_complexity_exact);
    ok &= check("counting-oracle equivalence", counting_oracle);
    ok &= check("statistical (epsilon, delta) guarantee", || statistical(&mut traces));
    ok &= check("P3 stopping-function bound", p3_bound);
    ok &= check("overfitting contrast", || overfitting(&mut traces));
    ok &= check("determinism", determinism);
    ok &= check("tier-cost ordering", || tier_cost(&mut traces));
    ok &= check("monotone shrinkage", || monotone(&traces));
    ok &= check("termination envelope", || envelope(&traces));
    if !ok {
        std::process::exit(1);
    }
}
