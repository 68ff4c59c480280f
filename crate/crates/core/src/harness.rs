//! Experiment driver behind the command-line front end: single runs, suite
//! evaluation against a fixed-sample baseline, shrinkage traces, count
//! audits and example dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brute::{exact_counts, BruteConfig, BruteError};
use crate::dsl::{ComponentSet, Env, Sort, Value};
use crate::engine::{Program, StunConfig, StunEngine};
use crate::enumerate::{EnumError, Enumeration};
use crate::error::{Error, Result};
use crate::guarantee::{
    run_tiered, write_trace_csv, ExampleSource, GuaranteeParams, HypothesisSize, ReplaySource, SynthesisEngine,
    TraceRow,
};
use crate::oracle::{Example, Task, TaskError, TaskOracle, EVALUATION_STREAM};
use crate::unify::{cluster, BoolClusters, ConsistencyVector, Mark, Pattern, Unifier};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_EVAL_SAMPLES: usize = 10_000;
/// Input domains with at most this many points are evaluated exactly.
pub const FINITE_DOMAIN_LIMIT: usize = 100_000;

/// Overrides for the task's own settings.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub step_k: Option<usize>,
    pub seed: u64,
    pub max_size: Option<usize>,
    pub max_nesting: Option<usize>,
    pub eval_samples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            epsilon: None,
            delta: None,
            step_k: None,
            seed: 0,
            max_size: None,
            max_nesting: None,
            eval_samples: DEFAULT_EVAL_SAMPLES,
        }
    }
}

impl RunOptions {
    pub fn params(&self, task: &Task) -> Result<GuaranteeParams> {
        let g = &task.spec.guarantee;
        GuaranteeParams::new(
            self.epsilon.unwrap_or(g.epsilon),
            self.delta.unwrap_or(g.delta),
            self.step_k.unwrap_or(g.k),
        )
    }

    pub fn max_size(&self, task: &Task) -> usize {
        self.max_size.unwrap_or(task.spec.limits.max_size)
    }

    pub fn max_nesting(&self, task: &Task) -> usize {
        self.max_nesting.unwrap_or(task.spec.limits.max_nesting)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Synguar,
    Baseline,
}

/// Held-out comparison of a program against the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    /// Fraction (or exact probability mass) of inputs where they differ.
    pub error: f64,
    /// True when computed over the whole finite input domain.
    pub exact: bool,
    /// Number of evaluation points.
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub task: String,
    pub mode: Mode,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub step_k: usize,
    pub program: Option<Program>,
    pub tier: Option<usize>,
    pub total_samples: usize,
    pub validation_samples: usize,
    /// Examples seen by each tier that ran.
    pub tier_samples: Vec<usize>,
    pub trace: Vec<TraceRow>,
    pub held_out: Option<HeldOut>,
    /// Not serialized so that reports of identical runs are identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    /// Zero held-out error.
    pub fn correct(&self) -> bool {
        self.held_out.as_ref().is_some_and(|h| h.error == 0.0)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        write_trace_csv(&self.trace, fs::File::create(dir.join("trace.csv"))?)?;
        Ok(())
    }
}

fn engines(task: &Task, opts: &RunOptions) -> Result<Vec<StunEngine>> {
    StunEngine::tiers(task.components.clone(), task.output_sort, opts.max_size(task), opts.max_nesting(task))
}

/// Synthesizes a program for `task` with the tiered guarantee loop.
pub fn cmd_run(task: &Task, opts: &RunOptions) -> Result<RunReport> {
    let start = Instant::now();
    let mut oracle = TaskOracle::new(task, opts.seed)?;
    let mut report = run_with_source(task, opts, &mut oracle)?;
    oracle.finish()?;
    report.held_out = match &report.program {
        Some(p) => Some(held_out(task, p, opts.seed, opts.eval_samples)?),
        None => None,
    };
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Runs the tiered loop on a fixed example list. Running out of examples is
/// an error.
pub fn cmd_run_examples(task: &Task, opts: &RunOptions, examples: &[Example]) -> Result<RunReport> {
    let start = Instant::now();
    let mut src = ReplaySource::new(examples);
    let mut report = run_with_source(task, opts, &mut src)?;
    report.wall_time = start.elapsed();
    Ok(report)
}

fn run_with_source<S: ExampleSource<Example = Example>>(
    task: &Task,
    opts: &RunOptions,
    src: &mut S,
) -> Result<RunReport> {
    let params = opts.params(task)?;
    let mut engines = engines(task, opts)?;
    let run = run_tiered(src, &mut engines, &params)?;
    Ok(RunReport {
        format_version: FORMAT_VERSION,
        task: task.name().into(),
        mode: Mode::Synguar,
        seed: opts.seed,
        epsilon: params.epsilon,
        delta: params.delta,
        step_k: params.step_k,
        tier: run.tier,
        program: run.outcome.result,
        total_samples: run.outcome.total_samples,
        validation_samples: run.outcome.validation_samples,
        tier_samples: run.tier_samples,
        trace: run.trace,
        held_out: None,
        wall_time: Duration::ZERO,
    })
}

/// Draws exactly `n` examples and returns the least consistent program of
/// any tier, without a guarantee.
pub fn cmd_baseline(task: &Task, opts: &RunOptions, n: usize) -> Result<RunReport> {
    let start = Instant::now();
    let params = opts.params(task)?;
    let mut oracle = TaskOracle::new(task, opts.seed)?;
    let examples = (0..n).map(|_| oracle.draw()).collect::<Result<Vec<_>>>()?;
    oracle.finish()?;
    let mut engine = StunEngine::new(
        task.components.clone(),
        task.output_sort,
        StunConfig::new(opts.max_size(task), opts.max_nesting(task)),
    )?;
    engine.update_hypothesis(&examples)?;
    let program = engine.pick_program();
    let held_out = match &program {
        Some(p) => Some(held_out(task, p, opts.seed, opts.eval_samples)?),
        None => None,
    };
    Ok(RunReport {
        format_version: FORMAT_VERSION,
        task: task.name().into(),
        mode: Mode::Baseline,
        seed: opts.seed,
        epsilon: params.epsilon,
        delta: params.delta,
        step_k: params.step_k,
        tier: program.as_ref().map(|p| p.tier),
        program,
        total_samples: n,
        validation_samples: 0,
        tier_samples: vec![n],
        trace: Vec::new(),
        held_out,
        wall_time: start.elapsed(),
    })
}

/// Disagreement between `program` and the target: exact over a finite input
/// domain, otherwise over `samples` draws from the evaluation stream.
pub fn held_out(task: &Task, program: &Program, seed: u64, samples: usize) -> Result<HeldOut> {
    let expr = program.expr.as_ref().ok_or_else(|| Error::InvalidParams("program has no expression".into()))?;
    let mut target = task.target()?;
    if let Some(support) = task.sampler.finite_support(FINITE_DOMAIN_LIMIT) {
        let mut err = 0.0;
        for (env, p) in &support {
            let want = crate::oracle::make_example(&mut target, &task.signature, task.output_sort, env.clone())?.output;
            if expr.eval(env) != want {
                err += p;
            }
        }
        target.finish()?;
        return Ok(HeldOut { error: err, exact: true, points: support.len() });
    }
    drop(target);
    let mut oracle = TaskOracle::with_stream(task, seed, EVALUATION_STREAM)?;
    let mut wrong = 0usize;
    for _ in 0..samples {
        let e = oracle.draw()?;
        if expr.eval(&e.inputs) != e.output {
            wrong += 1;
        }
    }
    oracle.finish()?;
    let error = if samples == 0 { 0.0 } else { wrong as f64 / samples as f64 };
    Ok(HeldOut { error, exact: false, points: samples })
}

/// One suite row: a run or the error that stopped it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub task: String,
    pub trial: usize,
    pub mode: Mode,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

impl SuiteRow {
    pub fn correct(&self) -> bool {
        self.report.as_ref().is_some_and(RunReport::correct)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub rows: usize,
    pub correct_rows: usize,
    /// Tasks correct in every trial.
    pub tasks_all_correct: usize,
    pub mean_samples: f64,
    pub mean_held_out_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub format_version: u32,
    pub trials: usize,
    pub baseline_n: Option<usize>,
    pub rows: Vec<SuiteRow>,
    pub summary: Vec<ModeSummary>,
}

impl SuiteReport {
    pub fn summarize(rows: &[SuiteRow], mode: Mode) -> ModeSummary {
        let mine: Vec<&SuiteRow> = rows.iter().filter(|r| r.mode == mode).collect();
        let reports: Vec<&RunReport> = mine.iter().filter_map(|r| r.report.as_ref()).collect();
        let mut tasks: Vec<&str> = mine.iter().map(|r| r.task.as_str()).collect();
        tasks.sort_unstable();
        tasks.dedup();
        let errs: Vec<f64> = reports.iter().map(|r| r.held_out.as_ref().map_or(1.0, |h| h.error)).collect();
        let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let samples: Vec<f64> = reports.iter().map(|r| r.total_samples as f64).collect();
        ModeSummary {
            mode,
            rows: mine.len(),
            correct_rows: mine.iter().filter(|r| r.correct()).count(),
            tasks_all_correct: tasks
                .iter()
                .filter(|t| mine.iter().filter(|r| r.task == **t).all(|r| r.correct()))
                .count(),
            mean_samples: mean(&samples),
            mean_held_out_error: mean(&errs),
        }
    }

    pub fn summary_for(&self, mode: Mode) -> Option<&ModeSummary> {
        self.summary.iter().find(|s| s.mode == mode)
    }
}

/// Task files (`*.json`) in `dir`, sorted by path.
pub fn suite_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| TaskError::Read { path: dir.into(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Seed for one trial, derived from the base seed.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(trial as u64)
}

/// Runs every task of a suite `trials` times in guarantee mode and, when
/// `baseline_n` is set, in fixed-sample mode. Failures are recorded per row.
pub fn cmd_eval(suite_dir: &Path, trials: usize, baseline_n: Option<usize>, opts: &RunOptions) -> Result<SuiteReport> {
    let files = suite_files(suite_dir)?;
    let tasks: Vec<std::result::Result<Task, String>> =
        files.iter().map(|f| Task::load(f).map_err(|e| e.to_string())).collect();
    let mut jobs = Vec::new();
    for (i, _) in tasks.iter().enumerate() {
        for trial in 0..trials {
            jobs.push((i, trial, Mode::Synguar));
            if baseline_n.is_some() {
                jobs.push((i, trial, Mode::Baseline));
            }
        }
    }
    let rows: Vec<SuiteRow> = jobs
        .par_iter()
        .map(|&(i, trial, mode)| {
            let name = match &tasks[i] {
                Ok(t) => t.name().to_string(),
                Err(_) => files[i].display().to_string(),
            };
            let result = tasks[i].as_ref().map_err(Clone::clone).and_then(|task| {
                let o = RunOptions { seed: trial_seed(opts.seed, trial), ..opts.clone() };
                match mode {
                    Mode::Synguar => cmd_run(task, &o),
                    Mode::Baseline => cmd_baseline(task, &o, baseline_n.unwrap_or(0)),
                }
                .map_err(|e| e.to_string())
            });
            let (report, error) = match result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e)),
            };
            SuiteRow { task: name, trial, mode, report, error }
        })
        .collect();
    let mut summary = vec![SuiteReport::summarize(&rows, Mode::Synguar)];
    if baseline_n.is_some() {
        summary.push(SuiteReport::summarize(&rows, Mode::Baseline));
    }
    Ok(SuiteReport { format_version: FORMAT_VERSION, trials, baseline_n, rows, summary })
}

/// Tier sizes after each of the first `n` examples.
#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkRow {
    pub samples_seen: usize,
    pub sizes: Vec<HypothesisSize>,
}

pub fn cmd_trace_shrinkage(task: &Task, opts: &RunOptions, n: usize) -> Result<Vec<ShrinkRow>> {
    if n == 0 {
        return Err(Error::InvalidParams("at least one example is required".into()));
    }
    let mut oracle = TaskOracle::new(task, opts.seed)?;
    let examples = (0..n).map(|_| oracle.draw()).collect::<Result<Vec<_>>>()?;
    oracle.finish()?;
    let mut engine = StunEngine::new(
        task.components.clone(),
        task.output_sort,
        StunConfig::new(opts.max_size(task), opts.max_nesting(task)),
    )?;
    (0..=n)
        .map(|i| {
            engine.update_hypothesis(&examples[..i])?;
            Ok(ShrinkRow { samples_seen: i, sizes: engine.tier_sizes() })
        })
        .collect()
}

pub fn write_shrinkage_csv<W: Write>(rows: &[ShrinkRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let tiers = rows.first().map_or(0, |r| r.sizes.len());
    let mut header = vec!["samples_seen".to_string()];
    header.extend((0..tiers).map(|t| format!("h{t}")));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.samples_seen.to_string()];
        rec.extend(r.sizes.iter().map(ToString::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Draws `n` examples from the task.
pub fn cmd_sample(task: &Task, seed: u64, n: usize) -> Result<Vec<Example>> {
    let mut oracle = TaskOracle::new(task, seed)?;
    let examples = (0..n).map(|_| oracle.draw()).collect::<Result<Vec<_>>>()?;
    oracle.finish()?;
    Ok(examples)
}

/// One counting instance to audit.
#[derive(Clone, Debug)]
pub struct CountInstance {
    pub components: Arc<ComponentSet>,
    pub output: Sort,
    pub max_size: usize,
    pub max_nesting: usize,
    pub examples: Vec<Example>,
    pub domain: Option<Vec<Env>>,
}

/// Compares every table count, cluster count, pattern count and tier size
/// against exhaustive evaluation. Returns one line per discrepancy.
pub fn verify_instance(inst: &CountInstance) -> Result<Vec<String>> {
    let inputs: Vec<Env> = inst.examples.iter().map(|e| e.inputs.clone()).collect();
    let outputs: Vec<Value> = inst.examples.iter().map(|e| e.output.clone()).collect();
    let mut cfg =
        BruteConfig::new(inst.components.clone(), inst.output, inst.max_size, inst.max_nesting, inputs.clone());
    cfg.domain = inst.domain.clone();
    let brute = exact_counts(&cfg, &outputs)?;
    let table = Enumeration::new(inst.components.clone(), inputs, inst.max_size)?;
    let mut out = Vec::new();
    let show = |vs: &[Value]| vs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");

    let mut seen = 0usize;
    for ((sort, values, size), n) in &brute.per_vector {
        seen += 1;
        let got = table.count(&crate::enumerate::ValueVector::new(*sort, values.clone()), *size);
        if &got != n {
            out.push(format!("count {sort} [{}] size {size}: enumerator {got}, exhaustive {n}", show(values)));
        }
    }
    let stored: usize = Sort::ALL.iter().map(|s| table.entries(*s).count()).sum();
    if stored != seen {
        out.push(format!("table has {stored} entries, exhaustive evaluation has {seen}"));
    }

    let maps = cluster(&table, inst.output, &outputs);
    let bools = BoolClusters::new(&table);
    for (cv, n) in &brute.per_consistency[0] {
        let got = maps.count_c(&ConsistencyVector::from_bools(cv));
        if &got != n {
            out.push(format!("count_c {}: clustering {got}, exhaustive {n}", ConsistencyVector::from_bools(cv)));
        }
    }
    if maps.clusters().len() != brute.per_consistency[0].len() {
        out.push(format!(
            "{} clusters, exhaustive evaluation has {}",
            maps.clusters().len(),
            brute.per_consistency[0].len()
        ));
    }

    let mut u = Unifier::new(&maps, &bools);
    for marks in all_patterns(outputs.len()) {
        let p = Pattern::new(&marks);
        let opt: Vec<Option<bool>> = marks
            .iter()
            .map(|m| match m {
                Mark::Correct => Some(true),
                Mark::Wrong => Some(false),
                Mark::Any => None,
            })
            .collect();
        for i in 0..=inst.max_nesting {
            let got = u.count(&p, i)?;
            let want = brute.pattern_count(&opt, i);
            if got != want {
                out.push(format!("pattern {p} with {i} conditionals: unification {got}, exhaustive {want}"));
            }
        }
    }
    for t in 0..=inst.max_nesting {
        let got = u.tier_size(t)?;
        if got.as_biguint() != &brute.tier_totals[t] {
            out.push(format!("tier {t} size: unification {got}, exhaustive {}", brute.tier_totals[t]));
        }
        if let Some(sem) = &brute.semantic_totals {
            if got.as_biguint() < &BigUint::from(sem[t]) {
                out.push(format!("tier {t} size {got} is below {} distinct behaviours", sem[t]));
            }
        }
        if let Some(c) = u.unify_pick(t)? {
            if let Some(bad) = inst.examples.iter().find(|e| c.expr.eval(&e.inputs) != e.output) {
                out.push(format!("tier {t} pick {} is wrong on {}", c.text, bad.inputs.get(0)));
            }
        } else if !got.is_zero() {
            out.push(format!("tier {t} has size {got} but no pick"));
        }
    }
    Ok(out)
}

fn all_patterns(n: usize) -> Vec<Vec<Mark>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                [Mark::Correct, Mark::Wrong, Mark::Any].into_iter().map(move |m| {
                    let mut q = p.clone();
                    q.push(m);
                    q
                })
            })
            .collect();
    }
    out
}

/// Audits the task's counts on `n` drawn examples.
pub fn cmd_verify_counts(task: &Task, opts: &RunOptions, n: usize) -> Result<Vec<String>> {
    let examples = cmd_sample(task, opts.seed, n)?;
    verify_instance(&CountInstance {
        components: task.components.clone(),
        output: task.output_sort,
        max_size: opts.max_size(task),
        max_nesting: opts.max_nesting(task),
        examples,
        domain: task.sampler.finite_support(FINITE_DOMAIN_LIMIT).map(|s| s.into_iter().map(|(e, _)| e).collect()),
    })
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Oracle(_) => 5,
        Error::Enumeration(EnumError::EntryCap { .. }) | Error::Brute(BruteError::Cap { .. }) => 4,
        _ => 3,
    }
}
