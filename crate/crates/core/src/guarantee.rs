//! The two-phase sampling/validation loop with a PAC stopping guarantee.
//!
//! The loop is generic over any [`SynthesisEngine`] that can report the size
//! (or a sound upper bound on the size) of its consistent hypothesis space.
//! During the sampling phase examples are drawn `step_k` at a time until the
//! number seen exceeds a threshold derived from a monotone
//! [`StoppingFunction`]; the validation phase then draws
//! [`sample_complexity`] fresh examples for the size reached.

use std::fmt;
use std::io;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack added to logarithms on the side that increases sample counts.
const LN_SLACK: f64 = 1e-9;

/// Number of programs in a hypothesis space. Arbitrary precision; never
/// truncated.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HypothesisSize(BigUint);

impl HypothesisSize {
    pub fn zero() -> Self {
        HypothesisSize(BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    /// Natural logarithm, `-inf` for zero.
    pub fn ln(&self) -> f64 {
        ln_big(&self.0)
    }

    /// An upper bound on `ln(self)`, exceeding the true value by at most a
    /// few times 1e-9.
    pub fn ln_upper(&self) -> f64 {
        let l = self.ln();
        l + LN_SLACK + l.abs() * 1e-15
    }
}

fn ln_big(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("fits in f64").ln();
    }
    // n = top * 2^shift + rest with 0 <= rest < 2^shift, so the truncation
    // error is below ln(1 + 2^-63).
    let shift = bits - 64;
    let top = (n >> shift).to_u64().expect("64-bit prefix") as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

impl From<BigUint> for HypothesisSize {
    fn from(n: BigUint) -> Self {
        HypothesisSize(n)
    }
}

impl From<u64> for HypothesisSize {
    fn from(n: u64) -> Self {
        HypothesisSize(BigUint::from(n))
    }
}

impl From<u32> for HypothesisSize {
    fn from(n: u32) -> Self {
        HypothesisSize(BigUint::from(n))
    }
}

impl fmt::Display for HypothesisSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for HypothesisSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for HypothesisSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<BigUint>().map(HypothesisSize).map_err(serde::de::Error::custom)
    }
}

/// Error tolerance, failure probability and sampling step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeParams {
    pub epsilon: f64,
    pub delta: f64,
    pub step_k: usize,
}

impl GuaranteeParams {
    pub fn new(epsilon: f64, delta: f64, step_k: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParams(format!("epsilon must be in (0,1), got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta must be in (0,1), got {delta}")));
        }
        if step_k == 0 {
            return Err(Error::InvalidParams("step_k must be at least 1".into()));
        }
        Ok(GuaranteeParams { epsilon, delta, step_k })
    }

    /// Largest step for which the default stopping function stays within
    /// twice the best achievable sample count: `floor(ln(1/delta) / (2 epsilon))`.
    pub fn max_optimal_step(&self) -> usize {
        ((1.0 / (2.0 * self.epsilon)) * (1.0 / self.delta).ln()).floor() as usize
    }

    pub fn optimality_applies(&self) -> bool {
        self.step_k <= self.max_optimal_step()
    }

    pub fn with_delta(self, delta: f64) -> Self {
        GuaranteeParams { delta, ..self }
    }

    pub fn default_g(&self) -> DefaultG {
        DefaultG { epsilon: self.epsilon, delta: self.delta }
    }
}

/// Smallest integer `m` with `m > (ln size + ln(1/delta)) / epsilon`.
///
/// Logarithms are taken as certified upper bounds, so the result may exceed
/// the exact value by one when the exact bound lies within ~1e-9 of an
/// integer; it is never smaller.
pub fn sample_complexity(size: &HypothesisSize, epsilon: f64, delta: f64) -> Result<u64> {
    if size.is_zero() {
        return Err(Error::EmptyHypothesisSpace);
    }
    let ln_inv_delta = -delta.ln();
    let x = (size.ln_upper() + ln_inv_delta + LN_SLACK) / epsilon;
    Ok(x.floor() as u64 + 1)
}

/// `ceil(max(0, (ln size - ln(1/delta)) / epsilon))`.
pub fn default_g(size: &HypothesisSize, epsilon: f64, delta: f64) -> i64 {
    if size.is_zero() {
        return 0;
    }
    let x = (size.ln() + delta.ln()) / epsilon;
    // snap values within rounding noise of an integer before the ceiling
    (x - 1e-9).ceil().max(0.0) as i64
}

/// A monotone non-decreasing map from hypothesis-space size to a sampling
/// threshold.
pub trait StoppingFunction {
    fn threshold(&self, size: &HypothesisSize) -> i64;

    fn label(&self) -> String {
        "custom".into()
    }
}

impl<F: Fn(&HypothesisSize) -> i64> StoppingFunction for F {
    fn threshold(&self, size: &HypothesisSize) -> i64 {
        self(size)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DefaultG {
    pub epsilon: f64,
    pub delta: f64,
}

impl StoppingFunction for DefaultG {
    fn threshold(&self, size: &HypothesisSize) -> i64 {
        default_g(size, self.epsilon, self.delta)
    }

    fn label(&self) -> String {
        "default".into()
    }
}

/// `g(x) = c` for every size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantG(pub i64);

impl StoppingFunction for ConstantG {
    fn threshold(&self, _: &HypothesisSize) -> i64 {
        self.0
    }

    fn label(&self) -> String {
        format!("const({})", self.0)
    }
}

/// `g(x) = ceil(factor * default_g(x))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledG {
    pub factor: f64,
    pub base: DefaultG,
}

impl StoppingFunction for ScaledG {
    fn threshold(&self, size: &HypothesisSize) -> i64 {
        (self.factor * self.base.threshold(size) as f64).ceil() as i64
    }

    fn label(&self) -> String {
        format!("scaled({})", self.factor)
    }
}

/// Supplies one example per call.
pub trait ExampleSource {
    type Example;

    fn draw(&mut self) -> Result<Self::Example>;
}

/// A synthesizer whose consistent hypothesis space can be sized.
pub trait SynthesisEngine {
    type Example;
    type Program;

    /// Recomputes the consistent space for the complete example list.
    fn update_hypothesis(&mut self, examples: &[Self::Example]) -> Result<()>;

    /// Size (or a sound upper bound) of the current consistent space.
    fn compute_size(&self) -> HypothesisSize;

    /// Any program consistent with every example, or `None` if the space is
    /// empty.
    fn pick_program(&self) -> Option<Self::Program>;
}

impl<E: SynthesisEngine + ?Sized> SynthesisEngine for &mut E {
    type Example = E::Example;
    type Program = E::Program;

    fn update_hypothesis(&mut self, examples: &[Self::Example]) -> Result<()> {
        (**self).update_hypothesis(examples)
    }

    fn compute_size(&self) -> HypothesisSize {
        (**self).compute_size()
    }

    fn pick_program(&self) -> Option<Self::Program> {
        (**self).pick_program()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sampling,
    Validation,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Sampling => "sampling",
            Phase::Validation => "validation",
        })
    }
}

/// One loop iteration. Iteration 0 records the initial size and threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub samples_seen: usize,
    pub tier: usize,
    pub size_upper: HypothesisSize,
    pub threshold: i64,
    pub phase: Phase,
}

pub const TRACE_HEADER: [&str; 6] = ["iteration", "samples_seen", "tier", "size_upper", "threshold", "phase"];

pub fn write_trace_csv<W: io::Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in rows {
        out.write_record([
            r.iteration.to_string(),
            r.samples_seen.to_string(),
            r.tier.to_string(),
            r.size_upper.to_string(),
            r.threshold.to_string(),
            r.phase.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOutcome<P> {
    pub result: Option<P>,
    pub total_samples: usize,
    /// Examples drawn in the validation phase (`m`).
    pub validation_samples: usize,
}

#[derive(Clone, Debug)]
pub struct GuaranteeRun<P, X> {
    pub outcome: SynthesisOutcome<P>,
    pub trace: Vec<TraceRow>,
    /// Every example the run consumed, in draw order.
    pub examples: Vec<X>,
}

fn draw_into<S: ExampleSource>(source: &mut S, n: usize, into: &mut Vec<S::Example>) -> Result<()> {
    into.reserve(n);
    for _ in 0..n {
        into.push(source.draw()?);
    }
    Ok(())
}

/// Runs the sampling and validation phases once.
///
/// Sampling: `n = g(|H|)`; while `s <= n`, draw `step_k` examples, update
/// the engine and set `n = min(n, s + g(|H_S'|))`. Validation: draw
/// `sample_complexity(|H_S'|)` more examples, update once more and return a
/// consistent program. An empty space at any point yields `None`.
pub fn run_synguar<S, E, G>(
    source: &mut S,
    engine: &mut E,
    params: &GuaranteeParams,
    g: &G,
    tier: usize,
) -> Result<GuaranteeRun<E::Program, E::Example>>
where
    S: ExampleSource<Example = E::Example>,
    E: SynthesisEngine,
    G: StoppingFunction + ?Sized,
{
    let mut examples: Vec<E::Example> = Vec::new();
    let mut trace = Vec::new();
    let none = |examples: Vec<E::Example>, trace, validation| GuaranteeRun {
        outcome: SynthesisOutcome { result: None, total_samples: examples.len(), validation_samples: validation },
        trace,
        examples,
    };

    engine.update_hypothesis(&examples)?;
    let mut size = engine.compute_size();
    let mut s = 0usize;
    let mut n = g.threshold(&size);
    let row = |iteration, samples_seen, size: &HypothesisSize, threshold, phase| TraceRow {
        iteration,
        samples_seen,
        tier,
        size_upper: size.clone(),
        threshold,
        phase,
    };
    trace.push(row(0, 0, &size, n, Phase::Sampling));
    if size.is_zero() {
        return Ok(none(examples, trace, 0));
    }

    let mut iteration = 0;
    while (s as i64) <= n {
        iteration += 1;
        draw_into(source, params.step_k, &mut examples)?;
        engine.update_hypothesis(&examples)?;
        size = engine.compute_size();
        s += params.step_k;
        if size.is_zero() {
            trace.push(row(iteration, s, &size, n, Phase::Sampling));
            return Ok(none(examples, trace, 0));
        }
        n = n.min(s as i64 + g.threshold(&size));
        trace.push(row(iteration, s, &size, n, Phase::Sampling));
    }

    let m = sample_complexity(&size, params.epsilon, params.delta)? as usize;
    draw_into(source, m, &mut examples)?;
    engine.update_hypothesis(&examples)?;
    let final_size = engine.compute_size();
    trace.push(row(iteration + 1, examples.len(), &final_size, n, Phase::Validation));
    if final_size.is_zero() {
        return Ok(none(examples, trace, m));
    }
    let result = engine.pick_program();
    debug_assert!(result.is_some(), "non-empty space must yield a program");
    Ok(GuaranteeRun {
        outcome: SynthesisOutcome { result, total_samples: examples.len(), validation_samples: m },
        trace,
        examples,
    })
}

/// Replays a recorded stream before drawing from the wrapped source. Every
/// example ever drawn stays in the buffer so later consumers can rewind.
pub struct RecordedSource<'a, S: ExampleSource> {
    inner: &'a mut S,
    buffer: Vec<S::Example>,
    pos: usize,
}

impl<'a, S: ExampleSource> RecordedSource<'a, S>
where
    S::Example: Clone,
{
    pub fn new(inner: &'a mut S) -> Self {
        RecordedSource { inner, buffer: Vec::new(), pos: 0 }
    }

    pub fn rewind(&mut self) {
        self.pos = 0;
    }

    pub fn recorded(&self) -> &[S::Example] {
        &self.buffer
    }

    pub fn into_recorded(self) -> Vec<S::Example> {
        self.buffer
    }
}

impl<S: ExampleSource> ExampleSource for RecordedSource<'_, S>
where
    S::Example: Clone,
{
    type Example = S::Example;

    fn draw(&mut self) -> Result<S::Example> {
        if self.pos == self.buffer.len() {
            let x = self.inner.draw()?;
            self.buffer.push(x);
        }
        self.pos += 1;
        Ok(self.buffer[self.pos - 1].clone())
    }
}

/// A finite source over a fixed sequence; running past its end is an
/// "oracle exhausted" failure.
pub struct ReplaySource<'a, X> {
    items: &'a [X],
    pos: usize,
}

impl<'a, X> ReplaySource<'a, X> {
    pub fn new(items: &'a [X]) -> Self {
        ReplaySource { items, pos: 0 }
    }
}

impl<X: Clone> ExampleSource for ReplaySource<'_, X> {
    type Example = X;

    fn draw(&mut self) -> Result<X> {
        let x = self.items.get(self.pos).cloned().ok_or(Error::OracleExhausted { drawn: self.pos })?;
        self.pos += 1;
        Ok(x)
    }
}

#[derive(Clone, Debug)]
pub struct TieredRun<P, X> {
    pub outcome: SynthesisOutcome<P>,
    /// Index of the tier that produced the result.
    pub tier: Option<usize>,
    /// Concatenated traces of every tier that ran.
    pub trace: Vec<TraceRow>,
    /// The shared example stream, in draw order.
    pub examples: Vec<X>,
    /// Examples consumed by each tier that ran.
    pub tier_samples: Vec<usize>,
}

/// Runs the loop over increasingly expressive hypothesis spaces, each with
/// failure probability `delta / engines.len()`, returning the first
/// non-empty result.
///
/// All tiers read the same example stream from its start: examples drawn by
/// a failed tier are replayed into the next one before new draws happen.
pub fn run_tiered<S, E>(
    source: &mut S,
    engines: &mut [E],
    params: &GuaranteeParams,
) -> Result<TieredRun<E::Program, E::Example>>
where
    S: ExampleSource<Example = E::Example>,
    E: SynthesisEngine,
    E::Example: Clone,
{
    if engines.is_empty() {
        return Err(Error::InvalidParams("at least one tier is required".into()));
    }
    let tier_params = params.with_delta(params.delta / engines.len() as f64);
    let g = tier_params.default_g();
    let mut stream = RecordedSource::new(source);
    let mut trace = Vec::new();
    let mut tier_samples = Vec::new();
    for (tier, engine) in engines.iter_mut().enumerate() {
        stream.rewind();
        let run = run_synguar(&mut stream, engine, &tier_params, &g, tier)?;
        trace.extend(run.trace);
        tier_samples.push(run.outcome.total_samples);
        if run.outcome.result.is_some() {
            let examples = stream.into_recorded();
            return Ok(TieredRun {
                outcome: SynthesisOutcome { total_samples: examples.len(), ..run.outcome },
                tier: Some(tier),
                trace,
                examples,
                tier_samples,
            });
        }
    }
    let examples = stream.into_recorded();
    Ok(TieredRun {
        outcome: SynthesisOutcome { result: None, total_samples: examples.len(), validation_samples: 0 },
        tier: None,
        trace,
        examples,
        tier_samples,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayTotal {
    pub label: String,
    pub total_samples: usize,
    pub found: bool,
}

/// Replays one recorded sequence under each stopping function and reports
/// the number of examples each run consumed.
pub fn replay_with_g<E>(
    sequence: &[E::Example],
    engine: &mut E,
    params: &GuaranteeParams,
    family: &[&dyn StoppingFunction],
) -> Result<Vec<ReplayTotal>>
where
    E: SynthesisEngine,
    E::Example: Clone,
{
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    family
        .iter()
        .map(|g| {
            let mut src = ReplaySource::new(sequence);
            let run = run_synguar(&mut src, engine, params, *g, 0)?;
            Ok(ReplayTotal {
                label: g.label(),
                total_samples: run.outcome.total_samples,
                found: run.outcome.result.is_some(),
            })
        })
        .collect()
}

/// The comparison family used for the factor-two check: constants spanning
/// `0..=10 * g(|H|)` plus scaled copies of the default function.
pub fn comparison_family(params: &GuaranteeParams, initial: &HypothesisSize) -> Vec<Box<dyn StoppingFunction>> {
    let base = params.default_g();
    let top = base.threshold(initial).max(1);
    let mut fam: Vec<Box<dyn StoppingFunction>> = Vec::new();
    for c in [0, top / 10, top / 4, top / 2, top, 2 * top, 5 * top, 10 * top] {
        fam.push(Box::new(ConstantG(c)));
    }
    for f in [0.25, 0.5, 1.5, 2.0, 4.0] {
        fam.push(Box::new(ScaledG { factor: f, base }));
    }
    fam
}
